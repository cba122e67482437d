"""Mixed graphs: directed edges for structural effects, bi-directed edges for
correlated errors."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike
from typing import Iterable, NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Invalid mixed graph (self-loop, bad index, duplicate edge, bad JSON)."""


class NodeClassification(NamedTuple):
    one_shot: tuple[int, ...]
    iterative: tuple[int, ...]


@dataclass(frozen=True)
class MixedGraph:
    """Mixed graph on nodes ``0..n-1``.

    ``directed`` holds ordered pairs ``(tail, head)``; ``bidirected`` holds
    unordered pairs stored as ``(min, max)``.  Instances are immutable; use
    :meth:`from_edges` to build one from edge lists with duplicate checking.
    """

    n: int
    directed: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    bidirected: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise GraphError("node count must be non-negative")
        for t, h in self.directed:
            self._check_node(t)
            self._check_node(h)
            if t == h:
                raise GraphError(f"self-loop {t}->{t}")
        for a, b in self.bidirected:
            self._check_node(a)
            self._check_node(b)
            if a == b:
                raise GraphError(f"bi-directed self-loop {a}<->{a}")
            if a > b:
                raise GraphError("bi-directed pairs must be stored as (min, max)")

    def _check_node(self, i):
        if not isinstance(i, (int, np.integer)) or not 0 <= i < self.n:
            raise GraphError(f"node index {i!r} out of range for n={self.n}")

    @classmethod
    def from_edges(
        cls,
        n: int,
        directed: Iterable[Iterable[int]] = (),
        bidirected: Iterable[Iterable[int]] = (),
    ) -> "MixedGraph":
        """Build a graph, rejecting duplicate edges instead of merging them."""
        d_list = [tuple(int(v) for v in e) for e in directed]
        b_list = [tuple(sorted(int(v) for v in e)) for e in bidirected]
        for e in d_list + b_list:
            if len(e) != 2:
                raise GraphError(f"edge {e!r} must have two endpoints")
        if len(set(d_list)) != len(d_list):
            raise GraphError("duplicate directed edge")
        if len(set(b_list)) != len(b_list):
            raise GraphError("duplicate bi-directed edge")
        return cls(int(n), frozenset(d_list), frozenset(b_list))

    # -- local structure ---------------------------------------------------

    def validate_node(self, i: int) -> int:
        self._check_node(i)
        return int(i)

    @cached_property
    def _parent_lists(self) -> tuple[tuple[int, ...], ...]:
        pa = [[] for _ in range(self.n)]
        for t, h in self.directed:
            pa[h].append(t)
        return tuple(tuple(sorted(p)) for p in pa)

    @cached_property
    def _sibling_lists(self) -> tuple[tuple[int, ...], ...]:
        sib = [[] for _ in range(self.n)]
        for a, b in self.bidirected:
            sib[a].append(b)
            sib[b].append(a)
        return tuple(tuple(sorted(s)) for s in sib)

    def parents(self, i: int) -> tuple[int, ...]:
        """Sorted parents of ``i``."""
        return self._parent_lists[self.validate_node(i)]

    def siblings(self, i: int) -> tuple[int, ...]:
        """Sorted siblings of ``i``."""
        return self._sibling_lists[self.validate_node(i)]

    def children(self, i: int) -> tuple[int, ...]:
        i = self.validate_node(i)
        return tuple(sorted(h for t, h in self.directed if t == i))

    @property
    def n_directed(self) -> int:
        return len(self.directed)

    @property
    def n_bidirected(self) -> int:
        return len(self.bidirected)

    @property
    def n_free_params(self) -> int:
        return self.n_directed + self.n + self.n_bidirected

    def directed_adjacency(self) -> np.ndarray:
        """Boolean matrix ``A`` with ``A[t, h]`` for every edge ``t -> h``."""
        A = np.zeros((self.n, self.n), dtype=bool)
        for t, h in self.directed:
            A[t, h] = True
        return A

    def bidirected_adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        for a, b in self.bidirected:
            A[a, b] = A[b, a] = True
        return A

    # -- cycles ------------------------------------------------------------

    @cached_property
    def _scc(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        _, labels = connected_components(
            csr_matrix(self.directed_adjacency().astype(np.int8)),
            directed=True,
            connection="strong",
        )
        sizes = np.bincount(labels)
        return labels, sizes

    def nodes_on_cycles(self) -> frozenset[int]:
        """Nodes lying on at least one directed cycle."""
        labels, sizes = self._scc
        return frozenset(int(v) for v in np.flatnonzero(sizes[labels] >= 2))

    def edge_on_cycle(self, tail: int, head: int) -> bool:
        """Whether the directed edge ``tail -> head`` lies on a directed cycle."""
        if (tail, head) not in self.directed:
            raise GraphError(f"{tail}->{head} is not an edge")
        labels, _ = self._scc
        return bool(labels[tail] == labels[head])

    def is_acyclic(self) -> bool:
        return not self.nodes_on_cycles()

    def topological_order(self) -> list[int] | None:
        """Kahn ordering of the directed part, or ``None`` if there is a cycle."""
        indeg = [len(p) for p in self._parent_lists]
        children = [[] for _ in range(self.n)]
        for t, h in self.directed:
            children[t].append(h)
        ready = [v for v in range(self.n) if indeg[v] == 0]
        order = []
        while ready:
            v = ready.pop()
            order.append(v)
            for w in children[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        return order if len(order) == self.n else None

    def is_simple(self) -> bool:
        """At most one edge per unordered node pair, counting all edge kinds."""
        pairs = [tuple(sorted(e)) for e in self.directed] + list(self.bidirected)
        return len(pairs) == len(set(pairs))

    def is_bow_free(self) -> bool:
        return not any(tuple(sorted(e)) in self.bidirected for e in self.directed)

    def classify_nodes(self) -> NodeClassification:
        """Split nodes into those whose update is needed once and the rest.

        A node is one-shot when it has no siblings and none of its incoming
        edges lies on a directed cycle.
        """
        labels, _ = self._scc
        one_shot, iterative = [], []
        for i in range(self.n):
            cyclic_in = any(labels[p] == labels[i] for p in self._parent_lists[i])
            if self._sibling_lists[i] or cyclic_in:
                iterative.append(i)
            else:
                one_shot.append(i)
        return NodeClassification(tuple(one_shot), tuple(iterative))

    def cyclic_parent_mask(self, i: int) -> np.ndarray:
        labels, _ = self._scc
        return np.array([labels[p] == labels[i] for p in self.parents(i)], dtype=bool)

    # -- misc --------------------------------------------------------------

    def is_subgraph_of(self, other: "MixedGraph") -> bool:
        return (
            self.n == other.n
            and self.directed <= other.directed
            and self.bidirected <= other.bidirected
        )

    def with_edges(self, directed=(), bidirected=()) -> "MixedGraph":
        return MixedGraph.from_edges(
            self.n,
            sorted(self.directed) + [tuple(e) for e in directed],
            sorted(self.bidirected) + [tuple(e) for e in bidirected],
        )

    def relabel(self, perm) -> "MixedGraph":
        """Graph with node ``v`` renamed to ``perm[v]``."""
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(self.n)):
            raise GraphError("relabeling must be a permutation")
        return MixedGraph.from_edges(
            self.n,
            [(perm[t], perm[h]) for t, h in self.directed],
            [(perm[a], perm[b]) for a, b in self.bidirected],
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "directed": [list(e) for e in sorted(self.directed)],
            "bidirected": [list(e) for e in sorted(self.bidirected)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MixedGraph":
        if not isinstance(doc, dict) or "n" not in doc:
            raise GraphError("graph document needs an 'n' field")
        try:
            return cls.from_edges(doc["n"], doc.get("directed", []), doc.get("bidirected", []))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(f"malformed graph document: {exc}") from exc

    def __repr__(self) -> str:
        d = ", ".join(f"{t}->{h}" for t, h in sorted(self.directed))
        b = ", ".join(f"{a}<->{c}" for a, c in sorted(self.bidirected))
        return f"MixedGraph(n={self.n}, [{d}], [{b}])"


def load_graph(path: str | PathLike) -> MixedGraph:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"invalid JSON in {path}: {exc}") from exc
    return MixedGraph.from_dict(doc)


def save_graph(g: MixedGraph, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump({"schema": 1, **g.to_dict()}, fh, indent=2)

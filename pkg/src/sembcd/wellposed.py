"""Graph-level check that every block update is generically unique and feasible.

Node ``i`` passes when the siblings of ``i`` can be reached from as many
distinct start nodes outside ``pa(i) | {i}`` by half-collider paths (a
bi-directed path, optionally preceded by one directed edge) whose
bi-directed parts are pairwise vertex-disjoint and avoid ``i``.  The check
reduces to a unit-capacity maximum flow.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .graph import MixedGraph

BRUTE_FORCE_MAX_NODES = 8


class NonIdentifiabilityWarning(UserWarning):
    """Emitted when some node fails the half-collider condition."""


@dataclass(frozen=True)
class FlowNetwork:
    """Directed network with unit arc capacities and per-node capacities.

    Node labels are tuples: ``("q",)`` and ``("t",)`` for source and sink,
    ``("b", j)`` for the bi-directed role of graph node ``j``, ``("d", j)``
    for its role as the tail of a leading directed edge and ``("q", j)``
    for the bottleneck limiting ``j`` to one start.
    """

    node: int
    nodes: tuple[tuple, ...]
    arcs: frozenset[tuple[tuple, tuple]]
    node_caps: dict = field(hash=False)
    component: frozenset[int] = frozenset()

    SOURCE = ("q",)
    SINK = ("t",)


def _bidirected_component(g: MixedGraph, i: int) -> set[int]:
    seen = {i}
    stack = [i]
    while stack:
        v = stack.pop()
        for w in g.siblings(v):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    seen.discard(i)
    return seen


def build_flow_network(g: MixedGraph, i: int) -> FlowNetwork:
    """Flow network whose maximum flow equals ``|sib(i)|`` iff node ``i`` passes."""
    i = g.validate_node(i)
    C = _bidirected_component(g, i)
    pa_i = set(g.parents(i))
    pa_C = set()
    for m in C:
        pa_C.update(g.parents(m))
    q, t = FlowNetwork.SOURCE, FlowNetwork.SINK
    nodes = [q, t]
    arcs = set()

    for j in sorted(C):
        nodes.append(("b", j))
    for a, b in g.bidirected:
        if a in C and b in C:
            arcs.add((("b", a), ("b", b)))
            arcs.add((("b", b), ("b", a)))
    for j in sorted(C - pa_i):
        if j in pa_C:
            nodes.append(("q", j))
            arcs.add((q, ("q", j)))
            arcs.add((("q", j), ("b", j)))
        else:
            arcs.add((q, ("b", j)))
    for j in sorted(pa_C - pa_i - {i}):
        nodes.append(("d", j))
        for m in C:
            if j in g.parents(m):
                arcs.add((("d", j), ("b", m)))
        arcs.add((("q", j) if j in C else q, ("d", j)))
    for s in g.siblings(i):
        if s in C:
            arcs.add((("b", s), t))

    n_sib = len(g.siblings(i))
    caps = {v: 1 for v in nodes}
    caps[q] = caps[t] = n_sib
    return FlowNetwork(i, tuple(nodes), frozenset(arcs), caps, frozenset(C))


def max_flow(net: FlowNetwork) -> int:
    """Maximum source-to-sink flow honouring node capacities.

    Every node other than source and sink is split into an in-copy and an
    out-copy joined by an arc carrying the node capacity.
    """
    q, t = FlowNetwork.SOURCE, FlowNetwork.SINK
    # source and sink keep one slot, every other node gets an in and an out slot
    pos_in, pos_out = {}, {}
    k = 0
    for v in net.nodes:
        if v in (q, t):
            pos_in[v] = pos_out[v] = k
            k += 1
        else:
            pos_in[v], pos_out[v] = k, k + 1
            k += 2
    cap = np.zeros((k, k), dtype=np.int64)
    for v in net.nodes:
        if v not in (q, t):
            cap[pos_in[v], pos_out[v]] = net.node_caps[v]
    for u, v in net.arcs:
        cap[pos_out[u], pos_in[v]] += 1
    if net.node_caps[q] == 0:
        return 0
    return int(K.edmonds_karp(cap, pos_out[q], pos_in[t]))


def half_collider_condition(g: MixedGraph, i: int, shortcut: bool = True) -> bool:
    """Whether node ``i`` admits the required system of half-collider paths.

    With ``shortcut`` the flow computation is skipped when ``i`` has no
    parent that is also a sibling, in which case the siblings themselves
    serve as start nodes.
    """
    return _node_verdict(g, i, shortcut).ok


@dataclass(frozen=True)
class NodeVerdict:
    ok: bool
    flow: int
    required: int
    trivial: bool = False


def _node_verdict(g: MixedGraph, i: int, shortcut: bool = True) -> NodeVerdict:
    i = g.validate_node(i)
    sib = g.siblings(i)
    required = len(sib)
    if shortcut and not set(sib) & set(g.parents(i)):
        return NodeVerdict(True, required, required, trivial=True)
    flow = max_flow(build_flow_network(g, i)) if required else 0
    return NodeVerdict(flow == required, flow, required)


@dataclass(frozen=True)
class WellPosedReport:
    per_node: dict[int, NodeVerdict]
    overall: bool

    @property
    def failing_nodes(self) -> list[int]:
        return [v for v, r in sorted(self.per_node.items()) if not r.ok]

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "failing_nodes": self.failing_nodes,
            "per_node": {
                str(v): {"ok": r.ok, "flow": r.flow, "required": r.required}
                for v, r in sorted(self.per_node.items())
            },
        }


def is_well_posed(g: MixedGraph, warn: bool = True) -> WellPosedReport:
    """Check every node; warn that the model is not identifiable if any fails."""
    per_node = {v: _node_verdict(g, v) for v in range(g.n)}
    report = WellPosedReport(per_node, all(r.ok for r in per_node.values()))
    if warn and not report.overall:
        warnings.warn(
            f"half-collider condition fails at nodes {report.failing_nodes}: block updates "
            "cannot be unique there and the model parameters are not identifiable",
            NonIdentifiabilityWarning,
            stacklevel=2,
        )
    return report


# ---------------------------------------------------------------------------
# exhaustive reference
# ---------------------------------------------------------------------------

def _bidirected_paths_to(g: MixedGraph, s: int, banned: int):
    """Node sets of simple bi-directed paths ending at ``s`` avoiding ``banned``.

    Yields ``(first_node, frozenset_of_nodes)``.
    """
    on = {s}

    def grow(v):
        yield v, frozenset(on)
        for w in g.siblings(v):
            if w != banned and w not in on:
                on.add(w)
                yield from grow(w)
                on.discard(w)

    yield from grow(s)


def brute_force_condition(g: MixedGraph, i: int) -> bool:
    """Decide the half-collider condition at ``i`` by exhaustive search."""
    if g.n > BRUTE_FORCE_MAX_NODES:
        raise ValueError(f"exhaustive search limited to {BRUTE_FORCE_MAX_NODES} nodes")
    i = g.validate_node(i)
    sib = g.siblings(i)
    if not sib:
        return True
    forbidden = set(g.parents(i)) | {i}
    children = {v: set(g.children(v)) for v in range(g.n)}
    options = []
    for s in sib:
        opts = set()
        for first, portion in _bidirected_paths_to(g, s, i):
            if first not in forbidden:
                opts.add((first, portion))
            for start in range(g.n):
                if start not in forbidden and start not in portion and first in children[start]:
                    opts.add((start, portion))
        if not opts:
            return False
        options.append(sorted(opts, key=lambda o: (len(o[1]), o[0], sorted(o[1]))))

    def assign(k, starts, used):
        if k == len(options):
            return True
        for start, portion in options[k]:
            if start in starts or portion & used:
                continue
            if assign(k + 1, starts | {start}, used | portion):
                return True
        return False

    return assign(0, frozenset(), frozenset())


def all_small_graphs(n: int, max_edges: int):
    """Every mixed graph on ``n`` nodes with at most ``max_edges`` edges."""
    dir_slots = [(a, b) for a in range(n) for b in range(n) if a != b]
    bi_slots = list(itertools.combinations(range(n), 2))
    slots = [("d", e) for e in dir_slots] + [("b", e) for e in bi_slots]
    for k in range(max_edges + 1):
        for combo in itertools.combinations(slots, k):
            yield MixedGraph.from_edges(
                n, [e for kind, e in combo if kind == "d"], [e for kind, e in combo if kind == "b"]
            )

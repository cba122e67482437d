"""Determinant of ``I - B`` and its expansion along one row."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import row_det_coeffs
from .graph import MixedGraph

CYCLE_ORACLE_MAX_NODES = 10


class PatternError(ValueError):
    """A coefficient matrix has a nonzero entry where the graph has no edge."""


@dataclass(frozen=True)
class DetCoeffs:
    """``det(I - B) = c0 + B[i, pa] @ c_pa`` as an affine function of row ``i``.

    Attributes
    ----------
    node : int
    parents : tuple of int
        The order of the entries of ``c_pa``.
    c0 : float
    c_pa : ndarray
    """

    node: int
    parents: tuple[int, ...]
    c0: float
    c_pa: np.ndarray

    def evaluate(self, row: np.ndarray) -> float:
        """Determinant after replacing the parent entries of row ``i`` by ``row``."""
        return float(self.c0 + np.dot(np.asarray(row, dtype=float), self.c_pa))

    @property
    def is_affine_constant(self) -> bool:
        return not np.any(self.c_pa)


def check_b_pattern(g: MixedGraph, B: np.ndarray) -> None:
    B = np.asarray(B)
    if B.shape != (g.n, g.n):
        raise PatternError(f"B has shape {B.shape}, expected {(g.n, g.n)}")
    allowed = g.directed_adjacency().T
    bad = np.argwhere((B != 0) & ~allowed)
    if bad.size:
        h, t = bad[0]
        raise PatternError(f"B[{h}, {t}] is nonzero but {t}->{h} is not an edge")


def det_coeffs(g: MixedGraph, B: np.ndarray, i: int, structural_zeros: bool = True) -> DetCoeffs:
    """Laplace coefficients of ``det(I - B)`` along row ``i``.

    Parameters
    ----------
    g : MixedGraph
    B : ndarray
        Must respect the sparsity of ``g``.
    i : int
    structural_zeros : bool
        Skip the cofactor for parents whose edge into ``i`` lies on no
        directed cycle; those cofactors vanish identically.  Pass ``False``
        to compute every cofactor numerically.
    """
    i = g.validate_node(i)
    B = np.asarray(B, dtype=float)
    check_b_pattern(g, B)
    pa = np.array(g.parents(i), dtype=np.int64)
    mask = g.cyclic_parent_mask(i) if structural_zeros else np.ones(pa.size, dtype=bool)
    c0, cpa = row_det_coeffs(np.ascontiguousarray(B), i, pa, mask)
    return DetCoeffs(i, g.parents(i), float(c0), cpa)


def det_i_minus_b(B: np.ndarray) -> float:
    """``det(I - B)`` by LU factorization; exactly 0.0 when singular."""
    B = np.asarray(B, dtype=float)
    return float(np.linalg.det(np.eye(B.shape[0]) - B))


def _cycles_through(start, allowed, children):
    """Simple directed cycles through ``start`` using only ``allowed`` nodes."""
    path = [start]
    on_path = {start}

    def extend(v):
        for w in children[v]:
            if w == start:
                yield list(path)
            elif w in allowed and w not in on_path:
                path.append(w)
                on_path.add(w)
                yield from extend(w)
                path.pop()
                on_path.discard(w)

    yield from extend(start)


def det_via_cycles(g: MixedGraph, B: np.ndarray) -> float:
    """``det(I - B)`` as a signed sum over families of disjoint directed cycles.

    Each family contributes ``(-1)**len(family)`` times the product of its
    edge coefficients.  Exponential cost; intended as a reference for small
    graphs only.
    """
    if g.n > CYCLE_ORACLE_MAX_NODES:
        raise ValueError(f"cycle enumeration limited to {CYCLE_ORACLE_MAX_NODES} nodes")
    B = np.asarray(B, dtype=float)
    check_b_pattern(g, B)
    children = [[] for _ in range(g.n)]
    for t, h in sorted(g.directed):
        children[t].append(h)

    def cover(uncovered: frozenset) -> float:
        if not uncovered:
            return 1.0
        v = min(uncovered)
        rest = uncovered - {v}
        total = cover(rest)  # v left fixed
        for cyc in _cycles_through(v, rest, children):
            weight = 1.0
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                weight *= B[b, a]
            total -= weight * cover(rest - set(cyc))
        return total

    return cover(frozenset(range(g.n)))

"""Block-coordinate descent for maximum likelihood in mixed graph models.

Each block update fixes everything except the parameters on edges with an
arrowhead at one node ``i`` (row ``i`` of ``B``, row/column ``i`` of
``Omega``) and maximizes the likelihood over that block in closed form.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.linalg import cho_solve

from . import _kernels as K
from .determinant import det_coeffs
from .graph import MixedGraph
from .likelihood import Dataset, Params, ParamsError, score, score_from_arrays

RIDGE = 1e-8
DOMINANCE = 0.9


class FitStatus(str, enum.Enum):
    CONVERGED = "converged"
    MAX_SWEEPS = "max_sweeps"
    UPDATE_NO_MINIMUM = "update_no_minimum"
    UPDATE_NON_UNIQUE = "update_non_unique"
    A1_VIOLATION = "a1_violation"
    NUMERICAL_FAILURE = "numerical_failure"

    @property
    def ok(self) -> bool:
        return self in (FitStatus.CONVERGED, FitStatus.MAX_SWEEPS)


_KERNEL_STATUS = {
    K.NO_MINIMUM: FitStatus.UPDATE_NO_MINIMUM,
    K.NON_UNIQUE: FitStatus.UPDATE_NON_UNIQUE,
    K.RANK_DEFICIENT: FitStatus.A1_VIOLATION,
    K.ZERO_RESIDUAL: FitStatus.A1_VIOLATION,
    K.OMEGA_NOT_PD: FitStatus.NUMERICAL_FAILURE,
}

_METHODS = {"auto": K.AUTO, "lsq": K.FORCE_LSQ, "ratio": K.FORCE_RATIO}


class BlockUpdateError(RuntimeError):
    """A block update has no unique feasible solution."""

    def __init__(self, status: FitStatus, node: int):
        super().__init__(f"block update at node {node} failed: {status.value}")
        self.status = status
        self.node = node


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit`.

    Parameters
    ----------
    tol_loglik, tol_param : float
        A sweep is small once it changes the log-likelihood by less than
        ``tol_loglik`` and no free parameter by more than ``tol_param``.
    tol_score : float
        After a small sweep the fit counts as converged only if the largest
        likelihood-equation residual is below ``tol_score``; otherwise
        sweeping continues.  Step sizes alone can be tiny far from a
        stationary point when progress is slow.
    max_sweeps : int
    init : {"least_squares", "random"} or Params
        Starting point.  ``"random"`` draws from ``seed``.
    seed : int, optional
    check_conditions : bool
        Run the graph-level well-posedness check first and warn on failure.
    order : sequence of int, optional
        Visiting order for the nodes; defaults to ascending labels.
    debug : bool
        Evaluate the log-likelihood after every block update and record it.
    """

    tol_loglik: float = 1e-8
    tol_param: float = 1e-6
    tol_score: float = 1e-6
    max_sweeps: int = 5000
    init: Union[str, Params] = "least_squares"
    seed: int | None = None
    check_conditions: bool = False
    order: Sequence[int] | None = None
    debug: bool = False

    def __post_init__(self):
        if not (self.tol_loglik > 0 and self.tol_param > 0 and self.tol_score > 0):
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if isinstance(self.init, str) and self.init not in ("least_squares", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class UpdateRecord:
    sweep: int
    node: int
    loglik_change: float
    omega_pd: bool


@dataclass(eq=False)
class FitResult:
    params: Params
    loglik_trace: np.ndarray
    sweeps_used: int
    status: FitStatus
    score_norm: float
    init_loglik: float = float("nan")
    failed_node: int | None = None
    elapsed_s: float = 0.0
    ridge_init: bool = False
    update_log: list[UpdateRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is FitStatus.CONVERGED

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1]) if len(self.loglik_trace) else self.init_loglik

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "failed_node": self.failed_node,
            "sweeps_used": self.sweeps_used,
            "loglik": self.loglik,
            "init_loglik": self.init_loglik,
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "score_norm": self.score_norm,
            "elapsed_s": self.elapsed_s,
            "ridge_init": self.ridge_init,
            **self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FitResult":
        return cls(
            params=Params.from_dict(doc),
            loglik_trace=np.array(doc["loglik_trace"], dtype=float),
            sweeps_used=int(doc["sweeps_used"]),
            status=FitStatus(doc["status"]),
            score_norm=float(doc["score_norm"]),
            init_loglik=float(doc["init_loglik"]),
            failed_node=doc["failed_node"],
            elapsed_s=float(doc["elapsed_s"]),
            ridge_init=bool(doc["ridge_init"]),
        )


# ---------------------------------------------------------------------------
# starting values
# ---------------------------------------------------------------------------

def _ols_rows(g: MixedGraph, d: Dataset) -> tuple[np.ndarray, bool]:
    B = np.zeros((g.n, g.n))
    ridge_used = False
    for i in range(g.n):
        pa = list(g.parents(i))
        if not pa:
            continue
        X = d.Y[pa]
        G = X @ X.T
        sv = np.linalg.svd(G, compute_uv=False)
        if sv[-1] <= K.RANK_RTOL * sv[0]:
            G = G + RIDGE * np.eye(len(pa))
            ridge_used = True
        B[i, pa] = np.linalg.solve(G, X @ d.Y[i])
    return B, ridge_used


def _dominant_omega(g: MixedGraph, R: np.ndarray) -> np.ndarray:
    """Keep diagonal and sibling entries of ``R``, then shrink to diagonal dominance.

    Each row's off-diagonal mass is brought to ``0.9`` times its diagonal.
    A bi-directed entry shared by two rows takes the smaller of the two row
    factors, so every row ends at or below the target and rows whose factor
    is the binding one hit it exactly.
    """
    n = g.n
    R = (R + R.T) / 2
    Om = np.diag(np.diag(R)).astype(float)
    mask = g.bidirected_adjacency()
    off = np.where(mask, R, 0.0)
    mass = np.abs(off).sum(axis=1)
    factor = np.full(n, np.inf)
    nz = mass > 0
    factor[nz] = DOMINANCE * np.diag(R)[nz] / mass[nz]
    pair_factor = np.minimum.outer(factor, factor)
    # both rows empty: the entry is exactly zero and stays so
    pair_factor[~np.isfinite(pair_factor)] = 0.0
    Om[mask] += off[mask] * pair_factor[mask]
    return Om


def init_params(g: MixedGraph, d: Dataset) -> Params:
    """Least-squares start with a diagonally dominant error covariance."""
    return _init_least_squares(g, d)[0]


def _init_least_squares(g, d):
    B, ridge = _ols_rows(g, d)
    A = np.eye(g.n) - B
    R = A @ d.S @ A.T
    return Params(B, _dominant_omega(g, R)), ridge


def random_init(g: MixedGraph, d: Dataset, rng: np.random.Generator) -> Params:
    """Random start: small structural coefficients, jittered covariance."""
    mask = g.directed_adjacency().T
    for _ in range(1000):
        B = np.where(mask, rng.normal(0.0, 0.1, size=(g.n, g.n)), 0.0)
        if abs(np.linalg.det(np.eye(g.n) - B)) > 1e-6:
            break
    else:  # pragma: no cover - probability ~0
        raise RuntimeError("could not draw an invertible I - B")
    A = np.eye(g.n) - B
    Om = _dominant_omega(g, A @ d.S @ A.T)
    shrink = rng.uniform(0.5, 1.0, size=(g.n, g.n))
    shrink = np.triu(shrink, 1) + np.triu(shrink, 1).T
    Om = np.where(np.eye(g.n, dtype=bool), Om * rng.uniform(1.0, 1.5, size=g.n), Om * shrink)
    return Params(B, Om)


# ---------------------------------------------------------------------------
# one block
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockContext:
    """Quantities held fixed while node ``i`` is updated.

    Attributes
    ----------
    eps_rest : ndarray
        Residuals ``(I - B)[-i] @ Y`` of all other nodes.
    Z_sib : ndarray
        Sibling rows of ``Omega[-i, -i]^{-1} @ eps_rest``.
    omega_cond : float
        Conditional variance of the error at ``i`` given the others.
    X, y, c0, c :
        The ratio subproblem: regressors ``(Z_sib; Y_pa)`` as columns, the
        response ``Y_i`` and the determinant coefficients padded with zeros
        for the sibling block.
    """

    node: int
    eps_rest: np.ndarray
    Z_sib: np.ndarray
    omega_cond: float
    X: np.ndarray
    y: np.ndarray
    c0: float
    c: np.ndarray


def block_context(g: MixedGraph, d: Dataset, p: Params, i: int) -> BlockContext:
    i = g.validate_node(i)
    rest = [j for j in range(g.n) if j != i]
    Om_rest = p.Omega[np.ix_(rest, rest)]
    try:
        L = np.linalg.cholesky(Om_rest)
    except np.linalg.LinAlgError as exc:
        raise ParamsError("Omega[-i,-i] is not positive definite") from exc
    eps = d.Y[rest] - p.B[rest] @ d.Y
    Z = cho_solve((L, True), eps)
    pos = {j: k for k, j in enumerate(rest)}
    sib, pa = g.siblings(i), g.parents(i)
    Z_sib = Z[[pos[s] for s in sib]] if sib else np.zeros((0, d.N))
    w = p.Omega[rest, i]
    omega_cond = float(p.Omega[i, i] - w @ cho_solve((L, True), w))
    X = np.vstack([Z_sib, d.Y[list(pa)]]).T if (sib or pa) else np.zeros((d.N, 0))
    dc = det_coeffs(g, p.B, i)
    c = np.concatenate([np.zeros(len(sib)), dc.c_pa])
    return BlockContext(i, eps, Z_sib, omega_cond, X, d.Y[i].copy(), dc.c0, c)


def _node_arrays(g: MixedGraph, i: int):
    return (
        np.array(g.parents(i), dtype=np.int64),
        g.cyclic_parent_mask(i),
        np.array(g.siblings(i), dtype=np.int64),
    )


def block_update(g: MixedGraph, d: Dataset, p: Params, i: int, method: str = "auto") -> Params:
    """Maximize the likelihood over the parameters with an arrowhead at ``i``.

    Parameters
    ----------
    method : {"auto", "lsq", "ratio"}
        ``"auto"`` uses plain least squares when the determinant does not
        depend on row ``i`` and the ratio solver otherwise.  The other two
        force one path; the ratio path with ``c = 0`` reduces to least
        squares.

    Raises
    ------
    BlockUpdateError
        Carrying the failure status and the node.
    """
    i = g.validate_node(i)
    B = np.array(p.B)
    Om = np.array(p.Omega)
    pa, cyc, sib = _node_arrays(g, i)
    status, _ = K.block_update_kernel(B, Om, np.ascontiguousarray(d.Y), i, pa, cyc, sib, _METHODS[method])
    if status != K.OK:
        raise BlockUpdateError(_KERNEL_STATUS[status], i)
    return Params(B, Om)


def _full_rank(M: np.ndarray) -> bool:
    if M.shape[0] == 0:
        return True
    sv = np.linalg.svd(M, compute_uv=False)
    return M.shape[0] <= M.shape[1] and sv[-1] > K.RANK_RTOL * sv[0]


def check_A1(g: MixedGraph, d: Dataset, p: Params, i: int) -> bool:
    """Whether ``(Z_sib; Y_pa; Y_i)`` has linearly independent rows."""
    ctx = block_context(g, d, p, i)
    return _full_rank(np.vstack([ctx.X.T, ctx.y[None, :]]))


def check_A2(g: MixedGraph, d: Dataset, p: Params, i: int) -> bool:
    """Whether the least-squares fit of ``Y_i`` on ``X_i`` avoids the pole.

    Requires ``X_i`` to have full column rank.
    """
    ctx = block_context(g, d, p, i)
    if ctx.X.shape[1] == 0:
        return ctx.c0 != 0.0
    if not _full_rank(ctx.X.T):
        raise ValueError(f"X has dependent columns at node {i}; the span condition is undefined")
    alpha_hat = np.linalg.lstsq(ctx.X, ctx.y, rcond=None)[0]
    den = ctx.c0 + ctx.c @ alpha_hat
    scale = abs(ctx.c0) + np.linalg.norm(ctx.c) * np.linalg.norm(alpha_hat) + 1.0
    return bool(abs(den) > K.DEGENERATE_RTOL * scale)


# ---------------------------------------------------------------------------
# the fitter
# ---------------------------------------------------------------------------

def _start(g, d, cfg):
    if isinstance(cfg.init, Params):
        cfg.init.validate(g)
        return cfg.init, False
    if cfg.init == "random":
        return random_init(g, d, np.random.default_rng(cfg.seed)), False
    return _init_least_squares(g, d)


def _free_mask(g: MixedGraph):
    return g.directed_adjacency().T, g.bidirected_adjacency() | np.eye(g.n, dtype=bool)


def _score_max(g, S, B, Om):
    try:
        return score_from_arrays(g, S, B, Om).max_abs()
    except np.linalg.LinAlgError:
        return np.inf


def fit(g: MixedGraph, d: Dataset, cfg: FitConfig | None = None) -> FitResult:
    """Run block-coordinate descent until convergence or failure.

    One-shot nodes (see :meth:`MixedGraph.classify_nodes`) are updated in
    the first sweep only, before the others.  A failing block update stops
    the fit; the returned parameters are the last feasible ones.
    """
    cfg = cfg or FitConfig()
    if d.n != g.n:
        raise ValueError("data and graph disagree on the number of nodes")
    if cfg.check_conditions:
        from .wellposed import is_well_posed

        is_well_posed(g, warn=True)
    t0 = time.perf_counter()
    p0, ridge = _start(g, d, cfg)
    B = np.array(p0.B)
    Om = np.array(p0.Omega)
    Y = np.ascontiguousarray(d.Y)
    S = np.ascontiguousarray(d.S)

    one_shot, iterative = g.classify_nodes()
    if cfg.order is not None:
        order = [int(v) for v in cfg.order]
        if sorted(order) != list(range(g.n)):
            raise ValueError("order must be a permutation of the nodes")
    else:
        order = list(range(g.n))
    iter_set = set(iterative)
    first_sweep = [v for v in order if v not in iter_set] + [v for v in order if v in iter_set]
    later_sweeps = [v for v in order if v in iter_set]
    node_data = {v: _node_arrays(g, v) for v in range(g.n)}

    ll_prev = float(K.loglik_kernel(B, Om, S))
    init_ll = ll_prev
    trace = []
    log: list[UpdateRecord] = []
    status = FitStatus.MAX_SWEEPS
    failed = None
    for sweep in range(1, cfg.max_sweeps + 1):
        B_old = B.copy()
        Om_old = Om.copy()
        nodes = first_sweep if sweep == 1 else later_sweeps
        ll_node = ll_prev
        for v in nodes:
            pa, cyc, sib = node_data[v]
            st, _ = K.block_update_kernel(B, Om, Y, v, pa, cyc, sib, K.AUTO)
            if st != K.OK:
                status, failed = _KERNEL_STATUS[st], v
                break
            if cfg.debug:
                ll_new = float(K.loglik_kernel(B, Om, S))
                pd = bool(K.cholesky_checked(Om)[1])
                log.append(UpdateRecord(sweep, v, ll_new - ll_node, pd))
                ll_node = ll_new
        if failed is not None:
            B, Om = B_old, Om_old
            break
        ll = float(K.loglik_kernel(B, Om, S))
        trace.append(ll)
        change = max(np.max(np.abs(B - B_old), initial=0.0), np.max(np.abs(Om - Om_old), initial=0.0))
        if not later_sweeps:
            status = FitStatus.CONVERGED
            break
        if abs(ll - ll_prev) < cfg.tol_loglik and change < cfg.tol_param:
            if _score_max(g, S, B, Om) < cfg.tol_score:
                status = FitStatus.CONVERGED
                break
        ll_prev = ll

    params = Params(B, Om)
    return FitResult(
        params=params,
        loglik_trace=np.array(trace),
        sweeps_used=len(trace),
        status=status,
        score_norm=score(g, d, params).max_abs(),
        init_loglik=init_ll,
        failed_node=failed,
        elapsed_s=time.perf_counter() - t0,
        ridge_init=ridge,
        update_log=log,
    )

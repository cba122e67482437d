"""Random graphs, random parameters, Gaussian samples and a benchmark runner."""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .bcd import FitConfig, FitStatus, fit
from .graph import MixedGraph
from .likelihood import Dataset, Params, implied_covariance

DET_REDRAW_TOL = 1e-8


@dataclass(frozen=True)
class SimConfig:
    """One simulation setting.

    Parameters
    ----------
    n_nodes, sample_size : int
    cycle_len : int
        Length ``k`` of the planted directed cycle; 0 for none.  1 is invalid.
    p_directed, p_bidirected : float
        Per-pair probabilities of a directed or bi-directed edge.
        ``p_bidirected`` defaults to half of ``p_directed``.
    replications, seed : int
    allow_cycle_chords : bool
        Also draw edges between pairs of cycle nodes.  Chords create extra,
        shorter directed cycles, so the default leaves those pairs empty.
    """

    n_nodes: int
    sample_size: int
    cycle_len: int = 0
    p_directed: float = 0.1
    p_bidirected: float | None = None
    replications: int = 100
    seed: int = 0
    allow_cycle_chords: bool = False

    def __post_init__(self):
        if self.p_bidirected is None:
            object.__setattr__(self, "p_bidirected", self.p_directed / 2)
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        if not 0 <= self.cycle_len <= self.n_nodes or self.cycle_len == 1:
            raise ValueError("cycle_len must be 0 or between 2 and n_nodes")
        if self.p_directed < 0 or self.p_bidirected < 0 or self.p_directed + self.p_bidirected > 1:
            raise ValueError("edge probabilities must be non-negative with sum at most 1")
        if self.replications < 0:
            raise ValueError("replications must be non-negative")
        if self.sample_size < self.n_nodes:
            raise ValueError("sample_size must be at least n_nodes")


def random_graph(cfg: SimConfig, rng: np.random.Generator) -> MixedGraph:
    """Planted cycle ``0 -> 1 -> ... -> k-1 -> 0`` plus random edges, relabeled."""
    n, k = cfg.n_nodes, cfg.cycle_len
    directed, bidirected = [], []
    cycle_pairs = set()
    if k >= 2:
        for v in range(k):
            w = (v + 1) % k
            directed.append((v, w))
            cycle_pairs.add((min(v, w), max(v, w)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) in cycle_pairs:
                continue
            if not cfg.allow_cycle_chords and j < k:
                continue
            u = rng.uniform()
            if u <= cfg.p_directed:
                directed.append((i, j))
            elif u <= cfg.p_directed + cfg.p_bidirected:
                bidirected.append((i, j))
    g = MixedGraph.from_edges(n, directed, bidirected)
    return g.relabel(rng.permutation(n))


def random_params(g: MixedGraph, rng: np.random.Generator) -> tuple[Params, int]:
    """Standard normal free entries and a diagonally dominant ``Omega``.

    Returns the parameters and the number of times ``B`` was redrawn because
    ``I - B`` was numerically singular.
    """
    n = g.n
    mask_b = g.directed_adjacency().T
    redraws = 0
    while True:
        B = np.where(mask_b, rng.standard_normal((n, n)), 0.0)
        if abs(np.linalg.det(np.eye(n) - B)) >= DET_REDRAW_TOL:
            break
        redraws += 1
    upper = np.triu(np.where(g.bidirected_adjacency(), rng.standard_normal((n, n)), 0.0), 1)
    Om = upper + upper.T
    chi2 = rng.standard_normal(n) ** 2
    Om[np.diag_indices(n)] = 1.0 + np.abs(Om).sum(axis=1) + chi2
    return Params(B, Om), redraws


def sample_data(p: Params, N: int, rng: np.random.Generator, max_tries: int = 100) -> Dataset:
    """``N`` independent draws from ``Normal(0, Sigma(p))``, variables in rows."""
    Sigma = implied_covariance(p)
    L = np.linalg.cholesky(Sigma)
    for _ in range(max_tries):
        Y = L @ rng.standard_normal((p.n, N))
        if np.linalg.matrix_rank(Y) == p.n:
            return Dataset(Y)
    raise RuntimeError("could not draw full-rank data")  # pragma: no cover


@dataclass(frozen=True)
class ReplicationOutcome:
    status: str
    sweeps: int
    seconds: float
    score_norm: float


@dataclass(frozen=True)
class BenchRow:
    n_nodes: int
    sample_size: int
    cycle_len: int
    p_directed: float
    p_bidirected: float
    replications: int
    n_converged: int
    n_max_sweeps: int
    n_update_failures: int
    mean_sweeps: float
    mean_cpu_ms: float

    FIELDS = (
        "n_nodes", "sample_size", "cycle_len", "p_directed", "p_bidirected", "replications",
        "n_converged", "n_max_sweeps", "n_update_failures", "mean_sweeps", "mean_cpu_ms",
    )

    def to_dict(self) -> dict:
        return asdict(self)

    def same_counts(self, other: "BenchRow") -> bool:
        """Equality ignoring the timing field."""
        a, b = self.to_dict(), other.to_dict()
        a.pop("mean_cpu_ms")
        b.pop("mean_cpu_ms")
        return a == b


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, rep]))


def run_replication(cfg: SimConfig, fit_cfg: FitConfig, rep: int) -> ReplicationOutcome:
    rng = replication_rng(cfg.seed, rep)
    g = random_graph(cfg, rng)
    p, _ = random_params(g, rng)
    d = sample_data(p, cfg.sample_size, rng)
    t0 = time.perf_counter()
    res = fit(g, d, fit_cfg)
    elapsed = time.perf_counter() - t0
    return ReplicationOutcome(res.status.value, res.sweeps_used, elapsed, res.score_norm)


def _run_chunk(args):
    cfg, fit_cfg, reps = args
    return [run_replication(cfg, fit_cfg, r) for r in reps]


def default_workers(requested: int | None = None) -> int:
    """Worker count: ``SEM_BCD_THREADS`` if set, else ``requested``, else all cores."""
    env = os.environ.get("SEM_BCD_THREADS")
    if env:
        return max(1, int(env))
    if requested is not None:
        return max(1, requested)
    return os.cpu_count() or 1


def run_outcomes(cfg: SimConfig, fit_cfg: FitConfig | None = None, n_jobs: int = 1) -> list[ReplicationOutcome]:
    """Per-replication outcomes in replication order."""
    fit_cfg = fit_cfg or FitConfig()
    reps = list(range(cfg.replications))
    if n_jobs <= 1 or len(reps) < 2:
        return _run_chunk((cfg, fit_cfg, reps))
    chunks = [reps[k::n_jobs] for k in range(n_jobs) if reps[k::n_jobs]]
    out: dict[int, ReplicationOutcome] = {}
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        for chunk, results in zip(chunks, pool.map(_run_chunk, [(cfg, fit_cfg, c) for c in chunks])):
            out.update(zip(chunk, results))
    return [out[r] for r in reps]


def summarize(cfg: SimConfig, outcomes: list[ReplicationOutcome]) -> BenchRow:
    conv = [o for o in outcomes if o.status == FitStatus.CONVERGED.value]
    n_max = sum(o.status == FitStatus.MAX_SWEEPS.value for o in outcomes)
    return BenchRow(
        n_nodes=cfg.n_nodes,
        sample_size=cfg.sample_size,
        cycle_len=cfg.cycle_len,
        p_directed=cfg.p_directed,
        p_bidirected=cfg.p_bidirected,
        replications=len(outcomes),
        n_converged=len(conv),
        n_max_sweeps=n_max,
        n_update_failures=len(outcomes) - len(conv) - n_max,
        mean_sweeps=float(np.mean([o.sweeps for o in conv])) if conv else 0.0,
        mean_cpu_ms=float(np.mean([o.seconds for o in conv]) * 1e3) if conv else 0.0,
    )


def run_benchmark(cfg: SimConfig, fit_cfg: FitConfig | None = None, n_jobs: int = 1) -> BenchRow:
    """Simulate and fit ``cfg.replications`` times and aggregate.

    Replication ``r`` draws from a generator seeded by ``(cfg.seed, r)``, so
    results do not depend on ``n_jobs``.  Fit time excludes data generation.
    """
    return summarize(cfg, run_outcomes(cfg, fit_cfg, n_jobs))


def standard_configs(replications: int = 1000, seed: int = 0) -> list[SimConfig]:
    """The 24 settings ``(V, N, k, d)`` with ``b = d/2``."""
    out = []
    for V in (10, 20):
        for N in (3 * V // 2, 10 * V):
            for k in (0, V // 5, 2 * V // 5):
                for dprob in (0.1, 0.2):
                    out.append(SimConfig(V, N, k, dprob, None, replications, seed))
    return out

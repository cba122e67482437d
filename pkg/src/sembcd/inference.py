"""Likelihood-ratio tests between nested mixed graph models."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaincc

from .bcd import FitConfig, FitResult, fit
from .graph import MixedGraph
from .likelihood import Dataset


class NestingError(ValueError):
    """The null graph is not a subgraph of the alternative."""


class FitFailedError(RuntimeError):
    def __init__(self, which: str, result: FitResult):
        super().__init__(
            f"{which} fit ended with status {result.status.value}"
            + (f" at node {result.failed_node}" if result.failed_node is not None else "")
        )
        self.which = which
        self.result = result


def chi2_upper_tail(x: float, df: int) -> float:
    """``P(chi2_df > x)`` via the regularized upper incomplete gamma function."""
    if x < 0:
        raise ValueError("x must be non-negative")
    if df <= 0:
        raise ValueError("df must be positive")
    return float(gammaincc(df / 2.0, x / 2.0))


@dataclass(eq=False)
class LrtResult:
    stat: float
    df: int
    p_chi2: float
    fit_null: FitResult
    fit_alt: FitResult

    def to_dict(self) -> dict:
        return {
            "stat": self.stat,
            "df": self.df,
            "p_chi2": self.p_chi2,
            "fit_null": self.fit_null.to_dict(),
            "fit_alt": self.fit_alt.to_dict(),
        }


def _check_nested(g_null: MixedGraph, g_alt: MixedGraph):
    if not g_null.is_subgraph_of(g_alt):
        raise NestingError("null graph must be a subgraph of the alternative on the same nodes")


def lrt(g_null: MixedGraph, g_alt: MixedGraph, d: Dataset, cfg: FitConfig | None = None) -> LrtResult:
    """Fit both models and compare them.

    The alternative is started at the null optimum, so its likelihood cannot
    end up below the null's.  The statistic is ``N`` times the difference of
    the ``2/N``-scaled log-likelihoods, i.e. the usual ``-2 log`` ratio.
    """
    _check_nested(g_null, g_alt)
    cfg = cfg or FitConfig()
    res0 = fit(g_null, d, cfg)
    if not res0.status.ok:
        raise FitFailedError("null", res0)
    res1 = fit(g_alt, d, replace(cfg, init=res0.params))
    if not res1.status.ok:
        raise FitFailedError("alternative", res1)
    stat = d.N * (res1.loglik - res0.loglik)
    df = g_alt.n_free_params - g_null.n_free_params
    p = 1.0 if df == 0 else chi2_upper_tail(max(stat, 0.0), df)
    return LrtResult(float(stat), df, p, res0, res1)


@dataclass(eq=False)
class SubsampleResult:
    stats: np.ndarray
    full_stat: float
    empirical_p: float
    b: int
    n_sub: int
    n_failed: int
    scaled: bool

    def to_dict(self) -> dict:
        return {
            "stats": [float(s) for s in self.stats],
            "full_stat": self.full_stat,
            "empirical_p": self.empirical_p,
            "b": self.b,
            "n_sub": self.n_sub,
            "n_failed": self.n_failed,
            "scaled": self.scaled,
        }


def subsample_lrt(
    g_null: MixedGraph,
    g_alt: MixedGraph,
    d: Dataset,
    b: int,
    n_sub: int,
    cfg: FitConfig | None = None,
    rng: np.random.Generator | int | None = None,
    scale_stat: bool = False,
    full_stat: float | None = None,
) -> SubsampleResult:
    """Recompute the statistic on ``n_sub`` random size-``b`` subsamples.

    Subsamples are drawn without replacement.  Failed fits are dropped and
    counted.  ``empirical_p`` is the fraction of subsample statistics at or
    above the full-data statistic; with ``scale_stat`` the subsample values
    are first multiplied by ``N / b``.
    """
    _check_nested(g_null, g_alt)
    if n_sub < 1:
        raise ValueError("n_sub must be at least 1")
    if not d.n <= b <= d.N:
        raise ValueError(f"subsample size must lie between {d.n} and {d.N}")
    rng = np.random.default_rng(rng)
    if full_stat is None:
        full_stat = lrt(g_null, g_alt, d, cfg).stat
    stats = []
    failed = 0
    for _ in range(n_sub):
        cols = np.sort(rng.choice(d.N, size=b, replace=False))
        try:
            sub = d.subset(cols)
            stats.append(lrt(g_null, g_alt, sub, cfg).stat)
        except (FitFailedError, ValueError):
            failed += 1
    stats = np.array(stats)
    cmp = stats * (d.N / b) if scale_stat else stats
    if cmp.size == 0:
        raise RuntimeError("every subsample fit failed")
    p = float(np.mean(cmp >= full_stat))
    return SubsampleResult(stats, float(full_stat), p, b, n_sub, failed, scale_stat)

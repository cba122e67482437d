"""Minimization of ``||y - X a||^2 / (c0 + c^T a)^2``.

This is the subproblem solved for every node whose incoming edges touch a
directed cycle.  The generic solution is unique and given in closed form;
two degenerate cases occur when the least-squares solution sits on the pole
of the denominator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels as K


class RatioError(ValueError):
    """The problem is outside what the closed-form solver handles."""


class RankDeficientError(RatioError):
    """``X`` lacks full column rank; use :func:`solve_ratio_projected`."""


class ZeroDirectionError(RatioError):
    """``c == 0``: the problem is ordinary least squares."""


@dataclass(frozen=True, eq=False)
class RatioProblem:
    y: np.ndarray
    X: np.ndarray
    c0: float
    c: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float)
        X = np.ascontiguousarray(self.X, dtype=float)
        c = np.ascontiguousarray(self.c, dtype=float)
        if X.ndim == 1:
            X = X[:, None].copy()
        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise RatioError("X must be N x m and y of length N")
        if c.shape != (X.shape[1],):
            raise RatioError(f"c must have length {X.shape[1]}")
        if X.shape[0] < X.shape[1]:
            raise RatioError("need at least as many rows as columns")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def objective(self, alpha) -> float:
        """Objective value; ``inf`` on the pole unless the numerator also vanishes."""
        alpha = np.asarray(alpha, dtype=float)
        r = self.y - self.X @ alpha
        num = float(r @ r)
        den = self.c0 + float(self.c @ alpha)
        if den == 0.0:
            return np.nan if num == 0.0 else np.inf
        return num / den**2


@dataclass(frozen=True, eq=False)
class Unique:
    alpha_star: np.ndarray
    residual_sq: float


@dataclass(frozen=True, eq=False)
class NonUnique:
    """Every ``alpha_hat + lam * direction`` with ``lam != 0`` is a minimizer."""

    alpha_hat: np.ndarray
    direction: np.ndarray
    value: float


@dataclass(frozen=True, eq=False)
class NoMinimum:
    """The objective approaches ``infimum`` without attaining it."""

    infimum: float
    alpha_hat: np.ndarray
    direction: np.ndarray


RatioSolution = Union[Unique, NonUnique, NoMinimum]


def solve_ratio(p: RatioProblem) -> RatioSolution:
    """Closed-form minimizer for full-rank ``X`` and nonzero ``c``.

    ``c`` is rotated onto the last coordinate with a Householder reflector,
    the rotated design is QR-factorized, all but the last transformed
    coordinate are fixed at their least-squares values and the remaining
    univariate problem is solved exactly.
    """
    if not np.any(p.c):
        raise ZeroDirectionError("c is zero; solve the least-squares problem instead")
    status, alpha, alpha_hat, direction, y0sq, infimum = K.ratio_pipeline(p.X, p.y, p.c0, p.c)
    if status == K.RANK_DEFICIENT:
        raise RankDeficientError("X does not have full column rank")
    if status == K.NON_UNIQUE:
        return NonUnique(alpha_hat, direction, float(infimum))
    if status == K.NO_MINIMUM:
        return NoMinimum(float(infimum), alpha_hat, direction)
    r = p.y - p.X @ alpha
    return Unique(alpha, float(r @ r))


def rational_solution(p: RatioProblem) -> np.ndarray:
    """The minimizer written as a least-squares solution plus a correction.

    ``alpha_hat + y0^2 / (c0 + c^T alpha_hat) * (X^T X)^{-1} c`` with
    ``y0^2`` the least-squares residual.  Independent of the QR pipeline and
    used to cross-check it.
    """
    XtX = p.X.T @ p.X
    alpha_hat = np.linalg.solve(XtX, p.X.T @ p.y)
    r = p.y - p.X @ alpha_hat
    den = p.c0 + p.c @ alpha_hat
    if den == 0.0:
        raise RatioError("least-squares solution lies on the pole")
    return alpha_hat + (r @ r) / den * np.linalg.solve(XtX, p.c)


@dataclass(frozen=True)
class UniqueAt:
    x: float
    value: float


@dataclass(frozen=True)
class ConstantValue:
    value: float


@dataclass(frozen=True)
class InfimumUnattained:
    value: float


def minimize_univariate_ratio(a: float, b: float, c0: float, c1: float):
    """Minimize ``((a - x)^2 + b^2) / (c0 + c1 x)^2`` over real ``x``.

    Returns
    -------
    UniqueAt, ConstantValue or InfimumUnattained
        ``ConstantValue`` when the function equals ``1/c1^2`` wherever it is
        defined; ``InfimumUnattained`` when ``1/c1^2`` is only approached as
        ``|x|`` grows.
    """
    if c1 == 0:
        raise ValueError("c1 must be nonzero")
    den = c0 + a * c1
    if abs(den) <= K.DEGENERATE_RTOL * (abs(c0) + abs(a * c1) + 1.0):
        if b == 0:
            return ConstantValue(1.0 / c1**2)
        return InfimumUnattained(1.0 / c1**2)
    x = a + b * b * c1 / den
    value = ((a - x) ** 2 + b * b) / (c0 + c1 * x) ** 2
    return UniqueAt(float(x), float(value))


def solve_ratio_projected(p: RatioProblem, c_tilde) -> RatioSolution:
    """Solve the problem when ``X`` may be rank deficient.

    Requires ``p.c == X^T c_tilde``, so the objective depends on ``alpha``
    only through ``X alpha``.  The optimal fitted vector is
    ``pi(y) + ||y - pi(y)||^2 / (c0 + c_tilde^T pi(y)) * pi(c_tilde)``
    with ``pi`` the orthogonal projection onto the column span of ``X``; the
    returned coefficients are the minimum-norm ones reproducing it.
    """
    c_tilde = np.asarray(c_tilde, dtype=float)
    if c_tilde.shape != p.y.shape:
        raise RatioError("c_tilde must have length N")
    if not np.allclose(p.X.T @ c_tilde, p.c, rtol=1e-9, atol=1e-12 * (1 + np.abs(p.c).max(initial=0))):
        raise RatioError("c is not X^T c_tilde")
    X_pinv = np.linalg.pinv(p.X)
    coef_y = X_pinv @ p.y
    coef_c = X_pinv @ c_tilde
    pi_y = p.X @ coef_y
    pi_c = p.X @ coef_c
    y0sq = float((p.y - pi_y) @ (p.y - pi_y))
    pc2 = float(pi_c @ pi_c)
    den = p.c0 + float(c_tilde @ pi_y)
    scale = abs(p.c0) + np.sqrt(pc2) * np.linalg.norm(pi_y) + 1.0
    if pc2 == 0.0 and p.c0 == 0.0:
        raise RatioError("denominator vanishes identically")
    if abs(den) <= K.DEGENERATE_RTOL * scale:
        if y0sq <= K.Y0_RTOL * float(p.y @ p.y):
            return NonUnique(coef_y, coef_c, 1.0 / pc2)
        return NoMinimum(1.0 / pc2, coef_y, coef_c)
    alpha = coef_y + y0sq / den * coef_c
    r = p.y - p.X @ alpha
    return Unique(alpha, float(r @ r))

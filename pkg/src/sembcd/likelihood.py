"""Parameters, data, implied covariance, log-likelihood and score."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from ._kernels import loglik_kernel
from .graph import MixedGraph

SINGULAR_DET_TOL = 1e-12


class ParamsError(ValueError):
    """Parameters violate the graph's sparsity, symmetry or definiteness."""


class DataError(ValueError):
    """Data matrix unusable: too few samples, rank deficiency, bad CSV."""


class DataFormatError(DataError):
    """The CSV file could not be parsed into a numeric table."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Params:
    """Structural coefficients ``B`` and error covariance ``Omega``.

    ``B[i, j]`` is the coefficient of the edge ``j -> i``.  Arrays are
    copied and made read-only on construction.
    """

    B: np.ndarray
    Omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "B", _frozen(self.B))
        object.__setattr__(self, "Omega", _frozen(self.Omega))
        if self.B.ndim != 2 or self.B.shape != self.Omega.shape or self.B.shape[0] != self.B.shape[1]:
            raise ParamsError("B and Omega must be square matrices of equal size")

    @property
    def n(self) -> int:
        return self.B.shape[0]

    def validate(self, g: MixedGraph) -> None:
        """Raise :class:`ParamsError` unless the pair lies in the model's parameter space."""
        if self.n != g.n:
            raise ParamsError(f"parameters have {self.n} nodes, graph has {g.n}")
        b_allowed = g.directed_adjacency().T
        if np.any((self.B != 0) & ~b_allowed):
            raise ParamsError("B has a nonzero entry off the directed edge set")
        o_allowed = g.bidirected_adjacency() | np.eye(g.n, dtype=bool)
        if np.any((self.Omega != 0) & ~o_allowed):
            raise ParamsError("Omega has a nonzero entry off the bi-directed edge set")
        if not np.array_equal(self.Omega, self.Omega.T):
            raise ParamsError("Omega is not symmetric")
        try:
            np.linalg.cholesky(self.Omega)
        except np.linalg.LinAlgError as exc:
            raise ParamsError("Omega is not positive definite") from exc
        if abs(np.linalg.det(np.eye(g.n) - self.B)) <= SINGULAR_DET_TOL:
            raise ParamsError("I - B is singular")

    def free_vector(self, g: MixedGraph) -> np.ndarray:
        """Free entries in the order used by :class:`Score`."""
        beta = [self.B[h, t] for t, h in sorted(g.directed)]
        omega = [self.Omega[v, v] for v in range(g.n)]
        omega += [self.Omega[a, b] for a, b in sorted(g.bidirected)]
        return np.array(beta + omega)

    @classmethod
    def from_free_vector(cls, g: MixedGraph, theta) -> "Params":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (g.n_free_params,):
            raise ParamsError(f"expected {g.n_free_params} free entries, got {theta.shape}")
        B = np.zeros((g.n, g.n))
        Om = np.zeros((g.n, g.n))
        k = 0
        for t, h in sorted(g.directed):
            B[h, t] = theta[k]
            k += 1
        for v in range(g.n):
            Om[v, v] = theta[k]
            k += 1
        for a, b in sorted(g.bidirected):
            Om[a, b] = Om[b, a] = theta[k]
            k += 1
        return cls(B, Om)

    def to_dict(self) -> dict:
        return {"B": self.B.tolist(), "Omega": self.Omega.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Params":
        return cls(np.array(doc["B"], dtype=float), np.array(doc["Omega"], dtype=float))

    def allclose(self, other: "Params", atol: float = 0.0) -> bool:
        return np.allclose(self.B, other.B, rtol=0, atol=atol) and np.allclose(
            self.Omega, other.Omega, rtol=0, atol=atol
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Mean-zero data ``Y`` with variables in rows and observations in columns.

    ``S = Y Y^T / N`` is computed on construction.  Construction fails unless
    ``N >= n`` and ``Y`` has full row rank.
    """

    Y: np.ndarray
    S: np.ndarray = field(init=False)

    def __post_init__(self):
        Y = _frozen(self.Y)
        if Y.ndim != 2:
            raise DataError("Y must be a 2-d array with variables in rows")
        n, N = Y.shape
        if not np.all(np.isfinite(Y)):
            raise DataError("data contain non-finite values")
        if N < n:
            raise DataError(f"sample size {N} is smaller than the number of variables {n}")
        if n and np.linalg.matrix_rank(Y) < n:
            raise DataError("data matrix does not have full row rank")
        S = Y @ Y.T / N
        S = _frozen((S + S.T) / 2)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "S", S)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def N(self) -> int:
        return self.Y.shape[1]

    @classmethod
    def from_observations(cls, X, center: bool = False, scale: bool = False) -> "Dataset":
        """Build from an ``N x n`` array (observations in rows)."""
        X = np.array(X, dtype=float)
        if X.ndim != 2:
            raise DataError("expected a 2-d array")
        if center or scale:
            X = X - X.mean(axis=0)
        if scale:
            sd = X.std(axis=0)
            if np.any(sd == 0):
                raise DataError("cannot scale a constant column")
            X = X / sd
        return cls(X.T)

    @classmethod
    def from_csv(
        cls, path: str | PathLike, header: bool = False, center: bool = False, scale: bool = False
    ) -> "Dataset":
        """Read an ``N x n`` CSV of dot-decimal numbers."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for lineno, rec in enumerate(reader, start=1):
                if header and lineno == 1:
                    continue
                if not rec or all(not f.strip() for f in rec):
                    continue
                try:
                    rows.append([float(f) for f in rec])
                except ValueError as exc:
                    raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        if not rows:
            raise DataFormatError(f"{path}: no data rows")
        if len({len(r) for r in rows}) != 1:
            raise DataFormatError(f"{path}: rows have differing lengths")
        return cls.from_observations(np.array(rows), center=center, scale=scale)

    def subset(self, columns) -> "Dataset":
        return Dataset(self.Y[:, np.asarray(columns)])


@dataclass(frozen=True, eq=False)
class Score:
    """Residuals of the likelihood equations at a parameter point.

    ``d_beta`` follows sorted directed edges; ``d_omega`` lists the diagonal
    first, then sorted bi-directed edges.  Relative to the gradient of
    :func:`log_likelihood`, ``d_beta`` is half the gradient, the diagonal of
    ``d_omega`` is minus the gradient and the off-diagonal part is minus half
    the gradient.  All entries vanish together at a stationary point.
    """

    d_beta: np.ndarray
    d_omega: np.ndarray

    def max_abs(self) -> float:
        parts = np.concatenate([self.d_beta, self.d_omega])
        return float(np.max(np.abs(parts))) if parts.size else 0.0

    def as_gradient(self, g: MixedGraph) -> np.ndarray:
        """Gradient of the log-likelihood in :meth:`Params.free_vector` order."""
        grad_o = -self.d_omega.copy()
        grad_o[g.n :] *= 2.0
        return np.concatenate([2.0 * self.d_beta, grad_o])


def implied_covariance(p: Params) -> np.ndarray:
    """``(I - B)^{-1} Omega (I - B)^{-T}``."""
    n = p.n
    A = np.eye(n) - p.B
    if abs(np.linalg.det(A)) <= SINGULAR_DET_TOL:
        raise ParamsError("I - B is singular")
    Ainv = np.linalg.solve(A, np.eye(n))
    Sigma = Ainv @ p.Omega @ Ainv.T
    return (Sigma + Sigma.T) / 2


def _check_inputs(g, d, p):
    if d.n != g.n or p.n != g.n:
        raise ValueError("graph, data and parameters disagree on the number of nodes")


def log_likelihood(g: MixedGraph, d: Dataset, p: Params) -> float:
    """Gaussian log-likelihood times ``2/N`` with the additive constant dropped.

    Equals ``-log det Sigma - tr(Sigma^{-1} S)``.  Raises :class:`ParamsError`
    if ``Omega`` is not positive definite or ``I - B`` is singular.
    """
    _check_inputs(g, d, p)
    val = loglik_kernel(np.ascontiguousarray(p.B), np.ascontiguousarray(p.Omega), np.ascontiguousarray(d.S))
    if not np.isfinite(val):
        raise ParamsError("parameters outside the model's parameter space")
    return float(val)


def score(g: MixedGraph, d: Dataset, p: Params) -> Score:
    """Likelihood-equation residuals at ``p`` (see :class:`Score`)."""
    _check_inputs(g, d, p)
    return score_from_arrays(g, d.S, p.B, p.Omega)


def score_from_arrays(g: MixedGraph, S: np.ndarray, B: np.ndarray, Omega: np.ndarray) -> Score:
    n = g.n
    A = np.eye(n) - B
    Oinv_A = np.linalg.solve(Omega, A)
    M_beta = Oinv_A @ S - np.linalg.inv(A).T
    Oinv = np.linalg.inv(Omega)
    M_omega = Oinv - Oinv_A @ S @ Oinv_A.T
    d_beta = np.array([M_beta[h, t] for t, h in sorted(g.directed)])
    d_omega = np.array(
        [M_omega[v, v] for v in range(n)] + [M_omega[a, b] for a, b in sorted(g.bidirected)]
    )
    return Score(d_beta, d_omega)


def saturated_loglik(d: Dataset) -> float:
    """Log-likelihood attained when the implied covariance equals ``S``."""
    sign, logdet = np.linalg.slogdet(d.S)
    return float(-logdet - d.n)

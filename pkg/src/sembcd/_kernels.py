"""Array kernels behind the fitter, the ratio solver and the flow checker.

Everything here works on plain ndarrays and integer status codes so that it
compiles under numba.  Kernels with two implementations (``*_loops`` for
numba, ``*_numpy`` for the fallback) are bound at import time according to
:data:`sembcd._jit.JIT_ENABLED`; the remaining kernels are written once in
the numba-compatible subset of numpy and are compiled or not accordingly.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from ._jit import JIT_ENABLED, njit

# ratio solver outcomes
UNIQUE = 0
NON_UNIQUE = 1
NO_MINIMUM = 2
RANK_DEFICIENT = 3

# block update outcomes (0 and 1..3 shared with the ratio solver)
OK = 0
OMEGA_NOT_PD = 4
ZERO_RESIDUAL = 5

# block update routing
AUTO = 0
FORCE_LSQ = 1
FORCE_RATIO = 2

DEGENERATE_RTOL = 1e-12
Y0_RTOL = 1e-12
RANK_RTOL = 1e-10


# ---------------------------------------------------------------------------
# Cholesky with a success flag
# ---------------------------------------------------------------------------

def _cholesky_checked_loops(A):
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return L, False
        d = np.sqrt(s)
        L[j, j] = d
        for r in range(j + 1, n):
            t = A[r, j]
            for k in range(j):
                t -= L[r, k] * L[j, k]
            L[r, j] = t / d
    return L, True


def _cholesky_checked_numpy(A):
    try:
        return np.linalg.cholesky(A), True
    except np.linalg.LinAlgError:
        return np.zeros_like(A), False


# ---------------------------------------------------------------------------
# QR projection: R1, the first m entries of Q2 y, and y0^2
# ---------------------------------------------------------------------------

def _qr_project_loops(X, y):
    N, m = X.shape
    # rows of At are columns of X, so every inner loop runs over contiguous memory
    At = np.ascontiguousarray(X.T).copy()
    w = y.copy()
    v = np.empty(N)
    for j in range(m):
        norm2 = 0.0
        for r in range(j, N):
            norm2 += At[j, r] * At[j, r]
        norm = np.sqrt(norm2)
        if norm == 0.0:
            continue
        x0 = At[j, j]
        alpha = -norm if x0 >= 0.0 else norm
        vv = 0.0
        for r in range(j, N):
            v[r] = At[j, r]
        v[j] = x0 - alpha
        for r in range(j, N):
            vv += v[r] * v[r]
        if vv == 0.0:
            continue
        f = 2.0 / vv
        for k in range(j, m):
            dot = 0.0
            for r in range(j, N):
                dot += v[r] * At[k, r]
            dot *= f
            for r in range(j, N):
                At[k, r] -= dot * v[r]
        dot = 0.0
        for r in range(j, N):
            dot += v[r] * w[r]
        dot *= f
        for r in range(j, N):
            w[r] -= dot * v[r]
    R1 = np.zeros((m, m))
    for j in range(m):
        for k in range(j, m):
            R1[j, k] = At[k, j]
    y0sq = 0.0
    for r in range(m, N):
        y0sq += w[r] * w[r]
    return R1, w[:m].copy(), y0sq


def _qr_project_numpy(X, y):
    Q, R1 = np.linalg.qr(X)
    qy = Q.T @ y
    resid = y - Q @ qy
    return R1, qy, float(resid @ resid)


# above this many columns LAPACK's blocked QR beats the plain loops
QR_LAPACK_MIN_COLS = 16

if JIT_ENABLED:
    cholesky_checked = njit(_cholesky_checked_loops)
    _qr_loops_jit = njit(_qr_project_loops)

    @njit
    def qr_project(X, y):
        if X.shape[1] < QR_LAPACK_MIN_COLS:
            return _qr_loops_jit(X, y)
        Q, R1 = np.linalg.qr(X)
        Q = np.ascontiguousarray(Q)
        qy = np.ascontiguousarray(Q.T) @ y
        resid = y - Q @ qy
        return R1, qy, np.sum(resid * resid)
else:
    cholesky_checked = _cholesky_checked_numpy
    qr_project = _qr_project_numpy


# ---------------------------------------------------------------------------
# Ratio of quadratics
# ---------------------------------------------------------------------------

@njit
def solve_upper(R, b):
    """Back substitution for upper-triangular ``R``."""
    m = b.shape[0]
    x = np.empty(m)
    for j in range(m - 1, -1, -1):
        acc = b[j]
        for k in range(j + 1, m):
            acc -= R[j, k] * x[k]
        x[j] = acc / R[j, j]
    return x


@njit
def householder_to_last(c):
    """Reflector ``I - beta v v^T`` sending ``c`` to ``||c|| e_m``."""
    m = c.shape[0]
    cn = np.sqrt(np.sum(c * c))
    v = c.copy()
    head = cn * cn - c[m - 1] * c[m - 1]
    if c[m - 1] > 0.0:
        # c_m - ||c|| without cancellation
        v[m - 1] = -head / (c[m - 1] + cn)
    else:
        v[m - 1] = c[m - 1] - cn
    vv = np.sum(v * v)
    beta = 0.0 if vv == 0.0 else 2.0 / vv
    return v, beta


@njit
def _reflect(v, beta, x):
    return x - beta * np.sum(v * x) * v


@njit
def ratio_pipeline(X, y, c0, c):
    """Minimize ``||y - X a||^2 / (c0 + c^T a)^2`` via Householder + QR.

    Returns ``(status, alpha, alpha_hat, direction, y0sq, infimum)``.  With
    ``c == 0`` the reflector is skipped and the least-squares solution comes
    back as UNIQUE.
    """
    N, m = X.shape
    alpha = np.zeros(m)
    alpha_hat = np.zeros(m)
    direction = np.zeros(m)
    if m == 0:
        return UNIQUE, alpha, alpha_hat, direction, float(np.sum(y * y)), 0.0
    cn = np.sqrt(np.sum(c * c))
    v, beta = householder_to_last(c)
    if cn > 0.0 and beta > 0.0:
        Xv = X @ v
        Xp = X - beta * np.outer(Xv, v)
    else:
        Xp = X.copy()
    R1, qy, y0sq = qr_project(Xp, y)
    d = np.abs(np.diag(R1))
    dmax = np.max(d)
    if dmax == 0.0 or np.min(d) <= RANK_RTOL * dmax:
        return RANK_DEFICIENT, alpha, alpha_hat, direction, y0sq, 0.0
    ahat_p = solve_upper(R1, qy)
    alpha_hat = _reflect(v, beta, ahat_p) if beta > 0.0 else ahat_p
    if cn == 0.0:
        return UNIQUE, alpha_hat.copy(), alpha_hat, direction, y0sq, 0.0
    r = R1[m - 1, m - 1]
    qm = qy[m - 1]
    em = np.zeros(m)
    em[m - 1] = 1.0
    dir_p = solve_upper(R1, em) * (cn / r)
    direction = _reflect(v, beta, dir_p) if beta > 0.0 else dir_p
    denom = c0 + cn * qm / r
    scale = abs(c0) + cn * np.sqrt(np.sum(alpha_hat * alpha_hat)) + 1.0
    if abs(denom) <= DEGENERATE_RTOL * scale:
        infimum = r * r / (cn * cn)
        if y0sq <= Y0_RTOL * np.sum(y * y):
            return NON_UNIQUE, alpha, alpha_hat, direction, y0sq, infimum
        return NO_MINIMUM, alpha, alpha_hat, direction, y0sq, infimum
    a2 = qy.copy()
    a2[m - 1] = qm + cn * y0sq / (r * c0 + cn * qm)
    ap = solve_upper(R1, a2)
    alpha = _reflect(v, beta, ap) if beta > 0.0 else ap
    return UNIQUE, alpha, alpha_hat, direction, y0sq, 0.0


# ---------------------------------------------------------------------------
# One block update of Algorithm "BCD"
# ---------------------------------------------------------------------------

@njit
def _others(n, i):
    idx = np.empty(n - 1, dtype=np.int64)
    k = 0
    for j in range(n):
        if j != i:
            idx[k] = j
            k += 1
    return idx


@njit
def row_det_coeffs(B, i, pa, pa_cyc):
    """Laplace coefficients of ``det(I - B)`` along row ``i``.

    Only parents flagged in ``pa_cyc`` get a computed cofactor; the others
    are structurally zero.
    """
    n = B.shape[0]
    M = np.eye(n) - B
    rest = _others(n, i)
    Mr = M[rest]
    c0 = np.linalg.det(np.ascontiguousarray(Mr[:, rest]))
    cpa = np.zeros(pa.shape[0])
    for b in range(pa.shape[0]):
        if pa_cyc[b]:
            p = pa[b]
            cols = _others(n, p)
            sign = 1.0 if (i + p + 1) % 2 == 0 else -1.0
            cpa[b] = sign * np.linalg.det(np.ascontiguousarray(Mr[:, cols]))
    return c0, cpa


@njit
def block_update_kernel(B, Omega, Y, i, pa, pa_cyc, sib, mode):
    """Update row ``i`` of ``B`` and row/column ``i`` of ``Omega`` in place.

    Returns ``(status, rss)`` where ``rss`` is the squared norm of the new
    conditional residual.  On a non-OK status the inputs are left untouched.
    """
    n, N = Y.shape
    rest = _others(n, i)
    Om = np.ascontiguousarray(Omega[rest][:, rest])
    L, ok = cholesky_checked(Om)
    if not ok:
        return OMEGA_NOT_PD, 0.0
    eps = Y[rest] - B[rest] @ Y
    Z = np.linalg.solve(L.T.copy(), np.linalg.solve(L, eps))

    ms = sib.shape[0]
    mp = pa.shape[0]
    m = ms + mp
    X = np.empty((N, m))
    for a in range(ms):
        s = sib[a]
        X[:, a] = Z[s if s < i else s - 1]
    for b in range(mp):
        X[:, ms + b] = Y[pa[b]]
    y = Y[i].copy()

    alpha = np.zeros(m)
    if m > 0:
        c0, cpa = row_det_coeffs(B, i, pa, pa_cyc)
        c = np.zeros(m)
        c[ms:] = cpa
        use_ratio = mode == FORCE_RATIO or (mode == AUTO and np.any(cpa != 0.0))
        if use_ratio:
            status, alpha, _ah, _d, _y0, _inf = ratio_pipeline(X, y, c0, c)
            if status != UNIQUE:
                return status, 0.0
        else:
            alpha, _res, _rank, sv = np.linalg.lstsq(X, y, -1.0)
            if sv[m - 1] <= RANK_RTOL * sv[0]:
                return RANK_DEFICIENT, 0.0

    resid = y - X @ alpha
    rss = float(np.sum(resid * resid))
    if rss <= 1e-14 * float(np.sum(y * y)):
        return ZERO_RESIDUAL, rss

    for b in range(mp):
        B[i, pa[b]] = alpha[ms + b]
    for a in range(ms):
        s = sib[a]
        Omega[i, s] = alpha[a]
        Omega[s, i] = alpha[a]
    w = np.ascontiguousarray(Omega[rest, i])
    u = np.linalg.solve(L, w)
    Omega[i, i] = rss / N + float(np.sum(u * u))
    return OK, rss


@njit
def loglik_kernel(B, Omega, S):
    """Log-likelihood scaled by 2/N and without the constant; -inf if infeasible."""
    n = B.shape[0]
    A = np.eye(n) - B
    sgn_o, logdet_o = np.linalg.slogdet(Omega)
    if sgn_o <= 0.0:
        return -np.inf
    sgn_a, logdet_a = np.linalg.slogdet(A)
    if sgn_a == 0.0:
        return -np.inf
    W = np.linalg.solve(Omega, A @ S)
    return -logdet_o + 2.0 * logdet_a - float(np.sum(A * W))


# ---------------------------------------------------------------------------
# Maximum flow (shortest augmenting paths) on a dense capacity matrix
# ---------------------------------------------------------------------------

def _edmonds_karp_loops(cap, source, sink):
    n = cap.shape[0]
    res = cap.copy()
    parent = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    total = 0
    while True:
        parent[:] = -1
        parent[source] = source
        head = 0
        tail = 1
        queue[0] = source
        while head < tail and parent[sink] == -1:
            u = queue[head]
            head += 1
            for v in range(n):
                if parent[v] == -1 and res[u, v] > 0:
                    parent[v] = u
                    queue[tail] = v
                    tail += 1
        if parent[sink] == -1:
            return total
        bottleneck = res[parent[sink], sink]
        v = sink
        while v != source:
            u = parent[v]
            if res[u, v] < bottleneck:
                bottleneck = res[u, v]
            v = u
        v = sink
        while v != source:
            u = parent[v]
            res[u, v] -= bottleneck
            res[v, u] += bottleneck
            v = u
        total += bottleneck


def _edmonds_karp_scipy(cap, source, sink):
    if source == sink:
        return 0
    graph = csr_matrix(cap.astype(np.int32))
    return int(maximum_flow(graph, source, sink, method="edmonds_karp").flow_value)


if JIT_ENABLED:
    edmonds_karp = njit(_edmonds_karp_loops)
else:
    edmonds_karp = _edmonds_karp_scipy

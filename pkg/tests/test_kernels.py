"""Compiled kernels against their plain-numpy counterparts."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sembcd import _kernels as K
from sembcd._jit import JIT_ENABLED


@given(st.integers(0, 100_000), st.integers(1, 8))
def test_cholesky_variants_agree(seed, n):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    A = M @ M.T + n * np.eye(n) if rng.uniform() < 0.7 else M + M.T
    L1, ok1 = K._cholesky_checked_loops(A)
    L2, ok2 = K._cholesky_checked_numpy(A)
    assert ok1 == ok2
    if ok1:
        np.testing.assert_allclose(L1, L2, atol=1e-10)


@pytest.mark.parametrize("m", [1, 3, 10, 20, 40])
def test_qr_variants_agree(m, rng):
    X = rng.normal(size=(3 * m + 5, m))
    y = rng.normal(size=3 * m + 5)
    results = [K._qr_project_loops(X, y), K._qr_project_numpy(X, y), K.qr_project(X, y)]
    ref = np.linalg.lstsq(X, y, rcond=None)
    for R1, qy, y0sq in results:
        np.testing.assert_allclose(np.linalg.solve(R1, qy), ref[0], atol=1e-10)
        assert y0sq == pytest.approx(float(ref[1][0]), rel=1e-10)


@given(st.integers(0, 100_000), st.integers(2, 14))
def test_max_flow_variants_agree(seed, n):
    rng = np.random.default_rng(seed)
    cap = np.where(rng.uniform(size=(n, n)) < 0.3, rng.integers(1, 4, size=(n, n)), 0).astype(np.int64)
    np.fill_diagonal(cap, 0)
    assert K._edmonds_karp_loops(cap, 0, n - 1) == K._edmonds_karp_scipy(cap, 0, n - 1)
    assert K.edmonds_karp(cap, 0, n - 1) == K._edmonds_karp_scipy(cap, 0, n - 1)


FIT_SCRIPT = """
import json, numpy as np
from sembcd import backend
from sembcd.bcd import fit
from sembcd.simulate import SimConfig, random_graph, random_params, sample_data, replication_rng
out = []
for rep in range(4):
    rng = replication_rng(5, rep)
    g = random_graph(SimConfig(8, 60, 3, 0.2), rng)
    p, _ = random_params(g, rng)
    res = fit(g, sample_data(p, 60, rng))
    out.append({"status": res.status.value, "sweeps": res.sweeps_used, "loglik": res.loglik,
                "B": res.params.B.tolist()})
print(json.dumps({"backend": backend(), "fits": out}))
"""


def _run_fit_script(jit: str) -> dict:
    env = dict(os.environ, SEM_BCD_JIT=jit)
    out = subprocess.run([sys.executable, "-c", FIT_SCRIPT], env=env, capture_output=True, text=True, timeout=600)
    assert out.returncode == 0, out.stderr
    return json.loads(out.stdout)


def test_fallback_backend_matches_compiled():
    plain = _run_fit_script("0")
    compiled = _run_fit_script("1")
    assert plain["backend"] == "numpy"
    assert compiled["backend"] == ("numba" if JIT_ENABLED else "numpy")
    for a, b in zip(plain["fits"], compiled["fits"]):
        assert a["status"] == b["status"]
        assert a["loglik"] == pytest.approx(b["loglik"], abs=1e-9)
        np.testing.assert_allclose(a["B"], b["B"], atol=1e-6)

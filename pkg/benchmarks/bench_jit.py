"""Time the compiled kernels against the plain-numpy fallback.

Each backend runs in its own interpreter because the switch is read at
import time.  Timings exclude imports and one warm-up call, so numba
compilation (or cache loading) is not counted.

    python3 benchmarks/bench_jit.py [--reps 5] [--json]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from sembcd import backend
from sembcd.bcd import FitConfig, fit
from sembcd.determinant import det_coeffs
from sembcd.ratio import RatioProblem, solve_ratio
from sembcd.simulate import SimConfig, random_graph, random_params, replication_rng, sample_data
from sembcd.wellposed import is_well_posed

reps = int(sys.argv[1])
rng = np.random.default_rng(0)

def best_of(fn, inner):
    fn()
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best

prob = RatioProblem(rng.normal(size=200), rng.normal(size=(200, 8)), 0.3, rng.normal(size=8))
cfg = SimConfig(20, 200, 4, 0.2)
g = random_graph(cfg, rng)
p, _ = random_params(g, rng)
data = sample_data(p, 200, rng)
B = p.B

def fits():
    for rep in range(5):
        r = replication_rng(3, rep)
        gg = random_graph(SimConfig(10, 100, 4, 0.2), r)
        pp, _ = random_params(gg, r)
        fit(gg, sample_data(pp, 100, r), FitConfig())

out = {
    "backend": backend(),
    "solve_ratio m=8": best_of(lambda: solve_ratio(prob), 200),
    "det_coeffs all nodes, |V|=20": best_of(lambda: [det_coeffs(g, B, i) for i in range(g.n)], 20),
    "well-posedness, |V|=20": best_of(lambda: is_well_posed(g, warn=False), 5),
    "fit |V|=20 N=200 k=4": best_of(lambda: fit(g, data), 1),
    "5 simulated fits |V|=10": best_of(fits, 1),
}
print(json.dumps(out))
"""


def run_backend(jit: str, reps: int) -> dict:
    env = dict(os.environ, SEM_BCD_JIT=jit)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(reps)], env=env, capture_output=True, text=True, check=False
    )
    if proc.returncode != 0:
        sys.exit(proc.stderr)
    return json.loads(proc.stdout)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5, help="repeats per timing, best kept")
    ap.add_argument("--json", action="store_true", help="emit raw timings as JSON")
    args = ap.parse_args(argv)

    compiled = run_backend("1", args.reps)
    plain = run_backend("0", args.reps)
    if args.json:
        print(json.dumps({"compiled": compiled, "plain": plain}, indent=2))
        return 0

    print(f"{'workload':32s} {compiled['backend']:>12s} {plain['backend']:>12s} {'speedup':>8s}")
    for key in compiled:
        if key == "backend":
            continue
        a, b = compiled[key], plain[key]
        print(f"{key:32s} {a * 1e3:10.3f}ms {b * 1e3:10.3f}ms {b / a:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sembcd.graph import MixedGraph
from sembcd.likelihood import Dataset, Params

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def six_node_graph() -> MixedGraph:
    """Six nodes, one directed 3-cycle, two bidirected edges; 1-based label L is node L-1."""
    return MixedGraph.from_edges(
        6,
        [(0, 1), (1, 2), (2, 3), (3, 4), (3, 1), (4, 5)],
        [(1, 4), (2, 4)],
    )


def random_mixed_graph(rng, n, p_dir=0.3, p_bi=0.2, acyclic=False, bow_free=False) -> MixedGraph:
    directed, bidirected = [], []
    perm = rng.permutation(n)
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            if acyclic and perm[a] > perm[b]:
                continue
            if rng.uniform() < p_dir:
                directed.append((a, b))
    dset = {tuple(sorted(e)) for e in directed}
    for a in range(n):
        for b in range(a + 1, n):
            if bow_free and (a, b) in dset:
                continue
            if rng.uniform() < p_bi:
                bidirected.append((a, b))
    return MixedGraph.from_edges(n, directed, bidirected)


def random_feasible_params(rng, g: MixedGraph, scale_b=0.5) -> Params:
    """Entries ~ Normal with a diagonally dominant Omega and invertible I - B."""
    n = g.n
    while True:
        B = np.where(g.directed_adjacency().T, rng.normal(0, scale_b, (n, n)), 0.0)
        if abs(np.linalg.det(np.eye(n) - B)) > 1e-2:
            break
    U = np.triu(np.where(g.bidirected_adjacency(), rng.normal(0, 0.5, (n, n)), 0.0), 1)
    Om = U + U.T
    Om[np.diag_indices(n)] = 1.0 + np.abs(Om).sum(axis=1) + rng.uniform(0, 1, n)
    return Params(B, Om)


def random_dataset(rng, n, N) -> Dataset:
    return Dataset(rng.standard_normal((n, N)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def six_node():
    return six_node_graph()

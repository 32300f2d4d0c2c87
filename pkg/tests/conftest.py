import numpy as np
import pytest

from graphlogit.graph import from_edge_list
from graphlogit.model import Dataset, FullParams, sigmoid


def random_graph(n, density, rng):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < density
    return from_edge_list(list(zip(iu[keep], ju[keep])), n)


def random_dataset(n=30, p=2, delta=0.5, density=0.2, seed=0):
    """Small dataset drawn from the latent model; returns (data, truth)."""
    rng = np.random.default_rng(seed)
    g = random_graph(n, density, rng)
    X = rng.normal(size=(n, p))
    truth = FullParams(delta=delta, beta0=0.3, beta=np.linspace(-1, 1, p),
                       gamma0=0.2, gamma=np.linspace(0.5, -0.5, p))
    s = g.adjacency @ (X @ truth.beta)
    zeta = rng.random(n) < sigmoid(truth.gamma0 + X @ truth.gamma)
    t = truth.beta0 + X @ truth.beta + truth.delta * zeta * s
    Y = (rng.random(n) < sigmoid(t)).astype(float)
    return Dataset(X=X, Y=Y, graph=g), truth


@pytest.fixture
def small_data():
    return random_dataset()


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

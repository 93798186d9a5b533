import itertools

import numpy as np
import pytest

from esvm.targets import QuadraticModel


def central_difference(fun, theta, rel_step=1e-5):
    """Central finite differences with step rel_step * (1 + |theta_j|)."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for j in range(theta.size):
        h = rel_step * (1.0 + abs(theta[j]))
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        out[j] = (fun(up) - fun(dn)) / (2.0 * h)
    return out


def all_subsets(K, M):
    return [np.array(s) for s in itertools.combinations(range(K), M)]


def small_quadratic(K=4, dim=2, seed=0):
    """Strongly convex model with K quadratic components."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim))
    return QuadraticModel(a @ a.T + dim * np.eye(dim), rng.normal(size=dim),
                          centers=rng.normal(size=(K, dim)), weights=rng.uniform(0.5, 2.0, K))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)

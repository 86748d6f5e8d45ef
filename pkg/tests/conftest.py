import numpy as np
import pytest
from scipy.spatial.distance import cdist

from otcl import DiscreteMeasure, FiniteSpace


def random_metric_space(rng, n, dim=2, scale=3.0):
    """Euclidean point cloud distances: always a valid metric."""
    pts = rng.uniform(-scale, scale, size=(n, dim))
    return FiniteSpace(cdist(pts, pts), np.ones(n)), pts


def line_space(n):
    """Atoms at integer positions 0..n-1 with every midpoint at t in {1/4, 1/2, 3/4}
    that lands on an integer."""
    pos = np.arange(n, dtype=float)
    dist = np.abs(pos[:, None] - pos[None, :])
    mids = []
    for i in range(n):
        for j in range(n):
            for t in (0.25, 0.5, 0.75):
                x = (1 - t) * i + t * j
                if float(x).is_integer():
                    mids.append((i, j, t, int(x)))
    return FiniteSpace(dist, np.ones(n), mids)


def random_uniform_pair(rng, space, n):
    a = rng.choice(space.n, size=n, replace=False)
    b = rng.choice(space.n, size=n, replace=False)
    return DiscreteMeasure.uniform(space, a), DiscreteMeasure.uniform(space, b)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from roughsplit.paths import SampledPath


def random_pl_path(rng, n=None, d=None, horizon=1.0):
    """A random piecewise-linear path with random (strictly increasing) sample times."""
    n = n or int(rng.integers(3, 40))
    d = d or int(rng.integers(1, 4))
    inner = np.sort(rng.uniform(0, horizon, n - 2))
    times = np.unique(np.concatenate(([0.0], inner, [horizon])))
    vals = np.cumsum(rng.standard_normal((len(times), d)), axis=0)
    return SampledPath(times, vals)


def riemann_area(path, refine=2000):
    """Levy area 0.5 * int (x1 dx2 - x2 dx1) of the path started at 0, by midpoint sums."""
    t = np.linspace(0.0, path.horizon, refine * (len(path) - 1) + 1)
    x = path(t)
    x = x - x[0]
    mid = 0.5 * (x[1:] + x[:-1])
    dx = np.diff(x, axis=0)
    return 0.5 * np.sum(mid[:, 0] * dx[:, 1] - mid[:, 1] * dx[:, 0])


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)

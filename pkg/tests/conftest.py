import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def finite_difference_gradient(f, w, step=1e-4):
    """Central differences of a scalar function of a flat vector."""
    g = np.zeros_like(w)
    for i in range(w.size):
        wp = w.copy()
        wp[i] += step
        wm = w.copy()
        wm[i] -= step
        g[i] = (f(wp) - f(wm)) / (2.0 * step)
    return g


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)

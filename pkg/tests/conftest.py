import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_pd_matrix(p: int, rng: np.random.Generator, correlated: bool = True) -> np.ndarray:
    """Well-conditioned random PD matrix with positive correlations when asked."""
    if correlated:
        loadings = rng.uniform(0.3, 1.2, size=(p, max(2, p // 3)))
        base = loadings @ loadings.T
    else:
        a = rng.standard_normal((p, 2 * p))
        base = a @ a.T / (2 * p)
    base[np.diag_indices(p)] += rng.uniform(0.5, 1.5, size=p)
    return (base + base.T) / 2

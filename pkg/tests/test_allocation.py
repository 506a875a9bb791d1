import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pd_matrix
from hdcov.allocation import (
    STRATEGIES,
    allocate,
    hrp_weights,
    mvp_long_only,
    mvp_weights,
    uniform_weights,
)
from hdcov.errors import AllocationError, IllConditionedError
from hdcov.metrics import hhi
from hdcov.models import diagonal_sigma, nested_sigma


def simplex_grid_oracle(xi: np.ndarray, steps: int = 200) -> float:
    """Minimum portfolio variance over a dense grid on the simplex (p <= 3)."""
    p = xi.shape[0]
    best = np.inf
    if p == 2:
        for w1 in np.linspace(0.0, 1.0, steps + 1):
            w = np.array([w1, 1.0 - w1])
            best = min(best, w @ xi @ w)
    else:
        for w1 in np.linspace(0.0, 1.0, steps + 1):
            for w2 in np.linspace(0.0, 1.0 - w1, max(int((1.0 - w1) * steps), 1) + 1):
                w = np.array([w1, w2, 1.0 - w1 - w2])
                best = min(best, w @ xi @ w)
    return best


class TestMvp:
    def test_identity_gives_uniform(self):
        np.testing.assert_allclose(mvp_weights(np.eye(4)), np.full(4, 0.25))

    def test_diagonal_gives_inverse_variance(self):
        xi = np.diag([1.0, 2.0, 4.0])
        iv = (1.0 / np.diag(xi)) / np.sum(1.0 / np.diag(xi))
        np.testing.assert_allclose(mvp_weights(xi), iv, atol=1e-12)

    def test_nested_population_concentrates_on_last_asset(self):
        w = mvp_weights(nested_sigma(100, 0.1))
        assert hhi(w) == pytest.approx(1.0, abs=1e-9)
        assert np.argmax(np.abs(w)) == 99

    def test_optimality_against_perturbations(self, rng):
        xi = random_pd_matrix(8, rng)
        w = mvp_weights(xi)
        base = w @ xi @ w
        for _ in range(100):
            d = rng.standard_normal(8)
            d -= d.mean()  # keep the budget constraint
            w2 = w + 1e-4 * d
            assert w2 @ xi @ w2 >= base - 1e-15

    def test_rejects_ill_conditioned(self):
        v = np.ones(4)
        xi = np.outer(v, v)  # singular
        with pytest.raises(IllConditionedError):
            mvp_weights(xi)


class TestMvpLongOnly:
    def test_diagonal_matches_unconstrained(self):
        xi = np.diag([1.0, 2.0, 4.0])
        np.testing.assert_allclose(mvp_long_only(xi), mvp_weights(xi), atol=1e-12)

    def test_hand_kkt_case(self):
        xi = np.array([[1.0, 1.5], [1.5, 4.0]])
        np.testing.assert_allclose(mvp_weights(xi), [1.25, -0.25], atol=1e-12)
        np.testing.assert_allclose(mvp_long_only(xi), [1.0, 0.0], atol=1e-10)

    def test_interior_solution_matches_unconstrained(self):
        xi = np.array([[1.0, 0.9], [0.9, 1.0]]) + 0.5 * np.eye(2)
        np.testing.assert_allclose(mvp_long_only(xi), mvp_weights(xi), atol=1e-10)

    def test_matches_simplex_grid_oracle(self, rng):
        for p in (2, 3):
            for _ in range(5):
                xi = random_pd_matrix(p, rng, correlated=bool(rng.integers(2)))
                w = mvp_long_only(xi)
                assert w @ xi @ w <= simplex_grid_oracle(xi) + 1e-3

    def test_nested_population_concentrates(self):
        w = mvp_long_only(nested_sigma(100, 0.1))
        assert hhi(w) == pytest.approx(1.0, abs=1e-9)

    def test_feasibility(self, rng):
        for _ in range(20):
            xi = random_pd_matrix(6, rng, correlated=True)
            w = mvp_long_only(xi)
            assert w.sum() == pytest.approx(1.0, abs=1e-10)
            assert w.min() >= -1e-12

    def test_pivot_cap(self):
        xi = random_pd_matrix(10, np.random.default_rng(0))
        with pytest.raises(AllocationError):
            mvp_long_only(xi, pivot_cap=0)


class TestHrp:
    def test_diagonal_is_inverse_variance_exact(self):
        xi = np.diag([2.0, 0.5, 1.0, 4.0, 0.25])
        iv = (1.0 / np.diag(xi)) / np.sum(1.0 / np.diag(xi))
        np.testing.assert_allclose(hrp_weights(xi), iv, atol=1e-12)

    def test_two_assets(self):
        xi = np.array([[2.0, 0.3], [0.3, 1.0]])
        w = hrp_weights(xi)
        assert w[0] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert w[1] == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_model3_population_matches_mvp(self):
        sig = diagonal_sigma(100)
        np.testing.assert_allclose(hrp_weights(sig), mvp_weights(sig), atol=1e-12)
        assert hhi(hrp_weights(sig)) == pytest.approx(0.0178, abs=1e-4)

    def test_strictly_positive(self, rng):
        for _ in range(10):
            xi = random_pd_matrix(9, rng, correlated=True)
            w = hrp_weights(xi)
            assert w.min() > 0.0
            assert w.sum() == pytest.approx(1.0, abs=1e-10)

    def test_rejects_correlations_above_one(self):
        bad = np.array([[1.0, 1.2], [1.2, 1.0]])
        with pytest.raises(AllocationError):
            hrp_weights(bad)


class TestUniform:
    def test_values(self):
        np.testing.assert_allclose(uniform_weights(4), [0.25, 0.25, 0.25, 0.25])
        assert hhi(uniform_weights(100)) == pytest.approx(0.01)


class TestSharedProperties:
    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_scale_invariance(self, strategy, rng):
        xi = random_pd_matrix(6, rng)
        w1 = allocate(strategy, xi)
        for c in (1e-6, 7.3, 1e6):
            np.testing.assert_allclose(allocate(strategy, c * xi), w1, atol=1e-10)

    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_budget(self, strategy, rng):
        for _ in range(10):
            xi = random_pd_matrix(7, rng, correlated=True)
            assert allocate(strategy, xi).sum() == pytest.approx(1.0, abs=1e-10)

    def test_long_only_equals_mvp_when_feasible(self, rng):
        # near-diagonal matrices keep the unconstrained solution nonnegative
        for _ in range(10):
            xi = np.diag(rng.uniform(0.5, 2.0, size=5))
            xi += 0.01 * random_pd_matrix(5, rng)
            w = mvp_weights(xi)
            if w.min() >= 0:
                np.testing.assert_allclose(mvp_long_only(xi), w, atol=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        p=st.integers(2, 8),
    )
    def test_randomized_budget_and_bounds(self, seed, p):
        rng = np.random.default_rng(seed)
        xi = random_pd_matrix(p, rng, correlated=True)
        for strategy in STRATEGIES:
            w = allocate(strategy, xi)
            assert abs(w.sum() - 1.0) < 1e-10
            if strategy in ("mvp+", "hrp", "uniform"):
                assert w.min() >= -1e-12

    def test_unknown_strategy(self):
        with pytest.raises(ValueError, match="unknown strategy"):
            allocate("mystery", np.eye(2))

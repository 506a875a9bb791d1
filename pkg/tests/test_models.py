import json

import numpy as np
import pytest

from hdcov.linalg import matrix_sqrt
from hdcov.models import (
    ModelConfig,
    diagonal_sigma,
    draw_sigma,
    factor_sigma,
    nested_sigma,
    nested_sigma_eigenvalues,
    panel_distribution,
    sample_covariance,
    sample_panel,
)


class TestNestedSigma:
    def test_p1(self):
        np.testing.assert_allclose(nested_sigma(1, 0.1), [[0.01]])

    def test_p2_hand_product(self):
        np.testing.assert_allclose(
            nested_sigma(2, 0.1), [[0.02, 0.01], [0.01, 0.01]], atol=1e-15
        )

    @pytest.mark.parametrize("p,gamma", [(3, 0.1), (17, 0.05), (64, 0.5)])
    def test_entry_formula_exact(self, p, gamma):
        sig = nested_sigma(p, gamma)
        for i in range(p):
            for j in range(p):
                assert sig[i, j] == (p - max(i, j)) * gamma**2

    def test_psd_and_symmetric(self):
        sig = nested_sigma(100, 0.1)
        assert np.array_equal(sig, sig.T)
        vals = np.linalg.eigvalsh(sig)
        assert vals.min() >= -1e-10 * vals.max()

    def test_scree_is_approximate_power_law(self):
        # log-log fit over the interior of the ordered spectrum
        vals = np.sort(np.linalg.eigvalsh(nested_sigma(100, 0.1)))[::-1]
        k = np.arange(1, 101)
        sel = slice(4, 80)
        x, y = np.log(k[sel]), np.log(vals[sel])
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        r2 = 1.0 - resid.var() / y.var()
        assert r2 > 0.95
        assert slope < -1.0  # decaying spectrum

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            nested_sigma(0, 0.1)
        with pytest.raises(ValueError):
            nested_sigma(5, 0.0)


class TestFactorSigma:
    def test_formula_matches_returned_loadings(self, rng):
        sig, b = factor_sigma(40, 0.16, 0.2, rng)
        np.testing.assert_allclose(sig, 0.16**2 * np.outer(b, b) + 0.2**2 * np.eye(40))
        assert b.min() >= 0.5 and b.max() <= 1.5

    def test_fixed_loadings_give_table_matrix(self):
        b = np.array([0.5, 1.5])
        sig = 0.16**2 * np.outer(b, b) + 0.2**2 * np.eye(2)
        np.testing.assert_allclose(sig, [[0.0464, 0.0192], [0.0192, 0.0976]], atol=1e-12)

    def test_unit_loadings_spectrum(self):
        b = np.ones(3)
        sig = 1.0 * np.outer(b, b) + 1.0 * np.eye(3)
        np.testing.assert_allclose(np.linalg.eigvalsh(sig), [1.0, 1.0, 4.0], atol=1e-12)

    def test_single_spike_separation(self, rng):
        for p in (20, 100):
            sig, b = factor_sigma(p, 0.16, 0.2, rng)
            vals = np.sort(np.linalg.eigvalsh(sig))[::-1]
            threshold = 0.2**2 + 0.5 * p * 0.16**2 * np.quantile(b**2, 0.25)
            assert vals[0] > threshold
            assert vals[1] <= threshold


class TestDiagonalSigma:
    def test_p5(self):
        np.testing.assert_allclose(np.diag(diagonal_sigma(5)), [10, 10, 3, 3, 1])

    def test_p10(self):
        diag = np.diag(diagonal_sigma(10))
        assert list(diag) == [10] * 4 + [3] * 4 + [1] * 2

    def test_p100_counts(self):
        diag = np.diag(diagonal_sigma(100))
        assert (diag == 10).sum() == 40 and (diag == 3).sum() == 40 and (diag == 1).sum() == 20

    def test_rounding_remainder(self):
        # p=7: round(1.4)=1, round(2.8)=3, round(2.8)=3 -> sums to 7 already
        diag = np.diag(diagonal_sigma(7))
        assert len(diag) == 7 and set(diag) <= {1.0, 3.0, 10.0}

    def test_eigenvalues_exact_multiset(self):
        sig = diagonal_sigma(25)
        vals = np.sort(np.linalg.eigvalsh(sig))
        np.testing.assert_allclose(vals, np.sort(np.diag(sig)))

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            diagonal_sigma(10, ((1.0, 0.5), (3.0, 0.2)))


class TestMatrixSqrt:
    def test_identity(self):
        np.testing.assert_allclose(matrix_sqrt(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_nested_roundtrip(self):
        sig = nested_sigma(4, 0.1)
        root = matrix_sqrt(sig)
        err = np.linalg.norm(root @ root - sig) / np.linalg.norm(sig)
        assert err < 1e-10
        assert np.array_equal(root, root.T)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError):
            matrix_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            matrix_sqrt(np.diag([1.0, -0.5]))


class TestSamplePanel:
    def test_identity_covariance_lln(self, rng):
        panel = sample_panel(np.eye(2), 100_000, rng)
        s = sample_covariance(panel)
        np.testing.assert_allclose(s, np.eye(2), atol=0.02)

    def test_row_variances(self, rng):
        panel = sample_panel(np.diag([4.0, 1.0]), 100_000, rng)
        var = (panel**2).mean(axis=1)
        np.testing.assert_allclose(var, [4.0, 1.0], rtol=0.02)

    def test_student_t_unit_variance(self, rng):
        panel = sample_panel(np.eye(2), 100_000, rng, dist="student-t", dof=3)
        assert abs((panel**2).mean() - 1.0) < 0.05

    def test_student_t_dof_guard(self, rng):
        with pytest.raises(ValueError):
            sample_panel(np.eye(2), 100, rng, dist="student-t", dof=2)

    def test_seeded_reproducibility(self):
        a = sample_panel(np.eye(3), 50, np.random.default_rng(7))
        b = sample_panel(np.eye(3), 50, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)


class TestSampleCovariance:
    def test_hand_panel_uncentered(self):
        panel = np.array([[1.0, -1.0], [1.0, -1.0]])
        np.testing.assert_allclose(sample_covariance(panel), [[1.0, 1.0], [1.0, 1.0]])

    def test_hand_panel_centered_noop_when_mean_zero(self):
        # mean observation is the zero vector, so demeaning changes nothing
        panel = np.array([[1.0, -1.0], [1.0, -1.0]])
        np.testing.assert_allclose(
            sample_covariance(panel, centered=True), [[1.0, 1.0], [1.0, 1.0]]
        )

    def test_identical_observations_center_to_zero(self):
        panel = np.array([[1.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose(sample_covariance(panel, centered=True), np.zeros((2, 2)))

    def test_matches_double_loop_oracle(self, rng):
        panel = rng.standard_normal((5, 50))
        p, n = panel.shape
        expected = np.zeros((p, p))
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for t in range(n):
                    acc += panel[i, t] * panel[j, t]
                expected[i, j] = acc / n
        np.testing.assert_allclose(sample_covariance(panel), expected, atol=1e-12)

    def test_centered_divisor_stays_n(self, rng):
        panel = rng.standard_normal((3, 20))
        centered = panel - panel.mean(axis=1, keepdims=True)
        np.testing.assert_allclose(
            sample_covariance(panel, centered=True), centered @ centered.T / 20, atol=1e-14
        )


class TestNestedEigenvalues:
    def test_p1(self):
        np.testing.assert_allclose(nested_sigma_eigenvalues(1, 0.1), [0.01])

    def test_p2_quadratic_roots(self):
        # characteristic polynomial lam^2 - 3 g^2 lam + g^4 by hand
        roots = np.sort(np.roots([1.0, -0.03, 0.0001]))[::-1]
        np.testing.assert_allclose(nested_sigma_eigenvalues(2, 0.1), roots, rtol=1e-10)

    def test_matches_dense_oracle_p100(self):
        mine = nested_sigma_eigenvalues(100, 0.1)
        dense = np.sort(np.linalg.eigvalsh(nested_sigma(100, 0.1)))[::-1]
        np.testing.assert_allclose(mine, dense, rtol=1e-8)

    def test_trace_identity(self):
        for p, gamma in ((7, 0.1), (33, 0.5)):
            vals = nested_sigma_eigenvalues(p, gamma)
            assert abs(vals.sum() - gamma**2 * p * (p + 1) / 2) < 1e-8 * vals.sum()


class TestModelConfig:
    def test_json_round_trip(self):
        cfg = ModelConfig(kind="one-factor", p=50, sigma=0.2, sigma_r=0.1, dof=5)
        again = ModelConfig.from_json(cfg.to_json())
        assert again == cfg
        keys = set(json.loads(cfg.to_json()))
        assert keys == {"kind", "p", "gamma", "sigma", "sigma_r", "dof", "diag_fractions"}

    def test_draw_dispatch(self, rng):
        sig, loadings = draw_sigma(ModelConfig(kind="nested", p=4), rng)
        assert loadings is None and sig.shape == (4, 4)
        sig, loadings = draw_sigma(ModelConfig(kind="one-factor", p=4), rng)
        assert loadings is not None
        assert panel_distribution(ModelConfig(kind="one-factor", p=4)) == ("student-t", 3)
        assert panel_distribution(ModelConfig(kind="diagonal", p=4))[0] == "gaussian"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ModelConfig(kind="mystery", p=4)

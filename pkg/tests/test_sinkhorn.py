"""Debiased entropic barycenters on a shared histogram grid."""

import warnings

import numpy as np
import pytest

from sgdkernel.errors import DimensionMismatchError, SinkhornConvergenceWarning
from sgdkernel.sinkhorn import SinkhornConfig, debiased_sinkhorn_barycenter, default_epsilon

GRID71 = np.arange(1.5, 8.51, 0.1)


def gaussian_hist(grid, center, width):
    hist = np.exp(-0.5 * ((grid - center) / width) ** 2)
    return hist / hist.sum()


class TestDefaults:
    def test_default_epsilon_scales_with_bin_width(self):
        assert default_epsilon(1) == pytest.approx(4.0)
        assert default_epsilon(2) == pytest.approx(0.04)
        assert default_epsilon(3) == pytest.approx(4e-4)

    def test_config_resolution(self):
        config = SinkhornConfig()
        assert config.resolve_epsilon(2) == pytest.approx(default_epsilon(2))
        assert SinkhornConfig(epsilon=0.5).resolve_epsilon(2) == pytest.approx(0.5)


class TestBarycenterFixedPoints:
    def test_identical_inputs_returned(self):
        mu = gaussian_hist(GRID71, 5.0, 0.8)
        out = debiased_sinkhorn_barycenter([mu, mu], [0.5, 0.5], GRID71,
                                           epsilon=default_epsilon(2))
        assert np.abs(out - mu).sum() <= 1e-3

    def test_zero_weight_input_is_dropped(self):
        mu = gaussian_hist(GRID71, 5.0, 0.8)
        rng = np.random.default_rng(0)
        other = rng.random(71)
        other /= other.sum()
        out = debiased_sinkhorn_barycenter([mu, other], [1.0, 0.0], GRID71,
                                           epsilon=default_epsilon(2))
        assert np.abs(out - mu).sum() <= 1e-3

    def test_two_dirac_mean_interpolates(self):
        grid = np.arange(100.0)
        a = np.zeros(100)
        a[20] = 1.0
        b = np.zeros(100)
        b[80] = 1.0
        for w0 in (0.1, 0.25, 0.5, 0.75, 0.9):
            bary = debiased_sinkhorn_barycenter([a, b], [w0, 1.0 - w0], grid,
                                                epsilon=4.0)
            mean = float(bary @ grid)
            assert abs(mean - (w0 * 20.0 + (1.0 - w0) * 80.0)) <= 1.0

    def test_swap_symmetry(self):
        rng = np.random.default_rng(1)
        u = rng.random(71)
        u /= u.sum()
        v = rng.random(71)
        v /= v.sum()
        forward = debiased_sinkhorn_barycenter([u, v], [0.3, 0.7], GRID71, epsilon=0.04)
        backward = debiased_sinkhorn_barycenter([v, u], [0.7, 0.3], GRID71, epsilon=0.04)
        assert np.abs(forward - backward).max() <= 1e-9

    def test_output_is_distribution(self):
        rng = np.random.default_rng(2)
        mus = rng.dirichlet(np.ones(71), size=3)
        out = debiased_sinkhorn_barycenter(mus, [0.2, 0.5, 0.3], GRID71, epsilon=0.04)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(out >= 0)

    def test_barycenter_mass_sits_between_inputs(self):
        lo = gaussian_hist(GRID71, 3.0, 0.3)
        hi = gaussian_hist(GRID71, 7.0, 0.3)
        bary = debiased_sinkhorn_barycenter([lo, hi], [0.5, 0.5], GRID71,
                                            epsilon=default_epsilon(2))
        mean = float(bary @ GRID71)
        assert 3.0 < mean < 7.0
        assert abs(mean - 5.0) < 0.2


class TestDiagnostics:
    def test_iteration_cap_warns_when_far_from_converged(self):
        rng = np.random.default_rng(0)
        rough = rng.random(71)
        rough /= rough.sum()
        smooth = gaussian_hist(GRID71, 5.0, 0.8)
        with pytest.warns(SinkhornConvergenceWarning):
            debiased_sinkhorn_barycenter([rough, smooth], [0.5, 0.5], GRID71,
                                         epsilon=0.04, max_iters=2)

    def test_no_warning_on_easy_input(self):
        mu = gaussian_hist(GRID71, 5.0, 0.8)
        with warnings.catch_warnings():
            warnings.simplefilter("error", SinkhornConvergenceWarning)
            debiased_sinkhorn_barycenter([mu, mu], [0.5, 0.5], GRID71, epsilon=0.04)


class TestValidation:
    def test_weight_count_must_match_inputs(self):
        mu = gaussian_hist(GRID71, 5.0, 0.8)
        with pytest.raises(DimensionMismatchError):
            debiased_sinkhorn_barycenter([mu, mu], [1.0], GRID71, epsilon=0.04)

    def test_grid_length_must_match_bins(self):
        mu = gaussian_hist(GRID71, 5.0, 0.8)
        with pytest.raises(DimensionMismatchError):
            debiased_sinkhorn_barycenter([mu], [1.0], GRID71[:-1], epsilon=0.04)

    def test_epsilon_must_be_positive(self):
        mu = gaussian_hist(GRID71, 5.0, 0.8)
        with pytest.raises(ValueError):
            debiased_sinkhorn_barycenter([mu], [1.0], GRID71, epsilon=0.0)

    def test_weights_must_be_a_distribution(self):
        mu = gaussian_hist(GRID71, 5.0, 0.8)
        with pytest.raises(ValueError):
            debiased_sinkhorn_barycenter([mu, mu], [0.7, 0.7], GRID71, epsilon=0.04)
        with pytest.raises(ValueError):
            debiased_sinkhorn_barycenter([mu, mu], [-0.5, 1.5], GRID71, epsilon=0.04)

    def test_inputs_must_be_distributions(self):
        mu = gaussian_hist(GRID71, 5.0, 0.8)
        with pytest.raises(ValueError):
            debiased_sinkhorn_barycenter([mu * 2.0], [1.0], GRID71, epsilon=0.04)

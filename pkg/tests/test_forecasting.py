"""Kernel rollouts, distribution propagation and convergence matching."""

import numpy as np
import pytest

from sgdkernel.errors import DimensionMismatchError, OutOfBandWarning
from sgdkernel.forecasting import (
    ForecastRun,
    compare_to_sgd,
    detect_convergence,
    encode_reference,
    forecast_run_to_csv,
    propagate,
    sample_trajectory,
)
from sgdkernel.kernel import PartialTransitionMatrix, assemble
from sgdkernel.quantizer import encode, fit_affine
from sgdkernel.sgd import Trajectory


def dirac_matrix(target, precision=1):
    matrix = PartialTransitionMatrix.empty(precision)
    matrix.probs[:, matrix.locate(target)] = 1.0
    matrix.filled[:] = True
    return matrix


def identity_matrix(precision=1):
    matrix = PartialTransitionMatrix.empty(precision)
    np.fill_diagonal(matrix.probs, 1.0)
    matrix.filled[:] = True
    return matrix


def random_kernel(rng, d=2, precision=1):
    blocks = []
    for _ in range(d):
        matrix = PartialTransitionMatrix.empty(precision)
        matrix.probs[:] = rng.dirichlet(np.ones(matrix.band_size), size=matrix.band_size)
        matrix.filled[:] = True
        blocks.append(matrix)
    return assemble(blocks)


def unit_maps(d):
    return [fit_affine([0.0, 9.0], target_lo=0.0, target_hi=9.0) for _ in range(d)]


class TestPropagate:
    def test_identity_blocks_leave_distributions_unchanged(self, rng):
        kernel = assemble([identity_matrix(), identity_matrix()])
        dists = [rng.dirichlet(np.ones(10)) for _ in range(2)]
        out = propagate(kernel, dists)
        for before, after in zip(dists, out):
            np.testing.assert_allclose(after, before, atol=1e-15)

    def test_one_hot_input_reads_out_a_row(self, rng):
        kernel = random_kernel(rng, d=1)
        point = np.zeros(10)
        point[4] = 1.0
        out = propagate(kernel, [point])
        np.testing.assert_allclose(out[0], kernel.blocks[0].probs[4], atol=1e-15)

    def test_simplex_preserved(self, rng):
        kernel = random_kernel(rng, d=3)
        dists = [rng.dirichlet(np.ones(10)) for _ in range(3)]
        for _ in range(20):
            dists = propagate(kernel, dists)
        for dist in dists:
            assert dist.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(dist >= 0)

    def test_mixing_weights_blend_sources(self, rng):
        base = identity_matrix()
        cross = dirac_matrix(7)
        kernel = assemble([base, identity_matrix()],
                          mixing=[[0.6, 0.4], [0.0, 1.0]],
                          cross_blocks={(0, 1): cross})
        point = np.zeros(10)
        point[2] = 1.0
        out = propagate(kernel, [point, point])
        expected = 0.6 * point + 0.4 * np.eye(10)[7]
        np.testing.assert_allclose(out[0], expected, atol=1e-15)

    def test_input_validation(self, rng):
        kernel = random_kernel(rng, d=2)
        good = np.full(10, 0.1)
        with pytest.raises(DimensionMismatchError):
            propagate(kernel, [good])
        with pytest.raises(DimensionMismatchError):
            propagate(kernel, [good, np.full(9, 1.0 / 9.0)])
        with pytest.raises(ValueError):
            propagate(kernel, [good, good * 2.0])


class TestSampleTrajectory:
    def test_identity_kernel_stays_at_initial_state(self):
        kernel = assemble([identity_matrix(), identity_matrix()])
        run = sample_trajectory(kernel, [3.0, 6.0], n_steps=50, seed=0,
                                maps=unit_maps(2))
        assert run.states.shape == (51, 2)
        assert np.all(run.states[:, 0] == 3)
        assert np.all(run.states[:, 1] == 6)
        np.testing.assert_allclose(run.values[:, 0], 3.0)

    def test_absorbing_kernel_reaches_target_in_one_step(self):
        kernel = assemble([dirac_matrix(7)])
        run = sample_trajectory(kernel, [2.0], n_steps=10, seed=0, maps=unit_maps(1))
        assert run.states[0, 0] == 2
        assert np.all(run.states[1:, 0] == 7)

    def test_same_seed_reproduces_rollout(self, rng):
        kernel = random_kernel(rng, d=2)
        a = sample_trajectory(kernel, [4.0, 5.0], 100, seed=9, maps=unit_maps(2))
        b = sample_trajectory(kernel, [4.0, 5.0], 100, seed=9, maps=unit_maps(2))
        c = sample_trajectory(kernel, [4.0, 5.0], 100, seed=10, maps=unit_maps(2))
        np.testing.assert_array_equal(a.states, b.states)
        assert not np.array_equal(a.states, c.states)

    def test_out_of_band_start_clamps_with_warning(self):
        kernel = assemble([identity_matrix()])
        maps = [fit_affine([0.0, 1.0], target_lo=0.0, target_hi=9.0)]
        with pytest.warns(OutOfBandWarning):
            run = sample_trajectory(kernel, [5.0], 10, seed=0, maps=maps)
        assert np.all(run.states == 9)

    def test_arity_mismatch_rejected(self, rng):
        kernel = random_kernel(rng, d=2)
        with pytest.raises(DimensionMismatchError):
            sample_trajectory(kernel, [1.0], 10, seed=0, maps=unit_maps(2))
        with pytest.raises(DimensionMismatchError):
            sample_trajectory(kernel, [1.0, 2.0], 10, seed=0, maps=unit_maps(1))


class TestDetectConvergence:
    def test_constant_tail_converges_at_that_state(self):
        states = np.concatenate([np.arange(50), np.full(100, 37)])[:, None]
        summary = detect_convergence(states, window=100, tol_bins=2)
        assert summary.modes[0] == 37
        assert summary.all_converged
        assert summary.fractions[0] == pytest.approx(1.0)

    def test_wide_oscillation_does_not_converge(self):
        tail = np.tile([10, 30, 50, 70], 50)[:, None]
        summary = detect_convergence(tail, window=100, tol_bins=2)
        assert not summary.all_converged

    def test_tight_oscillation_converges(self):
        tail = np.tile([40, 41, 42], 60)[:, None]
        summary = detect_convergence(tail, window=100, tol_bins=2)
        assert summary.all_converged
        assert abs(summary.modes[0] - 41) <= 1

    def test_per_coordinate_verdicts(self):
        good = np.full(200, 25)
        bad = np.tile([10, 30, 50, 70], 50)
        summary = detect_convergence(np.stack([good, bad], axis=1), window=100)
        assert summary.converged[0] and not summary.converged[1]
        assert not summary.all_converged


class TestEncodeReference:
    def test_matches_manual_encoding_in_range(self):
        thetas = np.linspace(0.0, 1.0, 20)[:, None]
        maps = [fit_affine(thetas[:, 0])]
        states = encode_reference(Trajectory(thetas, 0.1, 1, 0), maps, 2)
        expected = encode(maps[0].apply(thetas[:, 0]), 2)
        np.testing.assert_array_equal(states[:, 0], expected)

    def test_out_of_range_values_clamp_to_band_edges(self):
        fit_range = np.linspace(0.0, 1.0, 20)
        maps = [fit_affine(fit_range)]
        wild = np.array([[-10.0], [0.5], [10.0]])
        states = encode_reference(Trajectory(wild, 0.1, 1, 0), maps, 2)
        assert states[0, 0] == 15
        assert states[2, 0] == 85
        assert 15 < states[1, 0] < 85


class TestCompareToSgd:
    def make_run(self, states_value, maps, n=300):
        states = np.full((n, 1), states_value, dtype=np.int64)
        values = maps[0].invert(states / 10.0)
        return ForecastRun(theta0=np.array([0.0]), states=states,
                           values=values.astype(float), seed=0, precision=2,
                           maps=maps)

    def make_reference(self, value, n=300):
        thetas = np.concatenate([np.linspace(0.0, value, 50), np.full(n, value)])
        return Trajectory(thetas[:, None], 0.1, 1, 0)

    def test_exact_bin_match_at_distance_zero(self):
        reference = self.make_reference(0.8)
        maps = [fit_affine(reference.thetas[:, 0])]
        mode = encode(maps[0].apply(0.8), 2)
        report = compare_to_sgd([self.make_run(mode, maps)], [reference])
        assert report.success_fraction == 1.0
        record = report.records[0]
        assert record.reference_index == 0
        assert np.all(record.bin_distances == 0)
        assert record.run_converged

    def test_near_miss_within_tolerance_counts(self):
        reference = self.make_reference(0.8)
        maps = [fit_affine(reference.thetas[:, 0])]
        mode = encode(maps[0].apply(0.8), 2)
        report = compare_to_sgd([self.make_run(mode + 2, maps)], [reference],
                                tol_bins=2)
        assert report.records[0].success
        report = compare_to_sgd([self.make_run(mode + 3, maps)], [reference],
                                tol_bins=2)
        assert not report.records[0].success

    def test_runs_match_nearest_reference(self):
        low = self.make_reference(0.2)
        high = self.make_reference(0.9)
        maps = [fit_affine(np.concatenate([low.thetas[:, 0], high.thetas[:, 0]]))]
        low_mode = encode(maps[0].apply(0.2), 2)
        high_mode = encode(maps[0].apply(0.9), 2)
        report = compare_to_sgd(
            [self.make_run(low_mode, maps), self.make_run(high_mode, maps)],
            [low, high])
        assert [r.reference_index for r in report.records] == [0, 1]
        assert report.success_fraction == 1.0

    def test_unconverged_reference_rejected(self):
        wobble = np.tile([0.0, 1.0, 2.0, 3.0], 100)[:, None]
        reference = Trajectory(wobble, 0.1, 1, 0)
        maps = [fit_affine(wobble[:, 0])]
        with pytest.raises(ValueError):
            compare_to_sgd([self.make_run(50, maps)], [reference])

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            compare_to_sgd([], [])


class TestForecastCsv:
    def test_header_and_length(self, tmp_path, rng):
        kernel = assemble([identity_matrix(), identity_matrix()])
        run = sample_trajectory(kernel, [3.0, 6.0], 5, seed=0, maps=unit_maps(2))
        path = tmp_path / "rollout.csv"
        forecast_run_to_csv(run, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("t,")
        assert len(lines) == 7

"""Forecast iterate convergence by rolling out estimated block kernels.

Forecasts start from raw initial points, which are rescaled and encoded
with the maps fitted on the training runs, then evolve by categorical
sampling from the kernel rows.  Convergence is read off the trailing
window of states and compared against the states reached by reference
runs of the real optimizer.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, OutOfBandWarning
from .kernel import BlockKernel
from .quantizer import AffineMap, band_range, decode, encode
from .sgd import Trajectory


def propagate(kernel: BlockKernel, dists) -> list[np.ndarray]:
    """One step of distribution propagation through the kernel.

    ``dists[j]`` is coordinate ``j``'s current distribution over its block's
    band columns.  Coordinate ``i``'s next distribution is the mixture over
    source coordinates ``j`` of ``dists[j] @ block(i, j)`` weighted by the
    mixing matrix row ``i``.  Rows of a stochastic kernel preserve the
    simplex.
    """
    if len(dists) != kernel.n_params:
        raise DimensionMismatchError("one distribution per coordinate is required")
    dists = [np.asarray(d, dtype=float).ravel() for d in dists]
    for j, dist in enumerate(dists):
        if dist.shape[0] != kernel.blocks[j].band_size:
            raise DimensionMismatchError(
                f"distribution {j} does not match its block's band size")
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-9:
            raise ValueError("inputs must be distributions summing to one")
    out = []
    for i in range(kernel.n_params):
        acc = np.zeros(kernel.blocks[i].band_size)
        for j in range(kernel.n_params):
            weight = kernel.mixing[i, j]
            if weight == 0.0:
                continue
            block = kernel.block(i, j)
            nxt = dists[j] @ block.probs
            if nxt.shape[0] != acc.shape[0]:
                raise DimensionMismatchError(
                    f"block ({i}, {j}) does not map onto coordinate {i}'s band")
            acc += weight * nxt
        out.append(acc)
    return out


@dataclass
class ForecastRun:
    """Sampled kernel rollout from one raw initial point."""

    theta0: np.ndarray
    states: np.ndarray
    values: np.ndarray
    seed: int
    precision: int
    maps: list[AffineMap]
    kind: str = "kernel_sim"


def sample_trajectory(kernel: BlockKernel, theta0, n_steps: int, seed: int,
                      maps: list[AffineMap]) -> ForecastRun:
    """Roll out one sampled state trajectory of the kernel.

    The raw initial point is rescaled per coordinate with the given maps and
    encoded; components falling outside the storage band are clamped onto
    its edge with an ``OutOfBandWarning``.  Each step resamples every
    coordinate from its mixture row.  ``values`` holds the decoded raw-unit
    trajectory.
    """
    d = kernel.n_params
    theta0 = np.asarray(theta0, dtype=float).ravel()
    if theta0.shape[0] != d or len(maps) != d:
        raise DimensionMismatchError("theta0 and maps must match the kernel arity")
    for blk in kernel.blocks:
        if not np.all(blk.filled):
            raise ValueError("kernel blocks must be fully filled before sampling")
    rng = np.random.default_rng(seed)
    states = np.empty((n_steps + 1, d), dtype=np.int64)
    for i, amap in enumerate(maps):
        scaled = float(amap.apply(theta0[i]))
        lo_val = decode(kernel.blocks[i].band_lo, kernel.precision)
        hi_val = decode(kernel.blocks[i].band_hi, kernel.precision)
        if scaled < lo_val or scaled > hi_val:
            warnings.warn(
                f"initial component {i} at {theta0[i]!r} is outside the band; clamping",
                OutOfBandWarning, stacklevel=2)
            scaled = min(max(scaled, lo_val), hi_val)
        states[0, i] = encode(scaled, kernel.precision)
    diagonal = np.array_equal(kernel.mixing, np.eye(d))
    for t in range(n_steps):
        for i in range(d):
            j = i if diagonal else rng.choice(d, p=kernel.mixing[i])
            block = kernel.block(i, j)
            row = block.probs[states[t, j] - block.band_lo]
            states[t + 1, i] = block.band_lo + rng.choice(block.band_size, p=row)
    values = np.empty((n_steps + 1, d))
    for i, amap in enumerate(maps):
        values[:, i] = amap.invert(decode(states[:, i], kernel.precision))
    return ForecastRun(theta0=theta0, states=states, values=values, seed=seed,
                       precision=kernel.precision, maps=list(maps))


@dataclass
class ConvergenceSummary:
    """Trailing-window convergence readout, one entry per coordinate."""

    modes: np.ndarray
    converged: np.ndarray
    fractions: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def detect_convergence(states, window: int = 100, tol_bins: int = 2) -> ConvergenceSummary:
    """Mode of the trailing window per coordinate, flagged as converged when
    at least half of the window sits within ``tol_bins`` of the mode."""
    states = np.atleast_2d(np.asarray(states, dtype=np.int64))
    tail = states[-window:]
    d = states.shape[1]
    modes = np.empty(d, dtype=np.int64)
    fractions = np.empty(d)
    for i in range(d):
        counts = np.bincount(tail[:, i])
        modes[i] = np.argmax(counts)
        fractions[i] = np.mean(np.abs(tail[:, i] - modes[i]) <= tol_bins)
    return ConvergenceSummary(modes=modes, converged=fractions >= 0.5, fractions=fractions)


@dataclass
class MatchRecord:
    """Closest reference minimum for one forecast run."""

    run_index: int
    reference_index: int
    run_modes: np.ndarray
    bin_distances: np.ndarray
    value_distance: float
    run_converged: bool
    success: bool


@dataclass
class ForecastReport:
    records: list[MatchRecord]
    reference_modes: np.ndarray
    success_fraction: float


def encode_reference(trajectory: Trajectory, maps: list[AffineMap],
                     precision: int) -> np.ndarray:
    """Encode a raw optimizer trajectory with already fitted maps.

    Values that leave the target band (possible for runs the maps were not
    fitted on) are clamped onto its edges, mirroring the initial-point
    treatment in ``sample_trajectory``.
    """
    thetas = trajectory.thetas
    if thetas.shape[1] != len(maps):
        raise DimensionMismatchError("trajectory and maps disagree on arity")
    lo, hi = band_range(precision)
    lo_val, hi_val = decode(lo, precision), decode(hi, precision)
    out = np.empty(thetas.shape, dtype=np.int64)
    for i, amap in enumerate(maps):
        scaled = np.clip(amap.apply(thetas[:, i]), lo_val, hi_val)
        out[:, i] = encode(scaled, precision)
    return out


def compare_to_sgd(runs: list[ForecastRun], references: list[Trajectory],
                   tol_bins: int = 2, window: int = 100) -> ForecastReport:
    """Match forecast endpoints against optimizer-reached minima.

    Every reference trajectory must itself pass ``detect_convergence``.  Each
    forecast run is matched to the reference whose converged point is nearest
    in raw units; the run succeeds when it converged and every coordinate's
    mode is within ``tol_bins`` of that reference's mode.
    """
    if not runs or not references:
        raise ValueError("at least one run and one reference are required")
    maps = runs[0].maps
    precision = runs[0].precision
    ref_modes = []
    for ref in references:
        summary = detect_convergence(encode_reference(ref, maps, precision),
                                     window=window, tol_bins=tol_bins)
        if not summary.all_converged:
            raise ValueError("reference trajectory did not converge")
        ref_modes.append(summary.modes)
    ref_modes = np.asarray(ref_modes)
    ref_values = np.empty(ref_modes.shape)
    for i, amap in enumerate(maps):
        ref_values[:, i] = amap.invert(decode(ref_modes[:, i], precision))

    records = []
    for r, run in enumerate(runs):
        summary = detect_convergence(run.states, window=window, tol_bins=tol_bins)
        run_values = np.array([maps[i].invert(decode(int(summary.modes[i]), precision))
                               for i in range(len(maps))])
        distances = np.linalg.norm(ref_values - run_values[None, :], axis=1)
        nearest = int(np.argmin(distances))
        bin_dist = np.abs(summary.modes - ref_modes[nearest])
        success = summary.all_converged and bool(np.all(bin_dist <= tol_bins))
        records.append(MatchRecord(
            run_index=r, reference_index=nearest, run_modes=summary.modes,
            bin_distances=bin_dist, value_distance=float(distances[nearest]),
            run_converged=summary.all_converged, success=success))
    fraction = float(np.mean([rec.success for rec in records]))
    return ForecastReport(records=records, reference_modes=ref_modes,
                          success_fraction=fraction)


def forecast_run_to_csv(run: ForecastRun, path) -> None:
    """One row per step: step index, state and decoded value per coordinate."""
    d = run.states.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"state_{i + 1}" for i in range(d)]
                        + [f"theta_{i + 1}" for i in range(d)])
        for t in range(run.states.shape[0]):
            writer.writerow([t] + [int(s) for s in run.states[t]]
                            + [repr(float(v)) for v in run.values[t]])

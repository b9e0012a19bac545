"""Least squares objectives and constant stepsize gradient simulators.

Minibatch SGD with a fixed stepsize is simulated directly; a Langevin
variant replaces the minibatch noise with a Gaussian whose covariance
matches the empirical per-sample gradient covariance at the current point.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

DIVERGENCE_LIMIT = 1e12


@dataclass
class Dataset:
    """Regression samples: one input row and one scalar target per sample."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float).ravel()
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets disagree on sample count")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


class Objective:
    """Mean of per-sample losses ``f(x_i, theta)`` over a dataset.

    Subclasses define the per-sample residual model; losses are always
    ``0.5 * residual**2`` so gradients share one implementation shape.
    """

    kind = "base"

    def __init__(self, dataset: Dataset, dim: int):
        self.dataset = dataset
        self.dim = dim

    def _residuals(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def per_sample_grads(self, theta) -> np.ndarray:
        """Gradient of each sample's loss at theta, shape (n_samples, dim)."""
        raise NotImplementedError

    def sample_losses(self, theta) -> np.ndarray:
        theta = self._check_theta(theta)
        return 0.5 * self._residuals(theta) ** 2

    def full_loss(self, theta) -> float:
        return float(self.sample_losses(theta).mean())

    def full_grad(self, theta) -> np.ndarray:
        theta = self._check_theta(theta)
        return self.per_sample_grads(theta).mean(axis=0)

    def batch_grad(self, theta, idx) -> np.ndarray:
        """Gradient of the minibatch mean loss over the given sample indices."""
        theta = self._check_theta(theta)
        return self.per_sample_grads(theta)[np.asarray(idx, dtype=int)].mean(axis=0)

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape[0] != self.dim:
            raise ValueError(f"theta must have dimension {self.dim}")
        return theta


class LinearRegressionObjective(Objective):
    """Per-sample loss ``0.5 * (<x_i, theta> - y_i)**2``."""

    kind = "linreg"

    def __init__(self, dataset: Dataset):
        super().__init__(dataset, dim=dataset.inputs.shape[1])

    def _residuals(self, theta):
        return self.dataset.inputs @ theta - self.dataset.targets

    def per_sample_grads(self, theta):
        theta = self._check_theta(theta)
        return self._residuals(theta)[:, None] * self.dataset.inputs


class SineRegressionObjective(Objective):
    """Per-sample loss ``0.5 * (theta_0 * sin(theta_1 * x_i) - y_i)**2``."""

    kind = "sine"

    def __init__(self, dataset: Dataset):
        if dataset.inputs.shape[1] != 1:
            raise ValueError("sine regression expects scalar inputs")
        super().__init__(dataset, dim=2)

    def _residuals(self, theta):
        x = self.dataset.inputs[:, 0]
        return theta[0] * np.sin(theta[1] * x) - self.dataset.targets

    def per_sample_grads(self, theta):
        theta = self._check_theta(theta)
        x = self.dataset.inputs[:, 0]
        s = np.sin(theta[1] * x)
        r = theta[0] * s - self.dataset.targets
        grads = np.empty((x.shape[0], 2))
        grads[:, 0] = r * s
        grads[:, 1] = r * theta[0] * np.cos(theta[1] * x) * x
        return grads


def make_linreg(n_samples: int, dim: int, seed: int,
                label_noise: float = 0.0) -> LinearRegressionObjective:
    """Random linear regression problem.

    Inputs are iid standard normal, targets are ``<x_i, theta_true> + noise``
    with ``theta_true`` drawn standard normal from the same seed.  The drawn
    truth is kept on the returned objective as ``theta_true``.
    """
    rng = np.random.default_rng(seed)
    inputs = rng.standard_normal((n_samples, dim))
    theta_true = rng.standard_normal(dim)
    targets = inputs @ theta_true + label_noise * rng.standard_normal(n_samples)
    obj = LinearRegressionObjective(Dataset(inputs, targets))
    obj.theta_true = theta_true
    return obj


def make_sine(n_samples: int, seed: int, label_noise: float = 0.0,
              amplitude: tuple[float, float] = (0.5, 2.0),
              frequency: tuple[float, float] = (0.7, 1.3)) -> SineRegressionObjective:
    """Random sine regression problem with scalar uniform inputs on [-pi, pi].

    Targets are ``a * sin(b * x_i) + noise`` with the amplitude ``a`` and
    frequency ``b`` drawn uniformly from the given windows; the draws are kept
    on the returned objective as ``amplitude_true`` and ``frequency_true``.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-np.pi, np.pi, size=n_samples)
    a = rng.uniform(*amplitude)
    b = rng.uniform(*frequency)
    targets = a * np.sin(b * x) + label_noise * rng.standard_normal(n_samples)
    obj = SineRegressionObjective(Dataset(x[:, None], targets))
    obj.amplitude_true = a
    obj.frequency_true = b
    return obj


@dataclass
class Trajectory:
    """Iterate history of one simulated run, including the initial point."""

    thetas: np.ndarray
    stepsize: float
    batch_size: int
    seed: int
    kind: str = "sgd"

    def __post_init__(self):
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))

    @property
    def n_steps(self) -> int:
        return self.thetas.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.thetas.shape[1]


def _guard(theta: np.ndarray, step: int, kind: str) -> None:
    if not np.all(np.isfinite(theta)) or np.max(np.abs(theta)) > DIVERGENCE_LIMIT:
        raise DivergenceError(f"{kind} iterate diverged at step {step}")


def run_sgd(objective: Objective, theta0, stepsize: float, batch_size: int,
            n_steps: int, seed: int) -> Trajectory:
    """Constant stepsize minibatch SGD.

    Every step draws ``batch_size`` sample indices uniformly without
    replacement and moves against the minibatch mean gradient.  Raises
    ``DivergenceError`` when an iterate stops being finite or exceeds the
    magnitude guard.
    """
    n = objective.dataset.n_samples
    if not 1 <= batch_size <= n:
        raise ValueError("batch_size must be between 1 and the sample count")
    if stepsize <= 0:
        raise ValueError("stepsize must be positive")
    rng = np.random.default_rng(seed)
    theta = objective._check_theta(theta0)
    out = np.empty((n_steps + 1, objective.dim))
    out[0] = theta
    for t in range(n_steps):
        idx = rng.choice(n, size=batch_size, replace=False)
        theta = theta - stepsize * objective.batch_grad(theta, idx)
        _guard(theta, t + 1, "sgd")
        out[t + 1] = theta
    kind = "gd" if batch_size == n else "sgd"
    return Trajectory(out, stepsize=stepsize, batch_size=batch_size, seed=seed, kind=kind)


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, clamping tiny
    negative eigenvalues produced by roundoff."""
    sym = 0.5 * (np.asarray(matrix, dtype=float) + np.asarray(matrix, dtype=float).T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def run_gld(objective: Objective, theta0, stepsize: float, n_steps: int,
            seed: int, noise_scale: float = 1.0) -> Trajectory:
    """Langevin-style surrogate for SGD driven by gradient covariance.

    Each step follows the full gradient and adds ``stepsize * C(theta) @ z``
    with ``z`` standard normal and ``C(theta)`` the symmetric PSD square root
    of the empirical covariance of per-sample gradients at theta.
    ``noise_scale`` rescales the injected noise; zero recovers plain full
    batch gradient descent.
    """
    if stepsize <= 0:
        raise ValueError("stepsize must be positive")
    rng = np.random.default_rng(seed)
    theta = objective._check_theta(theta0)
    out = np.empty((n_steps + 1, objective.dim))
    out[0] = theta
    for t in range(n_steps):
        grads = objective.per_sample_grads(theta)
        mean_grad = grads.mean(axis=0)
        theta = theta - stepsize * mean_grad
        if noise_scale != 0.0:
            centered = grads - mean_grad
            cov = centered.T @ centered / grads.shape[0]
            noise = psd_sqrt(cov) @ rng.standard_normal(objective.dim)
            theta = theta + stepsize * noise_scale * noise
        _guard(theta, t + 1, "gld")
        out[t + 1] = theta
    return Trajectory(out, stepsize=stepsize, batch_size=objective.dataset.n_samples,
                      seed=seed, kind="gld")


def trajectory_to_csv(trajectory: Trajectory, path) -> None:
    """Write one row per step: step index, then one column per coordinate."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"theta_{j + 1}" for j in range(trajectory.dim)])
        for t, theta in enumerate(trajectory.thetas):
            writer.writerow([t] + [repr(float(v)) for v in theta])

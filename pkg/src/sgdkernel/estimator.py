"""End-to-end estimator: trajectories in, forecastable block kernel out."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .forecasting import ForecastRun, detect_convergence, sample_trajectory
from .kernel import assemble, estimate_rows, impute_missing_rows
from .providers import DigitProvider, make_empirical
from .quantizer import TrajectoryQuantizer, decode
from .sinkhorn import SinkhornConfig


class TransitionKernelEstimator(BaseEstimator):
    """Fit a per-coordinate digit transition kernel from iterate runs.

    ``fit`` rescales and encodes the runs, builds one next-digit provider
    per coordinate, fills the rows of visited states through the
    hierarchical expansion and imputes the rest with debiased Sinkhorn
    barycenters.  ``sample`` rolls the kernel out from a raw initial point
    and ``predict`` returns the decoded trailing-window modes of such
    rollouts.

    Parameters
    ----------
    provider : "empirical", DigitProvider, or callable
        Per-coordinate provider source.  The default trains a character
        n-gram on each coordinate's serialized run; a provider instance is
        shared across coordinates; a callable receives ``(trajectories,
        precision)`` per coordinate, where ``trajectories`` is that
        coordinate's list of encoded runs.
    precision : int
        Digits per state.
    branch_budget : int
        Hierarchical expansion budget per digit level.
    ngram_order, smoothing : int or None, float
        Character window length (defaults to ``precision``) and Laplace
        smoothing of the default n-gram provider.
    epsilon, sinkhorn_tol, sinkhorn_max_iters : float or None, float, int
        Barycenter solver settings for row imputation.
    mixing : array-like or None
        Mixing weights over coordinates; identity when omitted.
    """

    def __init__(self, provider="empirical", precision: int = 2,
                 branch_budget: int = 10, ngram_order: int | None = None,
                 smoothing: float = 0.1, epsilon: float | None = None,
                 sinkhorn_tol: float = 1e-6, sinkhorn_max_iters: int = 1000,
                 target_lo: float = 1.5, target_hi: float = 8.5, mixing=None):
        self.provider = provider
        self.precision = precision
        self.branch_budget = branch_budget
        self.ngram_order = ngram_order
        self.smoothing = smoothing
        self.epsilon = epsilon
        self.sinkhorn_tol = sinkhorn_tol
        self.sinkhorn_max_iters = sinkhorn_max_iters
        self.target_lo = target_lo
        self.target_hi = target_hi
        self.mixing = mixing

    def _as_runs(self, X) -> list[np.ndarray]:
        if isinstance(X, (list, tuple)):
            runs = [check_array(r, dtype=float) for r in X]
        else:
            runs = [check_array(X, dtype=float)]
        dims = {r.shape[1] for r in runs}
        if len(dims) != 1:
            raise ValueError("all runs must share the coordinate count")
        return runs

    def _make_provider(self, columns: list[np.ndarray]) -> DigitProvider:
        if isinstance(self.provider, DigitProvider):
            return self.provider
        if callable(self.provider):
            return self.provider(columns, self.precision)
        if self.provider == "empirical":
            order = self.ngram_order if self.ngram_order is not None else self.precision
            return make_empirical(columns, order=order, smoothing=self.smoothing,
                                  precision=self.precision)
        raise ValueError(f"unknown provider choice {self.provider!r}")

    def fit(self, X, y=None):
        """Fit on one run (a 2-D array) or a list of runs."""
        runs = self._as_runs(X)
        self.quantizer_ = TrajectoryQuantizer(
            precision=self.precision, target_lo=self.target_lo,
            target_hi=self.target_hi).fit(np.vstack(runs))
        encoded = [self.quantizer_.transform(r) for r in runs]
        self.encoded_runs_ = encoded
        d = encoded[0].shape[1]
        config = SinkhornConfig(epsilon=self.epsilon, tol=self.sinkhorn_tol,
                                max_iters=self.sinkhorn_max_iters)
        self.providers_ = []
        self.partial_blocks_ = []
        blocks = []
        for i in range(d):
            columns = [run[:, i] for run in encoded]
            provider = self._make_provider(columns)
            self.providers_.append(provider)
            partial = estimate_rows(columns, provider, self.precision,
                                    branch_budget=self.branch_budget)
            self.partial_blocks_.append(partial)
            blocks.append(impute_missing_rows(partial, config))
        self.kernel_ = assemble(blocks, mixing=self.mixing)
        self.n_features_in_ = d
        return self

    def sample(self, theta0, n_steps: int = 1000, seed: int = 0) -> ForecastRun:
        """Sampled kernel rollout from one raw initial point."""
        check_is_fitted(self, "kernel_")
        return sample_trajectory(self.kernel_, theta0, n_steps=n_steps,
                                 seed=seed, maps=self.quantizer_.maps_)

    def predict(self, X0, n_steps: int = 1000, seed: int = 0,
                window: int = 100, tol_bins: int = 2) -> np.ndarray:
        """Decoded trailing-window modes of one rollout per initial point."""
        check_is_fitted(self, "kernel_")
        X0 = check_array(X0, dtype=float)
        out = np.empty(X0.shape)
        for r in range(X0.shape[0]):
            run = self.sample(X0[r], n_steps=n_steps, seed=seed + r)
            summary = detect_convergence(run.states, window=window, tol_bins=tol_bins)
            for i, amap in enumerate(self.quantizer_.maps_):
                out[r, i] = amap.invert(decode(int(summary.modes[i]), self.precision))
        return out

"""Digit quantization of scalar series.

A raw series is rescaled onto a fixed target interval by an affine map,
then every value is encoded as a zero padded k-digit integer state.
State sequences serialize to comma separated digit strings, which is the
exact text format consumed by next-digit providers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DegenerateSeriesError, MalformedContextError, OutOfRangeError

TARGET_LO = 1.5
TARGET_HI = 8.5


@dataclass(frozen=True)
class AffineMap:
    """Monotone affine rescaling of one coordinate onto a target interval."""

    scale: float
    offset: float
    source_lo: float
    source_hi: float
    target_lo: float = TARGET_LO
    target_hi: float = TARGET_HI

    def apply(self, x):
        """Map raw values into target units."""
        return self.offset + self.scale * np.asarray(x, dtype=float)

    def invert(self, y):
        """Map target-unit values back to raw units."""
        return (np.asarray(y, dtype=float) - self.offset) / self.scale


def fit_affine(series, target_lo: float = TARGET_LO, target_hi: float = TARGET_HI) -> AffineMap:
    """Fit the affine map sending the series extremes onto the target interval.

    Parameters
    ----------
    series : array-like
        Finite values with at least two distinct entries.
    target_lo, target_hi : float
        Interval endpoints the series minimum and maximum are mapped to.

    Returns
    -------
    AffineMap
        Map with positive scale; ``apply(min) == target_lo`` and
        ``apply(max) == target_hi`` up to roundoff.
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ValueError("series must be non-empty and finite")
    if not target_hi > target_lo:
        raise ValueError("target interval must have positive width")
    lo = float(x.min())
    hi = float(x.max())
    if hi == lo:
        raise DegenerateSeriesError("series has zero spread, affine map undefined")
    scale = (target_hi - target_lo) / (hi - lo)
    offset = target_lo - scale * lo
    return AffineMap(scale=scale, offset=offset, source_lo=lo, source_hi=hi,
                     target_lo=target_lo, target_hi=target_hi)


def n_states(precision: int) -> int:
    """Number of representable states at a digit precision."""
    if precision < 1:
        raise ValueError("precision must be a positive integer")
    return 10 ** precision


def band_range(precision: int) -> tuple[int, int]:
    """Inclusive state index range reachable from the target interval."""
    base = 10 ** (precision - 1)
    return int(np.ceil(TARGET_LO * base)), int(np.floor(TARGET_HI * base))


def encode(value, precision: int):
    """Encode target-unit values as k-digit integer states.

    The leading digit is the integer part, the remaining ``precision - 1``
    digits are fractional; rounding is half away from zero.  Scalars give an
    ``int``, arrays give an ``int64`` array.
    """
    base = 10 ** (precision - 1)
    scaled = np.asarray(value, dtype=float) * base
    idx = np.where(scaled >= 0, np.floor(scaled + 0.5), np.ceil(scaled - 0.5))
    if np.any(idx < 0) or np.any(idx > 10 ** precision - 1):
        raise OutOfRangeError(
            f"value outside the encodable range [0, {10 - 10 ** (1 - precision)}] "
            f"at precision {precision}")
    out = idx.astype(np.int64)
    return int(out) if np.ndim(value) == 0 else out


def decode(state, precision: int):
    """Decode integer states back to target-unit values (bin centers)."""
    idx = np.asarray(state, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= 10 ** precision):
        raise OutOfRangeError(f"state outside [0, {10 ** precision - 1}]")
    out = idx / 10 ** (precision - 1)
    return float(out) if np.ndim(state) == 0 else out


def serialize(states, precision: int) -> str:
    """Render a state sequence as comma separated zero padded digit groups."""
    idx = np.asarray(states, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= 10 ** precision):
        raise OutOfRangeError(f"state outside [0, {10 ** precision - 1}]")
    return ",".join(f"{s:0{precision}d}" for s in idx)


def parse(text: str, precision: int) -> np.ndarray:
    """Parse a serialized state string back into integer states."""
    if text == "":
        return np.empty(0, dtype=np.int64)
    states = []
    for group in text.split(","):
        if len(group) != precision or not group.isdigit():
            raise MalformedContextError(
                f"group {group!r} is not a {precision}-digit state")
        states.append(int(group))
    return np.asarray(states, dtype=np.int64)


def one_hot(state: int, precision: int) -> np.ndarray:
    """Dirac distribution on one state over the full state space."""
    size = n_states(precision)
    if not 0 <= state < size:
        raise OutOfRangeError(f"state outside [0, {size - 1}]")
    vec = np.zeros(size)
    vec[state] = 1.0
    return vec


class TrajectoryQuantizer(TransformerMixin, BaseEstimator):
    """Per-coordinate digit quantizer for iterate trajectories.

    ``fit`` learns one affine map per coordinate from the trajectory extremes,
    ``transform`` encodes raw iterates into integer digit states, and
    ``inverse_transform`` decodes states back to raw bin-center values.

    Parameters
    ----------
    precision : int
        Number of digits per state.
    target_lo, target_hi : float
        Interval the observed range of each coordinate is mapped onto.
    clip : bool
        When true, ``transform`` clamps values onto the target interval
        instead of letting far outliers fail the digit range check.
    """

    def __init__(self, precision: int = 2, target_lo: float = TARGET_LO,
                 target_hi: float = TARGET_HI, clip: bool = False):
        self.precision = precision
        self.target_lo = target_lo
        self.target_hi = target_hi
        self.clip = clip

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.maps_ = [fit_affine(X[:, j], self.target_lo, self.target_hi)
                      for j in range(X.shape[1])]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "maps_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns")
        out = np.empty(X.shape, dtype=np.int64)
        for j, amap in enumerate(self.maps_):
            scaled = amap.apply(X[:, j])
            if self.clip:
                scaled = np.clip(scaled, self.target_lo, self.target_hi)
            out[:, j] = encode(scaled, self.precision)
        return out

    def inverse_transform(self, S) -> np.ndarray:
        check_is_fitted(self, "maps_")
        S = check_array(S, dtype=np.int64)
        if S.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns")
        out = np.empty(S.shape, dtype=float)
        for j, amap in enumerate(self.maps_):
            out[:, j] = amap.invert(decode(S[:, j], self.precision))
        return out

    def serialize(self, S) -> list[str]:
        """Serialized digit string of each coordinate column."""
        S = check_array(S, dtype=np.int64)
        return [serialize(S[:, j], self.precision) for j in range(S.shape[1])]

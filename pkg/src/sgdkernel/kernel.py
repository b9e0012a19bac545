"""Transition matrix estimation from digit state trajectories.

Rows of the per-coordinate transition matrix are filled wherever the
trajectory visited a state, by querying a next-digit provider through the
hierarchical expansion; the remaining rows are imputed with debiased
Sinkhorn barycenters of the nearest filled rows.  Per-coordinate matrices
combine into a block kernel with mixing weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyTrajectoryError,
    NoFilledRowsError,
    OutOfRangeError,
)
from .providers import DigitProvider, hierarchy_pdf
from .quantizer import band_range, decode, n_states
from .sinkhorn import SinkhornConfig, debiased_sinkhorn_barycenter

DENSE_PRECISION_LIMIT = 3


def default_band(precision: int) -> tuple[int, int]:
    """Row and column storage window: the full state space while a dense
    square is affordable, otherwise the reachable target band."""
    if precision <= DENSE_PRECISION_LIMIT:
        return 0, n_states(precision) - 1
    return band_range(precision)


@dataclass
class PartialTransitionMatrix:
    """Row-stochastic matrix over a contiguous state band, filled row by row.

    ``probs[i]`` is the outgoing distribution of band state ``band_lo + i``
    over band columns.  ``filled`` marks rows backed by data (observed or
    imputed); ``visits`` counts provider-backed observations, so imputed
    rows keep a zero count.
    """

    precision: int
    band_lo: int
    band_hi: int
    probs: np.ndarray
    filled: np.ndarray
    visits: np.ndarray

    @classmethod
    def empty(cls, precision: int, band: tuple[int, int] | None = None) -> "PartialTransitionMatrix":
        lo, hi = band if band is not None else default_band(precision)
        if not 0 <= lo <= hi < n_states(precision):
            raise ValueError("band must be a valid state index range")
        size = hi - lo + 1
        return cls(precision=precision, band_lo=lo, band_hi=hi,
                   probs=np.zeros((size, size)), filled=np.zeros(size, dtype=bool),
                   visits=np.zeros(size, dtype=np.int64))

    @property
    def band_size(self) -> int:
        return self.band_hi - self.band_lo + 1

    @property
    def states(self) -> np.ndarray:
        """Absolute state indices of the band."""
        return np.arange(self.band_lo, self.band_hi + 1, dtype=np.int64)

    @property
    def grid(self) -> np.ndarray:
        """Decoded bin center values of the band states."""
        return decode(self.states, self.precision)

    def locate(self, state: int) -> int:
        if not self.band_lo <= state <= self.band_hi:
            raise OutOfRangeError(
                f"state {state} outside band [{self.band_lo}, {self.band_hi}]")
        return int(state) - self.band_lo

    def row(self, state: int) -> np.ndarray:
        """Outgoing distribution of a state over band columns (a view)."""
        return self.probs[self.locate(state)]

    def is_filled(self, state: int) -> bool:
        return bool(self.filled[self.locate(state)])

    def validate(self, tol: float = 1e-9) -> None:
        """Check filled rows are stochastic and unfilled rows are zero."""
        if np.any(self.probs < 0):
            raise ValueError("negative transition probability")
        sums = self.probs.sum(axis=1)
        if np.any(np.abs(sums[self.filled] - 1.0) > tol):
            raise ValueError("filled row does not sum to one")
        if np.any(sums[~self.filled] != 0.0):
            raise ValueError("unfilled row carries mass")

    def copy(self) -> "PartialTransitionMatrix":
        return PartialTransitionMatrix(
            precision=self.precision, band_lo=self.band_lo, band_hi=self.band_hi,
            probs=self.probs.copy(), filled=self.filled.copy(), visits=self.visits.copy())

    def save(self, path) -> None:
        """Binary serialization; ``load`` restores it bit for bit."""
        np.savez(path, precision=self.precision,
                 band=np.array([self.band_lo, self.band_hi], dtype=np.int64),
                 probs=self.probs, filled=self.filled, visits=self.visits)

    @classmethod
    def load(cls, path) -> "PartialTransitionMatrix":
        with np.load(path) as data:
            band = data["band"]
            return cls(precision=int(data["precision"]), band_lo=int(band[0]),
                       band_hi=int(band[1]), probs=data["probs"],
                       filled=data["filled"], visits=data["visits"])

    def to_csv(self, path, header_comment: str | None = None) -> None:
        """Plot-ready sparse triplets: row state, column state, probability.

        Only filled rows and nonzero entries are written; the binary ``save``
        form is the lossless one.
        """
        with open(path, "w", newline="") as fh:
            fh.write(f"# precision={self.precision} band={self.band_lo}:{self.band_hi}\n")
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["row_state", "col_state", "probability"])
            for i in np.flatnonzero(self.filled):
                for j in np.flatnonzero(self.probs[i]):
                    writer.writerow([self.band_lo + int(i), self.band_lo + int(j),
                                     repr(float(self.probs[i, j]))])


def estimate_rows(trajectories, provider: DigitProvider, precision: int,
                  branch_budget: int = 10,
                  band: tuple[int, int] | None = None) -> PartialTransitionMatrix:
    """Fill the rows of visited states from provider predictions.

    For every position ``t`` of every trajectory the provider is queried on
    the serialized context up to and including the state at ``t`` and the
    resulting next-state distribution is accumulated into that state's row.
    Rows visited several times store the average of their per-visit
    predictions.  Mass predicted outside the storage band is dropped and the
    row renormalized.

    Parameters
    ----------
    trajectories : iterable of integer state sequences
        One coordinate's encoded runs; contexts never span two runs.
    provider : DigitProvider
    precision : int
    branch_budget : int
        Hierarchical expansion budget per digit level.
    band : (int, int), optional
        Storage window override; defaults to ``default_band``.
    """
    matrix = PartialTransitionMatrix.empty(precision, band)
    lo, hi = matrix.band_lo, matrix.band_hi
    sums = np.zeros_like(matrix.probs)
    any_states = False
    for states in trajectories:
        states = np.asarray(states, dtype=np.int64).ravel()
        if states.size == 0:
            raise EmptyTrajectoryError("trajectory holds no states")
        any_states = True
        context_parts: list[str] = []
        for state in states:
            loc = matrix.locate(int(state))
            context_parts.append(f"{int(state):0{precision}d},")
            pdf = hierarchy_pdf(provider, "".join(context_parts), precision, branch_budget)
            band_probs = pdf.probs[lo:hi + 1]
            total = band_probs.sum()
            if total <= 0.0:
                raise ValueError("prediction has no mass inside the storage band")
            sums[loc] += band_probs / total
            matrix.visits[loc] += 1
    if not any_states:
        raise EmptyTrajectoryError("at least one trajectory is required")
    visited = matrix.visits > 0
    matrix.probs[visited] = sums[visited] / matrix.visits[visited, None]
    matrix.filled = visited
    return matrix


def impute_missing_rows(matrix: PartialTransitionMatrix,
                        config: SinkhornConfig | None = None) -> PartialTransitionMatrix:
    """Fill every unfilled row from the nearest filled neighbours.

    A gap row between filled rows ``a < c`` becomes the debiased Sinkhorn
    barycenter of those two rows with weights proportional to the opposite
    row distances; rows outside the filled span copy the nearest filled row.
    Returns a new fully filled matrix; observation counts are preserved so
    imputed rows remain recognizable by ``visits == 0``.
    """
    config = config or SinkhornConfig()
    filled_idx = np.flatnonzero(matrix.filled)
    if filled_idx.size == 0:
        raise NoFilledRowsError("no filled rows to impute from")
    out = matrix.copy()
    grid = matrix.grid
    epsilon = config.resolve_epsilon(matrix.precision)
    out.probs[:filled_idx[0]] = matrix.probs[filled_idx[0]]
    out.probs[filled_idx[-1] + 1:] = matrix.probs[filled_idx[-1]]
    for a, c in zip(filled_idx[:-1], filled_idx[1:]):
        if c - a <= 1:
            continue
        pair = matrix.probs[[a, c]]
        for m in range(a + 1, c):
            w = ((c - m) / (c - a), (m - a) / (c - a))
            out.probs[m] = debiased_sinkhorn_barycenter(
                pair, w, grid, epsilon=epsilon,
                max_iters=config.max_iters, tol=config.tol)
    out.filled[:] = True
    return out


@dataclass
class BlockKernel:
    """Per-coordinate transition blocks combined by mixing weights.

    ``blocks[i]`` drives coordinate ``i``; ``mixing`` is a row-stochastic
    matrix of weights over source coordinates.  With the default identity
    mixing every coordinate evolves from its own block.  Cross blocks (a
    mapping ``(i, j) -> matrix`` giving coordinate ``i``'s next state from
    coordinate ``j``'s current one) are accepted for propagation but are
    never estimated here.
    """

    blocks: list[PartialTransitionMatrix]
    mixing: np.ndarray
    cross_blocks: dict[tuple[int, int], PartialTransitionMatrix] = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return len(self.blocks)

    @property
    def precision(self) -> int:
        return self.blocks[0].precision

    def block(self, i: int, j: int) -> PartialTransitionMatrix:
        if i == j:
            return self.blocks[i]
        try:
            return self.cross_blocks[(i, j)]
        except KeyError:
            raise DimensionMismatchError(
                f"mixing weight ({i}, {j}) is nonzero but no such block exists") from None

    def save(self, path) -> None:
        arrays = {"mixing": self.mixing,
                  "precision": np.int64(self.precision),
                  "n_params": np.int64(self.n_params)}
        for i, blk in enumerate(self.blocks):
            arrays[f"block{i}_band"] = np.array([blk.band_lo, blk.band_hi], dtype=np.int64)
            arrays[f"block{i}_probs"] = blk.probs
            arrays[f"block{i}_filled"] = blk.filled
            arrays[f"block{i}_visits"] = blk.visits
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "BlockKernel":
        with np.load(path) as data:
            precision = int(data["precision"])
            blocks = []
            for i in range(int(data["n_params"])):
                band = data[f"block{i}_band"]
                blocks.append(PartialTransitionMatrix(
                    precision=precision, band_lo=int(band[0]), band_hi=int(band[1]),
                    probs=data[f"block{i}_probs"], filled=data[f"block{i}_filled"],
                    visits=data[f"block{i}_visits"]))
            return cls(blocks=blocks, mixing=data["mixing"])


def assemble(blocks, mixing=None, cross_blocks=None) -> BlockKernel:
    """Validate per-coordinate blocks and mixing weights into a kernel.

    All blocks must share one digit precision and be fully filled.  The
    mixing matrix defaults to the identity; rows must be nonnegative and sum
    to one.
    """
    blocks = list(blocks)
    if not blocks:
        raise DimensionMismatchError("at least one block is required")
    precision = blocks[0].precision
    for blk in blocks:
        if blk.precision != precision:
            raise DimensionMismatchError("blocks disagree on digit precision")
        if not np.all(blk.filled):
            raise ValueError("blocks must be fully filled; run impute_missing_rows first")
        blk.validate()
    d = len(blocks)
    mixing = np.eye(d) if mixing is None else np.asarray(mixing, dtype=float)
    if mixing.shape != (d, d):
        raise DimensionMismatchError(f"mixing must be {d}x{d}")
    if np.any(mixing < 0) or np.any(np.abs(mixing.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("mixing rows must be nonnegative and sum to one")
    return BlockKernel(blocks=blocks, mixing=mixing,
                       cross_blocks=dict(cross_blocks or {}))

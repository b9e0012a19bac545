"""Shared helpers for the test suite."""

import numpy as np
import pytest

from sgdkernel.providers import DigitProvider


class StubProvider(DigitProvider):
    """Provider answering from a fixed context -> digit-probability table.

    Unlisted contexts raise, so tests notice unexpected queries.  Values may
    be sparse dicts ``{digit: prob}`` or full ten-vectors.
    """

    def __init__(self, table):
        self.table = dict(table)
        self.queries = []

    def next_digit_probs(self, context):
        self.queries.append(context)
        if context not in self.table:
            raise KeyError(f"unexpected context {context!r}")
        entry = self.table[context]
        if isinstance(entry, dict):
            vec = np.zeros(10)
            for digit, prob in entry.items():
                vec[int(digit)] = prob
        else:
            vec = np.asarray(entry, dtype=float)
        return vec


class MemoizedRandomProvider(DigitProvider):
    """Deterministic random digit conditionals, one draw per fresh context."""

    def __init__(self, seed, concentration=0.4):
        self.rng = np.random.default_rng(seed)
        self.concentration = concentration
        self.memo = {}

    def next_digit_probs(self, context):
        if context not in self.memo:
            self.memo[context] = self.rng.dirichlet(np.full(10, self.concentration))
        return self.memo[context]


def random_band_matrix(rng, precision=2, band=(15, 85)):
    """Row-stochastic matrix over the full state space whose mass sits on a
    contiguous band; rows outside the band stay zero."""
    size = 10 ** precision
    lo, hi = band
    width = hi - lo + 1
    matrix = np.zeros((size, size))
    matrix[lo:hi + 1, lo:hi + 1] = rng.dirichlet(np.full(width, 0.5), size=width)
    return matrix


def sample_walk(rng, matrix, start, n_steps):
    """States of a random walk driven by a row-stochastic matrix."""
    states = np.empty(n_steps + 1, dtype=np.int64)
    states[0] = start
    size = matrix.shape[0]
    for t in range(n_steps):
        states[t + 1] = rng.choice(size, p=matrix[states[t]])
    return states


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

"""Two-state chain spectral analysis and estimation error scaling curves.

A two-state chain with self-transition probabilities ``p`` and ``q`` has
second eigenvalue ``p + q - 1``; total variation distance to the stationary
law contracts by exactly that factor every step.  The scaling experiment
measures how provider-based row estimates improve with context length and
fits power laws to the error curves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonErgodicChainError
from .providers import hierarchy_pdf, make_empirical, make_oracle
from .quantizer import band_range, encode, serialize

KL_FLOOR = 1e-12
TV_FLOOR = 1e-12


@dataclass(frozen=True)
class TwoStateChain:
    """Markov chain on two states with self-transition probabilities p, q."""

    p: float
    q: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError("p and q must lie in [0, 1]")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.p, 1.0 - self.p], [1.0 - self.q, self.q]])


def spectral_gap(chain: TwoStateChain) -> float:
    """``1 - |p + q - 1|``, the distance of the second eigenvalue from one."""
    return 1.0 - abs(chain.p + chain.q - 1.0)


def stationary(chain: TwoStateChain) -> np.ndarray:
    """Unique stationary distribution; requires a positive spectral gap."""
    if spectral_gap(chain) == 0.0:
        raise NonErgodicChainError("chain has no spectral gap")
    denom = 2.0 - chain.p - chain.q
    return np.array([(1.0 - chain.q) / denom, (1.0 - chain.p) / denom])


def tv_distance(u, v) -> float:
    """Total variation distance between two distributions."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise DimensionMismatchError("distributions differ in length")
    return 0.5 * float(np.abs(u - v).sum())


@dataclass
class MixingCheck:
    """Observed geometric decay of distance to stationarity."""

    rate: float
    contraction: float
    tvs: np.ndarray


def mixing_bound_check(chain: TwoStateChain, pi0, n_steps: int = 200) -> MixingCheck:
    """Propagate a start law and fit the geometric decay rate of its
    total variation distance to the stationary law.

    The fitted ``rate`` is the decay exponent (positive means mixing); steps
    whose distance has already hit floating point noise are excluded from
    the fit, and a chain that mixes exactly in one step reports ``inf``.
    """
    pi = np.asarray(pi0, dtype=float).ravel()
    if pi.shape != (2,) or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError("pi0 must be a distribution over two states")
    target = stationary(chain)
    matrix = chain.matrix
    tvs = np.empty(n_steps + 1)
    tvs[0] = tv_distance(pi, target)
    for t in range(n_steps):
        pi = pi @ matrix
        tvs[t + 1] = tv_distance(pi, target)
    valid = tvs > TV_FLOOR
    steps = np.flatnonzero(valid)
    if steps.size < 2:
        rate = np.inf
    else:
        slope = np.polyfit(steps, np.log(tvs[steps]), 1)[0]
        rate = -float(slope)
    return MixingCheck(rate=rate, contraction=abs(chain.p + chain.q - 1.0), tvs=tvs)


@dataclass
class PowerLawFit:
    """Least squares fit of ``log error = alpha * log length + beta``."""

    alpha: float
    beta: float
    r2: float


def fit_power_law(lengths, errors, min_length: int = 10,
                  floor: float = KL_FLOOR) -> PowerLawFit:
    """Log-log OLS fit of an error curve, ignoring very short contexts."""
    lengths = np.asarray(lengths, dtype=float).ravel()
    errors = np.asarray(errors, dtype=float).ravel()
    if lengths.shape != errors.shape:
        raise DimensionMismatchError("lengths and errors differ in shape")
    mask = lengths >= min_length
    if mask.sum() < 2:
        raise ValueError(f"need at least two lengths >= {min_length}")
    x = np.log(lengths[mask])
    y = np.log(np.maximum(errors[mask], floor))
    alpha, beta = np.polyfit(x, y, 1)
    resid = y - (alpha * x + beta)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot < 1e-30:
        return PowerLawFit(alpha=float(alpha), beta=float(beta), r2=1.0)
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return PowerLawFit(alpha=float(alpha), beta=float(beta), r2=r2)


def simulate_chain(chain: TwoStateChain, n_steps: int, rng) -> np.ndarray:
    """States 0/1 of one realization, started from the stationary law."""
    pi = stationary(chain)
    matrix = chain.matrix
    states = np.empty(n_steps, dtype=np.int64)
    state = int(rng.random() < pi[1])
    states[0] = state
    for t in range(1, n_steps):
        state = int(rng.random() < matrix[state, 1])
        states[t] = state
    return states


def embedded_states(state_values=(2.0, 8.0)) -> np.ndarray:
    """Digit states representing the two chain states at precision one."""
    digits = np.array([encode(v, 1) for v in state_values], dtype=np.int64)
    lo, hi = band_range(1)
    if digits[0] == digits[1] or np.any(digits < lo) or np.any(digits > hi):
        raise ValueError("state values must map to two distinct in-band digits")
    return digits


def embedded_rows(chain: TwoStateChain, digits) -> np.ndarray:
    """True transition rows of the embedded chain over the ten digit states."""
    rows = np.zeros((2, 10))
    matrix = chain.matrix
    for a in range(2):
        for b in range(2):
            rows[a, digits[b]] = matrix[a, b]
    return rows


def empirical_provider_factory(order: int = 2, smoothing: float = 0.1):
    """Factory training an n-gram provider on each observed sequence."""
    def factory(chain, states, precision):
        return make_empirical([states], order=order, smoothing=smoothing,
                              precision=precision)
    return factory


def oracle_provider_factory(state_values=(2.0, 8.0)):
    """Factory returning the exact embedded-chain oracle, ignoring the data."""
    digits = embedded_states(state_values)

    def factory(chain, states, precision):
        rows = embedded_rows(chain, digits)
        matrix = np.zeros((10, 10))
        matrix[digits[0]] = rows[0]
        matrix[digits[1]] = rows[1]
        return make_oracle(matrix, precision)
    return factory


@dataclass
class ScalingCurve:
    """Mean estimation errors of one chain across context lengths."""

    chain: TwoStateChain
    lengths: np.ndarray
    kl: np.ndarray
    tv: np.ndarray
    kl_fit: PowerLawFit
    tv_fit: PowerLawFit


def icl_scaling_experiment(chains, provider_factory, context_lengths, n_trials: int,
                           seed: int, state_values=(2.0, 8.0),
                           branch_budget: int = 10,
                           fit_min_length: int = 10) -> list[ScalingCurve]:
    """Estimation error of both transition rows versus context length.

    For every chain, context length and trial, a chain realization is
    embedded into digit states and serialized; the provider built by
    ``provider_factory(chain, states, precision)`` is asked, at each state's
    final occurrence, for the next-state distribution via the hierarchical
    expansion.  Errors against the true embedded rows are averaged per row
    (KL with a floored estimate, and total variation), over rows present in
    the realization, then over trials.  Power laws are fitted to both error
    curves.
    """
    digits = embedded_states(state_values)
    lengths = np.asarray(context_lengths, dtype=np.int64)
    if lengths.size == 0 or np.any(lengths < 1):
        raise ValueError("context lengths must be positive")
    chains = list(chains)
    root = np.random.SeedSequence(seed)
    curves = []
    for chain, chain_seed in zip(chains, root.spawn(len(chains))):
        true_rows = embedded_rows(chain, digits)
        kl_means = np.empty(lengths.shape[0])
        tv_means = np.empty(lengths.shape[0])
        for li, length in enumerate(lengths):
            kl_acc = []
            tv_acc = []
            for trial_seed in chain_seed.spawn(int(n_trials)):
                rng = np.random.default_rng(trial_seed)
                raw = simulate_chain(chain, int(length), rng)
                states = digits[raw]
                provider = provider_factory(chain, states, 1)
                kl_row = []
                tv_row = []
                for a in range(2):
                    hits = np.flatnonzero(states == digits[a])
                    if hits.size == 0:
                        continue
                    context = serialize(states[:hits[-1] + 1], 1)
                    est = hierarchy_pdf(provider, context, 1, branch_budget).probs
                    true = true_rows[a]
                    support = true > 0
                    kl_row.append(float(np.sum(
                        true[support] * np.log(true[support] / np.maximum(est[support], KL_FLOOR)))))
                    tv_row.append(tv_distance(true, est))
                if kl_row:
                    kl_acc.append(np.mean(kl_row))
                    tv_acc.append(np.mean(tv_row))
            kl_means[li] = float(np.mean(kl_acc))
            tv_means[li] = float(np.mean(tv_acc))
        curves.append(ScalingCurve(
            chain=chain, lengths=lengths, kl=kl_means, tv=tv_means,
            kl_fit=fit_power_law(lengths, kl_means, min_length=fit_min_length),
            tv_fit=fit_power_law(lengths, tv_means, min_length=fit_min_length)))
    return curves

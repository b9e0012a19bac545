"""Next-digit distribution providers and hierarchical state expansion.

A provider answers one question: given a serialized digit context, what is
the distribution of the next digit character?  Three kinds are supported:
an oracle that marginalizes a known transition matrix, an n-gram model
counted from serialized trajectories, and a remote adapter speaking a small
JSON-over-HTTP protocol.  ``hierarchy_pdf`` composes per-digit answers into
a full next-state distribution under a branch budget.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import requests

from .errors import (
    MalformedContextError,
    RemoteUnavailableError,
    UnknownStateError,
)
from .quantizer import serialize

REMOTE_ENDPOINT_ENV = "SGDKERNEL_REMOTE_ENDPOINT"
N_DIGITS = 10


def _split_tail(context: str, precision: int) -> tuple[str, str]:
    """Last complete state group and trailing partial digits of a context.

    The context must be a serialized prefix: complete ``precision``-digit
    groups separated by commas, optionally followed by a partial group.
    """
    parts = context.rsplit(",", 2)
    last = parts[-1]
    if len(last) == precision and last.isdigit():
        return last, ""
    if len(last) < precision and (last == "" or last.isdigit()):
        if len(parts) >= 2 and len(parts[-2]) == precision and parts[-2].isdigit():
            return parts[-2], last
        raise MalformedContextError(
            f"context tail {context[-24:]!r} has no complete state to condition on")
    raise MalformedContextError(f"context tail {context[-24:]!r} is not a serialized prefix")


class DigitProvider:
    """Interface: map a serialized context to a distribution over digits 0-9."""

    def next_digit_probs(self, context: str) -> np.ndarray:
        raise NotImplementedError


class OracleProvider(DigitProvider):
    """Exact digit conditionals of a known row-stochastic transition matrix.

    The context tail selects the conditioning state; the returned vector is
    the conditional distribution of the next digit given the digits of the
    next state emitted so far.
    """

    def __init__(self, matrix, precision: int):
        matrix = np.asarray(matrix, dtype=float)
        size = 10 ** precision
        if matrix.shape != (size, size):
            raise ValueError(f"matrix must be {size}x{size} for precision {precision}")
        sums = matrix.sum(axis=1)
        ok = (np.abs(sums - 1.0) <= 1e-9) | (sums == 0.0)
        if np.any(matrix < 0) or not np.all(ok):
            raise ValueError("rows must be stochastic (or identically zero)")
        self.matrix = matrix
        self.precision = precision

    def next_digit_probs(self, context: str) -> np.ndarray:
        state, partial = _split_tail(context, self.precision)
        row = self.matrix[int(state)]
        total = row.sum()
        if total <= 0.0:
            raise UnknownStateError(f"state {state} has no outgoing mass")
        cond = row.reshape((N_DIGITS,) * self.precision)
        for ch in partial:
            cond = cond[int(ch)]
        marginal = cond.reshape(N_DIGITS, -1).sum(axis=1)
        mass = marginal.sum()
        if mass <= 0.0:
            return np.full(N_DIGITS, 1.0 / N_DIGITS)
        return marginal / mass


def _digit_window(text: str, order: int, end: int | None = None) -> str:
    """Slice of ``text[:end]`` containing its last ``order`` digits.

    Separator commas inside the slice are kept, so the same digits seen at
    different offsets from a state boundary produce different keys.
    """
    if end is None:
        end = len(text)
    seen = 0
    for i in range(end - 1, -1, -1):
        if text[i].isdigit():
            seen += 1
            if seen == order:
                return text[i:end]
    return text[:end]


class EmpiricalProvider(DigitProvider):
    """N-gram model over serialized trajectories, order counted in digits.

    The key before each position is the shortest trailing slice holding the
    previous ``order`` digit characters (commas included, so keys distinguish
    state-boundary phases).  Queries apply Laplace smoothing; unseen keys
    fall back to the uniform digit distribution.
    """

    def __init__(self, order: int, smoothing: float):
        if order < 1:
            raise ValueError("order must be a positive integer")
        if smoothing <= 0:
            raise ValueError("smoothing must be positive")
        self.order = int(order)
        self.smoothing = float(smoothing)
        self._counts: dict[str, np.ndarray] = {}

    def add_text(self, text: str) -> None:
        """Count digit continuations of every key in one serialized string."""
        order = self.order
        for i, ch in enumerate(text):
            if ch.isdigit():
                key = _digit_window(text, order, end=i)
                vec = self._counts.get(key)
                if vec is None:
                    vec = np.zeros(N_DIGITS)
                    self._counts[key] = vec
                vec[int(ch)] += 1.0

    def next_digit_probs(self, context: str) -> np.ndarray:
        key = _digit_window(context, self.order)
        vec = self._counts.get(key)
        if vec is None:
            return np.full(N_DIGITS, 1.0 / N_DIGITS)
        alpha = self.smoothing
        return (vec + alpha) / (vec.sum() + N_DIGITS * alpha)


def make_oracle(matrix, precision: int) -> OracleProvider:
    """Oracle provider for a known transition matrix."""
    return OracleProvider(matrix, precision)


def make_empirical(trajectories, order: int, smoothing: float,
                   precision: int) -> EmpiricalProvider:
    """N-gram provider trained on serialized state trajectories.

    Each trajectory is a sequence of integer states at the given precision;
    trajectories are serialized and counted independently, so no key spans
    two trajectories.
    """
    provider = EmpiricalProvider(order=order, smoothing=smoothing)
    count = 0
    for states in trajectories:
        provider.add_text(serialize(states, precision))
        count += 1
    if count == 0:
        raise ValueError("at least one trajectory is required")
    return provider


class RemoteProvider(DigitProvider):
    """Adapter for an HTTP endpoint that scores next-token logits.

    Each query posts ``{"context": <serialized prefix>}`` and expects a JSON
    body with a ``logits`` array.  With ``digit_token_ids`` unset the array
    must hold exactly ten values, the logits of the digit characters 0-9 in
    order; otherwise it may be a full vocabulary array from which the ten
    configured token positions are gathered.  Logits are turned into
    probabilities by a softmax at the configured temperature.  A shared
    session pools connections across queries.
    """

    def __init__(self, endpoint: str, temperature: float = 1.0,
                 digit_token_ids=None, timeout: float = 10.0, session=None):
        if not endpoint:
            raise ValueError("endpoint must be a non-empty URL")
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.endpoint = endpoint
        self.temperature = float(temperature)
        if digit_token_ids is not None:
            digit_token_ids = np.asarray(digit_token_ids, dtype=int)
            if digit_token_ids.shape != (N_DIGITS,):
                raise ValueError("digit_token_ids must list exactly ten token positions")
        self.digit_token_ids = digit_token_ids
        self.timeout = timeout
        self._session = session or requests.Session()

    def next_digit_probs(self, context: str) -> np.ndarray:
        try:
            response = self._session.post(
                self.endpoint, json={"context": context}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise RemoteUnavailableError(f"endpoint {self.endpoint} unreachable: {exc}") from exc
        if response.status_code != 200:
            raise RemoteUnavailableError(
                f"endpoint {self.endpoint} returned status {response.status_code}")
        try:
            logits = np.asarray(response.json()["logits"], dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise RemoteUnavailableError(
                f"endpoint {self.endpoint} sent an unusable body: {exc}") from exc
        if self.digit_token_ids is not None:
            if logits.ndim != 1 or logits.shape[0] <= int(self.digit_token_ids.max()):
                raise RemoteUnavailableError("logits array shorter than configured token ids")
            logits = logits[self.digit_token_ids]
        elif logits.shape != (N_DIGITS,):
            raise RemoteUnavailableError("expected exactly ten digit logits")
        z = logits / self.temperature
        z = z - z.max()
        probs = np.exp(z)
        return probs / probs.sum()


def make_remote(endpoint: str | None = None, temperature: float = 1.0,
                digit_token_ids=None, timeout: float = 10.0) -> RemoteProvider:
    """Remote provider; the endpoint falls back to the environment variable
    ``SGDKERNEL_REMOTE_ENDPOINT`` when not given explicitly."""
    endpoint = endpoint or os.environ.get(REMOTE_ENDPOINT_ENV)
    if not endpoint:
        raise ValueError(
            f"no endpoint given and {REMOTE_ENDPOINT_ENV} is not set")
    return RemoteProvider(endpoint, temperature=temperature,
                          digit_token_ids=digit_token_ids, timeout=timeout)


@dataclass
class DigitPdf:
    """Next-state distribution together with the number of provider queries."""

    probs: np.ndarray
    query_count: int


def hierarchy_pdf(provider: DigitProvider, context: str, precision: int,
                  branch_budget: int = 10) -> DigitPdf:
    """Expand per-digit conditionals into a next-state distribution.

    Starting from the empty prefix, each digit level queries the provider for
    the continuation of the ``branch_budget`` heaviest prefixes; a prefix that
    is not expanded spreads its weight uniformly over all states below it.
    The context must end at a state boundary; a trailing comma is appended
    before querying when absent.  At most ``1 + branch_budget * (precision - 1)``
    queries are made.

    Returns
    -------
    DigitPdf
        Normalized distribution over all ``10**precision`` states plus the
        query count actually used.
    """
    if branch_budget < 1:
        raise ValueError("branch_budget must be at least 1")
    if precision < 1:
        raise ValueError("precision must be a positive integer")
    if context == "" or context.endswith(","):
        base = context
    else:
        tail = context.rsplit(",", 1)[-1]
        if len(tail) != precision or not tail.isdigit():
            raise MalformedContextError("context must end at a state boundary")
        base = context + ","

    size = 10 ** precision
    probs = np.zeros(size)
    prefixes: list[tuple[str, float]] = [("", 1.0)]
    queries = 0
    for level in range(precision):
        prefixes.sort(key=lambda pw: (-pw[1], pw[0]))
        expand = prefixes[:branch_budget]
        for prefix, weight in prefixes[branch_budget:]:
            if weight > 0.0:
                span = 10 ** (precision - len(prefix))
                start = int(prefix) * span if prefix else 0
                probs[start:start + span] += weight / span
        children: list[tuple[str, float]] = []
        for prefix, weight in expand:
            if weight <= 0.0:
                continue
            digit_probs = provider.next_digit_probs(base + prefix)
            queries += 1
            for digit in range(N_DIGITS):
                children.append((prefix + str(digit), weight * float(digit_probs[digit])))
        prefixes = children
    for prefix, weight in prefixes:
        probs[int(prefix)] += weight
    total = probs.sum()
    if total <= 0.0:
        raise ValueError("provider returned no probability mass")
    return DigitPdf(probs=probs / total, query_count=queries)

"""Two-state Markov infection model: parameters, sampling and entropies.

State 0 is healthy, state 1 infected.  The chain moves 0 -> 1 with probability
``alpha`` and 1 -> 0 with probability ``beta`` and is started in its stationary
distribution ``(q, 1 - q)`` with ``q = alpha / (alpha + beta)``.

All logarithms are base 2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from burstgt.rng import make_rng


@dataclass(frozen=True)
class MarkovParams:
    """Chain parameters for a population of ``n`` items.

    Built either from the scaled form ``alpha = k_prime * log2(n) / n``
    (:func:`derive_params`) or from explicit rates (:func:`params_from_rates`).
    """

    alpha: float
    beta: float
    n: int
    k_prime: float

    @property
    def q(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def k(self) -> float:
        return self.k_prime / self.beta

    @property
    def expected_burst_length(self) -> float:
        return 1.0 / self.beta

    @property
    def stationary(self) -> tuple[float, float]:
        return (1.0 - self.q, self.q)


def _check_beta(beta):
    if not (0.0 < beta <= 1.0):
        raise ValueError(f"beta must lie in (0, 1], got {beta}")


def derive_params(k_prime: float, beta: float, n: int) -> MarkovParams:
    if k_prime <= 0:
        raise ValueError(f"k_prime must be positive, got {k_prime}")
    _check_beta(beta)
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    alpha = k_prime * math.log2(n) / n
    if alpha >= 1.0:
        raise ValueError(f"n={n} too small: alpha = k_prime*log2(n)/n = {alpha:.4g} >= 1")
    return MarkovParams(alpha=alpha, beta=beta, n=n, k_prime=k_prime)


def params_from_rates(alpha: float, beta: float, n: int) -> MarkovParams:
    """Explicit ``(alpha, beta)`` override; ``k_prime`` is back-computed."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    _check_beta(beta)
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    k_prime = alpha * n / math.log2(n) if n >= 2 else 0.0
    return MarkovParams(alpha=alpha, beta=beta, n=n, k_prime=k_prime)


@dataclass(frozen=True)
class InfectionVector:
    bits: np.ndarray
    infected_count: int = field(init=False)
    run_starts: np.ndarray = field(init=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "infected_count", int(bits.sum()))
        prev = np.concatenate(([False], bits[:-1]))
        object.__setattr__(self, "run_starts", np.flatnonzero(bits & ~prev))

    @property
    def n(self) -> int:
        return self.bits.size

    @property
    def infected(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def run_lengths(self) -> np.ndarray:
        prev = np.concatenate(([False], self.bits))
        nxt = np.concatenate((self.bits, [False]))
        ends = np.flatnonzero(prev & ~nxt)
        return ends - self.run_starts


def infected_runs(rng, alpha, beta, n, first_state):
    """Start and length of every infected run in a chain of length ``n``.

    Sojourn times are geometric (leave state 0 w.p. ``alpha``, state 1 w.p.
    ``beta``), so the cost is proportional to the number of runs, not ``n``.
    """
    starts, lengths = [], []
    pos, state = 0, first_state
    while pos < n:
        leave = beta if state else alpha
        if leave <= 0.0:
            run = n - pos
        else:
            run = int(rng.geometric(leave))
        if state:
            starts.append(pos)
            lengths.append(min(run, n - pos))
        pos += run
        state = 1 - state
    return starts, lengths


def sample_infection_vector(params: MarkovParams, seed: int, stream: int) -> InfectionVector:
    rng = make_rng(seed, stream)
    n = params.n
    first = int(rng.random() < params.q)
    starts, lengths = infected_runs(rng, params.alpha, params.beta, n, first)
    bits = np.zeros(n, dtype=bool)
    for s, length in zip(starts, lengths):
        bits[s:s + length] = True
    return InfectionVector(bits)


def sample_chain_naive(alpha: float, beta: float, n: int, size: int, rng) -> np.ndarray:
    """Per-bit reference sampler, vectorised over ``size`` independent chains."""
    q = alpha / (alpha + beta)
    u = rng.random((size, n))
    out = np.empty((size, n), dtype=bool)
    out[:, 0] = u[:, 0] < q
    for i in range(1, n):
        prev = out[:, i - 1]
        out[:, i] = np.where(prev, u[:, i] >= beta, u[:, i] < alpha)
    return out


def binary_entropy(p: float) -> float:
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    # log1p keeps the (1-p) term accurate when p is tiny
    return -p * math.log2(p) - (1.0 - p) * math.log1p(-p) / math.log(2)


def _check_rates(alpha, beta):
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise ValueError(f"transition probabilities must lie in [0, 1], got {alpha}, {beta}")
    if alpha == 0.0 and beta == 0.0:
        raise ValueError("alpha = beta = 0 has no unique stationary distribution")


def entropy_chain_rule(alpha: float, beta: float, n: int) -> float:
    """Exact H(U^n) in bits: H(U_1) + (n - 1) H(U_2 | U_1)."""
    _check_rates(alpha, beta)
    q = alpha / (alpha + beta)
    conditional = q * binary_entropy(beta) + (1.0 - q) * binary_entropy(alpha)
    return binary_entropy(q) + (n - 1) * conditional


def entropy_brute_force(alpha: float, beta: float, n: int) -> float:
    """H(U^n) by enumerating all 2**n sequences (n <= 20)."""
    _check_rates(alpha, beta)
    if n > 20:
        raise ValueError(f"brute-force enumeration limited to n <= 20, got {n}")
    q = alpha / (alpha + beta)
    step = {(0, 0): 1.0 - alpha, (0, 1): alpha, (1, 0): beta, (1, 1): 1.0 - beta}
    total = 0.0
    for seq in itertools.product((0, 1), repeat=n):
        prob = q if seq[0] else 1.0 - q
        for a, b in zip(seq, seq[1:]):
            prob *= step[a, b]
            if prob == 0.0:
                break
        if prob > 0.0:
            total -= prob * math.log2(prob)
    return total


def entropy_asymptotic(k_prime: float, n: int) -> float:
    """Leading-order entropy ``k_prime * log2(n)**2``."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return k_prime * math.log2(n) ** 2

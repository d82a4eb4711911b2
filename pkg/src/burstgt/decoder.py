"""Per-item decoder: negative-test screening followed by a participation threshold."""

from dataclasses import dataclass, field

import numpy as np

from burstgt.channel import OutcomeVector
from burstgt.design import TestMatrix


@dataclass(frozen=True)
class DecodeResult:
    u_tilde: np.ndarray
    u_hat: np.ndarray
    gamma: float


@dataclass(frozen=True)
class ErrorTally:
    false_positives: int
    false_negatives: int
    exact_match: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "exact_match",
                           self.false_positives == 0 and self.false_negatives == 0)


def _outcome_bits(outcomes):
    return np.asarray(getattr(outcomes, "bits", outcomes), dtype=bool)


def screen(matrix: TestMatrix, outcomes: OutcomeVector) -> np.ndarray:
    """Flag every item that never appears in a negative test.

    Items in no test at all keep the flag.
    """
    y = _outcome_bits(outcomes)
    if y.shape != (matrix.T,):
        raise ValueError(f"outcome vector has length {y.size}, matrix has T={matrix.T}")
    negative_entries = ~y[matrix.row_ids()]
    u_tilde = np.ones(matrix.n, dtype=bool)
    u_tilde[matrix.indices[negative_entries]] = False
    return u_tilde


def threshold_decode(u_tilde, counts, gamma: float) -> np.ndarray:
    u_tilde = np.asarray(u_tilde, dtype=bool)
    counts = np.asarray(counts)
    if u_tilde.shape != counts.shape:
        raise ValueError("u_tilde and counts differ in length")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    return u_tilde & (counts >= gamma)


def decode(matrix: TestMatrix, outcomes: OutcomeVector, gamma: float) -> DecodeResult:
    u_tilde = screen(matrix, outcomes)
    u_hat = threshold_decode(u_tilde, matrix.participation_counts, gamma)
    return DecodeResult(u_tilde=u_tilde, u_hat=u_hat, gamma=gamma)


def tally_errors(truth, estimate) -> ErrorTally:
    u = np.asarray(getattr(truth, "bits", truth), dtype=bool)
    u_hat = np.asarray(getattr(estimate, "u_hat", estimate), dtype=bool)
    if u.shape != u_hat.shape:
        raise ValueError(f"length mismatch: {u.size} vs {u_hat.size}")
    return ErrorTally(false_positives=int(np.sum(~u & u_hat)),
                      false_negatives=int(np.sum(u & ~u_hat)))

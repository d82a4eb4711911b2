"""Noiseless OR channel: a test is positive iff it pools an infected item."""

from dataclasses import dataclass, field

import numpy as np

from burstgt.design import TestMatrix


@dataclass(frozen=True)
class OutcomeVector:
    bits: np.ndarray
    positive_count: int = field(init=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "positive_count", int(bits.sum()))

    @property
    def T(self) -> int:
        return self.bits.size


def _as_bits(infections):
    return np.asarray(getattr(infections, "bits", infections), dtype=bool)


def run_tests(matrix: TestMatrix, infections) -> OutcomeVector:
    """Outcome of every test in ``matrix`` against an infection vector.

    Each stored entry probes an infected-item bitmap, so the cost is the number
    of nonzeros of the matrix.
    """
    infected = _as_bits(infections)
    if infected.shape != (matrix.n,):
        raise ValueError(f"infection vector has length {infected.size}, matrix has n={matrix.n}")
    hits = infected[matrix.indices]
    positives = np.bincount(matrix.row_ids()[hits], minlength=matrix.T)
    return OutcomeVector(positives > 0)

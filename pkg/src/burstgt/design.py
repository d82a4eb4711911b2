"""Randomized test designs.

The block design partitions items into ``n / C`` contiguous blocks.  Each test
row selects every block independently with probability ``p1`` and then every
item of a selected block independently with probability ``p2``.  The i.i.d.
baseline includes every item in every test independently with probability
``p``.

Matrices are stored row-sparse (CSR).  Item indices are 0-based in memory and
1-based in the text dump format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from burstgt.markov import MarkovParams
from burstgt.rng import bernoulli_positions, make_rng


class DesignError(ValueError):
    pass


def block_infection_prob(q: float, alpha: float, C: int) -> float:
    """Probability that a block of ``C`` consecutive items holds an infection."""
    if not (0.0 <= q < 1.0 and 0.0 <= alpha < 1.0):
        raise ValueError(f"q and alpha must lie in [0, 1), got {q}, {alpha}")
    if C < 1:
        raise ValueError(f"C must be >= 1, got {C}")
    return 1.0 - (1.0 - q) * (1.0 - alpha) ** (C - 1)


@dataclass(frozen=True)
class DesignParams:
    n: int
    C: int
    nu: float
    epsilon: float
    tau: float
    p1: float
    p2: float
    T: int
    gamma: float
    q_tilde: float
    kind: str = "block"

    @property
    def p(self) -> float:
        return self.p1 * self.p2

    @property
    def num_blocks(self) -> int:
        return self.n // self.C


def _num_tests(tau, markov):
    return max(1, math.ceil(tau * markov.n * markov.q * math.log2(markov.n)))


def _check_common(nu, epsilon, tau):
    if nu <= 0:
        raise DesignError(f"nu must be positive, got {nu}")
    if not (0.0 <= epsilon < 1.0):
        raise DesignError(f"epsilon must lie in [0, 1), got {epsilon}")
    if tau <= 0:
        raise DesignError(f"tau must be positive, got {tau}")


def derive_design(markov: MarkovParams, C: int, nu: float, epsilon: float, tau: float) -> DesignParams:
    """Block design with ``p1 = nu*C/(n*q_tilde)``, ``p2 = 1 - 1/n``,
    ``T = ceil(tau * n*q * log2 n)`` and threshold ``gamma = p1*p2*(1-eps)*T``.
    """
    _check_common(nu, epsilon, tau)
    n = markov.n
    if C < 1 or n % C:
        raise DesignError(f"block mismatch: C={C} does not divide n={n}")
    if markov.q <= 0.0:
        raise DesignError("infection probability q is zero; the design is undefined")
    q_tilde = block_infection_prob(markov.q, markov.alpha, C)
    p1 = nu * C / (n * q_tilde)
    if p1 >= 1.0:
        raise DesignError(f"n too small: p1 = nu*C/(n*q_tilde) = {p1:.4g} >= 1")
    p2 = 1.0 - 1.0 / n
    T = _num_tests(tau, markov)
    gamma = p1 * p2 * (1.0 - epsilon) * T
    return DesignParams(n=n, C=C, nu=nu, epsilon=epsilon, tau=tau, p1=p1, p2=p2,
                        T=T, gamma=gamma, q_tilde=q_tilde, kind="block")


def derive_iid_design(markov: MarkovParams, nu: float, epsilon: float, tau: float) -> DesignParams:
    """i.i.d. baseline with inclusion probability ``p = nu / (n*q)``.

    Stored as a degenerate block design (``C = 1``, ``p2 = 1``) so the decoder
    and bounds read the same fields.
    """
    _check_common(nu, epsilon, tau)
    n = markov.n
    if markov.q <= 0.0:
        raise DesignError("infection probability q is zero; the design is undefined")
    p = nu / (n * markov.q)
    if p >= 1.0:
        raise DesignError(f"n too small: p = nu/(n*q) = {p:.4g} >= 1")
    T = _num_tests(tau, markov)
    return DesignParams(n=n, C=1, nu=nu, epsilon=epsilon, tau=tau, p1=p, p2=1.0,
                        T=T, gamma=p * (1.0 - epsilon) * T, q_tilde=markov.q, kind="iid")


@dataclass(frozen=True, eq=False)
class TestMatrix:
    """T x n binary test matrix in CSR form.

    Row ``t`` holds the sorted item indices ``indices[indptr[t]:indptr[t+1]]``.
    """

    __test__ = False  # keep pytest from collecting this class

    n: int
    T: int
    indptr: np.ndarray
    indices: np.ndarray
    participation_counts: np.ndarray = field(init=False)

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        if indptr.shape != (self.T + 1,) or indptr[0] != 0 or indptr[-1] != indices.size:
            raise ValueError("inconsistent indptr")
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "participation_counts",
                           np.bincount(indices, minlength=self.n).astype(np.int64))

    @classmethod
    def from_rows(cls, n: int, rows) -> "TestMatrix":
        rows = [np.unique(np.asarray(r, dtype=np.int64)) for r in rows]
        lengths = [r.size for r in rows]
        indptr = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
        indices = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
        return cls(n=n, T=len(rows), indptr=indptr, indices=indices)

    @classmethod
    def from_dense(cls, dense) -> "TestMatrix":
        dense = np.asarray(dense, dtype=bool)
        return cls.from_rows(dense.shape[1], [np.flatnonzero(r) for r in dense])

    def row(self, t: int) -> np.ndarray:
        return self.indices[self.indptr[t]:self.indptr[t + 1]]

    @property
    def rows(self) -> list[np.ndarray]:
        return [self.row(t) for t in range(self.T)]

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry, aligned with ``indices``."""
        return np.repeat(np.arange(self.T, dtype=np.int64), np.diff(self.indptr))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.T, self.n), dtype=bool)
        dense[self.row_ids(), self.indices] = True
        return dense

    def density(self) -> float:
        return self.indices.size / (self.T * self.n)

    def check(self) -> None:
        """Raise ``AssertionError`` if any structural invariant fails."""
        assert self.indices.size == 0 or (self.indices.min() >= 0 and self.indices.max() < self.n)
        for t in range(self.T):
            r = self.row(t)
            assert np.all(np.diff(r) > 0), f"row {t} not strictly increasing"
        recount = np.zeros(self.n, dtype=np.int64)
        for t in range(self.T):
            recount[self.row(t)] += 1
        assert np.array_equal(recount, self.participation_counts)

    def __eq__(self, other):
        if not isinstance(other, TestMatrix):
            return NotImplemented
        return (self.n == other.n and self.T == other.T
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"{self.n} {self.T}\n")
            for t in range(self.T):
                fh.write(" ".join(str(i + 1) for i in self.row(t)) + "\n")

    @classmethod
    def load(cls, path) -> "TestMatrix":
        lines = Path(path).read_text().splitlines()
        n, T = (int(v) for v in lines[0].split())
        rows = [[int(v) - 1 for v in line.split()] for line in lines[1:T + 1]]
        rows += [[]] * (T - len(rows))
        return cls.from_rows(n, rows)


def sample_block_matrix(design: DesignParams, seed: int, stream: int) -> TestMatrix:
    rng = make_rng(seed, stream)
    n, C, T = design.n, design.C, design.T
    nb = n // C
    # Row-major over (test, block), so surviving entries come out sorted per row.
    chosen = bernoulli_positions(rng, T * nb, design.p1)
    rows = np.repeat(chosen // nb, C)
    items = ((chosen % nb)[:, None] * C + np.arange(C)).ravel()
    keep = bernoulli_positions(rng, items.size, design.p2)
    rows, items = rows[keep], items[keep]
    indptr = np.concatenate(([0], np.cumsum(np.bincount(rows, minlength=T))))
    return TestMatrix(n=n, T=T, indptr=indptr, indices=items)


def sample_iid_matrix(n: int, T: int, p: float, seed: int, stream: int) -> TestMatrix:
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = make_rng(seed, stream)
    pos = bernoulli_positions(rng, T * n, p)
    rows, items = pos // n, pos % n
    indptr = np.concatenate(([0], np.cumsum(np.bincount(rows, minlength=T))))
    return TestMatrix(n=n, T=T, indptr=indptr, indices=items)


def sample_matrix(design: DesignParams, seed: int, stream: int) -> TestMatrix:
    if design.kind == "iid":
        return sample_iid_matrix(design.n, design.T, design.p, seed, stream)
    return sample_block_matrix(design, seed, stream)

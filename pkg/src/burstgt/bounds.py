"""Closed-form error bounds and testing rates.

Rates are in units of tests per ``n*q*log2(n)``.  Divergences are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from burstgt.design import DesignParams
from burstgt.markov import MarkovParams, derive_params, entropy_chain_rule

# Stand-in for C -> infinity.  Truncation error is bounded by
# achievable_truncation_error(..., C=LARGE_C, ...).
LARGE_C = 10**9
EXACT_TAIL_MAX_T = 10**4


@dataclass(frozen=True)
class RateBound:
    tau: float
    kind: str
    parameters: dict = field(default_factory=dict)


def _xlog2(a, b):
    return 0.0 if a == 0.0 else a * math.log2(a / b)


def kl_div_bernoulli(a: float, b: float) -> float:
    """D(Bern(a) || Bern(b)) in bits."""
    if not (0.0 < b < 1.0):
        raise ValueError(f"b must lie in (0, 1), got {b}")
    if not (0.0 <= a <= 1.0):
        raise ValueError(f"a must lie in [0, 1], got {a}")
    return max(0.0, _xlog2(a, b) + _xlog2(1.0 - a, 1.0 - b))


def kl_quadratic_lower(x: float, y: float) -> float:
    """Quadratic lower bound ``(x - y)**2 / (2 y)`` on the Bernoulli divergence.

    Valid for ``0 <= x <= y < 1``.  The bound holds for the divergence in nats
    (second derivative ``1/xi + 1/(1-xi) >= 1/y`` on ``[x, y]``) and therefore
    also in bits, which is ``1/ln 2`` times larger.
    """
    if not (0.0 < y < 1.0 and 0.0 <= x <= y):
        raise ValueError(f"need 0 <= x <= y < 1, got x={x}, y={y}")
    return (x - y) ** 2 / (2.0 * y)


def binomial_lower_tail(T: int, p: float, x: float) -> float:
    """Exact P(Bin(T, p) <= x), summed in log space."""
    if T > EXACT_TAIL_MAX_T:
        raise ValueError(f"exact tail limited to T <= {EXACT_TAIL_MAX_T}, got {T}")
    top = math.floor(x)
    if top < 0:
        return 0.0
    if top >= T:
        return 1.0
    ks = np.arange(top + 1)
    return float(min(1.0, math.exp(special.logsumexp(stats.binom.logpmf(ks, T, p)))))


def fn_bound(T: int, p: float, epsilon: float) -> float:
    """Chernoff bound ``2**(-T * D(p(1-eps) || p))`` on the false-negative rate.

    ``epsilon = 0`` gives the vacuous value 1.
    """
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not (0.0 <= epsilon < 1.0):
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    return 2.0 ** (-T * kl_div_bernoulli(p * (1.0 - epsilon), p))


def r_n_constant(p1: float, p2: float, q: float, q_tilde: float, n: int, C: int) -> float:
    """Base of the geometric false-positive bound."""
    if q >= 1.0:
        raise ValueError("q must be < 1")
    if n % C:
        raise ValueError(f"C={C} does not divide n={n}")
    kept = (1.0 - p1) ** (q_tilde * (n / C - 1)) * (1.0 - p2) ** (q * (C - 1))
    return (1.0 - kept) / (1.0 - q)


def design_r_n(markov: MarkovParams, design: DesignParams) -> float:
    return r_n_constant(design.p1, design.p2, markov.q, design.q_tilde, markov.n, design.C)


def fp_bound(gamma: float, r_n: float) -> float:
    if r_n < 0 or gamma < 0:
        raise ValueError("r_n and gamma must be non-negative")
    return r_n ** gamma


def screening_survival_bound(markov: MarkovParams, design: DesignParams, gamma: float) -> float:
    """Upper bound on P(item survives screening | in ``gamma`` tests, healthy)."""
    return fp_bound(gamma, design_r_n(markov, design))


@dataclass(frozen=True)
class ErrorBound:
    fn_term: float
    fp_term: float

    @property
    def total(self) -> float:
        return self.fn_term + self.fp_term

    @property
    def dominant(self) -> str:
        return "false_negative" if self.fn_term >= self.fp_term else "false_positive"

    @property
    def vacuous(self) -> bool:
        return self.total >= 1.0


def error_bound_terms(markov: MarkovParams, design: DesignParams) -> ErrorBound:
    n = markov.n
    fn = markov.k * math.log2(n) * fn_bound(design.T, design.p, design.epsilon)
    fp = n * fp_bound(design.p * (1.0 - design.epsilon) * design.T, design_r_n(markov, design))
    return ErrorBound(fn_term=fn, fp_term=fp)


def total_error_bound(markov: MarkovParams, design: DesignParams) -> float:
    return error_bound_terms(markov, design).total


def _nu_log_term(nu):
    return nu * math.log2(-math.expm1(-nu))


def achievable_rate(beta: float, k_prime: float, C: float, nu: float) -> RateBound:
    """Rate reached by the block design with block size ``C`` and constant ``nu``.

    ``C = math.inf`` is evaluated at ``LARGE_C``.
    """
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if not (0.0 < beta <= 1.0):
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if C < 1:
        raise ValueError(f"C must be >= 1, got {C}")
    C_eval = LARGE_C if math.isinf(C) else C
    k = k_prime / beta
    denom = _nu_log_term(nu)
    tau = -beta / denom + (k_prime - k) / (C_eval * denom)
    return RateBound(tau, "achievable",
                     {"beta": beta, "nu": nu, "C": C_eval, "k": k, "k_prime": k_prime})


def achievable_truncation_error(beta: float, k_prime: float, C: float, nu: float) -> float:
    """Gap between the rate at finite ``C`` and its ``C -> infinity`` limit."""
    k = k_prime / beta
    return (k - k_prime) / (C * nu * abs(math.log2(-math.expm1(-nu))))


def iid_achievable_rate(nu: float = math.log(2)) -> RateBound:
    """Per-item rate for independent infections, ``1/ln 2`` at ``nu = ln 2``."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return RateBound(-1.0 / _nu_log_term(nu), "iid_achievable", {"beta": 1.0, "nu": nu})


def optimize_nu(upper: float = 10.0, xatol: float = 1e-10) -> float:
    """The ``nu`` minimising the achievable rate.

    ``nu * log2(1 - e^-nu)`` is negative on ``(0, inf)`` and vanishes at both
    ends; the rate is smallest where its magnitude is largest.
    """
    res = optimize.minimize_scalar(_nu_log_term, bounds=(1e-9, upper), method="bounded",
                                   options={"xatol": xatol})
    return float(res.x)


def converse_rate(beta: float) -> RateBound:
    if not (0.0 < beta <= 1.0):
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    return RateBound(beta, "converse", {"beta": beta})


def entropy_rate_ratio(markov: MarkovParams) -> float:
    """Finite-n converse quantity ``H(U^n) / (n q log2 n)``."""
    n = markov.n
    return entropy_chain_rule(markov.alpha, markov.beta, n) / (n * markov.q * math.log2(n))


def appendix_limit_constant(k_prime: float, k: float, C: int, n: int) -> float:
    """``n * q_tilde / log2(n)`` under the scaled parameterisation.

    Converges to :func:`appendix_limit_target`; dividing both by ``C`` gives
    ``k' + (k - k')/C``.
    """
    markov = derive_params(k_prime, k_prime / k, n)
    q, alpha = markov.q, markov.alpha
    # 1 - (1-q)(1-alpha)^(C-1), written to avoid cancellation at large n.
    q_tilde = -math.expm1(math.log1p(-q) + (C - 1) * math.log1p(-alpha))
    return n * q_tilde / math.log2(n)


def appendix_limit_target(k_prime: float, k: float, C: int) -> float:
    return k_prime * (C - 1) + k

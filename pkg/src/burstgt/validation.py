"""Self-check suites behind ``burstgt validate``.

Each suite returns a list of :class:`Check` records; a suite passes when every
check does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from burstgt import bounds
from burstgt.design import derive_design
from burstgt.harness import DesignConfig, ExperimentConfig, MarkovConfig, estimate_f_gamma, run_batch
from burstgt.markov import derive_params, entropy_brute_force, entropy_chain_rule

SUITES = ("entropy", "chernoff", "lemma1", "bounds", "endtoend")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: str
    tolerance: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.measured} ({self.tolerance})"


def entropy_suite() -> list[Check]:
    worst = 0.0
    grid = np.round(np.arange(0.1, 1.0, 0.2), 10)
    for a in grid:
        for b in grid:
            for n in range(2, 13):
                worst = max(worst, abs(entropy_chain_rule(a, b, n) - entropy_brute_force(a, b, n)))
    return [Check("chain rule vs enumeration, n<=12", worst <= 1e-9,
                  f"max |diff| = {worst:.3e} bits", "<= 1e-9")]


def chernoff_suite() -> list[Check]:
    checks = []
    for T in (50, 200, 1000):
        for p in (0.01, 0.05, 0.2):
            for eps in (0.1, 0.3, 0.5):
                tail = bounds.binomial_lower_tail(T, p, p * (1 - eps) * T)
                bound = bounds.fn_bound(T, p, eps)
                checks.append(Check(f"tail <= chernoff T={T} p={p} eps={eps}", tail <= bound,
                                    f"tail={tail:.4e} bound={bound:.4e}", "tail <= bound"))
    return checks


def lemma1_suite(samples: int = 20_000, seed: int = 0) -> list[Check]:
    markov = derive_params(1.0, 0.5, 10_000)
    design = derive_design(markov, 50, math.log(2), 0.1, 1.0)
    gammas = (1, 2, 4, 8, 16)
    est = estimate_f_gamma(markov, design, gammas, samples, seed=seed)
    checks = []
    for a, b in zip(est, est[1:]):
        checks.append(Check(f"f non-increasing gamma {a.gamma}->{b.gamma}",
                            b.estimate <= a.estimate + 2 * (a.stderr + b.stderr),
                            f"{a.estimate:.4e} -> {b.estimate:.4e}", "within 2 stderr"))
    for e in est:
        bound = bounds.screening_survival_bound(markov, design, e.gamma)
        checks.append(Check(f"f({e.gamma}) <= closed-form bound", e.estimate <= bound + 4 * e.stderr,
                            f"est={e.estimate:.4e} bound={bound:.4e}", "+4 stderr"))
    return checks


def bounds_suite() -> list[Check]:
    checks = []
    worst_kl = min(bounds.kl_div_bernoulli(a, b) for a in np.linspace(0, 1, 41)
                   for b in np.linspace(0.025, 0.975, 39))
    checks.append(Check("KL non-negative", worst_kl >= 0.0, f"min={worst_kl:.3e}", ">= 0"))
    slack = min(bounds.kl_div_bernoulli(x, y) - bounds.kl_quadratic_lower(x, y)
                for y in np.linspace(0.01, 0.99, 99) for x in np.linspace(0, y, 50))
    checks.append(Check("quadratic lower bound <= KL", slack >= -1e-15,
                        f"min(KL - quad)={slack:.3e}", ">= 0"))
    nu = bounds.optimize_nu()
    checks.append(Check("optimal nu", abs(nu - math.log(2)) <= 1e-6, f"{nu:.9f}", "ln 2 +- 1e-6"))
    h = 1e-4
    fd = (bounds._nu_log_term(nu + h) - bounds._nu_log_term(nu - h)) / (2 * h)
    checks.append(Check("optimal nu is stationary", abs(fd) < 1e-6, f"derivative={fd:.2e}", "< 1e-6"))
    ok = all(bounds.converse_rate(b).tau <= bounds.achievable_rate(b, kp, C, v).tau
             for b in (0.1, 0.25, 0.5, 0.75, 1.0) for kp in (0.5, 1, 2)
             for C in (1, 10, 100, math.inf) for v in (0.2, math.log(2), 1.5, 3.0))
    checks.append(Check("converse <= achievable on grid", ok, str(ok), "all grid points"))
    fp = [bounds.fp_bound(g, 0.6) for g in range(0, 40)]
    mono = all(b <= a for a, b in zip(fp, fp[1:]))
    checks.append(Check("fp bound non-increasing in gamma", mono, str(mono), "r <= 1"))
    return checks


def endtoend_suite(trials: int = 200, seed: int = 7) -> list[Check]:
    cfg = ExperimentConfig(MarkovConfig(1.0, 0.5, 10_000),
                           DesignConfig(C=50, epsilon=0.1, tau=1.5, tau_mode="relative"),
                           trials=trials, master_seed=seed)
    markov, design = cfg.resolve()
    stats = run_batch(cfg, check_screening=False)
    fnb = bounds.fn_bound(design.T, design.p, design.epsilon)
    total = bounds.total_error_bound(markov, design)
    again = run_batch(cfg, check_screening=False)
    return [
        Check("screening never clears an infected item", stats.screen_violations == 0,
              f"violations={stats.screen_violations}", "== 0"),
        Check("fn rate <= chernoff bound", stats.fn_rate <= fnb + 4 * stats.fn_stderr,
              f"fn_rate={stats.fn_rate:.4f} bound={fnb:.4f}", "+4 stderr"),
        Check("exact-recovery error <= total bound", stats.p_err <= total + 4 * stats.p_err_stderr,
              f"p_err={stats.p_err:.4f} bound={total:.4g}", "+4 stderr"),
        Check("repeat run identical", stats.counts() == again.counts(), "counts equal", "exact"),
    ]


def run_suite(name: str, **kwargs) -> list[Check]:
    table = {"entropy": entropy_suite, "chernoff": chernoff_suite, "lemma1": lemma1_suite,
             "bounds": bounds_suite, "endtoend": endtoend_suite}
    if name == "all":
        return [c for s in SUITES for c in table[s]()]
    if name not in table:
        raise ValueError(f"unknown suite {name!r}")
    return table[name](**kwargs)

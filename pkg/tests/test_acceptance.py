"""Acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict (printed in the terminal
summary) before asserting.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from burstgt import bounds
from burstgt.design import derive_design
from burstgt.harness import (DesignConfig, ExperimentConfig, MarkovConfig, estimate_f_gamma,
                             run_batch, sweep)
from burstgt.markov import derive_params, entropy_brute_force, entropy_chain_rule

from conftest import ACCEPTANCE_LINES

LN2 = math.log(2)
SEED = 20240917
N_GRID = (10**4, 3 * 10**4, 10**5)

# Running total of infected items cleared by screening, over every trial below.
SCREENING = {"trials": 0, "violations": 0}


def verdict(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert passed, line


def batch(cfg):
    stats = run_batch(cfg, check_screening=False)
    SCREENING["trials"] += stats.trials
    SCREENING["violations"] += stats.screen_violations
    return stats


def half_width(ci):
    return (ci[1] - ci[0]) / 2


def non_increasing(batches):
    return all(b.p_err <= a.p_err + half_width(a.p_err_ci) + half_width(b.p_err_ci)
               for a, b in zip(batches, batches[1:]))


def achievability_config(n, parallelism=1):
    return ExperimentConfig(
        MarkovConfig(k_prime=1, beta=0.5, n=n),
        DesignConfig(kind="block", C=50, nu=LN2, epsilon=0.1, tau=1.3, tau_mode="relative"),
        trials=500, master_seed=SEED, parallelism=parallelism)


@pytest.fixture(scope="module")
def achievability_runs():
    start = time.perf_counter()
    runs = {n: batch(achievability_config(n)) for n in N_GRID}
    return runs, time.perf_counter() - start


def test_criterion_01_nu_optimisation():
    start = time.perf_counter()
    nu = bounds.optimize_nu()
    tau = bounds.achievable_rate(0.5, 1, 10**9, nu).tau
    elapsed = time.perf_counter() - start
    ok = abs(nu - 0.6931472) <= 1e-6 and abs(tau - 0.721348) <= 1e-5 and elapsed < 1
    verdict(1, ok, f"nu*={nu:.9f} tau={tau:.7f} ({elapsed:.3f}s)")


def test_criterion_02_rate_gap():
    start = time.perf_counter()
    errs = [abs(bounds.achievable_rate(b, 1, 10**9, LN2).tau / bounds.converse_rate(b).tau - 1.442695)
            for b in (0.1, 0.25, 0.5, 0.75, 1.0)]
    elapsed = time.perf_counter() - start
    verdict(2, max(errs) <= 1e-6 and elapsed < 1, f"max |ratio - 1.442695| = {max(errs):.2e}")


def test_criterion_03_entropy_oracle():
    start = time.perf_counter()
    grid = (0.1, 0.3, 0.5, 0.7, 0.9)
    worst = max(abs(entropy_chain_rule(a, b, n) - entropy_brute_force(a, b, n))
                for a in grid for b in grid for n in range(2, 13))
    elapsed = time.perf_counter() - start
    verdict(3, worst <= 1e-9 and elapsed < 30, f"max deviation {worst:.2e} bits ({elapsed:.1f}s)")


def test_criterion_04_converse_prelimit_trend():
    start = time.perf_counter()
    ratios = [bounds.entropy_rate_ratio(derive_params(1, 0.5, 2**e)) for e in range(14, 25, 2)]
    elapsed = time.perf_counter() - start
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    halved = abs(ratios[-1] - 0.5) * 2 <= abs(ratios[0] - 0.5)
    verdict(4, decreasing and halved and elapsed < 1,
            f"ratios {', '.join(f'{r:.5f}' for r in ratios)}; "
            f"|r-0.5| {abs(ratios[0] - 0.5):.4f} -> {abs(ratios[-1] - 0.5):.4f}")


def test_criterion_05_chernoff_dominance():
    start = time.perf_counter()
    worst = math.inf
    for T in (50, 200, 1000):
        for p in (0.01, 0.05, 0.2):
            for eps in (0.1, 0.3, 0.5):
                tail = bounds.binomial_lower_tail(T, p, p * (1 - eps) * T)
                worst = min(worst, bounds.fn_bound(T, p, eps) - tail)
    elapsed = time.perf_counter() - start
    verdict(5, worst >= 0 and elapsed < 10, f"min(bound - tail) = {worst:.3e}")


def test_criterion_06_kl_quadratic():
    start = time.perf_counter()
    worst = math.inf
    for y in np.linspace(0.005, 0.995, 100):
        for x in np.linspace(0.0, y, 100):
            worst = min(worst, bounds.kl_div_bernoulli(x, y) - bounds.kl_quadratic_lower(x, y))
    elapsed = time.perf_counter() - start
    verdict(6, worst >= 0 and elapsed < 1, f"min(D - quadratic) = {worst:.3e} ({elapsed:.2f}s)")


def test_criterion_07_f_gamma_empirics():
    start = time.perf_counter()
    markov = derive_params(1, 0.5, 10**4)
    design = derive_design(markov, 50, LN2, 0.1, 1.0)
    est = estimate_f_gamma(markov, design, [1, 2, 4, 8, 16], samples=10**5, seed=SEED)
    r_n = bounds.design_r_n(markov, design)
    monotone = all(b.estimate <= a.estimate + 2 * max(a.stderr, b.stderr) for a, b in zip(est, est[1:]))
    bounded = all(e.estimate <= bounds.fp_bound(e.gamma, r_n) + 4 * e.stderr for e in est)
    elapsed = time.perf_counter() - start
    verdict(7, monotone and bounded and elapsed < 120,
            f"p_fp={est[0].estimate:.4f} r_n={r_n:.4f} f(16)={est[-1].estimate:.2e} ({elapsed:.1f}s)")


def test_criterion_08_r_n_limit():
    markov = derive_params(1, 0.5, 10**8)
    design = derive_design(markov, 50, LN2, 0.1, 1.0)
    r_n = bounds.r_n_constant(design.p1, design.p2, markov.q, design.q_tilde, markov.n, design.C)
    verdict(8, abs(r_n - 0.5) <= 1e-3, f"r_n(1e8) = {r_n:.6f}, |r_n - 0.5| = {abs(r_n - 0.5):.2e}")


def test_criterion_09_end_to_end_trend(achievability_runs):
    runs, elapsed = achievability_runs
    batches = [runs[n] for n in N_GRID]
    markov, design = achievability_config(10**5).resolve()
    big = runs[10**5]
    bound = bounds.total_error_bound(markov, design)
    within = big.p_err <= bound + 4 * big.p_err_stderr
    detail = "; ".join(f"n={n}: p_err={runs[n].p_err:.3f} fp={runs[n].fp_rate:.2e} fn={runs[n].fn_rate:.3f}"
                       for n in N_GRID)
    verdict(9, non_increasing(batches) and within and elapsed < 600,
            f"{detail}; bound(1e5)={bound:.3g} ({elapsed:.0f}s)")


def test_criterion_11_determinism(achievability_runs):
    runs, _ = achievability_runs
    same = True
    for n in N_GRID:
        parallel = batch(achievability_config(n, parallelism=8))
        same &= parallel.counts() == runs[n].counts()
    verdict(11, same, "parallelism 1 vs 8 counts identical" if same else "counts differ")


def test_criterion_12_correlation_gain():
    start = time.perf_counter()
    taus = [f / LN2 for f in (0.5, 0.75, 1.0, 1.25)]
    cells = {}
    for kind in ("block", "iid"):
        base = ExperimentConfig(MarkovConfig(k_prime=1, beta=0.25, n=10**5),
                                DesignConfig(kind=kind, C=50, nu=LN2, epsilon=0.1),
                                trials=100, master_seed=SEED)
        cells[kind] = [r.stats for r in sweep(base, "tau", taus)]
        for s in cells[kind]:
            SCREENING["trials"] += s.trials
            SCREENING["violations"] += s.screen_violations
    block, iid = cells["block"][0], cells["iid"][0]
    elapsed = time.perf_counter() - start
    slack = half_width(block.p_err_ci) + half_width(iid.p_err_ci)
    ok = block.T == iid.T and block.p_err <= iid.p_err + slack and elapsed < 900
    verdict(12, ok,
            f"T={block.T}: block p_err={block.p_err:.3f} (fp={block.fp_rate:.2e} fn={block.fn_rate:.3f}) "
            f"vs iid p_err={iid.p_err:.3f} (fp={iid.fp_rate:.2e} fn={iid.fn_rate:.3f}) ({elapsed:.0f}s)")


def test_criterion_10_screening_soundness():
    # Runs last so it sees every Monte Carlo trial above; a lone run makes its own.
    if SCREENING["trials"] == 0:
        batch(dataclasses.replace(achievability_config(10**4), trials=50))
    verdict(10, SCREENING["trials"] > 0 and SCREENING["violations"] == 0,
            f"{SCREENING['violations']} violations over {SCREENING['trials']} trials")

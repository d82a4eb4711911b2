"""Seeded Monte Carlo engine: trials, batches, sweeps and result files.

Trial ``i`` of an experiment draws its infection vector from stream
``offset + 2*i`` and its test matrix from stream ``offset + 2*i + 1`` of the
master seed (see :mod:`burstgt.rng`).  Batches reduce integer tallies by
summation, so results never depend on the worker count or scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import stats as sps

from burstgt.channel import run_tests
from burstgt.decoder import decode, tally_errors
from burstgt.design import (DesignError, DesignParams, block_infection_prob,
                            derive_design, derive_iid_design, sample_matrix)
from burstgt.markov import (MarkovParams, derive_params, infected_runs,
                            params_from_rates, sample_infection_vector)
from burstgt.rng import make_rng

log = logging.getLogger(__name__)

WORKERS_ENV = "BURSTGT_WORKERS"
CELL_SHIFT = 40
AXES = ("n", "tau", "beta", "C", "nu", "epsilon")


class ScreeningViolation(AssertionError):
    """An infected item was cleared by a negative test (impossible for an OR channel)."""


@dataclass
class MarkovConfig:
    k_prime: float = 1.0
    beta: float = 0.5
    n: int = 10_000
    alpha: Optional[float] = None


@dataclass
class DesignConfig:
    kind: str = "block"
    C: int = 50
    nu: float = math.log(2)
    epsilon: float = 0.1
    tau: float = 1.0
    # "relative": tau is given in multiples of beta / ln 2.
    tau_mode: str = "absolute"
    p1: Optional[float] = None
    p2: Optional[float] = None
    T: Optional[int] = None


@dataclass
class ExperimentConfig:
    markov: MarkovConfig = field(default_factory=MarkovConfig)
    design: DesignConfig = field(default_factory=DesignConfig)
    trials: int = 100
    master_seed: int = 0
    parallelism: Union[int, str] = 1
    stream_offset: int = 0

    def to_dict(self) -> dict:
        return {
            "markov": dataclasses.asdict(self.markov),
            "design": dataclasses.asdict(self.design),
            "experiment": {"trials": self.trials, "master_seed": self.master_seed,
                           "parallelism": self.parallelism, "stream_offset": self.stream_offset},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        def build(kind, section):
            names = {f.name for f in dataclasses.fields(kind)}
            unknown = set(section) - names
            if unknown:
                raise ValueError(f"unknown field(s) {sorted(unknown)} in {kind.__name__}")
            return kind(**section)

        exp = dict(data.get("experiment", {}))
        unknown = set(exp) - {"trials", "master_seed", "parallelism", "stream_offset"}
        if unknown:
            raise ValueError(f"unknown field(s) {sorted(unknown)} in experiment")
        return cls(markov=build(MarkovConfig, data.get("markov", {})),
                   design=build(DesignConfig, data.get("design", {})), **exp)

    def effective_tau(self) -> float:
        d = self.design
        if d.tau_mode == "relative":
            return d.tau * self.markov.beta / math.log(2)
        if d.tau_mode != "absolute":
            raise ValueError(f"design.tau_mode must be 'absolute' or 'relative', got {d.tau_mode!r}")
        return d.tau

    def resolve(self) -> tuple[MarkovParams, DesignParams]:
        """Validate the config and derive model and design parameters."""
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"experiment.trials must be a positive integer, got {self.trials}")
        m = self.markov
        if int(m.n) != m.n:
            raise ValueError(f"markov.n must be an integer, got {m.n}")
        if m.alpha is not None:
            markov = params_from_rates(m.alpha, m.beta, int(m.n))
        else:
            markov = derive_params(m.k_prime, m.beta, int(m.n))
        return markov, _resolve_design(markov, self.design, self.effective_tau())

    def workers(self) -> int:
        par = self.parallelism
        if par == "auto":
            return os.cpu_count() or 1
        if int(par) < 1:
            raise ValueError(f"parallelism must be positive or 'auto', got {par}")
        return int(par)


def default_parallelism() -> Union[int, str]:
    value = os.environ.get(WORKERS_ENV, "1")
    return value if value == "auto" else int(value)


def _resolve_design(markov, dc, tau):
    if dc.kind not in ("block", "iid"):
        raise ValueError(f"design.kind must be 'block' or 'iid', got {dc.kind!r}")
    try:
        if dc.kind == "iid":
            derived = derive_iid_design(markov, dc.nu, dc.epsilon, tau)
        else:
            derived = derive_design(markov, dc.C, dc.nu, dc.epsilon, tau)
    except DesignError:
        if dc.p1 is None or dc.T is None:
            raise
        derived = None
    if dc.p1 is None and dc.p2 is None and dc.T is None:
        return derived
    C = 1 if dc.kind == "iid" else dc.C
    if markov.n % C:
        raise DesignError(f"block mismatch: C={C} does not divide n={markov.n}")
    p1 = dc.p1 if dc.p1 is not None else derived.p1
    p2 = dc.p2 if dc.p2 is not None else (derived.p2 if derived else 1.0 - 1.0 / markov.n)
    T = int(dc.T) if dc.T is not None else derived.T
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0) or T < 1:
        raise DesignError(f"invalid override p1={p1}, p2={p2}, T={T}")
    return DesignParams(n=markov.n, C=C, nu=dc.nu, epsilon=dc.epsilon, tau=tau, p1=p1, p2=p2,
                        T=T, gamma=p1 * p2 * (1.0 - dc.epsilon) * T,
                        q_tilde=block_infection_prob(markov.q, markov.alpha, C), kind=dc.kind)


@dataclass(frozen=True)
class TrialResult:
    false_positives: int
    false_negatives: int
    exact_match: bool
    infected: int
    n: int
    screen_violations: int


def _trial(markov, design, seed, stream_offset, index):
    truth = sample_infection_vector(markov, seed, stream_offset + 2 * index)
    matrix = sample_matrix(design, seed, stream_offset + 2 * index + 1)
    outcomes = run_tests(matrix, truth)
    result = decode(matrix, outcomes, design.gamma)
    tally = tally_errors(truth, result)
    return TrialResult(tally.false_positives, tally.false_negatives, tally.exact_match,
                       truth.infected_count, markov.n,
                       int(np.sum(truth.bits & ~result.u_tilde)))


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    markov, design = config.resolve()
    return _trial(markov, design, config.master_seed, config.stream_offset, trial_index)


@dataclass(frozen=True)
class AggregateStats:
    trials: int
    T: int
    exact_errors: int
    fp_items: int
    fn_items: int
    infected_exposures: int
    uninfected_exposures: int
    screen_violations: int
    wall_seconds: float = 0.0

    def counts(self) -> tuple:
        return (self.trials, self.T, self.exact_errors, self.fp_items, self.fn_items,
                self.infected_exposures, self.uninfected_exposures, self.screen_violations)

    @property
    def p_err(self) -> float:
        return self.exact_errors / self.trials

    @property
    def p_err_ci(self) -> tuple[float, float]:
        return wilson_interval(self.exact_errors, self.trials)

    @property
    def p_err_stderr(self) -> float:
        return math.sqrt(self.p_err * (1.0 - self.p_err) / self.trials)

    @property
    def fp_rate(self) -> float:
        return self.fp_items / self.uninfected_exposures if self.uninfected_exposures else 0.0

    @property
    def fp_ci(self) -> tuple[float, float]:
        return wilson_interval(self.fp_items, self.uninfected_exposures)

    @property
    def fn_rate(self) -> float:
        return self.fn_items / self.infected_exposures if self.infected_exposures else 0.0

    @property
    def fn_ci(self) -> tuple[float, float]:
        return wilson_interval(self.fn_items, self.infected_exposures)

    @property
    def fn_stderr(self) -> float:
        m = self.infected_exposures
        return math.sqrt(self.fn_rate * (1.0 - self.fn_rate) / m) if m else 0.0


def wilson_interval(successes: int, total: int, confidence: float = 0.95) -> tuple[float, float]:
    if total == 0:
        return (0.0, 1.0)
    z = float(sps.norm.ppf(0.5 + confidence / 2.0))
    phat = successes / total
    denom = 1.0 + z * z / total
    centre = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return (float(max(0.0, centre - half)), float(min(1.0, centre + half)))


def _run_chunk(args):
    markov, design, seed, offset, start, stop = args
    totals = np.zeros(6, dtype=np.int64)
    for i in range(start, stop):
        r = _trial(markov, design, seed, offset, i)
        totals += (not r.exact_match, r.false_positives, r.false_negatives,
                   r.infected, r.n - r.infected, r.screen_violations)
    return totals


def run_batch(config: ExperimentConfig, check_screening: bool = True) -> AggregateStats:
    markov, design = config.resolve()
    workers = config.workers()
    start = time.perf_counter()
    trials = int(config.trials)
    if workers == 1:
        totals = _run_chunk((markov, design, config.master_seed, config.stream_offset, 0, trials))
    else:
        bounds = np.linspace(0, trials, min(workers * 4, trials) + 1).astype(int)
        jobs = [(markov, design, config.master_seed, config.stream_offset, a, b)
                for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            totals = sum(pool.map(_run_chunk, jobs))
    exact, fp, fn, inf_exp, uninf_exp, viol = (int(v) for v in totals)
    stats = AggregateStats(trials=trials, T=design.T, exact_errors=exact, fp_items=fp,
                           fn_items=fn, infected_exposures=inf_exp,
                           uninfected_exposures=uninf_exp, screen_violations=viol,
                           wall_seconds=time.perf_counter() - start)
    if check_screening and viol:
        raise ScreeningViolation(f"{viol} infected item(s) cleared by screening")
    return stats


@dataclass(frozen=True)
class SweepRow:
    axis_name: str
    axis_value: float
    config: ExperimentConfig
    stats: Optional[AggregateStats]
    error: str = ""


def with_axis(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {AXES}")
    markov, design = config.markov, config.design
    if axis in ("n", "beta"):
        value = int(value) if axis == "n" else float(value)
        markov = dataclasses.replace(markov, **{axis: value})
    else:
        value = int(value) if axis == "C" else float(value)
        design = dataclasses.replace(design, **{axis: value})
    return dataclasses.replace(config, markov=markov, design=design)


def sweep(config: ExperimentConfig, axis: str, values) -> list[SweepRow]:
    """One batch per axis value; cell ``j`` uses streams offset by ``j << 40``."""
    rows = []
    for cell, value in enumerate(values):
        cfg = dataclasses.replace(with_axis(config, axis, value),
                                  stream_offset=config.stream_offset + (cell << CELL_SHIFT))
        try:
            cfg.resolve()
        except ValueError as exc:
            log.warning("skipping %s=%s: %s", axis, value, exc)
            rows.append(SweepRow(axis, value, cfg, None, str(exc)))
            continue
        rows.append(SweepRow(axis, value, cfg, run_batch(cfg)))
    return rows


@dataclass(frozen=True)
class FGammaEstimate:
    gamma: int
    estimate: float
    stderr: float


def estimate_p_fp(markov: MarkovParams, design: DesignParams, samples: int,
                  seed: int = 0, stream: int = 0) -> tuple[float, float]:
    """Monte Carlo P(test positive | it contains item 1, item 1 healthy).

    The chain is run forward from ``U_1 = 0`` and the row is drawn with item 1's
    block and item 1 itself selected, so no sample is rejected.
    """
    if samples < 100:
        raise ValueError(f"need at least 100 samples, got {samples}")
    rng = make_rng(seed, stream)
    C, p1, p2 = design.C, design.p1, design.p2
    positives = 0
    for _ in range(samples):
        starts, lengths = infected_runs(rng, markov.alpha, markov.beta, markov.n, 0)
        if not starts:
            continue
        pos = np.concatenate([np.arange(s, s + l) for s, l in zip(starts, lengths)])
        blocks, which = np.unique(pos // C, return_inverse=True)
        selected = rng.random(blocks.size) < p1
        selected[blocks == 0] = True
        included = selected[which] & (rng.random(pos.size) < p2)
        positives += bool(included.any())
    phat = positives / samples
    return phat, math.sqrt(phat * (1.0 - phat) / samples)


def estimate_f_gamma(markov: MarkovParams, design: DesignParams, gamma_values, samples: int,
                     seed: int = 0, stream: int = 0) -> list[FGammaEstimate]:
    """Estimates of ``f(gamma) = p_fp**gamma`` with delta-method standard errors."""
    gammas = [int(g) for g in gamma_values]
    if any(g < 0 for g in gammas):
        raise ValueError("gamma values must be non-negative")
    phat, se = estimate_p_fp(markov, design, samples, seed, stream)
    out = []
    for g in gammas:
        if g == 0:
            out.append(FGammaEstimate(0, 1.0, 0.0))
        else:
            out.append(FGammaEstimate(g, phat ** g, g * phat ** (g - 1) * se))
    return out


RESULT_COLUMNS = ("axis_name", "axis_value", "n", "C", "nu", "epsilon", "tau", "beta",
                  "k_prime", "T", "trials", "exact_errors", "p_err", "p_err_lo", "p_err_hi",
                  "fp_items", "fp_rate", "fn_items", "fn_rate", "wall_seconds")
_INT_COLUMNS = {"n", "C", "T", "trials", "exact_errors", "fp_items", "fn_items"}
_STR_COLUMNS = {"axis_name"}


def result_row(axis_name: str, axis_value, config: ExperimentConfig,
               stats: Optional[AggregateStats]) -> dict:
    m, d = config.markov, config.design
    try:
        markov, _ = config.resolve()
        k_prime = markov.k_prime
    except ValueError:
        k_prime = m.k_prime
    row = {"axis_name": axis_name, "axis_value": axis_value, "n": int(m.n),
           "C": 1 if d.kind == "iid" else int(d.C), "nu": float(d.nu),
           "epsilon": float(d.epsilon), "tau": _safe_tau(config), "beta": float(m.beta),
           "k_prime": float(k_prime)}
    if stats is None:
        row.update({c: None for c in RESULT_COLUMNS if c not in row})
        return row
    lo, hi = stats.p_err_ci
    row.update({"T": stats.T, "trials": stats.trials, "exact_errors": stats.exact_errors,
                "p_err": stats.p_err, "p_err_lo": lo, "p_err_hi": hi,
                "fp_items": stats.fp_items, "fp_rate": stats.fp_rate,
                "fn_items": stats.fn_items, "fn_rate": stats.fn_rate,
                "wall_seconds": stats.wall_seconds})
    return row


def _safe_tau(config):
    try:
        return float(config.effective_tau())
    except ValueError:
        return None


def sweep_table(rows: list[SweepRow]) -> list[dict]:
    return [result_row(r.axis_name, r.axis_value, r.config, r.stats) for r in rows]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse(column, text):
    if text == "":
        return None
    if column in _STR_COLUMNS:
        return text
    if column in _INT_COLUMNS:
        return int(text)
    return float(text)


def write_results(table: list[dict], path, fmt: str = "csv", config: Optional[dict] = None,
                  seed: Optional[int] = None) -> None:
    path = Path(path)
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(RESULT_COLUMNS)
                for row in table:
                    writer.writerow([_fmt(row.get(c)) for c in RESULT_COLUMNS])
        elif fmt == "json":
            doc = {"seed": seed, "config": config,
                   "results": [{c: row.get(c) for c in RESULT_COLUMNS} for row in table]}
            path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
        else:
            raise ValueError(f"unknown results format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_results(path, fmt: Optional[str] = None) -> list[dict]:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    if fmt == "json":
        return json.loads(path.read_text())["results"]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return [{c: _parse(c, v) for c, v in zip(header, line)} for line in reader]

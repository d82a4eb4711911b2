"""Command-line front end.

Exit codes: 0 success, 1 runtime error, 2 invalid config or arguments,
3 failed validation suite.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from burstgt import bounds
from burstgt.design import derive_design
from burstgt.harness import (AXES, ExperimentConfig, default_parallelism, result_row,
                             run_batch, sweep, sweep_table, write_results)
from burstgt.markov import (derive_params, entropy_asymptotic, entropy_chain_rule,
                            params_from_rates)
from burstgt.validation import SUITES, run_suite

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, overrides=()) -> tuple[dict, dict]:
    """Read a JSON config and apply ``section.field=value`` overrides.

    Returns the raw document (including the ``output`` section) and the
    experiment sections.
    """
    doc = {}
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"override {item!r} must look like section.field=value")
        section, name = key.split(".", 1)
        doc.setdefault(section, {})[name] = _parse_value(value)
    doc.setdefault("experiment", {}).setdefault("parallelism", default_parallelism())
    return doc, {k: doc[k] for k in ("markov", "design", "experiment") if k in doc}


def _experiment(args) -> tuple[ExperimentConfig, dict]:
    doc, sections = load_config(args.config, args.set)
    try:
        cfg = ExperimentConfig.from_dict(sections)
        cfg.resolve()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, doc.get("output", {})


def _output(args, out_section, default_name):
    path = args.out or out_section.get("path") or default_name
    fmt = args.format or out_section.get("format") or ("json" if str(path).endswith(".json") else "csv")
    return Path(path), fmt


def _write(table, path, fmt, cfg):
    write_results(table, path, fmt, config=cfg.to_dict(), seed=cfg.master_seed)
    if fmt == "csv":
        Path(str(path) + ".config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def cmd_simulate(args) -> int:
    cfg, out = _experiment(args)
    path, fmt = _output(args, out, "results.csv")
    stats = run_batch(cfg)
    _write([result_row("simulate", None, cfg, stats)], path, fmt, cfg)
    lo, hi = stats.p_err_ci
    print(f"n={cfg.markov.n} T={stats.T} trials={stats.trials} p_err={stats.p_err:.4f} "
          f"[{lo:.4f}, {hi:.4f}] fp_rate={stats.fp_rate:.3e} fn_rate={stats.fn_rate:.3e} -> {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, out = _experiment(args)
    try:
        values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path, fmt = _output(args, out, "sweep.csv")
    rows = sweep(cfg, args.axis, values)
    _write(sweep_table(rows), path, fmt, cfg)
    for r in rows:
        if r.stats is None:
            print(f"{args.axis}={r.axis_value}: skipped ({r.error})")
        else:
            print(f"{args.axis}={r.axis_value}: T={r.stats.T} p_err={r.stats.p_err:.4f} "
                  f"fp_rate={r.stats.fp_rate:.3e} fn_rate={r.stats.fn_rate:.3e}")
    print(f"-> {path}")
    return EXIT_OK


def _parse_C(text):
    if str(text).lower() in ("inf", "infinity"):
        return math.inf
    value = float(text)
    if value != int(value) or value < 1:
        raise ConfigError(f"C must be a positive integer or 'inf', got {text}")
    return int(value)


def _parse_nu(text):
    if text == "opt":
        return bounds.optimize_nu()
    if text == "ln2":
        return math.log(2)
    return float(text)


def bounds_report(beta, k_prime, C, nu, n=None, epsilon=0.1, tau=None) -> dict:
    converse = bounds.converse_rate(beta)
    achievable = bounds.achievable_rate(beta, k_prime, C, nu)
    report = {
        "beta": beta, "k_prime": k_prime, "C": None if math.isinf(C) else C, "nu": nu,
        "converse": converse.tau,
        "achievable": achievable.tau,
        "achievable_over_converse": achievable.tau / converse.tau,
        "iid_achievable": bounds.iid_achievable_rate(nu).tau,
    }
    if n is not None:
        markov = derive_params(k_prime, beta, n)
        report["entropy_rate_ratio"] = bounds.entropy_rate_ratio(markov)
        if tau is not None and not math.isinf(C):
            design = derive_design(markov, C, nu, epsilon, tau)
            terms = bounds.error_bound_terms(markov, design)
            report.update({"n": n, "epsilon": epsilon, "tau": tau, "T": design.T,
                           "fn_term": terms.fn_term, "fp_term": terms.fp_term,
                           "total_error_bound": terms.total, "dominant_term": terms.dominant})
    return report


def cmd_bounds(args) -> int:
    try:
        report = bounds_report(args.beta, args.k_prime, _parse_C(args.C), _parse_nu(args.nu),
                               args.n, args.epsilon, args.tau)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.format == "json":
        text = json.dumps(report, indent=2) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    width = max(len(k) for k in report)
    for key, value in report.items():
        print(f"{key:<{width}}  {value}")
    return EXIT_OK


def _parse_n_list(text):
    out = []
    for part in text.split(","):
        value = float(part)
        if value != int(value) or value < 2:
            raise ConfigError(f"n must be an integer >= 2, got {part}")
        out.append(int(value))
    return out


def entropy_table(n_values, beta, k_prime=None, alpha=None) -> list[dict]:
    rows = []
    for n in n_values:
        markov = params_from_rates(alpha, beta, n) if alpha is not None else derive_params(k_prime, beta, n)
        rows.append({"n": n, "exact_bits": entropy_chain_rule(markov.alpha, markov.beta, n),
                     "asymptotic_bits": entropy_asymptotic(markov.k_prime, n),
                     "rate_ratio": bounds.entropy_rate_ratio(markov)})
    return rows


def cmd_entropy(args) -> int:
    try:
        n_values = _parse_n_list(args.n)
        rows = entropy_table(n_values, args.beta, args.k_prime, args.alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    print(f"{'n':>12} {'exact_bits':>16} {'asymptotic_bits':>16} {'rate_ratio':>12}")
    for r in rows:
        print(f"{r['n']:>12} {r['exact_bits']:>16.6f} {r['asymptotic_bits']:>16.6f} {r['rate_ratio']:>12.6f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    kwargs = {"samples": args.samples} if args.suite == "lemma1" and args.samples else {}
    checks = run_suite(args.suite, **kwargs)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="burstgt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_args(p):
        p.add_argument("--config", help="JSON config with markov/design/experiment/output sections")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.FIELD=VALUE",
                       help="override a config field, e.g. design.C=50")
        p.add_argument("--out", help="results file path")
        p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("simulate", help="run one Monte Carlo batch")
    experiment_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run one batch per value of a parameter")
    experiment_args(p)
    p.add_argument("--axis", required=True, choices=AXES)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="evaluate converse/achievable rates and error bounds")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--k-prime", type=float, default=1.0)
    p.add_argument("--C", default="inf", help="block size or 'inf'")
    p.add_argument("--nu", default="ln2", help="number, 'ln2' or 'opt'")
    p.add_argument("--n", type=int, help="population size for finite-n quantities")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--tau", type=float, help="testing rate for the total error bound")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("validate", help="run a self-check suite")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.add_argument("--samples", type=int, help="Monte Carlo samples for the lemma1 suite")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("entropy", help="exact and asymptotic entropy of the infection process")
    p.add_argument("--beta", type=float, default=0.5)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--k-prime", type=float, default=1.0)
    group.add_argument("--alpha", type=float)
    p.add_argument("--n", required=True, help="comma-separated population sizes")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_entropy)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

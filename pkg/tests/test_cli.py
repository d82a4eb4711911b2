import json
import math
from pathlib import Path

import pytest

from burstgt import cli
from burstgt.harness import RESULT_COLUMNS, read_results
from burstgt.validation import Check

DATA = Path(__file__).parent / "data"
SMOKE = ["--set", "markov.n=2000", "--set", "design.C=20", "--set", "experiment.trials=10",
         "--set", "experiment.parallelism=1"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bounds_json_examples(capsys):
    code, out, _ = run(capsys, "bounds", "--beta", "0.5", "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert report["converse"] == 0.5
    assert report["achievable"] == pytest.approx(0.72135, abs=1e-5)
    assert report["achievable_over_converse"] == pytest.approx(1 / math.log(2), abs=1e-6)
    _, again, _ = run(capsys, "bounds", "--beta", "0.5", "--format", "json")
    assert again == out


def test_bounds_unit_beta(capsys):
    _, out, _ = run(capsys, "bounds", "--beta", "1", "--format", "json")
    assert json.loads(out)["achievable"] == pytest.approx(1 / math.log(2), abs=1e-6)


def test_bounds_with_error_terms(capsys):
    code, out, _ = run(capsys, "bounds", "--C", "50", "--n", "100000", "--tau", "1.0", "--format", "json")
    report = json.loads(out)
    assert code == 0 and report["dominant_term"] in ("false_negative", "false_positive")
    assert report["total_error_bound"] == pytest.approx(report["fn_term"] + report["fp_term"])


def test_bounds_text_and_bad_args(capsys):
    code, out, _ = run(capsys, "bounds", "--nu", "opt")
    assert code == 0 and "achievable" in out
    assert run(capsys, "bounds", "--C", "2.5")[0] == 2
    assert run(capsys, "bounds", "--beta", "0")[0] == 2


def test_simulate_smoke(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, _, _ = run(capsys, "simulate", *SMOKE, "--out", str(out))
    assert code == 0
    rows = read_results(out)
    assert len(rows) == 1 and rows[0]["trials"] == 10
    assert json.loads(Path(str(out) + ".config.json").read_text())["markov"]["n"] == 2000


def test_simulate_same_seed_same_rows(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert run(capsys, "simulate", *SMOKE, "--set", "experiment.master_seed=4", "--out", str(p))[0] == 0
    a, b = (json.loads(p.read_text()) for p in paths)
    assert a["seed"] == 4 and a["config"] == b["config"]
    for ra, rb in zip(a["results"], b["results"]):
        assert {k: v for k, v in ra.items() if k != "wall_seconds"} == \
            {k: v for k, v in rb.items() if k != "wall_seconds"}


def test_config_errors_exit_two(tmp_path, capsys):
    assert run(capsys, "simulate", "--set", "design.C=33", "--set", "markov.n=10000")[0] == 2
    assert run(capsys, "simulate", "--set", "design.colour=1")[0] == 2
    assert run(capsys, "simulate", "--set", "nodot")[0] == 2
    assert run(capsys, "simulate", "--config", str(tmp_path / "none.json"))[0] == 2
    assert run(capsys, "frobnicate")[0] == 2


def test_runtime_error_exits_one(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", *SMOKE, "--out", str(tmp_path / "no" / "r.csv"))
    assert code == 1 and "no" in err


def test_config_file_round_trip(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert run(capsys, "simulate", *SMOKE, "--out", str(out))[0] == 0
    sidecar = Path(str(out) + ".config.json")
    out2 = tmp_path / "r2.csv"
    assert run(capsys, "simulate", "--config", str(sidecar), "--out", str(out2))[0] == 0
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_seconds"} for r in rows]
    assert strip(read_results(out)) == strip(read_results(out2))


def test_sweep_reference_config_matches_golden(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, text, _ = run(capsys, "sweep", "--config", str(DATA / "golden_config.json"),
                        "--axis", "tau", "--values", "1.0,1.3,2.0", "--out", str(out))
    assert code == 0 and "tau=1.3" in text
    fresh, golden = read_results(out), read_results(DATA / "golden_sweep.csv")
    for new, old in zip(fresh, golden):
        assert all(new[c] == old[c] for c in RESULT_COLUMNS if c != "wall_seconds")


def test_sweep_skips_invalid_value(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, text, _ = run(capsys, "sweep", *SMOKE, "--axis", "C", "--values", "20,33", "--out", str(out))
    assert code == 0 and "skipped" in text
    rows = read_results(out)
    assert rows[1]["T"] is None


def test_entropy_command(capsys):
    code, out, _ = run(capsys, "entropy", "--alpha", "0.5", "--beta", "0.5", "--n", "8", "--format", "json")
    assert code == 0 and json.loads(out)[0]["exact_bits"] == pytest.approx(8.0, abs=1e-12)
    ns = ",".join(str(2**e) for e in range(14, 25, 2))
    _, out, _ = run(capsys, "entropy", "--n", ns, "--format", "json")
    ratios = [r["rate_ratio"] for r in json.loads(out)]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert run(capsys, "entropy", "--n", "3.5")[0] == 2


@pytest.mark.parametrize("suite", ["entropy", "chernoff"])
def test_validate_suites_pass(capsys, suite):
    code, out, _ = run(capsys, "validate", suite)
    assert code == 0 and "FAIL" not in out


def test_validate_failure_exits_three(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_suite", lambda name, **kw: [Check("broken", False, 1.0, 0.0)])
    assert run(capsys, "validate", "bounds")[0] == 3

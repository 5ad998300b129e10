import csv
import io
import json

import pytest

from twisted_riesz import __version__, cli
from twisted_riesz.propagator import NORMALIZATION


def run(tmp_path, *args, name="out.json"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def test_det_check_passes(tmp_path):
    code, text = run(tmp_path, "det-check")
    doc = json.loads(text)
    assert code == 0
    assert doc["result"]["closed_form_exact"] is True
    assert doc["result"]["fd_max_abs_dev"] < 1e-9
    assert doc["version"] == __version__
    assert doc["normalization"] == NORMALIZATION
    assert doc["config"]["command"] == "det-check"


def test_verdict_fail_exit_code(tmp_path):
    code, _ = run(tmp_path, "det-check", "--tol", "1e-20")
    assert code == 2


def test_convergence_rejects_subcritical_delta(tmp_path, capsys):
    code, text = run(tmp_path, "convergence", "--delta", "0", "--p", "4")
    assert code == 1
    assert text is None
    assert "delta_crit" in capsys.readouterr().err


@pytest.mark.parametrize("args", [["det-check", "--bogus", "1"], ["det-check", "--samples", "0"],
                                  ["no-such-command"], ["kernel-eval", "--lambda", "-1"]])
def test_usage_errors(tmp_path, args):
    assert cli.main([*args, "--out", str(tmp_path / "x.json")]) == 1


def test_unwritable_output(tmp_path):
    assert cli.main(["det-check", "--out", str(tmp_path / "missing" / "x.json")]) == 1


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\nsamples = 40\nseed = 7\n")
    code, text = run(tmp_path, "det-check", "--config", str(conf), "--samples", "30")
    cfg = json.loads(text)["config"]
    assert code == 0
    assert cfg["samples"] == 30
    assert cfg["seed"] == 7


def test_config_unknown_key(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("nonsense = 1\n")
    assert cli.main(["det-check", "--config", str(conf)]) == 1


def test_csv_output(tmp_path):
    code, text = run(tmp_path, "convergence", "--format", "csv", name="out.csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(text, newline="")))
    assert rows[0][0] == "lambda"
    meta = {r[0]: r[1] for r in rows if r and r[0].startswith("#")}
    assert meta["# version"] == __version__
    assert meta["# normalization"] == NORMALIZATION


def test_all_acceptance_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert cli.main(["all-acceptance", "--only", "1,3", "--seed", "42", "--out", str(a)]) == 0
    assert cli.main(["all-acceptance", "--only", "1,3", "--seed", "42", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_stdout_when_no_out(capsys):
    assert cli.main(["det-check", "--samples", "20"]) == 0
    captured = capsys.readouterr()
    assert json.loads(captured.out)["result"]["samples"] == 20
    assert captured.err.startswith("[PASS]")

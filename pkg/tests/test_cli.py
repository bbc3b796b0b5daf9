import json
import re
import subprocess
import sys

import jsonschema
import pytest

from rsp_lab import cli, report
from rsp_lab.ensemble import builtin, save_ensemble
from rsp_lab.errors import NumericalFailure


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    doc = json.loads(out) if out else None
    return code, doc, err


COMMANDS = [
    ("capacity", "builtin:basis2"),
    ("capacity", "builtin:bb84", "--brute-force", "0.05"),
    ("minimax", "builtin:pair0plus"),
    ("substate", "builtin:bb84", "--x", "+", "--r", "4"),
    ("substate", "builtin:cmixed2", "--x", "0", "--r", "16", "--mode", "paper"),
    ("rsp", "plan", "builtin:basis2", "--epsilon", "0.5", "--mode", "paper", "--copies", "paper"),
    ("rsp", "run", "builtin:basis2", "--epsilon", "0.5", "--x", "0"),
    ("rsp", "run", "builtin:pair0plus", "--epsilon", "0.3", "--x", "+", "--seed", "7"),
    ("rsp", "audit", "builtin:cmixed2", "--epsilon", "0.7"),
    ("classical", "plan", "builtin:cmixed2"),
    ("classical", "run", "builtin:basis2", "--x", "1", "--seed", "3"),
    ("classical", "audit", "builtin:const2", "--copies", "paper"),
    ("perturb", "builtin:bb84", "--epsilon", "0.1", "--strategy", "random", "--seed", "5"),
]


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: " ".join(a[:2]))
def test_structured_output_matches_schema(capsys, argv):
    code, doc, _ = run_json(capsys, *argv)
    assert code == 0
    report.validate_report(doc)
    assert doc["tool_version"] == cli.__version__


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: " ".join(a[:2]))
def test_text_numbers_appear_in_structured_output(capsys, argv):
    code, text, _ = run(capsys, *argv)
    assert code == 0
    _, raw, _ = run(capsys, *argv, "--format", "json")
    numbers = set(re.findall(r"-?\d+(?:\.\d+)?(?:e[-+]?\d+)?", raw))
    for line in text.splitlines()[2:]:  # skip the header lines
        if re.search(r"[+-]\d.*j", line):  # matrix rows: re/im pairs
            continue
        for tok in re.findall(r"(?<![\w.])-?\d+(?:\.\d+)?(?:e[-+]?\d+)?(?![\w.])", line.split(":", 1)[-1]):
            value = float(tok)
            assert tok in numbers or any(float(n) == value for n in numbers), (line, tok)


def test_capacity_example(capsys):
    code, doc, _ = run_json(capsys, "capacity", "builtin:basis2")
    assert code == 0
    assert doc["result"]["value"] == pytest.approx(1.0)
    assert doc["result"]["gap"] <= 1e-8
    assert doc["result"]["unit"] == "bits"


def test_const2_audit_example(capsys):
    code, doc, _ = run_json(capsys, "rsp", "audit", "builtin:const2", "--epsilon", "0.1")
    assert code == 0
    assert all(row["fidelity"] == pytest.approx(1.0) for row in doc["result"]["rows"])


def test_seeded_run_is_byte_identical(capsys):
    argv = ["rsp", "run", "builtin:basis2", "--epsilon", "0.5", "--x", "0", "--seed", "42", "--mode", "tight",
            "--copies", "robust", "--format", "json"]
    outs = [run(capsys, *argv)[1] for _ in range(2)]
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["result"]["mode"] == "sampled"


def test_floats_use_17_digits(capsys):
    _, out, _ = run(capsys, "minimax", "builtin:pair0plus", "--format", "json")
    assert '"T": 0.60087603669285605' in out


def test_output_path(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "capacity", "builtin:cmixed2", "--format", "json", "--output", str(path))
    assert code == 0 and out == ""
    report.validate_report(json.loads(path.read_text()))


def test_ensemble_file_and_fannes(capsys, tmp_path):
    src = tmp_path / "e.json"
    save_ensemble(builtin("basis2"), src)
    pert = tmp_path / "p.json"
    assert cli.main(["perturb", str(src), "--epsilon", "0.1", "--strategy", "random", "--format", "json",
                     "--output", str(pert)]) == 0
    code, doc, _ = run_json(capsys, "fannes", str(src), str(pert))
    assert code == 0
    res = doc["result"]
    assert res["delta"] <= res["bound"] and res["holds"]


def test_tolerance_overrides(capsys, monkeypatch):
    monkeypatch.setenv("RSP_LAB_TOL_PSD", "1e-7")
    code, doc, _ = run_json(capsys, "capacity", "builtin:basis2", "--tol", "capacity=1e-10")
    assert code == 0
    tol = doc["config"]["tolerances"]
    assert tol["psd"] == 1e-7 and tol["capacity"] == 1e-10
    code, _, err = run(capsys, "capacity", "builtin:basis2", "--tol", "bogus=1")
    assert code == 2 and "unknown tolerance" in err


def test_audit_failure_exit_code(capsys):
    code, doc, _ = run_json(capsys, "rsp", "audit", "builtin:basis2", "--epsilon", "0.1", "--r", "2")
    assert code == 1
    assert doc["result"]["passed"] is False


@pytest.mark.parametrize("argv", [
    ["capacity", "builtin:nope"],
    ["capacity", "/nonexistent/file.json"],
    ["rsp", "run", "builtin:basis2", "--x", "7"],
    ["rsp", "run", "builtin:basis2"],
    ["classical", "plan", "builtin:bb84"],
])
def test_input_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and "input error" in err


@pytest.mark.parametrize("argv", [
    [],
    ["rsp", "audit", "builtin:basis2", "--epsilon", "1.5"],
    ["rsp", "run", "builtin:basis2", "--x", "0", "--seed", str(2**64)],
    ["substate", "builtin:basis2", "--x", "0"],
    ["rsp"],
])
def test_usage_errors_print_help(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "usage:" in err


def test_parse_error_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": "2", "dim": 2, "items": []}')
    code, _, err = run(capsys, "capacity", str(bad))
    assert code == 2 and "schema_version" in err


def test_numerical_failure_exit_3(capsys, monkeypatch):
    def boom(*a, **k):
        raise NumericalFailure("forced")

    monkeypatch.setattr(cli.capacity, "solve_capacity", boom)
    code, _, err = run(capsys, "capacity", "builtin:basis2")
    assert code == 3 and "forced" in err


def test_schema_rejects_malformed_report(capsys):
    _, doc, _ = run_json(capsys, "capacity", "builtin:basis2")
    del doc["result"]["gap"]
    with pytest.raises(jsonschema.ValidationError):
        report.validate_report(doc)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rsp_lab", "capacity", "builtin:const2", "--format", "json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["value"] == 0.0

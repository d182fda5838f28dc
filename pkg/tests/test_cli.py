import json
import subprocess
import sys

import pytest

from markovtower import cli
from markovtower.cli import RunConfig, main
from markovtower.graph import builtin, save_graph
from markovtower.report import Report


def run_json(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    doc = json.loads(captured.out) if captured.out else None
    return code, doc, captured.err


def test_build_a2_dims(capsys):
    code, doc, _ = run_json(["build", "A2", "--depth", "4"], capsys)
    assert code == 0
    assert doc["result"]["dims"] == [1, 1, 1, 1, 1]
    assert doc["header"]["seed"] == 0


def test_verify_a3_all_pass(capsys):
    code, doc, err = run_json(["verify", "A3", "--depth", "6"], capsys)
    assert code == 0
    assert doc["pass"] and all(c["pass"] for c in doc["report"]["checks"])
    assert set(doc["report"]["checks"][0]) == {"name", "paper_label", "max_residual", "tolerance", "pass"}
    assert "PASS" in err


def test_embed_a3(capsys):
    code, doc, _ = run_json(["embed", "A3", "--n", "3"], capsys)
    assert code == 0
    phi = [c for c in doc["report"]["checks"] if c["paper_label"] != "inj"]
    assert phi and max(c["max_residual"] for c in phi) < 1e-9


@pytest.mark.parametrize(
    "argv",
    [
        ["fp", "E6"],
        ["principal", "D4"],
        ["gpa", "A3", "--n", "2"],
        ["projcat", "A3", "--depth", "6", "--samples", "1"],
        ["invariance", "A3"],
    ],
)
def test_commands_pass(argv, capsys):
    code, doc, _ = run_json(argv, capsys)
    assert code == 0
    assert doc["pass"]


def test_graph_file_input(tmp_path, capsys):
    path = tmp_path / "d4.json"
    path.write_bytes(save_graph(builtin("D4")))
    code, doc, _ = run_json(["fp", str(path)], capsys)
    assert code == 0
    assert doc["result"]["graph"]["modulus"] == pytest.approx(3**0.5)


def test_out_and_dot_files(tmp_path, capsys):
    out, dot = tmp_path / "r.json", tmp_path / "b.dot"
    code = main(["build", "A3", "--depth", "4", "--out", str(out), "--dot", str(dot)])
    assert code == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["result"]["dims"]
    assert dot.read_text().startswith("digraph") or dot.read_text().startswith("graph")


def test_deterministic_bytes(tmp_path):
    texts = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert main(["verify", "D4", "--depth", "5", "--seed", "7", "--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


@pytest.mark.parametrize(
    "argv",
    [
        ["fp", "B7"],
        ["fp", "A3", "--tolerance", "0"],
        ["verify", "A3", "--samples", "0"],
    ],
)
def test_input_errors_exit_2(argv, capsys):
    code, _, err = run_json(argv, capsys)
    assert code == 2
    assert err.startswith("error:")


def test_bad_json_file_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run_json(["fp", str(path)], capsys)
    assert code == 2
    assert "invalid JSON" in err


def test_failure_names_first_label(monkeypatch, capsys):
    def failing(cfg, graph):
        report = Report("fake")
        report.add("fine", "M1", 0.0, 1e-9)
        report.add("broken", "Tr3", 1.0, 1e-9)
        report.add("also broken", "R2", 1.0, 1e-9)
        return cli.Outcome({}, report)

    monkeypatch.setitem(cli.COMMANDS, "fp", failing)
    code, doc, err = run_json(["fp", "A3"], capsys)
    assert code == 1
    assert doc["pass"] is False
    assert "FAIL Tr3: broken" in err.splitlines()[-1]


def test_run_config_defaults():
    cfg = RunConfig("fp", "A3")
    assert cfg.seed == 0 and cfg.tolerance > 0
    with pytest.raises(ValueError):
        RunConfig("fp", "A3", tolerance=-1.0)


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "markovtower.cli", "build", "A2", "--depth", "2"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["dims"] == [1, 1, 1]

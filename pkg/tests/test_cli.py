from __future__ import annotations

import io
import json
import subprocess
import sys

import pytest
from conftest import TSO

from chronomc import corpus_text
from chronomc.cli import main
from chronomc.explore import check_final
from chronomc.lang import parse_program
from chronomc.semantics import parse_schedule, run


@pytest.fixture
def lit(tmp_path):
    """Write a corpus program to a temporary .lit file and return its path."""

    def write(name, text=None):
        path = tmp_path / f"{name}.lit"
        path.write_text(text if text is not None else corpus_text(name))
        return str(path)

    return write


def call(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def witness_of(stdout):
    lines = [l for l in stdout.splitlines() if l.strip().startswith("witness:")]
    assert lines, stdout
    return lines[0].split(":", 1)[1].strip()


# ---------------------------------------------------------------------------
# explore
# ---------------------------------------------------------------------------


def test_explore_sb_tso_finds_weak_outcome(lit):
    path = lit("sb")
    code, stdout = call("explore", "--model", "tso", path)
    assert code == 1
    assert "satisfied" in stdout and "not satisfied" not in stdout
    prog = parse_program(corpus_text("sb"))
    _, config = run(prog, parse_schedule(witness_of(stdout)), TSO)
    assert check_final(config, prog.final)


def test_explore_sb_sc_passes(lit):
    code, stdout = call("explore", "--model", "sc", lit("sb"))
    assert code == 0
    assert "not satisfied" in stdout and "violations: 0" in stdout


def test_explore_defaults_to_sc(lit):
    assert call("explore", lit("sb")) == call("explore", "--model", "sc", lit("sb"))


def test_explore_brute_force_engine(lit):
    code, stdout = call("explore", "--model", "tso", "--dpor", "none", lit("fwd"))
    assert code == 0
    assert "engine: none" in stdout
    assert "chronological traces: 3" in stdout
    assert "executions explored: 20" in stdout


def test_explore_assert_violation(lit):
    path = lit("spin", """locations x y
thread p:
  store x 1
  store y 1
thread q:
  load $r y
  assume $r == 1
  load $s x
  assert $s == 1
""")
    code, stdout = call("explore", "--model", "pso", path)
    assert code == 1 and "assert" in stdout
    assert call("explore", "--model", "tso", path)[0] == 0


def test_dot_directory(lit, tmp_path):
    out = tmp_path / "dots"
    code, _ = call("explore", "--model", "tso", "--dot", str(out), lit("fwd"))
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["trace_0001.dot", "trace_0002.dot", "trace_0003.dot"]
    assert (out / "trace_0001.dot").read_text().startswith("digraph trace_0001 {")


def test_json_report(lit, tmp_path):
    target = tmp_path / "report.json"
    code, _ = call("explore", "--model", "tso", "--json", str(target), lit("sb"))
    data = json.loads(target.read_text())
    assert code == 1
    assert data["exists_satisfied"] is True
    assert data["distinct_chronological_traces"] == 4
    assert "wall_time" in data


def test_output_is_byte_identical(lit, tmp_path):
    path = lit("mp")
    runs = []
    for i in range(2):
        target = tmp_path / f"r{i}.json"
        code, stdout = call("explore", "--model", "pso", "--json", str(target), path)
        data = json.loads(target.read_text())
        data.pop("wall_time")
        runs.append((code, stdout, json.dumps(data, sort_keys=True)))
    assert runs[0] == runs[1]


# ---------------------------------------------------------------------------
# enumerate, robustness
# ---------------------------------------------------------------------------


def test_enumerate_lists_each_trace(lit):
    code, stdout = call("enumerate", "--model", "tso", lit("fwd"))
    assert code == 0
    listed = [l for l in stdout.splitlines() if l.startswith("trace ")]
    assert len(listed) == 3


def test_robustness_sb_tso(lit):
    code, stdout = call("robustness", "--model", "tso", lit("sb"))
    assert code == 1
    assert "TSO: not robust" in stdout
    assert witness_of(stdout)


def test_robustness_fenced_sb_all_models(lit):
    code, stdout = call("robustness", lit("sb_fenced"))
    assert code == 0
    assert "TSO: robust" in stdout and "PSO: robust" in stdout


def test_robustness_json(lit, tmp_path):
    target = tmp_path / "rob.json"
    call("robustness", "--model", "pso", "--json", str(target), lit("mp"))
    data = json.loads(target.read_text())
    assert data["verdict"] == "not robust"


# ---------------------------------------------------------------------------
# replay and dot
# ---------------------------------------------------------------------------


def test_replay_mp_pso(lit):
    code, stdout = call("replay", "--model", "pso", "--schedule",
                        "p,p,upd(p,y),q,q,upd(p,x)", lit("mp"))
    assert code == 0
    assert "q: $r=1 $s=0" in stdout
    assert "memory: x=1 y=1" in stdout


def test_replay_prefix_reports_pending(lit, tmp_path):
    target = tmp_path / "replay.json"
    code, stdout = call("replay", "--model", "tso", "--schedule", "p",
                        "--json", str(target), lit("sb"))
    assert code == 0 and "pending: upd(p)" in stdout
    data = json.loads(target.read_text())
    # the exported trace is that of the completed execution
    assert len(data["trace"]["vertices"]) == 2


def test_dot_command(lit):
    code, stdout = call("dot", "--model", "tso", "--schedule", "p,p,q,upd(q),q,upd(p)",
                        "--trace", "shasha-snir", lit("sb"))
    assert code == 0
    assert stdout.startswith("digraph") and stdout.count("cf_ss") == 2
    code, stdout = call("dot", "--model", "tso", "--schedule", "p,p,q,upd(q),q,upd(p)", lit("sb"))
    assert 'label="su"' in stdout


# ---------------------------------------------------------------------------
# selfcheck
# ---------------------------------------------------------------------------


def test_selfcheck_random(lit):
    code, stdout = call("selfcheck", "--seed", "5", "--count", "3")
    assert code == 0
    assert "correspondence: 3 passed, 0 failed" in stdout
    assert "clocks: 3 passed, 0 failed" in stdout


def test_selfcheck_program(lit):
    code, stdout = call("selfcheck", "--model", "pso", lit("fwd"))
    assert code == 0 and "correspondence: 1 passed" in stdout


# ---------------------------------------------------------------------------
# Errors and exit codes
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["explore"],
        ["frobnicate", "x.lit"],
        ["explore", "--model", "arm", "x.lit"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv, io.StringIO()) == 2


def test_missing_file(tmp_path, capsys):
    assert call("explore", str(tmp_path / "nope.lit"))[0] == 2
    assert "cannot read" in capsys.readouterr().err


def test_parse_error_reports_position(lit, capsys):
    path = lit("bad", "locations x\nthread p:\n  stor x 1\n")
    assert call("explore", path)[0] == 2
    assert ":3:" in capsys.readouterr().err


@pytest.mark.parametrize("schedule", ["p,upd(", "p,upd(q)"])
def test_bad_schedules(lit, schedule, capsys):
    assert call("replay", "--model", "tso", "--schedule", schedule, lit("sb"))[0] == 2


def test_node_limit(lit, capsys):
    assert call("explore", "--model", "tso", "--max-nodes", "3", lit("sb"))[0] == 3
    assert "limit exceeded" in capsys.readouterr().err


def test_nonpositive_limit(lit, capsys):
    assert call("explore", "--max-steps", "0", lit("sb"))[0] == 2


def test_console_script_entry_point(lit):
    proc = subprocess.run(
        [sys.executable, "-m", "chronomc.cli", "explore", "--model", "pso", lit("mp")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert "witness:" in proc.stdout

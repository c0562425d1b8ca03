import json
from pathlib import Path

import pytest

from ertkit.cli import main

SPECS = Path(__file__).resolve().parent.parent / "specs"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eval_text_exact(capsys):
    code, out, _ = run(capsys, "eval", "corpus:trunc")
    assert code == 0
    assert "5/2 (exact)" in out


def test_eval_text_lower_bound(capsys):
    code, out, _ = run(capsys, "eval", "corpus:geo", "--state", "c=1")
    assert code == 0
    assert "5 (lower bound, depth 64)" in out
    assert "46116860184273879037/9223372036854775808" in out


def test_eval_json_is_byte_identical(capsys):
    argv = ("eval", "corpus:geo", "--state", "c=1", "--format", "json")
    code, first, _ = run(capsys, *argv)
    assert code == 0
    code, second, _ = run(capsys, *argv)
    assert code == 0
    assert first == second
    doc = json.loads(first)
    assert doc["schema"] == "ertkit-report/1"
    assert doc["results"][0]["kind"] == "lower"
    assert doc["results"][0]["float"] == 5.0


def test_eval_program_file_and_multiple_states(tmp_path, capsys):
    prog = tmp_path / "drain.pp"
    prog.write_text("while (x > 0) { x := x - 1 }\n")
    code, out, _ = run(
        capsys, "eval", str(prog), "--state", "x=0", "--state", "x=3", "--format", "json"
    )
    assert code == 0
    doc = json.loads(out)
    assert [r["rational"] for r in doc["results"]] == ["1", "7"]
    assert all(r["kind"] == "exact" for r in doc["results"])


def test_eval_with_runtime_argument(capsys):
    code, out, _ = run(capsys, "eval", "corpus:trunc", "--f", "10")
    assert code == 0
    assert "25/2 (exact)" in out


def test_eval_depth_flag(capsys):
    code, out, _ = run(
        capsys, "eval", "corpus:geo", "--state", "c=1", "--depth", "8", "--format", "json"
    )
    assert code == 0
    doc = json.loads(out)
    # 5 - 3/2^7
    assert doc["results"][0]["rational"] == "637/128"


def test_timings_are_opt_in(capsys):
    argv = ("eval", "corpus:trunc", "--format", "json")
    _, plain, _ = run(capsys, *argv)
    assert "timings" not in json.loads(plain)
    _, timed, _ = run(capsys, *argv, "--timings")
    assert "timings" in json.loads(timed)
    code, out, err = run(capsys, "eval", "corpus:trunc", "--timings")
    assert "time:" in err and "time:" not in out


def test_crosscheck_pass(capsys):
    code, out, _ = run(capsys, "crosscheck", "corpus:trunc")
    assert code == 0
    assert "pass: exact equality" in out


def test_crosscheck_json_carries_both_sides(capsys):
    code, out, _ = run(capsys, "crosscheck", "corpus:geo", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["status"] == "pass"
    assert doc["result"]["model"]["rational"] == "5"
    assert doc["result"]["transformer"]["kind"] == "lower"


def test_check_inv_holds(capsys):
    code, out, _ = run(capsys, "check-inv", str(SPECS / "geo_upper.spec"))
    assert code == 0
    assert "Holds" in out


def test_check_inv_fails_with_witness(tmp_path, capsys):
    weak = tmp_path / "weak.spec"
    weak.write_text(
        "check: upper\ncorpus: geo\ninvariant: 1 + [c = 1] * 3\ndomain: c in {0, 1}\n"
    )
    code, out, _ = run(capsys, "check-inv", str(weak))
    assert code == 1
    assert "witness {c=1}" in out
    assert "9/2" in out


def test_check_inv_rejects_wrong_kind(capsys):
    code, _, err = run(capsys, "check-inv", str(SPECS / "geo_omega.spec"))
    assert code == 2
    assert "expected upper" in err


def test_check_omega_both_directions(capsys):
    code, out, _ = run(capsys, "check-omega", str(SPECS / "geo_omega.spec"))
    assert code == 0
    assert "omega invariant (lower): Holds" in out
    assert "omega invariant (upper): Holds" in out
    assert "consistent" in out


def test_check_omega_failing_sequence(tmp_path, capsys):
    bad = tmp_path / "bad.spec"
    bad.write_text(
        "check: omega\ncorpus: geo\ninvariant_n: 1 + [c = 1] * 5\n"
        "direction: lower\ndomain: c in {0, 1}\nnmax: 10\n"
    )
    code, out, _ = run(capsys, "check-omega", str(bad))
    assert code == 1
    assert "Fails" in out


def test_refine_table(capsys):
    code, out, _ = run(capsys, "refine", str(SPECS / "geo_refine.spec"))
    assert code == 0
    assert "{c=0}: 1" in out
    assert "{c=1}: 6" in out


def test_refine_precondition_failure(tmp_path, capsys):
    bad = tmp_path / "bad_refine.spec"
    bad.write_text(
        "check: refine\ncorpus: geo\ninvariant: 1 + [c = 1] * 3\n"
        "domain: c in {0, 1}\nrounds: 1\n"
    )
    code, out, _ = run(capsys, "refine", str(bad))
    assert code == 1
    assert "precondition failed" in out


def test_props_clean_and_mutant(capsys):
    code, out, _ = run(capsys, "props", "--count", "30", "--seed", "5")
    assert code == 0
    assert "all properties hold" in out
    code, out, _ = run(capsys, "props", "--count", "20", "--seed", "5", "--mutant")
    assert code == 0
    assert "mutant caught" in out


def test_corpus_command(capsys):
    code, out, _ = run(capsys, "corpus", "geo")
    assert code == 0
    assert "all checks passed" in out
    code, _, err = run(capsys, "corpus", "nosuch")
    assert code == 2
    assert "unknown corpus entry" in err


def test_corpus_parameter_flags(capsys):
    code, out, _ = run(capsys, "corpus", "coupon", "--N", "2", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["params"]["N"] == 2
    assert all(c["ok"] for c in doc["checks"])


def test_export_mdp_stdout_and_file(tmp_path, capsys):
    code, out, _ = run(capsys, "export-mdp", "corpus:trunc")
    assert code == 0
    assert out.startswith("digraph")
    target = tmp_path / "m.dot"
    code, out, _ = run(capsys, "export-mdp", "corpus:trunc", "--out", str(target))
    assert code == 0
    assert target.read_text().startswith("digraph")


def test_export_mdp_cap_error(capsys, monkeypatch):
    monkeypatch.setenv("ERTKIT_MAX_NODES", "10")
    code, _, err = run(capsys, "export-mdp", "corpus:coupon")
    assert code == 2
    assert "node" in err.lower()


def test_node_cap_flag_beats_environment(capsys, monkeypatch):
    monkeypatch.setenv("ERTKIT_MAX_NODES", "10")
    code, out, _ = run(capsys, "export-mdp", "corpus:trunc", "--node-cap", "1000")
    assert code == 0
    assert out.startswith("digraph")


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.pp"
    bad.write_text("while x > 0 { skip }")
    code, _, err = run(capsys, "eval", str(bad))
    assert code == 2
    assert "parse error" in err


def test_state_parse_error(capsys):
    code, _, err = run(capsys, "eval", "corpus:geo", "--state", "c")
    assert code == 2
    assert "name=value" in err


def test_unbound_variable_reported(tmp_path, capsys):
    prog = tmp_path / "free.pp"
    prog.write_text("while (x > 0) { x := x - 1 }")
    code, _, err = run(capsys, "eval", str(prog))
    assert code == 2
    assert "x" in err


@pytest.mark.parametrize(
    "name",
    [
        "geo_upper",
        "geo_omega",
        "geo_refine",
        "rwalk_lower",
        "npast_b_omega",
        "npast_drain_omega",
    ],
)
def test_shipped_specs_all_pass(name, capsys):
    path = SPECS / f"{name}.spec"
    with open(path) as handle:
        kind = [l.split(":", 1)[1].strip() for l in handle if l.startswith("check:")][0]
    command = {"upper": "check-inv", "omega": "check-omega", "refine": "refine"}[kind]
    code, _, _ = run(capsys, command, str(path))
    assert code == 0

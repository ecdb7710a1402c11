import json
import subprocess
import sys
import time
from importlib import resources

import jsonschema
import pytest

from cfgmatrix.cli import main

from helpers import DATA, TWINS_2X2

SCHEMA = json.loads(resources.files("cfgmatrix").joinpath("schema/verdict.schema.json").read_text())


def path(name):
    return str(DATA / name)


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def test_compare_json_different(capsys):
    code, out, _ = run(capsys, "compare", path("answer.cfg"), path("answer_wrong.cfg"), "--json", "--seed", "42")
    doc = json.loads(out)
    assert code == 1 and doc["outcome"] == "Different"
    assert doc["oracle"]["witness"]["word"] == "cbabd"
    jsonschema.validate(doc, SCHEMA)


def test_compare_human_equivalent(capsys):
    code, out, _ = run(capsys, "compare", path("answer.cfg"), path("answer_equiv.cfg"))
    assert code == 0 and out.startswith("outcome: ProbablyEquivalent")


def test_compare_flags(capsys):
    code, out, _ = run(
        capsys, "compare", path("answer.cfg"), path("answer_equiv.cfg"), "--json", "--no-timestamp",
        "--dims", "2,4", "--trials", "3", "--tol-equal", "1e-11", "--tol-diff", "1e-6",
        "--oracle-len", "5", "--delta", "0.1",
    )
    cfg = json.loads(out)["config"]
    assert code == 0
    assert cfg["dims"] == [2, 4] and cfg["trials_per_dim"] == 3
    assert cfg["equal_tol"] == 1e-11 and cfg["different_tol"] == 1e-6
    assert cfg["oracle_len"] == 5 and cfg["delta_override"] == 0.1


def test_compare_inline_grammars(capsys):
    code, out, _ = run(capsys, "compare", "S -> a | b ;", "S -> a ;")
    assert code == 1


def test_compare_class_mismatch(capsys):
    code, _, _ = run(capsys, "compare", "S -> S A | a ;\nA -> eps ;", "S -> a ;")
    assert code == 3


def test_json_byte_identical_without_timestamp(capsys):
    argv = ("compare", path("answer.cfg"), path("answer_wrong.cfg"), "--json", "--seed", "42", "--no-timestamp")
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second and "timestamp" not in first


def test_json_timestamp_present_by_default(capsys):
    _, out, _ = run(capsys, "compare", path("answer.cfg"), path("answer_equiv.cfg"), "--json")
    assert "timestamp" in json.loads(out)["timing"]


def test_enumerate_intro(capsys):
    code, out, _ = run(capsys, "enumerate", path("intro.cfg"), "--max-len", "5")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 5
    assert lines == ["c\t1", "ab\t1", "acb\t1", "accb\t1", "acccb\t1"]


def test_enumerate_json(capsys):
    code, out, _ = run(capsys, "enumerate", path("answer_ambiguous.cfg"), "--max-len", "5", "--json")
    doc = json.loads(out)
    assert code == 0 and doc["stabilized"]
    assert {"word": "babab", "coeff": 2} in doc["coefficients"]


def test_enumerate_unbounded(capsys):
    code, _, err = run(capsys, "enumerate", "S -> S A | a ;\nA -> eps ;", "--max-len", "3")
    assert code == 2


def test_distinguish_condp(capsys):
    code, out, _ = run(capsys, "distinguish", "--left", "aab,bab", "--right", "aba,bba", "--method", "condp")
    assert code == 0 and out.strip() == "condition P: satisfied"


def test_distinguish_condp_fails_for_twins(capsys):
    code, out, _ = run(capsys, "distinguish", "--left", TWINS_2X2[0], "--right", TWINS_2X2[1])
    assert out.strip() == "condition P: not satisfied"


def test_distinguish_suffix(capsys):
    code, out, _ = run(capsys, "distinguish", "--left", "ab", "--right", "ba", "--method", "suffix", "--json")
    doc = json.loads(out)
    assert code == 0 and doc["dim"] == 5 and doc["separated"]


def test_distinguish_numeric(capsys):
    _, out, _ = run(capsys, "distinguish", "--left", TWINS_2X2[0], "--right", TWINS_2X2[1], "--method", "numeric", "--json")
    assert json.loads(out)["verdict"] == "AlwaysEqual"
    _, out, _ = run(
        capsys, "distinguish", "--left", TWINS_2X2[0], "--right", TWINS_2X2[1],
        "--method", "numeric", "--dim", "3", "--json",
    )
    assert json.loads(out)["verdict"] == "DistinguishedBy"


def test_census_json_lines(capsys):
    code, out, _ = run(capsys, "census", "--alphabet", "ab", "--max-words", "3", "--max-len", "5",
                       "--exact-words", "--exact-len", "--trials", "200")
    docs = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and docs
    assert all(set(d) >= {"U", "V", "condition_p", "trials", "verdict"} for d in docs)


def test_census_out_of_bounds(capsys):
    code, _, err = run(capsys, "census", "--alphabet", "abcd")
    assert code == 64 and "limits" in err


def test_classify(capsys):
    assert run(capsys, "classify", path("answer.cfg"))[0] == 0
    code, out, _ = run(capsys, "classify", "S -> S A | a ;\nA -> eps ;", "--json")
    assert code == 3 and json.loads(out)["class"] == "second"


def test_solve_scalar(capsys):
    code, out, _ = run(capsys, "solve", path("intro.cfg"), "--scalar", "0.05", "--json")
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "Converged"


def test_replay_round_trip(capsys, tmp_path):
    _, out, _ = run(capsys, "compare", path("answer.cfg"), path("answer_wrong.cfg"), "--json")
    evidence = tmp_path / "verdict.json"
    evidence.write_text(out)
    code, rep, _ = run(capsys, "replay", str(evidence), path("answer.cfg"), path("answer_wrong.cfg"), "--json")
    doc, recorded = json.loads(rep), json.loads(out)
    assert code == 0 and doc["diffs"] == [t["diff"] for t in recorded["trials"]]
    code, _, err = run(capsys, "replay", str(evidence), path("answer.cfg"), path("answer_ambiguous.cfg"))
    assert code == 4 and "EvidenceMismatch" in err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["compare", "only-one.cfg"],
        ["compare", "a.cfg", "b.cfg", "--dims", "x"],
        ["enumerate", "g.cfg"],
        ["distinguish", "--left", "ab"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 64 and err


def test_missing_file_is_usage_error(capsys):
    code, _, err = run(capsys, "compare", "no-such-file.cfg", path("answer.cfg"))
    assert code == 64 and "no-such-file.cfg" in err


def test_bad_grammar_is_error(capsys):
    code, _, err = run(capsys, "compare", "S -> ;; x", path("answer.cfg"))
    assert code == 4 and err


def test_large_pair_under_a_second(capsys):
    start = time.perf_counter()
    code, out, _ = run(capsys, "compare", path("minic.cfg"), path("minic_rassoc.cfg"))
    assert time.perf_counter() - start < 1.0
    assert code == 0


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "cfgmatrix", "enumerate", path("intro.cfg"), "--max-len", "3"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0 and res.stdout.splitlines() == ["c\t1", "ab\t1", "acb\t1"]

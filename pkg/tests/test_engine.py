import json
from importlib import resources

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfgmatrix.engine import (
    CompareConfig,
    Outcome,
    canonical_grammar,
    compare,
    fingerprint,
    replay,
    trial_substitution,
)
from cfgmatrix.errors import EvidenceMismatch, SecondClassGrammar
from cfgmatrix.grammar import Grammar, parse_grammar
from cfgmatrix.linalg import frobenius_norm
from cfgmatrix.oracle import format_word, membership, min_distinguishing_word

from helpers import EXAMPLES, load, word_product_pair

SCHEMA = json.loads(resources.files("cfgmatrix").joinpath("schema/verdict.schema.json").read_text())
INFINITE = "S -> S A | a ;\nA -> eps ;"


@pytest.fixture(scope="module")
def ref_wrong():
    return compare(load("answer.cfg"), load("answer_wrong.cfg"))


# -- example verdicts ------------------------------------------------------

def test_equivalent_pair():
    v = compare(load("answer.cfg"), load("answer_equiv.cfg"))
    assert v.outcome is Outcome.PROBABLY_EQUIVALENT and v.exit_code == 0
    assert all(d < 1e-10 for d in v.diffs)
    assert v.witness is None and v.trials_run == 20


def test_different_pair_with_witness(ref_wrong):
    assert ref_wrong.outcome is Outcome.DIFFERENT and ref_wrong.exit_code == 1
    assert format_word(ref_wrong.witness.word) == "cbabd"
    assert max(d for d in ref_wrong.diffs if d is not None) > 1e-7
    assert not ref_wrong.matrix_only


def test_ambiguity_separation():
    v = compare(load("answer.cfg"), load("answer_ambiguous.cfg"))
    assert v.outcome is Outcome.DIFFERENT
    assert v.witness_trial is not None
    w = v.witness
    assert format_word(w.word) == "babab" and (w.coeff_left, w.coeff_right) == (1, 2)


def test_long_witness_is_matrix_only():
    v = compare(load("long_a.cfg"), load("long_b.cfg"))
    assert v.outcome is Outcome.DIFFERENT
    assert v.matrix_only and v.witness is None and v.oracle.checked_len == 8


@pytest.mark.parametrize("n", [3, 5, 10])
def test_word_product_pair_short(n):
    assert compare(*word_product_pair(n)).outcome is Outcome.DIFFERENT


def test_word_product_pair_underflow():
    v = compare(*word_product_pair(30), CompareConfig(dims=(2,)))
    assert v.outcome is Outcome.PROBABLY_EQUIVALENT


# -- class probes ----------------------------------------------------------

def test_class_mismatch():
    v = compare(parse_grammar(INFINITE), parse_grammar("S -> a ;"))
    assert v.outcome is Outcome.CLASS_MISMATCH and v.exit_code == 3
    assert v.trials_run == 0
    assert v.probes["left"]["result"] != "Converged"


def test_both_second_class():
    with pytest.raises(SecondClassGrammar):
        compare(parse_grammar(INFINITE), parse_grammar(INFINITE))


# -- config ----------------------------------------------------------------

@pytest.mark.parametrize(
    "kwargs",
    [
        {"dims": ()},
        {"dims": (0,)},
        {"trials_per_dim": 0},
        {"equal_tol": 1e-6, "different_tol": 1e-7},
        {"equal_tol": 0.0},
        {"delta_override": -0.1},
        {"oracle_len": -1},
        {"ladder_factor": 1.0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        CompareConfig(**kwargs)


def test_config_round_trip():
    cfg = CompareConfig(dims=(2, 4), trials_per_dim=3, seed=9, delta_override=0.2)
    assert CompareConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_delta_override_used():
    v = compare(load("answer.cfg"), load("answer_wrong.cfg"), CompareConfig(delta_override=0.05))
    assert v.delta == 0.05 and v.outcome is Outcome.DIFFERENT


# -- substitutions ---------------------------------------------------------

def test_trial_substitution_deterministic_and_bounded():
    a = trial_substitution(["a", "b"], 3, 0.2, 7, 4)
    b = trial_substitution(["a", "b"], 3, 0.2, 7, 4)
    c = trial_substitution(["a", "b"], 3, 0.2, 7, 5)
    assert all(np.array_equal(a[t], b[t]) for t in "ab")
    assert not np.array_equal(a["a"], c["a"])
    assert all(frobenius_norm(a[t]) <= 0.2 + 1e-15 for t in "ab")


def test_union_alphabet():
    v = compare(parse_grammar("S -> a | b ;"), parse_grammar("S -> a ;"))
    assert v.outcome is Outcome.DIFFERENT
    assert set(v.trials[0].substitution.terminals) == {"a", "b"}


# -- invariants ------------------------------------------------------------

@pytest.mark.parametrize("name", EXAMPLES)
def test_no_false_difference_on_identical_input(name):
    # the oracle does not depend on the seed, so it runs once
    g = load(name)
    assert compare(g, g).outcome is Outcome.PROBABLY_EQUIVALENT
    for seed in range(1, 100):
        v = compare(g, g, CompareConfig(seed=seed, oracle_len=0))
        assert v.outcome is Outcome.PROBABLY_EQUIVALENT, seed


def _reorder(g: Grammar, rnd) -> Grammar:
    prods = list(g.productions)
    rnd.shuffle(prods)
    names = list(g.nonterminals)
    rnd.shuffle(names)
    return Grammar(tuple(names), g.terminals, g.axiom, tuple(prods))


@settings(max_examples=12, deadline=None)
@given(st.sampled_from([("answer.cfg", "answer_equiv.cfg"), ("answer.cfg", "answer_wrong.cfg"), ("answer.cfg", "answer_ambiguous.cfg")]), st.randoms(use_true_random=False))
def test_invariant_under_reordering(pair, rnd):
    g1, g2 = load(pair[0]), load(pair[1])
    cfg = CompareConfig(trials_per_dim=3)
    a = compare(g1, g2, cfg)
    b = compare(_reorder(g1, rnd), _reorder(g2, rnd), cfg)
    assert a.outcome == b.outcome and a.diffs == b.diffs
    assert a.fingerprints == b.fingerprints


def test_canonical_grammar_is_stable():
    g = load("answer.cfg")
    assert fingerprint(canonical_grammar(g)) == fingerprint(g)
    assert canonical_grammar(g).nonterminals[0] == g.axiom


@pytest.mark.parametrize("pair", [("answer.cfg", "answer_wrong.cfg"), ("answer.cfg", "answer_ambiguous.cfg"), ("long_a.cfg", "long_b.cfg")])
def test_more_trials_keep_the_prefix(pair):
    g1, g2 = load(pair[0]), load(pair[1])
    few = compare(g1, g2, CompareConfig(trials_per_dim=2, seed=3))
    many = compare(g1, g2, CompareConfig(trials_per_dim=6, seed=3))
    by_key = {(t.dim, t.trial): t.diff for t in many.trials}
    assert all(by_key[(t.dim, t.trial)] == t.diff for t in few.trials)
    if few.outcome is Outcome.DIFFERENT:
        assert many.outcome is Outcome.DIFFERENT


def test_matrix_difference_confirmed_or_flagged():
    for pair in [("answer.cfg", "answer_wrong.cfg"), ("answer.cfg", "answer_ambiguous.cfg"), ("long_a.cfg", "long_b.cfg")]:
        g1, g2 = load(pair[0]), load(pair[1])
        v = compare(g1, g2)
        assert v.witness_trial is not None
        if v.matrix_only:
            # the witness is beyond the oracle's range; confirm it directly
            assert min_distinguishing_word(g1, g2, 8) is None
            word = ("a",) * 15
            assert membership(g1, word) != membership(g2, word)
        else:
            w = v.witness
            assert membership(g1, w.word) != membership(g2, w.word)


# -- evidence --------------------------------------------------------------

def test_replay_identical(ref_wrong):
    doc = json.loads(json.dumps(ref_wrong.to_json()))
    assert replay(doc, load("answer.cfg"), load("answer_wrong.cfg")) == ref_wrong.diffs


def test_replay_separates_again(ref_wrong):
    doc = ref_wrong.to_json()
    diffs = replay(doc, load("answer.cfg"), load("answer_wrong.cfg"))
    assert diffs[ref_wrong.witness_trial] > 1e-7


def test_replay_long_pair():
    v = compare(load("long_a.cfg"), load("long_b.cfg"))
    assert replay(v.to_json(), load("long_a.cfg"), load("long_b.cfg")) == v.diffs


def test_replay_wrong_grammar(ref_wrong):
    with pytest.raises(EvidenceMismatch):
        replay(ref_wrong.to_json(), load("answer.cfg"), load("answer_ambiguous.cfg"))


def test_replay_tampered(ref_wrong):
    doc = json.loads(json.dumps(ref_wrong.to_json()))
    doc["trials"][0]["rungs"][0]["diff"] = 0.123
    with pytest.raises(EvidenceMismatch):
        replay(doc, load("answer.cfg"), load("answer_wrong.cfg"))


def test_witness_substitution_separates(ref_wrong):
    from cfgmatrix.eqsystem import compile_grammar
    from cfgmatrix.solver import iterate

    sub = ref_wrong.witness_substitution
    s1 = iterate(compile_grammar(load("answer.cfg")), sub)
    s2 = iterate(compile_grammar(load("answer_wrong.cfg")), sub)
    assert np.max(np.abs(s1.assignment["S"] - s2.assignment["S"])) > 1e-7


# -- JSON ------------------------------------------------------------------

@pytest.mark.parametrize("pair", [("answer.cfg", "answer_equiv.cfg"), ("answer.cfg", "answer_wrong.cfg"), ("long_a.cfg", "long_b.cfg")])
def test_verdict_matches_schema(pair):
    v = compare(load(pair[0]), load(pair[1]))
    jsonschema.validate(v.to_json(), SCHEMA)
    jsonschema.validate(v.to_json(timestamp=False), SCHEMA)


def test_class_mismatch_matches_schema():
    v = compare(parse_grammar(INFINITE), parse_grammar("S -> a ;"))
    jsonschema.validate(v.to_json(), SCHEMA)


def test_json_deterministic_without_timestamp():
    a = compare(load("answer.cfg"), load("answer_wrong.cfg"), CompareConfig(seed=42))
    b = compare(load("answer.cfg"), load("answer_wrong.cfg"), CompareConfig(seed=42))
    assert json.dumps(a.to_json(timestamp=False)) == json.dumps(b.to_json(timestamp=False))
    assert "timing" not in a.to_json(timestamp=False) and "timing" in a.to_json()

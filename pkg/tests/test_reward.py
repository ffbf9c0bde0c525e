import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cotforge.embedding import cosine, embed
from cotforge.errors import EmptyReference, InvariantViolation
from cotforge.reward import (
    CCVRConfig, answer_reward, ccvr_reward, edit_matrix, format_reward, parse_tagged_output,
    process_reward, semantic_raw, semantic_score, soft_edit_distance, split_sentences,
)
from oracles import alignment_edit_distance, pair_count, sentence_sim

WORDS = ["cat", "dog", "sits", "runs", "tree"]


def random_sentences(rng, k):
    return [" ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3))) for _ in range(k)]


# -- parsing / format / answer -------------------------------------------------

def test_parse_well_formed():
    p = parse_tagged_output("<think>a.</think><answer>yes</answer>")
    assert (p.think_text, p.answer_text, p.tags_in_order) == ("a.", "yes", True)
    assert format_reward(p) == 1.0


def test_parse_out_of_order():
    p = parse_tagged_output("<answer>yes</answer><think>a.</think>")
    assert not p.tags_in_order and format_reward(p) == 0.0


def test_parse_unclosed():
    p = parse_tagged_output("<think>a.")
    assert p.think_text is None and not p.tags_in_order


@pytest.mark.parametrize("raw", [
    "<think>a.</think>",
    "<think>a.</think><think>b.</think><answer>yes</answer>",
    "",
])
def test_format_zero(raw):
    assert format_reward(parse_tagged_output(raw)) == 0.0


@pytest.mark.parametrize("answer, gt, expected", [
    ("Yes.", "yes", 1.0),
    ("yes and no", "yes", 0.0),
    ("no", "yes", 0.0),
    ("  NO! ", "no", 1.0),
    ("maybe", "no", 0.0),
    ("yesterday", "yes", 0.0),
])
def test_answer_reward(answer, gt, expected):
    p = parse_tagged_output(f"<think>t.</think><answer>{answer}</answer>")
    assert answer_reward(p, gt) == expected


def test_answer_absent():
    assert answer_reward(parse_tagged_output("<think>t.</think>"), "yes") == 0.0


@pytest.mark.parametrize("text, expected", [
    ("A. B!", ["A", "B"]),
    ("  ", []),
    ("x.\ny.", ["x", "y"]),
    ("one? two.. three", ["one", "two", "three"]),
])
def test_split_sentences(text, expected):
    assert split_sentences(text) == expected


# -- semantic score --------------------------------------------------------------

def test_semantic_identity():
    assert semantic_score(["the cat sits"], ["the cat sits"], 0.7) == 1.0


def test_semantic_disjoint():
    assert semantic_raw(["aa", "bb"], ["cc", "dd"], 0.7) == 0.0


def test_semantic_clamp():
    gen = ref = ["the cat", "the cat"]
    assert semantic_raw(gen, ref, 0.7) == 2.0
    assert semantic_score(gen, ref, 0.7) == 1.0


def test_semantic_empty():
    assert semantic_score([], ["x"], 0.7) == 0.0
    with pytest.raises(EmptyReference):
        semantic_score(["x"], [], 0.7)


def test_semantic_matches_pair_enumeration():
    rng = random.Random(7)
    for _ in range(100):
        gen, ref = random_sentences(rng, rng.randint(0, 6)), random_sentences(rng, rng.randint(1, 6))
        assert semantic_raw(gen, ref, 0.7) == pair_count(gen, ref, 0.7) / max(len(gen), len(ref))


def test_threshold_edge_counts():
    a, b = "the cat sits", "the cat runs"
    exact = cosine(embed(a), embed(b))
    assert semantic_raw([a], [b], exact) == 1.0
    assert semantic_raw([a], [b], float(np.nextafter(exact, 1.0))) == 0.0
    assert soft_edit_distance([a], [b], exact)[0] == 0.0
    assert soft_edit_distance([a], [b], float(np.nextafter(exact, 1.0)))[0] == 1.0


# -- soft edit distance ------------------------------------------------------------

def test_edit_identity():
    s = ["the cat sits", "a dog runs"]
    assert soft_edit_distance(s, s, 0.7) == (0.0, 1.0)


def test_edit_empty_gen():
    assert soft_edit_distance([], ["a", "b", "c"], 0.7) == (3.0, 0.0)


def test_edit_worked_example():
    gen = ["the cat sits", "a red kite flies"]
    ref = ["the cat sits", "dogs bark loudly", "rain falls"]
    dist, score = soft_edit_distance(gen, ref, 0.7)
    assert dist == 2.0 and score == pytest.approx(1 / 3, abs=1e-12)
    assert dist == alignment_edit_distance(gen, ref, 0.7)


def test_edit_floor_and_asymmetry():
    long, short = [f"w{i}" for i in range(5)], ["z"]
    dist, score = soft_edit_distance(long, short, 0.7)
    assert dist == 5.0 and score == 0.0
    # the same pair swapped is normalized by the longer list
    dist2, score2 = soft_edit_distance(short, long, 0.7)
    assert dist2 == 5.0 and score2 == 0.0
    d3, s3 = soft_edit_distance(["a"], ["a", "b"], 0.7)
    d4, s4 = soft_edit_distance(["a", "b"], ["a"], 0.7)
    assert d3 == d4 == 1.0 and s3 == 0.5 and s4 == 0.0


def test_edit_matrix_borders():
    D = edit_matrix([[False] * 3 for _ in range(2)], 2, 3)
    assert D[0] == [0, 1, 2, 3] and [row[0] for row in D] == [0, 1, 2]


def test_edit_dp_matches_oracle():
    rng = random.Random(11)
    for _ in range(100):
        gen, ref = random_sentences(rng, rng.randint(0, 6)), random_sentences(rng, rng.randint(1, 6))
        assert soft_edit_distance(gen, ref, 0.7)[0] == alignment_edit_distance(gen, ref, 0.7)


sentence_lists = st.lists(st.lists(st.sampled_from(WORDS), min_size=1, max_size=3).map(" ".join), max_size=5)


@settings(max_examples=80, deadline=None)
@given(sentence_lists, sentence_lists.filter(bool), st.data())
def test_inserting_unmatched_ref_sentence_never_hurts(gen, ref, data):
    unmatched = [r for r in ref if all(sentence_sim(g, r) < 0.7 for g in gen)]
    if not unmatched:
        return
    sentence = data.draw(st.sampled_from(unmatched))
    before = soft_edit_distance(gen, ref, 0.7)[1]
    # placed in its aligned slot; an arbitrary slot can break an existing match
    best = max(soft_edit_distance(gen[:p] + [sentence] + gen[p:], ref, 0.7)[1] for p in range(len(gen) + 1))
    assert best >= before


def test_misplaced_insertion_can_hurt():
    assert soft_edit_distance(["cat"], ["cat", "dog"], 0.7)[0] == 1.0
    assert soft_edit_distance(["dog", "cat"], ["cat", "dog"], 0.7)[0] == 2.0


# -- process and combined ------------------------------------------------------------

def test_process_identity():
    assert process_reward("the cat sits. a dog runs.", "the cat sits. a dog runs.") == (1.0, 1.0, 1.0)


def test_process_lambda_one_is_semantic():
    cfg = CCVRConfig(lam=1.0)
    sem, edit, proc = process_reward("the cat sits. a red kite flies.", "the cat sits. dogs bark. rain falls.", cfg)
    assert proc == sem and edit != sem


def test_process_worked_example():
    sem, edit, proc = process_reward("the cat sits. a red kite flies.", "the cat sits. dogs bark loudly. rain falls.")
    assert sem == pytest.approx(1 / 3) and edit == pytest.approx(1 / 3) and proc == pytest.approx(1 / 3)


def test_ccvr_perfect():
    ref = "the cat sits. the dog runs."
    b = ccvr_reward(f"<think>{ref}</think><answer>yes</answer>", "yes", ref)
    assert b.total == pytest.approx(1.0, abs=1e-12)


def test_ccvr_partial_weighted_sum():
    # format 1, answer 0, process 0.5 (one of two reference sentences recovered)
    b = ccvr_reward("<think>the cat sits.</think><answer>no</answer>", "yes", "the cat sits. the dog runs.")
    assert (b.format, b.answer) == (1.0, 0.0)
    assert b.semantic == 0.5 and b.edit == 0.5 and b.process == 0.5
    assert abs(b.total - 0.4) <= 1e-12


def test_ccvr_empty_response():
    b = ccvr_reward("", "yes", "the cat sits.")
    assert all(v == 0.0 for v in b.to_dict().values())


def test_ccvr_empty_reference():
    with pytest.raises(EmptyReference):
        ccvr_reward("<think>a.</think><answer>yes</answer>", "yes", " .. ")


def test_whitespace_outside_tags_ignored():
    core = "<think>the cat sits.</think>{}<answer>yes</answer>"
    a = ccvr_reward(core.format(""), "yes", "the cat sits. the dog runs.")
    b = ccvr_reward("\n  " + core.format("\n\t ") + "  \n", "yes", "the cat sits. the dog runs.")
    assert a == b


@pytest.mark.parametrize("kwargs", [
    dict(lambda_format=0.5, lambda_answer=0.5, lambda_process=0.5),
    dict(delta=1.2),
    dict(lam=-0.1),
    dict(lambda_format=-0.2, lambda_answer=0.8, lambda_process=0.4),
])
def test_config_invariants(kwargs):
    with pytest.raises(InvariantViolation):
        CCVRConfig(**kwargs)


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="abc yesno.<>/thinkanswer", max_size=60), st.sampled_from(["yes", "no"]))
def test_scores_bounded(raw, gt):
    b = ccvr_reward(raw, gt, "the cat sits. yes no.")
    for name in ("format", "answer", "semantic", "edit", "process", "total"):
        assert 0.0 <= getattr(b, name) <= 1.0

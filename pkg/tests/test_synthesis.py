import pytest
from hypothesis import given, strategies as st

from cotforge.errors import (
    CaptionTooLong, FlipNotGuaranteed, InvariantViolation, NoSubstitution, NoTriplesFound,
    TooFewQuestions, ValidationError,
)
from cotforge.hashing import fnv1a64
from cotforge.provider import ProviderConfig
from cotforge.synthesis import (
    AtomicQA, Caption, ImageRef, MockWords, RelationKind, SubstitutionLexicon, Triple, base_form,
    compose_compound, extract_triples, flip_guaranteed, generate_atomic_qa, generate_caption,
    lexical_negatives, make_lexical_negative, synthesize_image,
)

MOCK = ProviderConfig()


def image_hashing_to(index, n, seed=0):
    """Find an image id whose (hash ^ seed) % n == index."""
    for i in range(10000):
        iid = f"img{i}"
        if (fnv1a64(iid) ^ seed) % n == index:
            return ImageRef(iid)
    raise AssertionError("no id found")


# -- captions ---------------------------------------------------------------

def test_mock_caption_template():
    words = MockWords(nouns=("cat", "dog"), verbs=("chases",))
    img = image_hashing_to(0, 2)
    cap = generate_caption(img, MOCK, words)
    assert cap.text == "The image shows a cat chases a dog."
    assert cap.word_count == 8


def test_mock_caption_deterministic():
    img = ImageRef("photo-17", "file:///x.jpg")
    a = generate_caption(img, ProviderConfig(seed=5))
    b = generate_caption(img, ProviderConfig(seed=5))
    assert a == b and a.text.encode() == b.text.encode()


def test_caption_seed_changes_choice():
    texts = {generate_caption(ImageRef("photo-17"), ProviderConfig(seed=s)).text for s in range(20)}
    assert len(texts) > 1


def test_caption_word_limit():
    Caption("x", " ".join(["w"] * 149))
    with pytest.raises(CaptionTooLong):
        Caption("x", " ".join(["w"] * 150))


def test_image_ref_identity():
    assert ImageRef("a", "u1") == ImageRef("a", "u2")
    assert len({ImageRef("a"), ImageRef("a", "u")}) == 1
    with pytest.raises(ValidationError):
        ImageRef("")


# -- triples ----------------------------------------------------------------

def test_extract_single():
    cap = Caption("i", "The image shows a cat chases a dog.")
    assert extract_triples(cap, MOCK) == [Triple("cat", RelationKind.Action, "chases", "dog")]


def test_extract_no_match():
    with pytest.raises(NoTriplesFound):
        extract_triples(Caption("i", "Blue sky."), MOCK)


def test_extract_two_sentences_in_order():
    text = "The image shows a cat chases a dog. Nearby a woman holds a kite! Blue sky."
    expected = [("cat", "chases", "dog"), ("woman", "holds", "kite")]
    got = extract_triples(Caption("i", text), MOCK)
    assert [(t.subject, t.surface, t.object) for t in got] == expected


def test_triple_invariants():
    with pytest.raises(ValidationError):
        Triple("", RelationKind.Action, "chases", "dog")
    with pytest.raises(ValueError):
        Triple("cat", "Flying", "chases", "dog")


def test_relation_kinds_closed():
    assert [k.value for k in RelationKind] == [
        "Action", "State", "Possession", "SpatialLocation", "CausalityEffect",
        "Temporal", "Quantitative", "Perception",
    ]


# -- atomic questions ---------------------------------------------------------

@pytest.mark.parametrize("verb, base", [
    ("chases", "chase"), ("watches", "watch"), ("flies", "fly"), ("has", "have"),
    ("passes", "pass"), ("holds", "hold"), ("carries", "carry"), ("fixes", "fix"), ("sit", "sit"),
])
def test_base_form(verb, base):
    assert base_form(verb) == base


def test_atomic_action():
    qa = generate_atomic_qa(Triple("cat", RelationKind.Action, "chases", "dog"))
    assert qa.question == "Does the cat chase a dog?"
    assert qa.answer == "yes" and qa.polarity == "original" and qa.substituted_token is None


def test_atomic_spatial():
    qa = generate_atomic_qa(Triple("book", RelationKind.SpatialLocation, "on", "table"))
    assert qa.question == "Is the book on the table?"
    assert qa.answer == "yes"


@pytest.mark.parametrize("kind, surface, obj, expected", [
    (RelationKind.State, "looks", "tired", "Does the man look tired?"),
    (RelationKind.State, "is", "tired", "Is the man tired?"),
    (RelationKind.Possession, "has", "hat", "Does the man have a hat?"),
    (RelationKind.SpatialLocation, "is under", "tree", "Is the man under the tree?"),
    (RelationKind.CausalityEffect, "causes", "delay", "Does the man cause the delay?"),
    (RelationKind.Temporal, "precedes", "parade", "Does the man precede the parade?"),
    (RelationKind.Quantitative, "carries", "three boxes", "Does the man carry three boxes?"),
    (RelationKind.Perception, "watches", "sunset", "Does the man watch the sunset?"),
])
def test_templates_per_kind(kind, surface, obj, expected):
    assert generate_atomic_qa(Triple("man", kind, surface, obj)).question == expected


words = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8)


@given(st.sampled_from(list(RelationKind)), words, words, st.lists(words, min_size=1, max_size=3))
def test_template_totality(kind, subj, verb, obj_words):
    qa = generate_atomic_qa(Triple(subj, kind, verb, " ".join(obj_words)))
    assert qa.question.endswith("?") and qa.question.count("?") == 1
    assert qa.answer == "yes"


def test_atomic_qa_invariants():
    t = Triple("cat", RelationKind.Action, "chases", "dog")
    with pytest.raises(ValidationError):
        AtomicQA("Does the cat chase a dog?", "no", t)
    with pytest.raises(ValidationError):
        AtomicQA("Does the cat chase a dog?", "no", t, "negative")
    with pytest.raises(ValidationError):
        AtomicQA("Does the cat chase a dog", "yes", t)


# -- lexicon and negatives ------------------------------------------------------

def test_lexicon_case_insensitive_and_casing():
    lex = SubstitutionLexicon({"Dog": ["bird", "Fox"]})
    assert lex.lookup("dog") == ["bird", "fox"]
    assert lex.lookup("DOG") == ["Bird", "Fox"]
    with pytest.raises(InvariantViolation):
        SubstitutionLexicon({"dog": ["DOG"]})


CAT_DOG = Triple("cat", RelationKind.Action, "chases", "dog")


def test_negative_object_substitution():
    qa = generate_atomic_qa(CAT_DOG)
    neg = make_lexical_negative(qa, SubstitutionLexicon({"dog": ["bird"]}), [CAT_DOG])
    assert neg.question == "Does the cat chase a bird?"
    assert neg.answer == "no" and neg.polarity == "negative"
    assert neg.substituted_token == ("dog", "bird")
    assert neg.source_triple == CAT_DOG


def test_negative_empty_lexicon():
    with pytest.raises(NoSubstitution):
        make_lexical_negative(generate_atomic_qa(CAT_DOG), SubstitutionLexicon(), [CAT_DOG])


def test_negative_flip_not_guaranteed():
    facts = [CAT_DOG, Triple("cat", RelationKind.Action, "chases", "dog2")]
    with pytest.raises(FlipNotGuaranteed):
        make_lexical_negative(generate_atomic_qa(CAT_DOG), SubstitutionLexicon({"dog": ["dog2"]}), facts)


def test_negative_skips_true_replacement():
    facts = [CAT_DOG, Triple("cat", RelationKind.Action, "chases", "bird")]
    neg = make_lexical_negative(generate_atomic_qa(CAT_DOG), SubstitutionLexicon({"dog": ["bird", "fox"]}), facts)
    assert neg.substituted_token == ("dog", "fox")


def test_negative_object_before_verb():
    lex = SubstitutionLexicon({"chase": ["feed"], "dog": ["fox"]})
    negs = list(lexical_negatives(generate_atomic_qa(CAT_DOG), lex, [CAT_DOG]))
    assert [n.substituted_token for n in negs] == [("dog", "fox"), ("chase", "feed")]
    assert negs[1].question == "Does the cat feed a dog?"


def test_negative_verb_fact_check():
    facts = [CAT_DOG, Triple("cat", RelationKind.Action, "feeds", "dog")]
    with pytest.raises(FlipNotGuaranteed):
        make_lexical_negative(generate_atomic_qa(CAT_DOG), SubstitutionLexicon({"chase": ["feed"]}), facts)


def test_negative_leftmost_object_word():
    t = Triple("girl", RelationKind.Possession, "has", "red ball")
    lex = SubstitutionLexicon({"red": ["blue"], "ball": ["kite"]})
    assert make_lexical_negative(generate_atomic_qa(t), lex, [t]).question == "Does the girl have a blue ball?"


def test_negative_requires_original():
    neg = make_lexical_negative(generate_atomic_qa(CAT_DOG), SubstitutionLexicon({"dog": ["bird"]}), [CAT_DOG])
    with pytest.raises(ValidationError):
        make_lexical_negative(neg, SubstitutionLexicon({"bird": ["fox"]}), [CAT_DOG])


# -- compound questions --------------------------------------------------------

def test_compose_mock():
    qs = [generate_atomic_qa(CAT_DOG), generate_atomic_qa(Triple("book", RelationKind.SpatialLocation, "on", "table"))]
    assert compose_compound(qs, MOCK) == "Does the cat chase a dog; also, is the book on the table?"


def test_compose_too_few():
    with pytest.raises(TooFewQuestions):
        compose_compound([generate_atomic_qa(CAT_DOG)], MOCK)


@given(st.lists(st.sampled_from(["Is it red?", "Does the cat run?", "Is the sky blue??", "Does it fly ?"]),
                min_size=2, max_size=6))
def test_compose_single_question_mark(qs):
    out = compose_compound(qs, MOCK)
    assert out.endswith("?") and out.count("?") == 1
    assert " and " not in out


# -- pipeline ----------------------------------------------------------------

def test_synthesize_image_negative_soundness():
    words = MockWords()
    lex = words.lexicon()
    for i in range(30):
        res = synthesize_image(ImageRef(f"im{i}"), ProviderConfig(seed=3), lex, neg_per_pos=2)
        assert res.skipped is None
        positives = [q for q in res.qa if q.polarity == "original"]
        negatives = [q for q in res.qa if q.polarity == "negative"]
        assert len(positives) == len(res.triples) and len(negatives) == 2 * len(positives)
        for neg in negatives:
            frm, to = neg.substituted_token
            assert flip_guaranteed(generate_atomic_qa(neg.source_triple), "object", to, to, res.triples)
            assert to.lower() not in {t.object.lower() for t in res.triples}

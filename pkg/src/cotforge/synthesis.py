"""Caption -> triple -> atomic yes/no question pipeline.

Every operation takes a :class:`ProviderConfig`. In ``mock`` mode the
results are pure functions of the inputs and the seed; in ``remote`` mode
each operation is a single wire round trip (see :mod:`cotforge.provider`).

Question templates, one per relation kind::

    Action            Does the {subject} {verb} a {object}?
    State             Does the {subject} {verb} {object}?
    Possession        Does the {subject} {verb} a {object}?
    SpatialLocation   Is the {subject} {verb} the {object}?
    CausalityEffect   Does the {subject} {verb} the {object}?
    Temporal          Does the {subject} {verb} the {object}?
    Quantitative      Does the {subject} {verb} {object}?
    Perception        Does the {subject} {verb} the {object}?

In the ``Does`` templates the first word of the verb is reduced to its base
form (``chases`` -> ``chase``, ``watches`` -> ``watch``, ``flies`` -> ``fly``,
``has`` -> ``have``). A verb phrase that starts with ``is``/``are`` turns any
template into ``Is the {subject} {rest} {object}?``; SpatialLocation surfaces
drop such a copula as well (``is on`` -> ``on``).
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from cotforge.errors import (
    CaptionTooLong,
    FlipNotGuaranteed,
    InvariantViolation,
    NoSubstitution,
    NoTriplesFound,
    ProviderError,
    TooFewQuestions,
    ValidationError,
)
from cotforge.hashing import fnv1a64
from cotforge.provider import ProviderConfig, call_remote

MAX_CAPTION_WORDS = 150


class RelationKind(str, enum.Enum):
    Action = "Action"
    State = "State"
    Possession = "Possession"
    SpatialLocation = "SpatialLocation"
    CausalityEffect = "CausalityEffect"
    Temporal = "Temporal"
    Quantitative = "Quantitative"
    Perception = "Perception"


@dataclass(frozen=True)
class ImageRef:
    id: str
    uri: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("ImageRef.id must be non-empty")

    def __eq__(self, other):
        return isinstance(other, ImageRef) and other.id == self.id

    def __hash__(self):
        return hash(self.id)


@dataclass(frozen=True)
class Caption:
    image_id: str
    text: str
    word_count: int = -1

    def __post_init__(self):
        count = len(self.text.split())
        if self.word_count == -1:
            object.__setattr__(self, "word_count", count)
        elif self.word_count != count:
            raise ValidationError(f"word_count {self.word_count} != {count}")
        if count >= MAX_CAPTION_WORDS:
            raise CaptionTooLong(f"caption for {self.image_id!r} has {count} words (limit < {MAX_CAPTION_WORDS})")


@dataclass(frozen=True)
class Triple:
    subject: str
    kind: RelationKind
    surface: str
    object: str

    def __post_init__(self):
        object.__setattr__(self, "kind", RelationKind(self.kind))
        for name in ("subject", "surface", "object"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise ValidationError(f"Triple.{name} must be a non-empty string")

    def __str__(self):
        return f"({self.subject}, {self.kind.value}:{self.surface}, {self.object})"


@dataclass(frozen=True)
class AtomicQA:
    question: str
    answer: str
    source_triple: Triple
    polarity: str = "original"
    substituted_token: tuple[str, str] | None = None

    def __post_init__(self):
        if not self.question.endswith("?"):
            raise ValidationError("question must end with '?'")
        if self.polarity == "original":
            if self.answer != "yes" or self.substituted_token is not None:
                raise ValidationError("original questions answer 'yes' and carry no substitution")
        elif self.polarity == "negative":
            if self.answer != "no" or self.substituted_token is None:
                raise ValidationError("negative questions answer 'no' and record the substitution")
        else:
            raise ValidationError(f"unknown polarity {self.polarity!r}")


class SubstitutionLexicon:
    """Case-insensitive token -> ordered replacement list."""

    def __init__(self, mapping: dict[str, Sequence[str]] | None = None):
        self._map: dict[str, list[str]] = {}
        for token, replacements in (mapping or {}).items():
            key = token.lower()
            reps = [r for r in replacements]
            if any(r.lower() == key for r in reps):
                raise InvariantViolation("lexicon", f"token {token!r} maps to itself")
            self._map.setdefault(key, []).extend(reps)

    def lookup(self, token: str) -> list[str]:
        reps = self._map.get(token.lower(), [])
        if token[:1].isupper():
            return [r[:1].upper() + r[1:] for r in reps]
        return [r[:1].lower() + r[1:] for r in reps]

    def __contains__(self, token: str) -> bool:
        return token.lower() in self._map

    def __len__(self):
        return len(self._map)

    def to_dict(self) -> dict[str, list[str]]:
        return {k: list(v) for k, v in self._map.items()}


@dataclass(frozen=True)
class MockWords:
    nouns: tuple[str, ...] = (
        "cat", "dog", "bird", "horse", "child", "woman", "boat", "kite", "ball", "fox",
    )
    verbs: tuple[str, ...] = (
        "chases", "watches", "follows", "carries", "holds", "pushes", "feeds", "approaches",
    )

    def lexicon(self) -> SubstitutionLexicon:
        """Default lexicon: each noun maps to nouns two and three places further on."""
        n = len(self.nouns)
        mapping = {}
        for i, noun in enumerate(self.nouns):
            reps = [self.nouns[(i + k) % n] for k in (2, 3) if self.nouns[(i + k) % n] != noun]
            if reps:
                mapping[noun] = reps
        return SubstitutionLexicon(mapping)


DEFAULT_WORDS = MockWords()


# -- captions ---------------------------------------------------------------

def generate_caption(image: ImageRef, provider: ProviderConfig, words: MockWords = DEFAULT_WORDS) -> Caption:
    if provider.mode == "mock":
        idx = fnv1a64(image.id) ^ provider.seed
        noun1 = words.nouns[idx % len(words.nouns)]
        noun2 = words.nouns[(idx + 1) % len(words.nouns)]
        verb = words.verbs[idx % len(words.verbs)]
        return Caption(image.id, f"The image shows a {noun1} {verb} a {noun2}.")
    text = call_remote(provider, "caption", {"image_id": image.id, "uri": image.uri},
                       {"max_words": MAX_CAPTION_WORDS - 1})
    if not isinstance(text, str):
        raise ProviderError("caption: provider output is not a string")
    return Caption(image.id, text.strip())


# -- triples ----------------------------------------------------------------

_SENTENCE_END = re.compile(r"[.!?]+")
_MOCK_PATTERN = re.compile(r"(?<!\w)a\s+(\w+)\s+(\w+)\s+a\s+(\w+)(?!\w)", re.IGNORECASE)


def extract_triples(caption: Caption, provider: ProviderConfig) -> list[Triple]:
    if not caption.text.strip():
        raise NoTriplesFound(f"empty caption for {caption.image_id!r}")
    if provider.mode == "mock":
        triples = []
        for sentence in _SENTENCE_END.split(caption.text):
            m = _MOCK_PATTERN.search(sentence)
            if m:
                triples.append(Triple(m.group(1), RelationKind.Action, m.group(2), m.group(3)))
    else:
        out = call_remote(provider, "triples", {"text": caption.text})
        if not isinstance(out, list):
            raise ProviderError("triples: provider output is not a list")
        try:
            triples = [Triple(t["subject"], t["relation_kind"], t["relation_surface"], t["object"]) for t in out]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"triples: malformed triple in provider output: {exc}") from exc
    if not triples:
        raise NoTriplesFound(f"no triples in caption for {caption.image_id!r}")
    return triples


# -- atomic questions ---------------------------------------------------------

_IRREGULAR = {"has": "have", "does": "do", "goes": "go"}


def base_form(verb: str) -> str:
    """Strip third-person singular inflection from a single verb."""
    low = verb.lower()
    if low in _IRREGULAR:
        out = _IRREGULAR[low]
    elif low.endswith(("sses", "shes", "ches", "xes", "zzes")):
        out = verb[:-2]
    elif low.endswith("ies") and len(low) > 4:
        out = verb[:-3] + "y"
    elif low.endswith("s") and not low.endswith(("ss", "us", "is")):
        out = verb[:-1]
    else:
        out = verb
    return out


_TEMPLATES = {
    RelationKind.Action: ("Does", "a"),
    RelationKind.State: ("Does", None),
    RelationKind.Possession: ("Does", "a"),
    RelationKind.SpatialLocation: ("Is", "the"),
    RelationKind.CausalityEffect: ("Does", "the"),
    RelationKind.Temporal: ("Does", "the"),
    RelationKind.Quantitative: ("Does", None),
    RelationKind.Perception: ("Does", "the"),
}


def _render_parts(triple: Triple) -> list[tuple[str, str | None]]:
    """Question as (word, slot) pairs; slot is 'subject', 'verb', 'object' or None."""
    aux, article = _TEMPLATES[triple.kind]
    verb_words = triple.surface.split()
    if verb_words[0].lower() in ("is", "are"):
        aux = "Is"
        verb_words = verb_words[1:]
    elif aux == "Does":
        verb_words = [base_form(verb_words[0])] + verb_words[1:]
    parts: list[tuple[str, str | None]] = [(aux, None), ("the", None)]
    parts += [(w, "subject") for w in triple.subject.split()]
    parts += [(w, "verb") for w in verb_words]
    if article:
        parts.append((article, None))
    parts += [(w, "object") for w in triple.object.split()]
    return parts


def _join(parts) -> str:
    return " ".join(w for w, _ in parts) + "?"


def generate_atomic_qa(triple: Triple) -> AtomicQA:
    return AtomicQA(_join(_render_parts(triple)), "yes", triple)


# -- lexical negatives ------------------------------------------------------

def _related(triple: Triple, facts: Sequence[Triple]) -> list[Triple]:
    subj = triple.subject.lower()
    return [t for t in facts if t.subject.lower() == subj or t.object.lower() == subj]


def flip_guaranteed(qa: AtomicQA, slot: str, new_phrase: str, replacement: str,
                    image_facts: Sequence[Triple]) -> bool:
    """True when the substituted question cannot be true of the image.

    ``new_phrase`` is the full slot content after substitution.
    """
    related = _related(qa.source_triple, image_facts)
    if slot == "object":
        entities = {t.subject.lower() for t in related} | {t.object.lower() for t in related}
        return new_phrase.lower() not in entities and replacement.lower() not in entities
    obj = qa.source_triple.object.lower()
    verbs = {
        " ".join(w for w, s in _render_parts(t) if s == "verb").lower()
        for t in related if t.object.lower() == obj
    }
    return new_phrase.lower() not in verbs


def lexical_negatives(qa: AtomicQA, lexicon: SubstitutionLexicon,
                      image_facts: Sequence[Triple]) -> Iterator[AtomicQA]:
    """Yield every valid negative of ``qa`` in priority order.

    Object words come before verb words; within a slot the leftmost word
    wins; replacements are tried in lexicon order.
    """
    if qa.polarity != "original":
        raise ValidationError("negatives are derived from original questions only")
    parts = _render_parts(qa.source_triple)
    for slot in ("object", "verb"):
        positions = [i for i, (_, s) in enumerate(parts) if s == slot]
        for pos in positions:
            word = parts[pos][0]
            for rep in lexicon.lookup(word):
                new_parts = list(parts)
                new_parts[pos] = (rep, slot)
                new_phrase = " ".join(new_parts[i][0] for i in positions)
                if flip_guaranteed(qa, slot, new_phrase, rep, image_facts):
                    yield AtomicQA(_join(new_parts), "no", qa.source_triple, "negative", (word, rep))


def _has_candidate(qa: AtomicQA, lexicon: SubstitutionLexicon) -> bool:
    return any(s in ("object", "verb") and w in lexicon for w, s in _render_parts(qa.source_triple))


def make_lexical_negative(qa: AtomicQA, lexicon: SubstitutionLexicon,
                          image_facts: Sequence[Triple]) -> AtomicQA:
    for neg in lexical_negatives(qa, lexicon, image_facts):
        return neg
    if not _has_candidate(qa, lexicon):
        raise NoSubstitution(f"no lexicon entry for any answer-determining token of {qa.question!r}")
    raise FlipNotGuaranteed(f"every replacement for {qa.question!r} is also true of the image")


# -- compound questions -----------------------------------------------------

def _text(q) -> str:
    return q.question if isinstance(q, AtomicQA) else q


def compose_compound(questions: Sequence[AtomicQA | str], provider: ProviderConfig) -> str:
    if len(questions) < 2:
        raise TooFewQuestions(f"need at least 2 questions, got {len(questions)}")
    texts = [_text(q) for q in questions]
    if provider.mode == "remote":
        out = call_remote(provider, "compose", {"questions": texts}, {"avoid_conjunction": "and"})
        if not isinstance(out, str) or not out.strip():
            raise ProviderError("compose: provider output is not a non-empty string")
        return out.strip()
    bodies = []
    for i, t in enumerate(texts):
        body = t.strip().rstrip("?").rstrip()
        if i > 0:
            body = body[:1].lower() + body[1:]
        bodies.append(body)
    return "; also, ".join(bodies) + "?"


# -- per-image driver -------------------------------------------------------

@dataclass
class ImageSynthesis:
    image: ImageRef
    caption: Caption | None = None
    triples: list[Triple] = field(default_factory=list)
    qa: list[AtomicQA] = field(default_factory=list)
    skipped: str | None = None


def synthesize_image(image: ImageRef, provider: ProviderConfig, lexicon: SubstitutionLexicon,
                     neg_per_pos: int = 1, words: MockWords = DEFAULT_WORDS) -> ImageSynthesis:
    """Run caption -> triples -> positives + negatives for one image.

    Images without triples are returned with ``skipped`` set. Positives
    that admit fewer than ``neg_per_pos`` valid negatives keep what exists.
    """
    result = ImageSynthesis(image)
    result.caption = generate_caption(image, provider, words)
    try:
        result.triples = extract_triples(result.caption, provider)
    except NoTriplesFound as exc:
        result.skipped = str(exc)
        return result
    for triple in result.triples:
        pos = generate_atomic_qa(triple)
        result.qa.append(pos)
        for i, neg in enumerate(lexical_negatives(pos, lexicon, result.triples)):
            if i >= neg_per_pos:
                break
            result.qa.append(neg)
    return result

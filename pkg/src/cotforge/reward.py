"""Rule-based reward: format, answer and reasoning-process components.

The process component compares the sentences of the ``<think>`` span with
a reference reasoning chain in two ways: the share of sentence pairs whose
cosine similarity reaches ``delta``, and a sentence-level edit distance in
which a pair at or above ``theta`` costs nothing. Both are bounded to
[0, 1]; the raw values are kept on :class:`RewardBreakdown`.

Sentence segmentation (split on ``.``, ``!``, ``?`` and newlines, trim,
drop empties) is part of the scoring contract: a different rule gives
different scores.
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field

from cotforge.embedding import DEFAULT_EPS, EmbedderConfig, cosine, embed
from cotforge.errors import EmptyReference, InvariantViolation

_TAGS = ("<think>", "</think>", "<answer>", "</answer>")
_THINK = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_ANSWER = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
_SPLIT = re.compile(r"[.!?\n]")
_WORD = re.compile(r"[a-z]+")


@dataclass(frozen=True)
class ParsedResponse:
    think_text: str | None
    answer_text: str | None
    tags_in_order: bool
    raw: str


@dataclass(frozen=True)
class CCVRConfig:
    lambda_format: float = 0.2
    lambda_answer: float = 0.4
    lambda_process: float = 0.4
    lam: float = 0.5
    delta: float = 0.7
    theta: float = 0.7
    epsilon: float = DEFAULT_EPS
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)

    def __post_init__(self):
        weights = (self.lambda_format, self.lambda_answer, self.lambda_process)
        for name, w in zip(("lambda_format", "lambda_answer", "lambda_process"), weights):
            if w < 0:
                raise InvariantViolation(f"ccvr.{name}", "must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise InvariantViolation("ccvr.lambda_*", f"weights must sum to 1, got {sum(weights)}")
        for name in ("lam", "delta", "theta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvariantViolation(f"ccvr.{'lambda' if name == 'lam' else name}", f"must lie in [0, 1], got {v}")
        if self.epsilon < 0:
            raise InvariantViolation("ccvr.epsilon", "must be nonnegative")


@dataclass(frozen=True)
class RewardBreakdown:
    format: float = 0.0
    answer: float = 0.0
    semantic: float = 0.0
    edit: float = 0.0
    process: float = 0.0
    total: float = 0.0
    edit_distance_raw: float = 0.0
    semantic_raw: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def parse_tagged_output(raw: str) -> ParsedResponse:
    think = _THINK.search(raw)
    answer = _ANSWER.search(raw)
    counts = [raw.count(t) for t in _TAGS]
    in_order = False
    if counts == [1, 1, 1, 1]:
        pos = [raw.index(t) for t in _TAGS]
        in_order = pos[0] < pos[1] < pos[2] < pos[3]
    return ParsedResponse(
        think.group(1) if think else None,
        answer.group(1) if answer else None,
        in_order,
        raw,
    )


def format_reward(p: ParsedResponse) -> float:
    return 1.0 if p.tags_in_order else 0.0


def answer_reward(p: ParsedResponse, ground_truth: str) -> float:
    """1.0 for a single unambiguous polarity that matches; contradictions score 0."""
    if p.answer_text is None:
        return 0.0
    words = set(_WORD.findall(p.answer_text.lower()))
    polarity = words & {"yes", "no"}
    if len(polarity) != 1:
        return 0.0
    return 1.0 if polarity.pop() == ground_truth.strip().lower() else 0.0


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SPLIT.split(text) if s.strip()]


def _similarity_matrix(gen, ref, embedder, eps):
    gv = [embed(s, embedder) for s in gen]
    rv = [embed(s, embedder) for s in ref]
    return [[cosine(g, r, eps) for r in rv] for g in gv]


def semantic_raw(gen: list[str], ref: list[str], delta: float,
                 embedder: EmbedderConfig = EmbedderConfig(), eps: float = DEFAULT_EPS) -> float:
    """Count of (gen, ref) pairs with similarity >= delta, over max(m, n). Unbounded."""
    if not ref:
        raise EmptyReference("reference chain has no sentences")
    if not gen:
        return 0.0
    sims = _similarity_matrix(gen, ref, embedder, eps)
    count = sum(1 for row in sims for s in row if s >= delta)
    return count / max(len(gen), len(ref))


def semantic_score(gen: list[str], ref: list[str], delta: float,
                   embedder: EmbedderConfig = EmbedderConfig(), eps: float = DEFAULT_EPS) -> float:
    return min(semantic_raw(gen, ref, delta, embedder, eps), 1.0)


def edit_matrix(matches: list[list[bool]], m: int, n: int) -> list[list[int]]:
    """Fill the (m+1) x (n+1) soft edit-distance table from a match predicate."""
    D = [[0] * (n + 1) for _ in range(m + 1)]
    for j in range(n + 1):
        D[0][j] = j
    for i in range(m + 1):
        D[i][0] = i
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if matches[i - 1][j - 1]:
                D[i][j] = D[i - 1][j - 1]
            else:
                D[i][j] = 1 + min(D[i - 1][j], D[i][j - 1], D[i - 1][j - 1])
    return D


def soft_edit_distance(gen: list[str], ref: list[str], theta: float,
                       embedder: EmbedderConfig = EmbedderConfig(),
                       eps: float = DEFAULT_EPS) -> tuple[float, float]:
    """Return (D[m, n], max(0, 1 - D[m, n] / n)); normalized by the reference length only."""
    if not ref:
        raise EmptyReference("reference chain has no sentences")
    m, n = len(gen), len(ref)
    sims = _similarity_matrix(gen, ref, embedder, eps)
    D = edit_matrix([[s >= theta for s in row] for row in sims], m, n)
    dist = float(D[m][n])
    return dist, max(0.0, 1.0 - dist / n)


def _process_parts(gen: list[str], ref: list[str], cfg: CCVRConfig):
    raw = semantic_raw(gen, ref, cfg.delta, cfg.embedder, cfg.epsilon)
    sem = min(raw, 1.0)
    dist, edit = soft_edit_distance(gen, ref, cfg.theta, cfg.embedder, cfg.epsilon)
    process = cfg.lam * sem + (1.0 - cfg.lam) * edit
    return raw, sem, dist, edit, process


def process_reward(gen_text: str, ref_text: str, cfg: CCVRConfig = CCVRConfig()) -> tuple[float, float, float]:
    """Return (semantic, edit, process) for two reasoning texts."""
    _, sem, _, edit, process = _process_parts(split_sentences(gen_text), split_sentences(ref_text), cfg)
    return sem, edit, process


def ccvr_reward(raw_response: str, ground_truth: str, ref_chain: str,
                cfg: CCVRConfig = CCVRConfig()) -> RewardBreakdown:
    ref = split_sentences(ref_chain)
    if not ref:
        raise EmptyReference("reference chain has no sentences")
    parsed = parse_tagged_output(raw_response)
    fmt = format_reward(parsed)
    ans = answer_reward(parsed, ground_truth)
    if parsed.think_text is None:
        raw = sem = dist = edit = process = 0.0
    else:
        raw, sem, dist, edit, process = _process_parts(split_sentences(parsed.think_text), ref, cfg)
    total = cfg.lambda_format * fmt + cfg.lambda_answer * ans + cfg.lambda_process * process
    return RewardBreakdown(fmt, ans, sem, edit, process, total, dist, raw)

"""Bottom-up question tree construction and top-down decomposition.

Merging is greedy and anchor-based. While more than one node is active:

1. draw a merge size ``k`` uniformly from ``[lo, min(hi, |active|)]`` with
   :class:`~cotforge.hashing.SplitMix64` (``k = |active|`` when fewer than
   ``lo`` nodes remain);
2. take the lowest-id active node as anchor;
3. pick the ``k - 1`` active nodes with the highest cosine similarity to the
   anchor, breaking ties toward the lower id;
4. replace the group by a new internal node whose children are the group in
   ascending id order and whose text is their compound question.

Decomposition emits one :class:`CoTRecord` per internal node, root first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from cotforge.embedding import DEFAULT_EPS, EmbedderConfig, cosine, embed
from cotforge.errors import EmptyLeafSet, InvalidRange, ValidationError
from cotforge.hashing import MASK64, SplitMix64
from cotforge.provider import ProviderConfig
from cotforge.synthesis import AtomicQA, compose_compound

MOCK_PROVIDER = ProviderConfig()


@dataclass
class QuestionNode:
    id: int
    text: str
    answer: str | None = None
    children: list[int] = field(default_factory=list)
    level: int = 0

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class QuestionTree:
    nodes: dict[int, QuestionNode]
    roots: list[int]
    merge_range: tuple[int, int]
    seed: int

    def parents(self) -> dict[int, int]:
        out = {}
        for node in self.nodes.values():
            for c in node.children:
                if c in out:
                    raise ValidationError(f"node {c} has more than one parent")
                out[c] = node.id
        return out

    def validate(self) -> None:
        lo, hi = self.merge_range
        if not 2 <= lo <= hi:
            raise InvalidRange(f"merge_range {self.merge_range} violates 2 <= min <= max")
        parents = self.parents()
        if set(self.roots) != set(self.nodes) - set(parents):
            raise ValidationError("roots are not exactly the parentless nodes")
        seen: set[int] = set()

        def visit(nid: int) -> int:
            if nid in seen:
                raise ValidationError(f"node {nid} reached twice")
            seen.add(nid)
            node = self.nodes[nid]
            if node.is_leaf:
                if node.answer not in ("yes", "no"):
                    raise ValidationError(f"leaf {nid} lacks a yes/no answer")
                level = 0
            else:
                if len(node.children) < 2 or node.answer is not None:
                    raise ValidationError(f"internal node {nid} malformed")
                level = 1 + max(visit(c) for c in node.children)
            if level != node.level:
                raise ValidationError(f"node {nid} level {node.level} != {level}")
            return level

        for r in self.roots:
            visit(r)
        if seen != set(self.nodes):
            raise ValidationError("tree contains unreachable nodes")

    def leaves_under(self, nid: int) -> list[QuestionNode]:
        node = self.nodes[nid]
        if node.is_leaf:
            return [node]
        return [leaf for c in node.children for leaf in self.leaves_under(c)]

    def conjunction(self, nid: int) -> str:
        return "yes" if all(l.answer == "yes" for l in self.leaves_under(nid)) else "no"

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "merge_range": list(self.merge_range),
            "roots": list(self.roots),
            "nodes": [_node_dict(self.nodes[i]) for i in sorted(self.nodes)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QuestionTree":
        nodes = {}
        for n in doc["nodes"]:
            nodes[n["id"]] = QuestionNode(n["id"], n["text"], n.get("answer"), list(n["children"]), n["level"])
        tree = cls(nodes, list(doc["roots"]), tuple(doc["merge_range"]), doc["seed"])
        tree.validate()
        return tree

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _node_dict(node: QuestionNode) -> dict:
    d = {"id": node.id, "text": node.text}
    if node.answer is not None:
        d["answer"] = node.answer
    d["children"] = list(node.children)
    d["level"] = node.level
    return d


@dataclass(frozen=True)
class CoTRecord:
    compound_question: str
    steps: tuple[tuple[str, str], ...]
    final_answer: str
    depth: int

    def __post_init__(self):
        if not self.steps:
            raise ValidationError("CoTRecord needs at least one step")

    def to_dict(self) -> dict:
        return {
            "compound_question": self.compound_question,
            "steps": [{"q": q, "a": a} for q, a in self.steps],
            "final_answer": self.final_answer,
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoTRecord":
        return cls(d["compound_question"], tuple((s["q"], s["a"]) for s in d["steps"]),
                   d["final_answer"], d["depth"])


def _check_range(merge_range) -> tuple[int, int]:
    lo, hi = merge_range
    if not (isinstance(lo, int) and isinstance(hi, int) and 2 <= lo <= hi):
        raise InvalidRange(f"merge_range {tuple(merge_range)} violates 2 <= min <= max")
    return lo, hi


class _Builder:
    def __init__(self, merge_range, seed, cfg, provider, eps):
        self.lo, self.hi = _check_range(merge_range)
        if not 0 <= seed <= MASK64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self.rng = SplitMix64(seed)
        self.cfg = cfg
        self.provider = provider
        self.eps = eps
        self.nodes: dict[int, QuestionNode] = {}
        self.vectors = {}

    def add_leaf(self, qa: AtomicQA) -> int:
        nid = len(self.nodes)
        self.nodes[nid] = QuestionNode(nid, qa.question, qa.answer)
        self.vectors[nid] = embed(qa.question, self.cfg)
        return nid

    def merge_all(self, active: list[int]) -> int:
        active = sorted(active)
        while len(active) >= 2:
            if len(active) < self.lo:
                k = len(active)
            else:
                k = self.rng.randint(self.lo, min(self.hi, len(active)))
            anchor = active[0]
            others = active[1:]
            sims = {o: cosine(self.vectors[anchor], self.vectors[o], self.eps) for o in others}
            partners = sorted(others, key=lambda o: (-sims[o], o))[: k - 1]
            members = sorted([anchor] + partners)
            nid = len(self.nodes)
            text = compose_compound([self.nodes[m].text for m in members], self.provider)
            level = 1 + max(self.nodes[m].level for m in members)
            self.nodes[nid] = QuestionNode(nid, text, None, members, level)
            self.vectors[nid] = embed(text, self.cfg)
            active = sorted([a for a in active if a not in members] + [nid])
        return active[0]

    def tree(self, roots: list[int]) -> QuestionTree:
        return QuestionTree(self.nodes, roots, (self.lo, self.hi), self.seed)


def build_tree(leaves: Sequence[AtomicQA], merge_range=(2, 4), seed: int = 0,
               cfg: EmbedderConfig = EmbedderConfig(), provider: ProviderConfig = MOCK_PROVIDER,
               eps: float = DEFAULT_EPS) -> QuestionTree:
    """Merge ``leaves`` into a single-root tree."""
    return build_forest([leaves], merge_range, seed, cfg, provider, eps)


def build_forest(groups: Sequence[Sequence[AtomicQA]], merge_range=(2, 4), seed: int = 0,
                 cfg: EmbedderConfig = EmbedderConfig(), provider: ProviderConfig = MOCK_PROVIDER,
                 eps: float = DEFAULT_EPS) -> QuestionTree:
    """One tree per group, sharing id space and the random stream, in group order."""
    builder = _Builder(merge_range, seed, cfg, provider, eps)
    if not groups or any(len(g) == 0 for g in groups):
        raise EmptyLeafSet("every group needs at least one leaf")
    leaf_ids = [[builder.add_leaf(qa) for qa in group] for group in groups]
    roots = [builder.merge_all(ids) for ids in leaf_ids]
    return builder.tree(roots)


def _steps(tree: QuestionTree, nid: int) -> list[tuple[str, str]]:
    out = []
    for c in tree.nodes[nid].children:
        child = tree.nodes[c]
        if child.is_leaf:
            out.append((child.text, child.answer))
        else:
            out.append((child.text, tree.conjunction(c)))
            out.extend(_steps(tree, c))
    return out


def decompose(tree: QuestionTree) -> list[CoTRecord]:
    records = []

    def visit(nid: int) -> None:
        node = tree.nodes[nid]
        if node.is_leaf:
            return
        records.append(CoTRecord(node.text, tuple(_steps(tree, nid)), tree.conjunction(nid), node.level))
        for c in node.children:
            visit(c)

    for r in tree.roots:
        visit(r)
    return records


"""Accuracy / F1 scoring of yes/no predictions, overall and per subgroup.

The positive class is ``yes``. When a subgroup has no positives at all
(tp = fp = fn = 0) its F1 is 1.0 provided tn > 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from cotforge.errors import EmptySet, MissingPrediction, ValidationError

LABELS = ("yes", "no")
SPLITS = ("in_domain", "out_of_domain")


@dataclass(frozen=True)
class EvalItem:
    id: str
    gold: str
    split: str = "in_domain"
    difficulty: int = 0

    def __post_init__(self):
        if self.gold not in LABELS:
            raise ValidationError(f"item {self.id}: gold must be yes/no, got {self.gold!r}")
        if self.split not in SPLITS:
            raise ValidationError(f"item {self.id}: unknown split {self.split!r}")
        if not isinstance(self.difficulty, int) or self.difficulty < 0:
            raise ValidationError(f"item {self.id}: difficulty must be a nonnegative integer")


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def add(self, gold: str, pred: str) -> None:
        if pred == "yes":
            if gold == "yes":
                self.tp += 1
            else:
                self.fp += 1
        elif gold == "yes":
            self.fn += 1
        else:
            self.tn += 1

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def acc(self) -> float:
        return (self.tp + self.tn) / self.n

    def f1(self, positive: str = "yes") -> float:
        if positive == "yes":
            tp, fp, fn, tn = self.tp, self.fp, self.fn, self.tn
        else:
            tp, fp, fn, tn = self.tn, self.fn, self.fp, self.tp
        denom = 2 * tp + fp + fn
        if denom == 0:
            if tn > 0:
                return 1.0
            raise EmptySet("F1 undefined on an empty subgroup")
        return 2 * tp / denom

    def macro_f1(self) -> float:
        return (self.f1("yes") + self.f1("no")) / 2


@dataclass
class Metrics:
    acc: float
    f1: float
    confusion: Confusion
    by_split: dict[str, "Metrics"] = field(default_factory=dict)
    by_difficulty: dict[int, "Metrics"] = field(default_factory=dict)
    macro_f1: float | None = None

    def to_dict(self) -> dict:
        d = {
            "acc": self.acc,
            "f1": self.f1,
            "n": self.confusion.n,
            "confusion": vars(self.confusion).copy(),
        }
        if self.macro_f1 is not None:
            d["macro_f1"] = self.macro_f1
        if self.by_split:
            d["by_split"] = {k: v.to_dict() for k, v in sorted(self.by_split.items())}
        if self.by_difficulty:
            d["by_difficulty"] = {str(k): v.to_dict() for k, v in sorted(self.by_difficulty.items())}
        return d


def _metrics(conf: Confusion, macro: bool) -> Metrics:
    return Metrics(conf.acc, conf.f1(), conf, macro_f1=conf.macro_f1() if macro else None)


def evaluate(predictions: Mapping[str, str], items: Iterable[EvalItem], macro: bool = False) -> Metrics:
    items = list(items)
    if not items:
        raise EmptySet("no evaluation items")
    ids = [it.id for it in items]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate item ids")
    missing = [i for i in ids if i not in predictions]
    if missing:
        raise MissingPrediction(missing)

    total = Confusion()
    splits: dict[str, Confusion] = {}
    levels: dict[int, Confusion] = {}
    for it in items:
        pred = str(predictions[it.id]).strip().lower()
        if pred not in LABELS:
            raise ValidationError(f"prediction for {it.id} must be yes/no, got {predictions[it.id]!r}")
        total.add(it.gold, pred)
        splits.setdefault(it.split, Confusion()).add(it.gold, pred)
        levels.setdefault(it.difficulty, Confusion()).add(it.gold, pred)

    out = _metrics(total, macro)
    out.by_split = {k: _metrics(c, macro) for k, c in splits.items()}
    out.by_difficulty = {k: _metrics(c, macro) for k, c in levels.items()}
    return out

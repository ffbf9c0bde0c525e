"""Dataset file formats and atomic writes.

All outputs go to a temporary file in the destination directory and are
renamed into place, so a declared path never holds a partial file.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator

from cotforge.bench import EvalItem
from cotforge.errors import ValidationError
from cotforge.hashing import digest_hex
from cotforge.synthesis import AtomicQA, ImageRef, Triple


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=False) + "\n" for r in rows)


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    atomic_write_bytes(path, dumps_jsonl(rows).encode("utf-8"))


def write_json(path: str | Path, doc) -> None:
    atomic_write_bytes(path, (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8"))


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc.msg}") from exc


def file_digest(path: str | Path) -> str:
    return digest_hex(Path(path).read_bytes())


def read_image_list(path: str | Path) -> list[ImageRef]:
    """One image per line: ``id<TAB>uri`` (uri optional); blank and ``#`` lines skipped."""
    images = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            image_id, _, uri = line.partition("\t")
            if not image_id.strip():
                raise ValidationError(f"{path}:{lineno}: empty image id")
            images.append(ImageRef(image_id.strip(), uri.strip() or None))
    return images


# -- row codecs ---------------------------------------------------------------

def triple_row(image_id: str, t: Triple) -> dict:
    return {"image_id": image_id, "subject": t.subject, "relation_kind": t.kind.value,
            "relation_surface": t.surface, "object": t.object}


def triple_from_row(row: dict) -> tuple[str, Triple]:
    return row["image_id"], Triple(row["subject"], row["relation_kind"], row["relation_surface"], row["object"])


def qa_row(image_id: str, qa: AtomicQA, triple_index: int) -> dict:
    sub = qa.substituted_token
    return {"image_id": image_id, "question": qa.question, "answer": qa.answer, "polarity": qa.polarity,
            "substituted_from": sub[0] if sub else None, "substituted_to": sub[1] if sub else None,
            "source_triple": triple_index}


def qa_from_row(row: dict, triples: list[Triple]) -> tuple[str, AtomicQA]:
    idx = row["source_triple"]
    if not 0 <= idx < len(triples):
        raise ValidationError(f"source_triple index {idx} out of range")
    sub = None
    if row.get("substituted_from") is not None:
        sub = (row["substituted_from"], row["substituted_to"])
    return row["image_id"], AtomicQA(row["question"], row["answer"], triples[idx], row["polarity"], sub)


def eval_item_from_row(row: dict) -> EvalItem:
    return EvalItem(str(row["id"]), row["gold"], row.get("split", "in_domain"), int(row.get("difficulty", 0)))


def eval_item_row(item: EvalItem) -> dict:
    return {"id": item.id, "gold": item.gold, "split": item.split, "difficulty": item.difficulty}

"""Sentence embeddings and the epsilon-guarded cosine similarity.

The reference embedder is a hashed term-frequency vector: lowercase, split
on non-alphanumeric boundaries, and add 1 at ``fnv1a64(token) % dim`` for
each token. Vectors are read-only numpy arrays of float64.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass

import numpy as np

from cotforge.errors import DimensionMismatch, EmptyText, InvariantViolation, ProviderError
from cotforge.hashing import fnv1a64
from cotforge.provider import ProviderConfig, call_remote

DEFAULT_EPS = 1e-9
_TOKEN = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class EmbedderConfig:
    mode: str = "reference"
    dim: int = 256
    endpoint: str | None = None
    timeout: float = 30.0

    def __post_init__(self):
        if self.mode not in ("reference", "remote"):
            raise InvariantViolation("embedder.mode", f"must be 'reference' or 'remote', got {self.mode!r}")
        if not isinstance(self.dim, int) or self.dim < 1:
            raise InvariantViolation("embedder.dim", "must be a positive integer")
        if self.mode == "remote" and not self.endpoint:
            raise InvariantViolation("embedder.endpoint", "required when mode is 'remote'")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@functools.lru_cache(maxsize=65536)
def _embed_cached(text: str, cfg: EmbedderConfig) -> np.ndarray:
    if cfg.mode == "reference":
        vec = np.zeros(cfg.dim, dtype=np.float64)
        for tok in tokenize(text):
            vec[fnv1a64(tok) % cfg.dim] += 1.0
    else:
        remote = ProviderConfig(mode="remote", endpoint=cfg.endpoint, timeout=cfg.timeout).with_env()
        out = call_remote(remote, "embed", {"text": text}, {"dim": cfg.dim})
        try:
            vec = np.asarray(out, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ProviderError(f"embed: non-numeric provider output: {exc}") from exc
        if vec.ndim != 1 or vec.shape[0] != cfg.dim:
            raise DimensionMismatch(f"embed: expected {cfg.dim} values, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ProviderError("embed: provider returned non-finite values")
    vec.setflags(write=False)
    return vec


def embed(text: str, cfg: EmbedderConfig = EmbedderConfig()) -> np.ndarray:
    if not text or not text.strip():
        raise EmptyText("cannot embed empty text")
    return _embed_cached(text, cfg)


def cosine(a: np.ndarray, b: np.ndarray, eps: float = DEFAULT_EPS) -> float:
    """a.b / (|a||b| + eps), clipped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cosine of dims {a.shape} and {b.shape}")
    num = float(np.dot(a, b))
    den = float(np.sqrt(np.dot(a, a))) * float(np.sqrt(np.dot(b, b))) + eps
    if den == 0.0:
        return 0.0
    return min(1.0, max(-1.0, num / den))

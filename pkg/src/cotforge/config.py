"""Application config: one JSON document, every section optional.

    {
      "provider": {"mode": "mock", "endpoint": null, "auth_token": null, "seed": 0,
                   "timeout": 30.0, "retries": 0, "max_in_flight": 4},
      "embedder": {"mode": "reference", "dim": 256, "endpoint": null},
      "ccvr": {"lambda_format": 0.2, "lambda_answer": 0.4, "lambda_process": 0.4,
               "lambda": 0.5, "delta": 0.7, "theta": 0.7, "epsilon": 1e-9,
               "embedder": {...}},
      "grpo": {"K": 8, "beta": 0.001, "learning_rate": 8.0, "steps": 500, "seed": 0,
               "sigma_floor": 1e-8, "mode": "alg1", "length_normalize": false},
      "merge_range": [2, 4],
      "neg_per_pos": 1
    }

Unknown keys are rejected. Environment variables override only the
provider endpoint and credentials.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from cotforge.embedding import EmbedderConfig
from cotforge.errors import InvariantViolation, ParseError
from cotforge.grpo import GRPOConfig
from cotforge.provider import ProviderConfig
from cotforge.reward import CCVRConfig


@dataclass(frozen=True)
class AppConfig:
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    ccvr: CCVRConfig = field(default_factory=CCVRConfig)
    grpo: GRPOConfig = field(default_factory=GRPOConfig)
    merge_range: tuple[int, int] = (2, 4)
    neg_per_pos: int = 1

    def to_dict(self) -> dict:
        prov = dataclasses.asdict(self.provider)
        prov["auth_token"] = "***" if prov["auth_token"] else None
        return {
            "provider": prov,
            "embedder": dataclasses.asdict(self.embedder),
            "ccvr": ccvr_to_dict(self.ccvr),
            "grpo": dataclasses.asdict(self.grpo),
            "merge_range": list(self.merge_range),
            "neg_per_pos": self.neg_per_pos,
        }


_NUM = (int, float)
_PROVIDER = {"mode": str, "endpoint": (str, type(None)), "auth_token": (str, type(None)),
             "seed": int, "timeout": _NUM, "retries": int, "max_in_flight": int}
_EMBEDDER = {"mode": str, "dim": int, "endpoint": (str, type(None)), "timeout": _NUM}
_CCVR = {"lambda_format": _NUM, "lambda_answer": _NUM, "lambda_process": _NUM, "lambda": _NUM,
         "delta": _NUM, "theta": _NUM, "epsilon": _NUM, "embedder": dict}
_GRPO = {"K": int, "beta": _NUM, "learning_rate": _NUM, "steps": int, "seed": int,
         "sigma_floor": _NUM, "mode": str, "length_normalize": bool}
_TOP = {"provider": dict, "embedder": dict, "ccvr": dict, "grpo": dict, "merge_range": list, "neg_per_pos": int}


def _check(section: str, doc, schema: dict) -> dict:
    if not isinstance(doc, dict):
        raise InvariantViolation(section or "<root>", "must be an object")
    for key, value in doc.items():
        where = f"{section}.{key}" if section else key
        if key not in schema:
            raise InvariantViolation(where, "unknown key")
        expected = schema[key]
        allowed = expected if isinstance(expected, tuple) else (expected,)
        # bool is an int subclass; only accept it where declared
        if isinstance(value, bool) and bool not in allowed:
            raise InvariantViolation(where, "wrong type bool")
        if not isinstance(value, expected):
            raise InvariantViolation(where, f"wrong type {type(value).__name__}")
    return doc


def _embedder(doc: dict, section: str) -> EmbedderConfig:
    return EmbedderConfig(**_check(section, doc, _EMBEDDER))


def ccvr_from_dict(doc: dict, section: str = "ccvr") -> CCVRConfig:
    doc = dict(_check(section, doc, _CCVR))
    if "lambda" in doc:
        doc["lam"] = doc.pop("lambda")
    if "embedder" in doc:
        doc["embedder"] = _embedder(doc["embedder"], f"{section}.embedder")
    return CCVRConfig(**doc)


def ccvr_to_dict(cfg: CCVRConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["lambda"] = d.pop("lam")
    return d


def parse_json(text: str, source: str) -> dict:
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def config_from_dict(doc: dict) -> AppConfig:
    _check("", doc, _TOP)
    kwargs = {}
    if "provider" in doc:
        kwargs["provider"] = ProviderConfig(**_check("provider", doc["provider"], _PROVIDER))
    if "embedder" in doc:
        kwargs["embedder"] = _embedder(doc["embedder"], "embedder")
    if "ccvr" in doc:
        kwargs["ccvr"] = ccvr_from_dict(doc["ccvr"])
    if "grpo" in doc:
        kwargs["grpo"] = GRPOConfig(**_check("grpo", doc["grpo"], _GRPO))
    if "merge_range" in doc:
        mr = doc["merge_range"]
        if len(mr) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in mr):
            raise InvariantViolation("merge_range", "must be two integers")
        if not 2 <= mr[0] <= mr[1]:
            raise InvariantViolation("merge_range", "must satisfy 2 <= min <= max")
        kwargs["merge_range"] = (mr[0], mr[1])
    if "neg_per_pos" in doc:
        if doc["neg_per_pos"] < 0:
            raise InvariantViolation("neg_per_pos", "must be >= 0")
        kwargs["neg_per_pos"] = doc["neg_per_pos"]
    return AppConfig(**kwargs)


def load_config(path: str | Path | None, environ=None) -> AppConfig:
    if path is None:
        cfg = AppConfig()
    else:
        p = Path(path)
        cfg = config_from_dict(parse_json(p.read_text(encoding="utf-8"), str(p)))
    return dataclasses.replace(cfg, provider=cfg.provider.with_env(environ))


def load_ccvr_config(path: str | Path) -> CCVRConfig:
    p = Path(path)
    return ccvr_from_dict(parse_json(p.read_text(encoding="utf-8"), str(p)), section="")

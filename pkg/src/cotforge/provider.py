"""Provider configuration and the remote wire client.

Wire protocol: one HTTP POST per operation with a JSON body
``{"task": ..., "input": {...}, "params": {...}}``; the server answers
``{"output": ...}``. Tasks used by this package: ``caption``, ``triples``,
``compose`` and ``embed``.
"""
from __future__ import annotations

import json
import os
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, replace
from typing import Any

from cotforge.errors import InvariantViolation, ProviderError, RemoteUnavailable
from cotforge.hashing import MASK64

ENV_URL = "COTFORGE_PROVIDER_URL"
ENV_KEY = "COTFORGE_PROVIDER_KEY"


@dataclass(frozen=True)
class ProviderConfig:
    mode: str = "mock"
    endpoint: str | None = None
    auth_token: str | None = None
    seed: int = 0
    timeout: float = 30.0
    retries: int = 0
    max_in_flight: int = 4

    def __post_init__(self):
        if self.mode not in ("mock", "remote"):
            raise InvariantViolation("provider.mode", f"must be 'mock' or 'remote', got {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise InvariantViolation("provider.endpoint", "required when mode is 'remote'")
        if not 0 <= self.seed <= MASK64:
            raise InvariantViolation("provider.seed", "must be an unsigned 64-bit integer")
        if self.timeout <= 0:
            raise InvariantViolation("provider.timeout", "must be positive")
        if self.retries < 0:
            raise InvariantViolation("provider.retries", "must be >= 0")
        if self.max_in_flight < 1:
            raise InvariantViolation("provider.max_in_flight", "must be >= 1")

    def with_env(self, environ=None) -> "ProviderConfig":
        """Overlay endpoint and credentials from the environment."""
        environ = os.environ if environ is None else environ
        changes = {}
        if environ.get(ENV_URL):
            changes["endpoint"] = environ[ENV_URL]
        if environ.get(ENV_KEY):
            changes["auth_token"] = environ[ENV_KEY]
        return replace(self, **changes) if changes else self


_semaphores: dict[tuple[str, int], threading.BoundedSemaphore] = {}
_semaphores_lock = threading.Lock()


def _semaphore(cfg: ProviderConfig) -> threading.BoundedSemaphore:
    key = (cfg.endpoint or "", cfg.max_in_flight)
    with _semaphores_lock:
        if key not in _semaphores:
            _semaphores[key] = threading.BoundedSemaphore(cfg.max_in_flight)
        return _semaphores[key]


def call_remote(cfg: ProviderConfig, task: str, payload: dict, params: dict | None = None) -> Any:
    """POST one request and return the ``output`` field of the reply."""
    if not cfg.endpoint:
        raise RemoteUnavailable("no provider endpoint configured")
    body = json.dumps({"task": task, "input": payload, "params": params or {}}).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if cfg.auth_token:
        headers["Authorization"] = f"Bearer {cfg.auth_token}"

    last_exc: Exception | None = None
    with _semaphore(cfg):
        for _ in range(cfg.retries + 1):
            req = urllib.request.Request(cfg.endpoint, data=body, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=cfg.timeout) as resp:
                    raw = resp.read()
                break
            except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
                last_exc = exc
        else:
            raise RemoteUnavailable(f"{task}: provider at {cfg.endpoint} unavailable: {last_exc}")

    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProviderError(f"{task}: malformed provider reply: {exc}") from exc
    if not isinstance(doc, dict) or "output" not in doc:
        raise ProviderError(f"{task}: provider reply lacks 'output'")
    return doc["output"]

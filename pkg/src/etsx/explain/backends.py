"""LLM backends: scripted mock, recorded replay and a remote chat-completion client.

Every backend answers ``complete(system, user, tag, attempt)``. The tag names the
pipeline step (``ec``, ``pc:<sig>``, ``effect``, ``global``, ``candidate:<sig>``) so
scripted replies can be keyed without matching prompt text.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

import httpx

PARAMS = {"temperature": 0}


class BackendError(RuntimeError):
    pass


class Backend:
    name = "backend"

    def complete(self, system: str, user: str, tag: str = "", attempt: int = 1) -> str:
        raise NotImplementedError


class MockBackend(Backend):
    """Canned replies looked up by ``tag#attempt`` first, then by ``tag``.

    A missing reply is a BackendError, never an invented answer.
    """

    name = "mock"

    def __init__(self, replies: dict[str, str] | None = None):
        self.replies = dict(replies or {})
        self.calls: list[tuple[str, int]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def complete(self, system, user, tag="", attempt=1):
        with self._lock:
            self.calls.append((tag, attempt))
        for key in (f"{tag}#{attempt}", tag):
            if key in self.replies:
                return self.replies[key]
        raise BackendError(f"mock has no reply for {tag!r} (attempt {attempt})")


class FailingBackend(Backend):
    name = "failing"

    def complete(self, system, user, tag="", attempt=1):
        raise BackendError("backend unavailable")


def request_key(system: str, user: str, params: dict | None = None) -> str:
    blob = json.dumps({"system": system, "user": user, "params": params or PARAMS},
                      sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode()).hexdigest()


class ReplayBackend(Backend):
    """Answers from a cassette (request hash -> completion).

    With `inner` set, misses are forwarded and recorded; call `save()` afterwards.
    """

    name = "replay"

    def __init__(self, cassette: str | os.PathLike, inner: Backend | None = None):
        self.path = Path(cassette)
        self.inner = inner
        self.entries = json.loads(self.path.read_text(encoding="utf-8")) if self.path.exists() else {}
        self._lock = threading.Lock()

    def complete(self, system, user, tag="", attempt=1):
        key = request_key(system, user)
        if attempt > 1:
            key = f"{key}#{attempt}"
        with self._lock:
            if key in self.entries:
                return self.entries[key]
        if self.inner is None:
            raise BackendError(f"cassette {self.path.name} has no entry for {tag or key[:12]}")
        out = self.inner.complete(system, user, tag, attempt)
        with self._lock:
            self.entries[key] = out
        return out

    def save(self) -> None:
        self.path.write_text(json.dumps(self.entries, indent=1, sort_keys=True, ensure_ascii=False) + "\n",
                             encoding="utf-8")


class RemoteBackend(Backend):
    """OpenAI-style chat completions over HTTP; sampling pinned to temperature 0."""

    name = "remote"

    def __init__(self, endpoint: str | None = None, model: str | None = None, api_key: str | None = None,
                 timeout: float = 60.0, transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint or os.environ.get("ETSX_LLM_ENDPOINT")
        self.model = model or os.environ.get("ETSX_LLM_MODEL")
        self.api_key = api_key or os.environ.get("ETSX_LLM_API_KEY")
        if not self.endpoint or not self.model:
            raise BackendError("remote backend needs ETSX_LLM_ENDPOINT and ETSX_LLM_MODEL")
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        self.client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def complete(self, system, user, tag="", attempt=1):
        body = {"model": self.model, "messages": [{"role": "system", "content": system},
                                                  {"role": "user", "content": user}], **PARAMS}
        try:
            r = self.client.post(self.endpoint, json=body)
            r.raise_for_status()
            return r.json()["choices"][0]["message"]["content"]
        except httpx.HTTPError as e:
            raise BackendError(f"remote request failed: {e}") from e
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise BackendError(f"unexpected response shape: {e}") from e


def make_backend(kind: str, mock_replies: dict | None = None, cassette=None) -> Backend:
    if kind == "mock":
        return MockBackend(mock_replies)
    if kind == "replay":
        if cassette is None:
            raise BackendError("replay backend needs a cassette")
        return ReplayBackend(cassette)
    if kind == "remote":
        return RemoteBackend()
    raise BackendError(f"unknown backend {kind!r}")

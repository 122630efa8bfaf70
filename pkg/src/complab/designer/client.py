"""Chat-completions endpoint client with retries, plus record/replay for offline tests."""
from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import httpx

TRANSCRIPT_FORMAT = "complab-transcript/1"
RETRY_STATUS = {408, 429, 500, 502, 503, 504}


class EndpointFault(RuntimeError):
    pass


class TranscriptMismatch(EndpointFault):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://127.0.0.1:8000/v1"
    model_name: str = "default"
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2
    api_key_env: str = "LLM_API_KEY"
    backoff: float = 0.5

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 <= self.max_retries <= 10:
            raise ValueError("max_retries must lie in [0, 10]")

    @property
    def deterministic(self) -> bool:
        return self.temperature == 0

    def to_dict(self) -> dict:
        return asdict(self)


class ChatClient:
    """One chat-completion round trip per call. Every attempt is appended to ``log``."""

    def __init__(self, cfg: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        self.transport = transport
        self.log: list[dict] = []

    def request_body(self, messages: list[dict]) -> dict:
        return {"model": self.cfg.model_name, "messages": messages, "temperature": self.cfg.temperature}

    def complete(self, messages: list[dict]) -> str:
        cfg = self.cfg
        key = os.environ.get(cfg.api_key_env)
        if not key:
            raise EndpointFault(f"credential variable {cfg.api_key_env} is not set")
        body = self.request_body(messages)
        url = cfg.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {key}"}
        last = None
        attempts = 0
        with httpx.Client(timeout=cfg.timeout, transport=self.transport) as http:
            for attempt in range(cfg.max_retries + 1):
                attempts += 1
                entry = {"attempt": attempt, "request": body}
                try:
                    r = http.post(url, json=body, headers=headers)
                except httpx.TransportError as exc:
                    entry["error"] = f"{type(exc).__name__}: {exc}"
                    self.log.append(entry)
                    last = entry["error"]
                else:
                    entry["status"] = r.status_code
                    entry["response"] = r.text
                    self.log.append(entry)
                    if r.status_code == 200:
                        try:
                            return r.json()["choices"][0]["message"]["content"]
                        except (ValueError, KeyError, IndexError, TypeError) as exc:
                            raise EndpointFault(f"malformed completion payload: {exc}") from exc
                    if r.status_code in (401, 403):
                        raise EndpointFault(f"authentication rejected ({r.status_code})")
                    last = f"HTTP {r.status_code}"
                    if r.status_code not in RETRY_STATUS:
                        break
                if attempt < cfg.max_retries and cfg.backoff > 0:
                    time.sleep(cfg.backoff * 2**attempt)
        raise EndpointFault(f"endpoint failed after {attempts} attempts: {last}")


class RecordingClient:
    """Wraps a live client and keeps (request, reply) pairs for later replay."""

    def __init__(self, inner):
        self.inner = inner
        self.exchanges: list[dict] = []

    @property
    def log(self):
        return self.inner.log

    def complete(self, messages: list[dict]) -> str:
        reply = self.inner.complete(messages)
        self.exchanges.append({"messages": messages, "reply": reply})
        return reply

    def save(self, path: str | Path) -> None:
        from complab.designer.session import atomic_write_json

        atomic_write_json(path, {"format": TRANSCRIPT_FORMAT, "exchanges": self.exchanges})


class ReplayClient:
    """Serves recorded replies in order; any drift in the requests is an error."""

    def __init__(self, exchanges: list[dict]):
        self.exchanges = list(exchanges)
        self.pos = 0
        self.log: list[dict] = []

    @classmethod
    def load(cls, path: str | Path) -> "ReplayClient":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != TRANSCRIPT_FORMAT:
            raise ValueError(f"unsupported transcript format {doc.get('format')!r}")
        return cls(doc["exchanges"])

    def complete(self, messages: list[dict]) -> str:
        if self.pos >= len(self.exchanges):
            raise TranscriptMismatch("transcript exhausted")
        ex = self.exchanges[self.pos]
        if ex["messages"] != messages:
            raise TranscriptMismatch(f"request {self.pos} differs from the recording")
        self.pos += 1
        self.log.append({"attempt": 0, "request": messages, "replayed": True})
        return ex["reply"]

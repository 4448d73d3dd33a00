"""Provider-agnostic LLM access with cost accounting and record/replay.

Every request is canonicalized and hashed; cassettes are content-addressed
JSON files keyed by that digest, one file per exchange, so any pipeline run
in strict replay mode is byte-for-byte reproducible with no network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from patscout.errors import CassetteMissError, ConfigurationError, GatewayError

log = logging.getLogger(__name__)

API_KEY_ENV = "PATSCOUT_API_KEY"

MODES = ("live", "record", "replay", "hybrid")


@dataclass(frozen=True)
class ModelProfile:
    model_id: str
    max_output_tokens: int = 4096
    max_reasoning_tokens: int | None = None
    price_per_million_in: float = 0.0
    price_per_million_out: float = 0.0
    temperature: float | None = None

    def __post_init__(self) -> None:
        if self.max_output_tokens <= 0:
            raise ConfigurationError("max_output_tokens must be positive")
        if self.price_per_million_in < 0 or self.price_per_million_out < 0:
            raise ConfigurationError("prices must be non-negative")


# Token limits are pinned; prices drift, so they stay in user config.
DEFAULT_PROFILES = {
    "claude-3-7-sonnet-thinking": ModelProfile(
        model_id="claude-3-7-sonnet-thinking",
        max_output_tokens=4096,
        max_reasoning_tokens=2048,
    ),
    "o4-mini": ModelProfile(model_id="o4-mini", max_output_tokens=4096),
    "deepseek-r1": ModelProfile(model_id="deepseek-r1", max_output_tokens=4096),
}


@dataclass(frozen=True)
class LlmExchange:
    request: dict
    request_digest: str
    response_text: str
    tokens_in: int
    tokens_out: int
    latency_ms: int


@dataclass(frozen=True)
class CostEntry:
    stage: str
    anti_pattern: str
    tokens_in: int
    tokens_out: int
    dollars: float
    seconds: float


class CostLedger:
    """Append-only cost sink; appends are serialized for concurrent callers."""

    def __init__(self) -> None:
        self._entries: list[CostEntry] = []
        self._lock = threading.Lock()

    def add(self, entry: CostEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> list[CostEntry]:
        with self._lock:
            return list(self._entries)

    def to_json(self) -> list[dict]:
        return [
            {
                "stage": e.stage,
                "anti_pattern": e.anti_pattern,
                "tokens_in": e.tokens_in,
                "tokens_out": e.tokens_out,
                "dollars": e.dollars,
                "seconds": e.seconds,
            }
            for e in self.entries
        ]

    @classmethod
    def from_json(cls, doc: list[dict]) -> "CostLedger":
        ledger = cls()
        for e in doc:
            ledger.add(CostEntry(
                stage=e["stage"], anti_pattern=e["anti_pattern"],
                tokens_in=e["tokens_in"], tokens_out=e["tokens_out"],
                dollars=e["dollars"], seconds=e["seconds"],
            ))
        return ledger

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def exchange_dollars(exchange: LlmExchange, profile: ModelProfile) -> float:
    raw = (exchange.tokens_in * profile.price_per_million_in
           + exchange.tokens_out * profile.price_per_million_out) / 1_000_000
    return round(raw, 4)


def tally_cost(ledger: CostLedger, group_by: str = "anti_pattern") -> dict:
    """Sum seconds and dollars per group; the totals row equals the sum of
    the group rows by construction."""
    if group_by not in ("stage", "anti_pattern"):
        raise ConfigurationError(f"unknown grouping {group_by!r}")
    groups: dict[str, dict[str, float]] = {}
    for e in ledger.entries:
        key = getattr(e, group_by) or "(none)"
        g = groups.setdefault(key, {"tokens_in": 0, "tokens_out": 0, "dollars": 0.0, "seconds": 0.0})
        g["tokens_in"] += e.tokens_in
        g["tokens_out"] += e.tokens_out
        g["dollars"] += e.dollars
        g["seconds"] += e.seconds
    total = {"tokens_in": 0, "tokens_out": 0, "dollars": 0.0, "seconds": 0.0}
    for g in groups.values():
        for k in total:
            total[k] += g[k]
    return {"group_by": group_by, "groups": dict(sorted(groups.items())), "total": total}


# ---------------------------------------------------------------------------
# canonicalization

_WS = re.compile(r"\s+")


def _normalize(value):
    if isinstance(value, str):
        return _WS.sub(" ", value).strip()
    if isinstance(value, dict):
        return {k: _normalize(v) for k, v in sorted(value.items())}
    if isinstance(value, list):
        return [_normalize(v) for v in value]
    return value


def canonical_request(model_id: str, messages: list[dict], params: dict) -> tuple[dict, str]:
    """Canonical request document plus its digest.

    Message contents are preserved verbatim (prompt text must affect the
    digest); non-message fields get sorted keys and normalized whitespace.
    """
    doc = {
        "messages": [
            {"content": m.get("content", ""), "role": m.get("role", "user")}
            for m in messages
        ],
        "model_id": model_id,
        "params": _normalize({k: v for k, v in params.items() if v is not None}),
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return doc, hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# transports

Transport = Callable[[dict], tuple[str, int, int, int]]
"""request doc -> (text, tokens_in, tokens_out, latency_ms)"""


class HttpChatTransport:
    """Minimal OpenAI-compatible chat-completions client.

    Base URL comes from config, the key from the environment. Kept free of
    SDK dependencies on purpose.
    """

    def __init__(self, base_url: str, api_key_env: str = API_KEY_ENV, timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout

    def __call__(self, request: dict) -> tuple[str, int, int, int]:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise GatewayError(f"missing API key: set ${self.api_key_env}")
        payload = {
            "model": request["model_id"],
            "messages": request["messages"],
        }
        params = request.get("params", {})
        if "max_output_tokens" in params:
            payload["max_tokens"] = params["max_output_tokens"]
        if "temperature" in params:
            payload["temperature"] = params["temperature"]
        body = json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(
            f"{self.base_url}/chat/completions",
            data=body,
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {key}"},
        )
        started = time.monotonic()
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except urllib.error.URLError as exc:
            raise GatewayError(f"transport failure: {exc}") from exc
        latency_ms = int((time.monotonic() - started) * 1000)
        try:
            text = doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise GatewayError(f"malformed completion response: {exc}") from exc
        usage = doc.get("usage", {})
        return (
            text,
            int(usage.get("prompt_tokens", 0)),
            int(usage.get("completion_tokens", 0)),
            latency_ms,
        )


# ---------------------------------------------------------------------------
# gateway


class LlmGateway:
    """complete() is thread-safe; cassette writes are atomic
    (write-temp-then-rename) and ledger appends serialized."""

    def __init__(
        self,
        profile: ModelProfile,
        mode: str = "live",
        cassette_dir: str | Path | None = None,
        transport: Transport | None = None,
        ledger: CostLedger | None = None,
        max_retries: int = 3,
        backoff_base: float = 0.25,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if mode not in MODES:
            raise ConfigurationError(f"unknown gateway mode {mode!r}")
        if mode in ("record", "replay", "hybrid") and cassette_dir is None:
            raise ConfigurationError(f"mode {mode!r} needs a cassette directory")
        self.profile = profile
        self.mode = mode
        self.cassette_dir = Path(cassette_dir) if cassette_dir else None
        self.transport = transport
        self.ledger = ledger if ledger is not None else CostLedger()
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleeper

    # -- cassette store ----------------------------------------------------

    def _cassette_path(self, digest: str) -> Path:
        assert self.cassette_dir is not None
        return self.cassette_dir / f"{digest}.json"

    def _load_cassette(self, digest: str) -> LlmExchange | None:
        path = self._cassette_path(digest)
        if not path.is_file():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        resp = doc["response"]
        return LlmExchange(
            request=doc["request"],
            request_digest=digest,
            response_text=resp["text"],
            tokens_in=resp["tokens_in"],
            tokens_out=resp["tokens_out"],
            latency_ms=resp["latency_ms"],
        )

    def _store_cassette(self, exchange: LlmExchange) -> None:
        assert self.cassette_dir is not None
        self.cassette_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            "request": exchange.request,
            "response": {
                "text": exchange.response_text,
                "tokens_in": exchange.tokens_in,
                "tokens_out": exchange.tokens_out,
                "latency_ms": exchange.latency_ms,
            },
        }
        blob = json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        fd, tmp = tempfile.mkstemp(dir=self.cassette_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(blob)
            os.replace(tmp, self._cassette_path(exchange.request_digest))
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    # -- live path ----------------------------------------------------------

    def _call_live(self, request: dict, digest: str) -> LlmExchange:
        if self.transport is None:
            raise ConfigurationError("no transport configured for live/record mode")
        last: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                text, tin, tout, latency = self.transport(request)
                return LlmExchange(
                    request=request, request_digest=digest, response_text=text,
                    tokens_in=tin, tokens_out=tout, latency_ms=latency,
                )
            except GatewayError as exc:
                last = exc
                if attempt + 1 < self.max_retries:
                    delay = self.backoff_base * (2 ** attempt)
                    log.warning("transport attempt %d failed (%s); retrying in %.2fs",
                                attempt + 1, exc, delay)
                    self._sleep(delay)
        raise GatewayError(f"transport failed after {self.max_retries} attempts: {last}")

    # -- public API ----------------------------------------------------------

    def complete(self, messages: list[dict], *, stage: str = "", anti_pattern: str = "",
                 decode_params: dict | None = None) -> LlmExchange:
        params = {
            "max_output_tokens": self.profile.max_output_tokens,
            "max_reasoning_tokens": self.profile.max_reasoning_tokens,
            "temperature": self.profile.temperature,
        }
        if decode_params:
            params.update(decode_params)
        request, digest = canonical_request(self.profile.model_id, messages, params)

        if self.mode == "replay":
            exchange = self._load_cassette(digest)
            if exchange is None:
                raise CassetteMissError(digest)
        elif self.mode == "hybrid":
            exchange = self._load_cassette(digest)
            if exchange is None:
                exchange = self._call_live(request, digest)
                self._store_cassette(exchange)
        elif self.mode == "record":
            exchange = self._call_live(request, digest)
            self._store_cassette(exchange)
        else:  # live
            exchange = self._call_live(request, digest)

        self.ledger.add(CostEntry(
            stage=stage,
            anti_pattern=anti_pattern,
            tokens_in=exchange.tokens_in,
            tokens_out=exchange.tokens_out,
            dollars=exchange_dollars(exchange, self.profile),
            seconds=exchange.latency_ms / 1000.0,
        ))
        return exchange

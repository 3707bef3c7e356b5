"""Chat-completions gateway with caching, retries, and record/replay.

Every request is identified by a sha256 fingerprint of (model_id,
temperature, system_text, user_text). Cache entries and replay fixtures
share one on-disk layout, a JSON file named <fingerprint>.json holding
the request fields plus response_text, so a recorded cache can be shipped
as fixtures unchanged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

from .errors import ProviderError
from .transport import (
    HttpTransport,
    RequestsTransport,
    TransportFailure,
    TransportTimeout,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_OUTPUT_TOKENS = 4096


class GatewayTimeoutError(ProviderError):
    pass


class ReplayMissError(ProviderError):
    pass


class TransientProviderError(ProviderError):
    """Retryable upstream failure (429, 5xx, timeouts)."""

    def __init__(self, message: str, retry_after: float | None = None) -> None:
        super().__init__(message)
        self.retry_after = retry_after


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be within [0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    model_id: str
    prompt_tokens: int
    completion_tokens: int
    latency_seconds: float
    from_cache: bool


def fingerprint(request: ChatRequest) -> str:
    """Hex digest identifying the semantic request; max_output_tokens excluded."""
    canonical = json.dumps(
        [
            request.model_id,
            repr(float(request.temperature)),
            request.system_text,
            request.user_text,
        ],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _fixture_payload(request: ChatRequest, response_text: str) -> dict:
    return {
        "model_id": request.model_id,
        "temperature": request.temperature,
        "system_text": request.system_text,
        "user_text": request.user_text,
        "response_text": response_text,
    }


def _atomic_write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def record_fixture(request: ChatRequest, response_text: str, directory: str | Path) -> Path:
    """Persist a request/response pair under its fingerprint; idempotent."""
    path = Path(directory) / f"{fingerprint(request)}.json"
    _atomic_write_json(path, _fixture_payload(request, response_text))
    return path


class Provider(Protocol):
    def send(self, request: ChatRequest) -> tuple[str, int, int]:
        """Return (text, prompt_tokens, completion_tokens)."""
        ...


class ReplayProvider:
    """Serves responses from recorded fixture files; never touches the network."""

    def __init__(self, fixtures_dir: str | Path) -> None:
        self.fixtures_dir = Path(fixtures_dir)

    def send(self, request: ChatRequest) -> tuple[str, int, int]:
        fp = fingerprint(request)
        path = self.fixtures_dir / f"{fp}.json"
        if not path.is_file():
            raise ReplayMissError(
                f"no fixture {fp} for model {request.model_id} in {self.fixtures_dir}"
            )
        payload = json.loads(path.read_text(encoding="utf-8"))
        return (
            payload["response_text"],
            int(payload.get("prompt_tokens", 0)),
            int(payload.get("completion_tokens", 0)),
        )


class HttpChatProvider:
    """Speaks the chat-completions wire dialect against a configured endpoint."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        transport: HttpTransport | None = None,
        timeout: float = 120.0,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.transport = transport if transport is not None else RequestsTransport()
        self.timeout = timeout

    def send(self, request: ChatRequest) -> tuple[str, int, int]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        url = f"{self.base_url}/chat/completions"
        try:
            reply = self.transport.post(url, headers, body, self.timeout)
        except TransportTimeout as exc:
            raise TransientProviderError(f"timeout: {exc}") from exc
        except TransportFailure as exc:
            raise TransientProviderError(f"connection failure: {exc}") from exc
        if reply.status == 429 or reply.status >= 500:
            retry_after = None
            raw = reply.headers.get("Retry-After") or reply.headers.get("retry-after")
            if raw is not None:
                try:
                    retry_after = float(raw)
                except ValueError:
                    retry_after = None
            raise TransientProviderError(
                f"HTTP {reply.status} from provider", retry_after=retry_after
            )
        if reply.status != 200:
            raise ProviderError(f"HTTP {reply.status} from provider: {reply.body[:200]}")
        try:
            payload = json.loads(reply.body)
            text = payload["choices"][0]["message"]["content"]
            usage = payload.get("usage", {})
            return (
                text,
                int(usage.get("prompt_tokens", 0)),
                int(usage.get("completion_tokens", 0)),
            )
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc


class ChatGateway:
    """Cache-first completion with bounded concurrency and capped retries."""

    def __init__(
        self,
        provider: Provider,
        cache_dir: str | Path | None = None,
        retries: int = 3,
        backoff_start: float = 0.5,
        max_in_flight: int = 4,
        requests_per_minute: int = 0,
        sleeper: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ) -> None:
        if retries < 0:
            raise ValueError("retries must be >= 0")
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if requests_per_minute < 0:
            raise ValueError("requests_per_minute must be >= 0")
        self.provider = provider
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.retries = retries
        self.backoff_start = backoff_start
        self._gate = threading.Semaphore(max_in_flight)
        self._min_interval = 60.0 / requests_per_minute if requests_per_minute else 0.0
        self._next_send = 0.0
        self._sleep = sleeper
        self._clock = clock
        self._lock = threading.Lock()
        self.request_count = 0
        self.cache_hit_count = 0

    def _pace(self) -> None:
        """Space out sends when a requests-per-minute budget is configured."""
        if not self._min_interval:
            return
        with self._lock:
            now = self._clock()
            wait = self._next_send - now
            self._next_send = max(now, self._next_send) + self._min_interval
        if wait > 0:
            self._sleep(wait)

    def _cache_path(self, fp: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{fp}.json"

    def complete(self, request: ChatRequest) -> ChatResponse:
        fp = fingerprint(request)
        cache_path = self._cache_path(fp)
        if cache_path is not None and cache_path.is_file():
            payload = json.loads(cache_path.read_text(encoding="utf-8"))
            with self._lock:
                self.cache_hit_count += 1
            return ChatResponse(
                text=payload["response_text"],
                model_id=payload.get("model_id", request.model_id),
                prompt_tokens=int(payload.get("prompt_tokens", 0)),
                completion_tokens=int(payload.get("completion_tokens", 0)),
                latency_seconds=0.0,
                from_cache=True,
            )
        with self._gate:
            text, prompt_tokens, completion_tokens, latency = self._send_with_retries(
                request
            )
        if cache_path is not None:
            payload = _fixture_payload(request, text)
            payload["prompt_tokens"] = prompt_tokens
            payload["completion_tokens"] = completion_tokens
            _atomic_write_json(cache_path, payload)
        return ChatResponse(
            text=text,
            model_id=request.model_id,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            latency_seconds=latency,
            from_cache=False,
        )

    def _send_with_retries(self, request: ChatRequest) -> tuple[str, int, int, float]:
        delay = self.backoff_start
        attempt = 0
        while True:
            self._pace()
            start = self._clock()
            try:
                text, prompt_tokens, completion_tokens = self.provider.send(request)
                latency = self._clock() - start
                with self._lock:
                    self.request_count += 1
                return text, prompt_tokens, completion_tokens, latency
            except TransientProviderError as exc:
                attempt += 1
                with self._lock:
                    self.request_count += 1
                if attempt > self.retries:
                    raise ProviderError(
                        f"gave up after {attempt} attempts: {exc}"
                    ) from exc
                wait = delay
                if exc.retry_after is not None:
                    wait = max(wait, exc.retry_after)
                logger.warning(
                    "transient provider failure (attempt %d/%d), retrying in %.1fs: %s",
                    attempt,
                    self.retries,
                    wait,
                    exc,
                )
                self._sleep(wait)
                delay *= 2

"""Compound name resolution against the PubChem PUG REST property endpoint.

Lookups hit a single-file JSON cache first, keyed by the trimmed
lowercase query. Not-found entries expire after a TTL so newly registered
names get retried; everything else is permanent. With a fixtures
directory configured, responses come from files keyed by the request
fingerprint and the network is never touched.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import quote

from concurrent.futures import ThreadPoolExecutor

from .errors import ProviderError
from .transport import (
    HttpTransport,
    RequestsTransport,
    TransportFailure,
    TransportTimeout,
)

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://pubchem.ncbi.nlm.nih.gov/rest/pug"
PROPERTY_LIST = "IUPACName,CanonicalSMILES"
DEFAULT_NOT_FOUND_TTL_DAYS = 30


class NetworkError(ProviderError):
    pass


class RateLimitedError(ProviderError):
    pass


class ResponseParseError(ProviderError):
    pass


class ResolutionStatus(Enum):
    RESOLVED = "Resolved"
    NOT_FOUND = "NotFound"
    AMBIGUOUS = "Ambiguous"
    FAILED = "Failed"


@dataclass(frozen=True)
class ResolutionRecord:
    query: str
    status: ResolutionStatus
    iupac_name: str | None = None
    canonical_smiles: str | None = None
    resolved_at: str = ""

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "status": self.status.value,
            "iupac_name": self.iupac_name,
            "canonical_smiles": self.canonical_smiles,
            "resolved_at": self.resolved_at,
        }

    @staticmethod
    def from_dict(raw: dict) -> "ResolutionRecord":
        return ResolutionRecord(
            query=raw["query"],
            status=ResolutionStatus(raw["status"]),
            iupac_name=raw.get("iupac_name"),
            canonical_smiles=raw.get("canonical_smiles"),
            resolved_at=raw.get("resolved_at", ""),
        )


def cache_key(name: str) -> str:
    return name.strip().lower()


def request_url(name: str, base_url: str = DEFAULT_BASE_URL) -> str:
    """The PUG REST property URL queried for one compound name."""
    encoded = quote(name.strip(), safe="")
    return f"{base_url}/compound/name/{encoded}/property/{PROPERTY_LIST}/JSON"


def request_fingerprint(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()


def write_resolver_fixture(
    directory: str | Path, name: str, body: str, status: int = 200,
    base_url: str = DEFAULT_BASE_URL,
) -> Path:
    """Record one canned PUG REST reply for fixture-mode resolution."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fp = request_fingerprint(request_url(name, base_url))
    path = directory / f"{fp}.json"
    path.write_text(
        json.dumps({"status": status, "body": body}, ensure_ascii=False, indent=2),
        encoding="utf-8",
    )
    return path


class PubChemResolver:
    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        cache_path: str | Path | None = None,
        fixtures_dir: str | Path | None = None,
        transport: HttpTransport | None = None,
        retries: int = 3,
        backoff_start: float = 0.5,
        timeout: float = 30.0,
        not_found_ttl_days: float = DEFAULT_NOT_FOUND_TTL_DAYS,
        sleeper: Callable[[float], None] = time.sleep,
        now: Callable[[], datetime] | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.cache_path = Path(cache_path) if cache_path is not None else None
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir is not None else None
        self.transport = transport if transport is not None else RequestsTransport()
        self.retries = retries
        self.backoff_start = backoff_start
        self.timeout = timeout
        self.not_found_ttl_days = not_found_ttl_days
        self._sleep = sleeper
        self._now = now if now is not None else lambda: datetime.now(timezone.utc)
        self._lock = threading.Lock()
        self._cache: dict[str, ResolutionRecord] = {}
        if self.cache_path is not None and self.cache_path.is_file():
            raw = json.loads(self.cache_path.read_text(encoding="utf-8"))
            self._cache = {k: ResolutionRecord.from_dict(v) for k, v in raw.items()}

    def _cache_fresh(self, record: ResolutionRecord) -> bool:
        if record.status is not ResolutionStatus.NOT_FOUND:
            return True
        try:
            stamp = datetime.fromisoformat(record.resolved_at)
        except ValueError:
            return False
        age = self._now() - stamp
        return age.total_seconds() < self.not_found_ttl_days * 86400.0

    def _cache_put(self, key: str, record: ResolutionRecord) -> None:
        with self._lock:
            self._cache[key] = record
            if self.cache_path is not None:
                payload = {k: r.to_dict() for k, r in sorted(self._cache.items())}
                self.cache_path.parent.mkdir(parents=True, exist_ok=True)
                tmp = self.cache_path.with_suffix(".tmp")
                tmp.write_text(
                    json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True)
                    + "\n",
                    encoding="utf-8",
                )
                tmp.replace(self.cache_path)

    def _fetch(self, url: str) -> tuple[int, str]:
        if self.fixtures_dir is not None:
            path = self.fixtures_dir / f"{request_fingerprint(url)}.json"
            if not path.is_file():
                raise NetworkError(f"no resolver fixture for {url}")
            payload = json.loads(path.read_text(encoding="utf-8"))
            return int(payload["status"]), payload["body"]
        delay = self.backoff_start
        attempt = 0
        while True:
            attempt += 1
            try:
                reply = self.transport.get(url, {"Accept": "application/json"}, self.timeout)
            except (TransportTimeout, TransportFailure) as exc:
                if attempt > self.retries:
                    raise NetworkError(f"{url}: {exc}") from exc
                self._sleep(delay)
                delay *= 2
                continue
            if reply.status == 429 or reply.status >= 500:
                if attempt > self.retries:
                    if reply.status == 429:
                        raise RateLimitedError(f"{url}: HTTP 429 after {attempt} tries")
                    raise NetworkError(f"{url}: HTTP {reply.status} after {attempt} tries")
                raw = reply.headers.get("Retry-After") or reply.headers.get("retry-after")
                wait = delay
                if raw is not None:
                    try:
                        wait = max(wait, float(raw))
                    except ValueError:
                        pass
                self._sleep(wait)
                delay *= 2
                continue
            return reply.status, reply.body

    def _parse_reply(self, name: str, status: int, body: str) -> ResolutionRecord:
        stamp = self._now().isoformat()
        if status == 404:
            return ResolutionRecord(name, ResolutionStatus.NOT_FOUND, resolved_at=stamp)
        if status != 200:
            raise NetworkError(f"{name!r}: HTTP {status}")
        try:
            payload = json.loads(body)
        except json.JSONDecodeError as exc:
            raise ResponseParseError(f"{name!r}: response is not JSON: {exc}") from None
        fault = payload.get("Fault") if isinstance(payload, dict) else None
        if fault is not None:
            return ResolutionRecord(name, ResolutionStatus.NOT_FOUND, resolved_at=stamp)
        try:
            props = payload["PropertyTable"]["Properties"]
        except (KeyError, TypeError):
            raise ResponseParseError(
                f"{name!r}: missing PropertyTable in response"
            ) from None
        if not isinstance(props, list) or not props:
            return ResolutionRecord(name, ResolutionStatus.NOT_FOUND, resolved_at=stamp)
        status_out = (
            ResolutionStatus.AMBIGUOUS if len(props) > 1 else ResolutionStatus.RESOLVED
        )
        if status_out is ResolutionStatus.AMBIGUOUS:
            logger.warning(
                "%r matched %d compounds, keeping the first", name, len(props)
            )
        first = props[0]
        if not isinstance(first, dict):
            raise ResponseParseError(f"{name!r}: malformed property entry")
        return ResolutionRecord(
            query=name,
            status=status_out,
            iupac_name=first.get("IUPACName"),
            canonical_smiles=first.get("CanonicalSMILES"),
            resolved_at=stamp,
        )

    def resolve(self, name: str) -> ResolutionRecord:
        """Resolve one compound name to IUPAC name and canonical SMILES."""
        if not name.strip():
            raise ValueError("compound name must be non-empty")
        key = cache_key(name)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None and self._cache_fresh(cached):
            return cached
        url = request_url(name, self.base_url)
        status, body = self._fetch(url)
        record = self._parse_reply(name.strip(), status, body)
        self._cache_put(key, record)
        return record

    def resolve_batch(
        self, names: Sequence[str], max_in_flight: int = 4
    ) -> list[ResolutionRecord]:
        """Resolve many names concurrently, preserving input order.

        Per-name provider failures become status=Failed records (never
        cached) instead of aborting the batch.
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

        def one(name: str) -> ResolutionRecord:
            try:
                return self.resolve(name)
            except ProviderError as exc:
                logger.error("resolution failed for %r: %s", name, exc)
                return ResolutionRecord(
                    query=name.strip(),
                    status=ResolutionStatus.FAILED,
                    resolved_at=self._now().isoformat(),
                )

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(one, names))

"""Shared test builders: labels, predictions, canned providers and transports."""

from __future__ import annotations

import json
import threading

import pytest

from cotox.gateway import ChatRequest
from cotox.model import BinaryVerdict, LabelRecord, ToxicityType
from cotox.response_parser import NormalizedPrediction
from cotox.transport import HttpReply

T = BinaryVerdict.TOXIC
N = BinaryVerdict.NON_TOXIC


def verdict_map(pattern: str) -> dict[ToxicityType, BinaryVerdict]:
    """Build a total verdict map from a six-letter T/N pattern."""
    assert len(pattern) == 6
    return {
        t: (T if ch == "T" else N) for t, ch in zip(ToxicityType, pattern.upper())
    }


def make_label(cid: str, pattern: str) -> LabelRecord:
    return LabelRecord(cid, verdict_map(pattern))


def make_prediction(
    cid: str, pattern: str, warnings: tuple[str, ...] = ()
) -> NormalizedPrediction:
    return NormalizedPrediction(cid, verdict_map(pattern), warnings)


def response_payload(pattern: str, reasoning: bool = True) -> dict:
    """A canonical completion JSON for a six-letter verdict pattern."""
    out: dict[str, dict] = {}
    for t, ch in zip(ToxicityType, pattern.upper()):
        verdict = (T if ch == "T" else N).serialize()
        entry: dict = {"Prediction": verdict, "Answer": verdict}
        if reasoning:
            entry["Reasoning"] = {
                "Pathway": f"{t.short_name} pathway reasoning",
                "GO Term": f"{t.short_name} go reasoning",
                "IUPAC Support": f"{t.short_name} structure reasoning",
                "Overall Mechanism": f"{t.short_name} mechanism",
            }
        out[t.display_name] = entry
    return out


def response_text(pattern: str, reasoning: bool = True) -> str:
    return json.dumps(response_payload(pattern, reasoning), indent=2)


def write_labels_csv(path, rows: list[tuple[str, str, str]]) -> None:
    """rows: (compound_id, name, six-letter pattern)."""
    lines = ["compound_id,name,cardio,hemato,infertility,liver,pulmonary,renal"]
    for cid, name, pattern in rows:
        cells = ["Toxic" if ch == "T" else "Non-toxic" for ch in pattern.upper()]
        lines.append(",".join([cid, name] + cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class FakeProvider:
    """Scripted gateway provider; responses keyed by user_text or a default."""

    def __init__(self, default: str = "{}", by_user_text: dict[str, str] | None = None):
        self.default = default
        self.by_user_text = by_user_text or {}
        self.requests: list[ChatRequest] = []
        self.errors: list[Exception] = []
        self._lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0

    def send(self, request: ChatRequest):
        with self._lock:
            self.requests.append(request)
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            if self.errors:
                err = self.errors.pop(0)
                self.in_flight -= 1
                raise err
        try:
            text = self.by_user_text.get(request.user_text, self.default)
            return text, 10, 20
        finally:
            with self._lock:
                self.in_flight -= 1


class FakeTransport:
    """Scripted HTTP transport; replies keyed by URL, with a scripted queue."""

    def __init__(self, by_url: dict[str, HttpReply] | None = None):
        self.by_url = by_url or {}
        self.queue: list[HttpReply | Exception] = []
        self.calls: list[str] = []
        self._lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0

    def _serve(self, url: str) -> HttpReply:
        with self._lock:
            self.calls.append(url)
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            item = self.queue.pop(0) if self.queue else self.by_url.get(url)
        try:
            if item is None:
                return HttpReply(404, json.dumps({"Fault": {"Code": "NotFound"}}))
            if isinstance(item, Exception):
                raise item
            return item
        finally:
            with self._lock:
                self.in_flight -= 1

    def get(self, url, headers, timeout):
        return self._serve(url)

    def post(self, url, headers, json_body, timeout):
        return self._serve(url)


class ExplodingTransport:
    """Fails the test if any network call is attempted."""

    def get(self, url, headers, timeout):
        raise AssertionError(f"unexpected network GET {url}")

    def post(self, url, headers, json_body, timeout):
        raise AssertionError(f"unexpected network POST {url}")


@pytest.fixture
def no_sleep():
    waits: list[float] = []

    def fake_sleep(seconds: float) -> None:
        waits.append(seconds)

    fake_sleep.waits = waits
    return fake_sleep

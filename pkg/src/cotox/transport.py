"""Thin HTTP seam so network use stays injectable and testable."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol

import requests


@dataclass(frozen=True)
class HttpReply:
    status: int
    body: str
    headers: Mapping[str, str] = field(default_factory=dict, hash=False)


class TransportTimeout(Exception):
    """Raised by transports when the request deadline passes."""


class TransportFailure(Exception):
    """Raised by transports for connection-level failures."""


class HttpTransport(Protocol):
    def get(self, url: str, headers: Mapping[str, str], timeout: float) -> HttpReply: ...

    def post(
        self, url: str, headers: Mapping[str, str], json_body: dict, timeout: float
    ) -> HttpReply: ...


class RequestsTransport:
    """Default transport backed by the requests library."""

    def get(self, url: str, headers: Mapping[str, str], timeout: float) -> HttpReply:
        try:
            resp = requests.get(url, headers=dict(headers), timeout=timeout)
        except requests.Timeout as exc:
            raise TransportTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise TransportFailure(str(exc)) from exc
        return HttpReply(resp.status_code, resp.text, dict(resp.headers))

    def post(
        self, url: str, headers: Mapping[str, str], json_body: dict, timeout: float
    ) -> HttpReply:
        try:
            resp = requests.post(
                url, headers=dict(headers), json=json_body, timeout=timeout
            )
        except requests.Timeout as exc:
            raise TransportTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise TransportFailure(str(exc)) from exc
        return HttpReply(resp.status_code, resp.text, dict(resp.headers))

"""HTTP clients for the external model endpoints.

Three tiny wire contracts, all JSON-over-POST:
  completion / decontextualizer: {"input": str}   -> {"output": str}
  generation:  {"prompt": str, "max_tokens": int, "temperature": float}
                                                   -> {"text": str}
  embedding:   {"tokens": [str]}                   -> {"vectors": [[float]]}

Credentials come from the MODEL_API_KEY environment variable and are sent
as a bearer token. Requests are retried with exponential backoff; retries
are safe because all endpoints are read-only for us.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import httpx
import numpy as np

from .errors import MalformedResponseError, TransportError

logger = logging.getLogger(__name__)

API_KEY_ENV = "MODEL_API_KEY"


@dataclass
class EndpointConfig:
    url: str
    api_key: str | None = None
    timeout: float = 30.0
    max_attempts: int = 3
    backoff: float = 0.5

    @classmethod
    def from_env(cls, url: str, **kwargs) -> "EndpointConfig":
        return cls(url=url, api_key=os.environ.get(API_KEY_ENV), **kwargs)


class JsonEndpointClient:
    """POSTs JSON payloads with bounded retries. Subclasses add the wire
    contract for one endpoint kind."""

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        headers = {}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._http = httpx.Client(headers=headers, timeout=config.timeout, transport=transport)

    def close(self) -> None:
        self._http.close()

    def _post(self, payload: dict, tag: str = "") -> dict:
        last_error = None
        for attempt in range(1, self.config.max_attempts + 1):
            try:
                response = self._http.post(self.config.url, json=payload)
                if response.status_code >= 500:
                    raise httpx.HTTPStatusError(
                        f"server error {response.status_code}", request=response.request, response=response
                    )
                if response.status_code >= 400:
                    raise MalformedResponseError(
                        f"endpoint rejected request ({response.status_code})", raw=response.text
                    )
                return response.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
                logger.warning("endpoint attempt %d/%d failed%s: %s", attempt, self.config.max_attempts,
                               f" [{tag}]" if tag else "", exc)
                if attempt < self.config.max_attempts and self.config.backoff > 0:
                    time.sleep(self.config.backoff * 2 ** (attempt - 1))
        raise TransportError(
            f"endpoint {self.config.url} unreachable after {self.config.max_attempts} attempts: {last_error}",
            attempts=self.config.max_attempts,
        )

    @staticmethod
    def _require(payload: dict, key: str) -> object:
        if not isinstance(payload, dict) or key not in payload:
            raise MalformedResponseError(f"response missing {key!r} field", raw=payload)
        return payload[key]


def map_bounded(fn, items, jobs: int = 1) -> list:
    """Apply fn over items with at most `jobs` concurrent workers,
    preserving input order. Exceptions propagate to the caller."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


class CompletionClient(JsonEndpointClient):
    """Text-completion endpoint used by sequence labelers and the
    decontextualizer."""

    def complete(self, text: str, tag: str = "") -> str:
        payload = self._post({"input": text}, tag=tag)
        out = self._require(payload, "output")
        if not isinstance(out, str):
            raise MalformedResponseError("'output' is not a string", raw=payload)
        return out


class GenerationClient(JsonEndpointClient):
    """Prompted text-generation endpoint."""

    def generate(self, prompt: str, max_tokens: int, temperature: float, tag: str = "") -> str:
        payload = self._post(
            {"prompt": prompt, "max_tokens": max_tokens, "temperature": temperature}, tag=tag
        )
        out = self._require(payload, "text")
        if not isinstance(out, str):
            raise MalformedResponseError("'text' is not a string", raw=payload)
        return out


class EmbeddingClient(JsonEndpointClient):
    """Token-embedding endpoint; returns one vector per input token."""

    def embed(self, tokens: list[str]) -> np.ndarray:
        payload = self._post({"tokens": list(tokens)})
        vectors = self._require(payload, "vectors")
        arr = np.asarray(vectors, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != len(tokens):
            raise MalformedResponseError(
                f"expected {len(tokens)} vectors, got shape {arr.shape}", raw=payload
            )
        return arr

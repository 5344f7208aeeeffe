"""Protocol client: retries with exponential backoff, response caching, and
bounded request concurrency."""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TypeVar

import httpx
from pydantic import BaseModel, ValidationError

from ..errors import BackendRejected, BackendUnavailable, MalformedResponse
from .cache import ResponseCache
from .wire import (
    GenerateRequest,
    GenerateResponse,
    InfoResponse,
    MaskFillRequest,
    MaskFillResponse,
    PerturbRequest,
    PerturbResponse,
    request_key,
)

R = TypeVar("R", bound=BaseModel)

CACHE_SUFFIX = ".rockcache"


class BackendClient:
    """Typed client for the /v1 protocol over any httpx transport.

    ``transport_requests`` counts actual sends through the transport; cache
    hits never touch it, which is what the warm-cache determinism checks
    assert on.
    """

    def __init__(
        self,
        http: httpx.Client,
        cache_dir: str | Path | None = None,
        backend_id: str | None = None,
        max_retries: int = 3,
        backoff_base: float = 0.1,
        concurrency: int = 8,
        cache: ResponseCache | None = None,
    ):
        self.http = http
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.concurrency = concurrency
        self.transport_requests = 0
        self._backend_id = backend_id
        self._cache = cache  # pre-opened cache wins over lazy cache_dir resolution
        self._info: InfoResponse | None = None
        self._init_lock = threading.Lock()

    @classmethod
    def for_url(cls, base_url: str, **kwargs) -> BackendClient:
        return cls(httpx.Client(base_url=base_url, timeout=60.0), **kwargs)

    @property
    def backend_id(self) -> str:
        if self._backend_id is None:
            self._backend_id = self.info().backend_id
        return self._backend_id

    @property
    def cache(self) -> ResponseCache | None:
        if self._cache is None and self.cache_dir is not None:
            with self._init_lock:
                if self._cache is None:
                    self._cache = ResponseCache(self.cache_dir / f"{self.backend_id}{CACHE_SUFFIX}")
        return self._cache

    def info(self) -> InfoResponse:
        if self._info is None:
            # Identity is only cacheable once it is pinned from outside;
            # discovery (no explicit backend id) always goes to the wire.
            cache = self.cache if self._backend_id is not None else None
            key = request_key(self._backend_id, "/v1/info", {}) if cache is not None else None
            body = cache.get(key) if cache is not None else None
            fetched = body is None
            if body is None:
                body = self._send("/v1/info", None)
            try:
                self._info = InfoResponse.model_validate_json(body)
            except ValidationError as exc:
                raise MalformedResponse(f"/v1/info: {exc}") from exc
            if fetched and cache is not None:
                cache.put(key, body)
        return self._info

    def generate(self, req: GenerateRequest) -> GenerateResponse:
        return self._call("/v1/generate", req, GenerateResponse)

    def mask_fill(self, req: MaskFillRequest) -> MaskFillResponse:
        return self._call("/v1/mask_fill", req, MaskFillResponse)

    def mask_fill_many(self, reqs: list[MaskFillRequest]) -> list[MaskFillResponse]:
        """Order-preserving concurrent mask-fill, bounded by the concurrency limit."""
        if not reqs:
            return []
        _ = self.cache  # materialize once before fanning out to worker threads
        if self.concurrency <= 1 or len(reqs) == 1:
            return [self.mask_fill(r) for r in reqs]
        with ThreadPoolExecutor(max_workers=min(self.concurrency, len(reqs))) as pool:
            return list(pool.map(self.mask_fill, reqs))

    def perturb(self, req: PerturbRequest) -> PerturbResponse:
        return self._call("/v1/perturb", req, PerturbResponse)

    def _call(self, endpoint: str, req: BaseModel, response_model: type[R]) -> R:
        payload = req.model_dump()
        cache = self.cache
        key = request_key(self.backend_id, endpoint, payload) if cache is not None else None
        if cache is not None:
            cached = cache.get(key)
            if cached is not None:
                return self._parse(endpoint, cached, response_model)
        body = self._send(endpoint, payload)
        parsed = self._parse(endpoint, body, response_model)
        # Only committed after full validation: malformed bodies never reach the cache.
        if cache is not None:
            cache.put(key, body)
        return parsed

    @staticmethod
    def _parse(endpoint: str, body: bytes, response_model: type[R]) -> R:
        try:
            return response_model.model_validate_json(body)
        except ValidationError as exc:
            raise MalformedResponse(f"{endpoint}: {exc}") from exc

    def _send(self, endpoint: str, payload: dict | None) -> bytes:
        attempts = self.max_retries + 1
        last_error = ""
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                self.transport_requests += 1
                if payload is None:
                    resp = self.http.get(endpoint)
                else:
                    resp = self.http.post(endpoint, json=payload)
            except httpx.HTTPError as exc:
                last_error = str(exc)
                continue
            if resp.status_code >= 500:
                last_error = f"status {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendRejected(endpoint, resp.status_code, resp.text)
            return resp.content
        raise BackendUnavailable(endpoint, attempts, last_error)

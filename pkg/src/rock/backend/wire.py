"""Wire protocol schemas and canonical serialization.

The protocol is HTTP with JSON bodies at /v1/generate, /v1/mask_fill,
/v1/perturb, and /v1/info. Field names are snake_case; the canonical
serialization used for cache keys is UTF-8 JSON with sorted keys and no
insignificant whitespace, so requests differing only in field order share
one key.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from pydantic import BaseModel, Field, field_validator

MASK_PLACEHOLDER = "<MASK>"

CONTROL_CODES = (
    "negation",
    "lexical",
    "resemantic",
    "quantifier",
    "insert",
    "restructure",
    "shuffle",
    "delete",
)


def canonical_json(payload: Any) -> bytes:
    """Bit-exact canonical serialization: sorted keys, compact separators, UTF-8."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def request_key(backend_id: str, endpoint: str, payload: dict[str, Any]) -> str:
    """Deterministic cache key for one request against one backend."""
    h = hashlib.sha256()
    h.update(backend_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(endpoint.encode("utf-8"))
    h.update(b"\x00")
    h.update(canonical_json(payload))
    return h.hexdigest()


class GenerateRequest(BaseModel):
    prompt: str
    n: int = Field(gt=0)
    max_new_tokens: int = Field(default=30, gt=0)
    temperature: float = Field(default=0.9, gt=0)
    stop: list[str] = Field(default_factory=list)
    seed: int | None = None


class GenerateResponse(BaseModel):
    completions: list[str]


class MaskFillRequest(BaseModel):
    template: str
    candidates: list[str] = Field(min_length=1)
    top_k: int = Field(gt=0)

    @field_validator("template")
    @classmethod
    def _exactly_one_mask(cls, v: str) -> str:
        if v.count(MASK_PLACEHOLDER) != 1:
            raise ValueError(f"template must contain exactly one {MASK_PLACEHOLDER}")
        return v


class MaskFillResponse(BaseModel):
    scores: dict[str, float]
    covered: dict[str, bool]


class PerturbRequest(BaseModel):
    text: str
    control_codes: list[str] = Field(min_length=1)
    n_per_code: int = Field(gt=0)

    @field_validator("control_codes")
    @classmethod
    def _known_codes(cls, v: list[str]) -> list[str]:
        unknown = [c for c in v if c not in CONTROL_CODES]
        if unknown:
            raise ValueError(f"unknown control codes: {unknown}")
        return v


class Perturbation(BaseModel):
    text: str
    code: str


class PerturbResponse(BaseModel):
    perturbations: list[Perturbation]


class InfoResponse(BaseModel):
    backend_id: str
    capabilities: list[str]
    model_fingerprint: str

"""Wire protocol, HTTP client, response cache, stub backend, and score-table ops."""

from .cache import ResponseCache
from .client import BackendClient
from .ops import fetch_pair_scores, generate_interventions, sample_covariates
from .stub import StubBackend, StubTransport, create_stub_app
from .table import TemporalScoreTable
from .wire import (
    CONTROL_CODES,
    GenerateRequest,
    GenerateResponse,
    InfoResponse,
    MaskFillRequest,
    MaskFillResponse,
    PerturbRequest,
    PerturbResponse,
    canonical_json,
)

__all__ = [
    "BackendClient",
    "CONTROL_CODES",
    "GenerateRequest",
    "GenerateResponse",
    "InfoResponse",
    "MaskFillRequest",
    "MaskFillResponse",
    "PerturbRequest",
    "PerturbResponse",
    "ResponseCache",
    "StubBackend",
    "StubTransport",
    "TemporalScoreTable",
    "canonical_json",
    "create_stub_app",
    "fetch_pair_scores",
    "generate_interventions",
    "sample_covariates",
]

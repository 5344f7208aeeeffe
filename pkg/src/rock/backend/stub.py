"""Deterministic stub backend answering protocol requests from a precedence universe.

The stub's directional mask-fill scores are arranged so that the engine's
configured symmetrization recovers the universe's law exactly: under the
as-written orientation the "after" coordinate of the prompt "A <MASK> B"
carries law(A,B) and the "before" coordinate carries law(B,A); the swapped
orientation exchanges them. Generation enumerates the covariate vocabulary of
the prompting event; perturbation serves the canned per-event map. Identical
(seed, request) pairs always produce identical responses.
"""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import httpx
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from ..scores import Orientation
from .wire import (
    GenerateRequest,
    GenerateResponse,
    InfoResponse,
    MaskFillRequest,
    MaskFillResponse,
    PerturbRequest,
    PerturbResponse,
    Perturbation,
)

if TYPE_CHECKING:
    from ..world import PrecedenceUniverse

SAMPLING_PROMPT_SUFFIX = " Before that,"
MASK_SEPARATOR = " <MASK> "

CAPABILITIES = ["generate", "mask_fill", "perturb", "temporal-finetuned"]


class StubBackend:
    def __init__(self, universe: PrecedenceUniverse, orientation: Orientation = Orientation.AS_WRITTEN):
        self.universe = universe
        self.orientation = orientation
        # orientation is part of the identity: the two emit different scores,
        # so they must never share cache entries
        suffix = "" if orientation is Orientation.AS_WRITTEN else "-swapped"
        self.backend_id = f"stub-{universe.fingerprint}{suffix}"

    def info(self) -> InfoResponse:
        return InfoResponse(
            backend_id=self.backend_id,
            capabilities=list(CAPABILITIES),
            model_fingerprint=self.universe.fingerprint,
        )

    def generate(self, req: GenerateRequest) -> GenerateResponse:
        prompt = req.prompt
        if prompt.endswith(SAMPLING_PROMPT_SUFFIX):
            prompt = prompt[: -len(SAMPLING_PROMPT_SUFFIX)]
        event = self.universe.event_by_text(prompt)
        vocab: tuple[str, ...] = ()
        if event is not None:
            vocab = self.universe.covariate_texts(event)
        if not vocab:
            return GenerateResponse(completions=[])
        completions = [" " + vocab[i % len(vocab)] for i in range(req.n)]
        return GenerateResponse(completions=completions)

    def mask_fill(self, req: MaskFillRequest) -> MaskFillResponse:
        left, _, right = req.template.partition(MASK_SEPARATOR)
        a = self.universe.event_by_text(left)
        b = self.universe.event_by_text(right)
        scores: dict[str, float] = {}
        covered: dict[str, bool] = {}
        for candidate in req.candidates:
            value, known = 0.0, False
            if a is not None and b is not None:
                forward = self.universe.law_value(a, b)
                backward = self.universe.law_value(b, a)
                if self.orientation is Orientation.AS_WRITTEN:
                    directional = {"after": forward, "before": backward}
                else:
                    directional = {"after": backward, "before": forward}
                if candidate in directional:
                    value, known = directional[candidate], True
            scores[candidate] = value
            covered[candidate] = known
        return MaskFillResponse(scores=scores, covered=covered)

    def perturb(self, req: PerturbRequest) -> PerturbResponse:
        event = self.universe.event_by_text(req.text)
        out: list[Perturbation] = []
        if event is not None:
            per_code: dict[str, int] = {}
            for ev, code in self.universe.perturbations.get(event.id, ()):
                if code not in req.control_codes:
                    continue
                if per_code.get(code, 0) >= req.n_per_code:
                    continue
                per_code[code] = per_code.get(code, 0) + 1
                out.append(Perturbation(text=ev.text, code=code))
        return PerturbResponse(perturbations=out)


def _schema_error(detail: str) -> dict:
    return {"error": {"class": "SchemaViolation", "message": detail}}


class StubTransport(httpx.BaseTransport):
    """In-process sync transport speaking the wire protocol against a StubBackend.

    Exercises the full serialize/parse path without a socket; behavior matches
    the FastAPI app (400 on schema violations, 404 on unknown endpoints).
    """

    def __init__(self, stub: StubBackend):
        self.stub = stub

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        path = request.url.path
        if request.method == "GET" and path == "/v1/info":
            return httpx.Response(200, json=self.stub.info().model_dump())
        routes = {
            "/v1/generate": (GenerateRequest, self.stub.generate),
            "/v1/mask_fill": (MaskFillRequest, self.stub.mask_fill),
            "/v1/perturb": (PerturbRequest, self.stub.perturb),
        }
        if request.method != "POST" or path not in routes:
            return httpx.Response(404, json=_schema_error(f"no such endpoint {path}"))
        model, handler = routes[path]
        try:
            req = model.model_validate(json.loads(request.read().decode("utf-8")))
        except (ValidationError, ValueError) as exc:
            return httpx.Response(400, json=_schema_error(str(exc)))
        return httpx.Response(200, json=handler(req).model_dump())


def stub_client(stub: StubBackend) -> httpx.Client:
    return httpx.Client(transport=StubTransport(stub), base_url="http://stub.invalid")


def create_stub_app(stub: StubBackend) -> FastAPI:
    """The stub served over real HTTP; same contract as the in-process transport."""
    app = FastAPI(title="rock stub backend", version="1")

    @app.exception_handler(RequestValidationError)
    async def _on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content=_schema_error(str(exc.errors())))

    @app.get("/v1/info")
    def info() -> InfoResponse:
        return stub.info()

    @app.post("/v1/generate")
    def generate(req: GenerateRequest) -> GenerateResponse:
        return stub.generate(req)

    @app.post("/v1/mask_fill")
    def mask_fill(req: MaskFillRequest) -> MaskFillResponse:
        return stub.mask_fill(req)

    @app.post("/v1/perturb")
    def perturb(req: PerturbRequest) -> PerturbResponse:
        return stub.perturb(req)

    return app

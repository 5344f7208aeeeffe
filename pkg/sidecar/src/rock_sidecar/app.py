"""The wire-protocol server: /v1/generate, /v1/mask_fill, /v1/perturb, /v1/info.

Request and response schemas are re-declared here from the documented
protocol contract (snake_case JSON, one <MASK> placeholder, the eight
perturbation control codes); schema violations answer 400, and endpoints
answer 503 if models are not loaded.
"""

from __future__ import annotations

import threading

import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, field_validator

from .config import SidecarConfig
from .models import ModelBundle

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


class ProtocolServer:
    def __init__(self, bundle: ModelBundle, config: SidecarConfig):
        self.bundle = bundle
        self.config = config
        self.backend_id = f"sidecar-{bundle.fingerprint}"
        # one model instance per role: inference is serialized (fast tokenizers
        # and autoregressive generation are not safe under concurrent borrows)
        self._inference_lock = threading.Lock()

    def info(self) -> InfoResponse:
        capabilities = ["generate", "mask_fill", "perturb"]
        if self.config.temporal_finetuned:
            capabilities.append("temporal-finetuned")
        return InfoResponse(
            backend_id=self.backend_id,
            capabilities=capabilities,
            model_fingerprint=self.bundle.fingerprint,
        )

    @torch.no_grad()
    def _complete(self, model, tokenizer, prompt: str, n: int, max_new_tokens: int, temperature: float, seed: int | None) -> list[str]:
        if seed is not None:
            torch.manual_seed(seed)
        enc = tokenizer(
            prompt,
            return_tensors="pt",
            truncation=True,
            max_length=self.config.max_input_tokens,
        ).to(self.config.device)
        outputs = model.generate(
            **enc,
            do_sample=True,
            temperature=temperature,
            max_new_tokens=max_new_tokens,
            num_return_sequences=n,
            pad_token_id=tokenizer.pad_token_id or tokenizer.eos_token_id,
        )
        prompt_len = enc["input_ids"].shape[1]
        return [
            tokenizer.decode(row[prompt_len:], skip_special_tokens=True).strip()
            for row in outputs
        ]

    def generate(self, req: GenerateRequest) -> GenerateResponse:
        with self._inference_lock:
            completions = self._complete(
                self.bundle.generator,
                self.bundle.generator_tokenizer,
                req.prompt,
                req.n,
                req.max_new_tokens,
                req.temperature,
                req.seed,
            )
        return GenerateResponse(completions=completions)

    def mask_fill(self, req: MaskFillRequest) -> MaskFillResponse:
        with self._inference_lock:
            return self._mask_fill(req)

    @torch.no_grad()
    def _mask_fill(self, req: MaskFillRequest) -> MaskFillResponse:
        tokenizer = self.bundle.masked_tokenizer
        text = req.template.replace(MASK_PLACEHOLDER, tokenizer.mask_token)
        enc = tokenizer(
            text,
            return_tensors="pt",
            truncation=True,
            max_length=self.config.max_input_tokens,
        ).to(self.config.device)
        mask_positions = (enc["input_ids"][0] == tokenizer.mask_token_id).nonzero(as_tuple=True)[0]
        scores: dict[str, float] = {c: 0.0 for c in req.candidates}
        covered: dict[str, bool] = {c: False for c in req.candidates}
        if len(mask_positions) == 1:  # a truncated-away mask leaves everything uncovered
            logits = self.bundle.masked(**enc).logits[0, mask_positions[0]]
            probs = torch.softmax(logits, dim=-1)
            k = min(req.top_k, probs.shape[-1])
            top_ids = set(torch.topk(probs, k).indices.tolist())
            for candidate in req.candidates:
                ids = tokenizer.encode(candidate, add_special_tokens=False)
                if len(ids) != 1 or ids[0] == tokenizer.unk_token_id:
                    continue  # not a scoreable single token for this vocabulary
                if ids[0] in top_ids:
                    covered[candidate] = True
                    scores[candidate] = float(probs[ids[0]])
        return MaskFillResponse(scores=scores, covered=covered)

    def perturb(self, req: PerturbRequest) -> PerturbResponse:
        out: list[Perturbation] = []
        with self._inference_lock:
            for code in req.control_codes:
                prompt = f"{req.text} [{code}]"
                completions = self._complete(
                    self.bundle.perturber,
                    self.bundle.perturber_tokenizer,
                    prompt,
                    req.n_per_code,
                    max_new_tokens=24,
                    temperature=0.9,
                    seed=None,
                )
                for completion in completions:
                    if completion:
                        out.append(Perturbation(text=completion, code=code))
        return PerturbResponse(perturbations=out)


def _error(status: int, error_class: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"class": error_class, "message": message}})


def create_app(bundle: ModelBundle | None, config: SidecarConfig) -> FastAPI:
    """Build the server app. Pass a loaded bundle: the CLI loads models before
    binding, so a load failure refuses the bind; the 503 path only covers
    embedding scenarios that construct the app before loading finishes."""
    app = FastAPI(title="rock sidecar", version="1")
    server = ProtocolServer(bundle, config) if bundle is not None else None

    @app.exception_handler(RequestValidationError)
    async def _on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "SchemaViolation", str(exc.errors()))

    def guard():
        if server is None:
            return _error(503, "ModelsLoading", "models are not loaded yet")
        return None

    @app.get("/v1/info")
    def info():
        return guard() or server.info()

    @app.post("/v1/generate")
    def generate(req: GenerateRequest):
        return guard() or server.generate(req)

    @app.post("/v1/mask_fill")
    def mask_fill(req: MaskFillRequest):
        return guard() or server.mask_fill(req)

    @app.post("/v1/perturb")
    def perturb(req: PerturbRequest):
        return guard() or server.perturb(req)

    return app

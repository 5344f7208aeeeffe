"""Request/response models for the engine service, plus conversion to core configs."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..backend.wire import CONTROL_CODES
from ..errors import ConfigError
from ..estimators import EstimatorConfig, NormalizationCombo, ScoreKind
from ..events import RoleConvention
from ..engine import RunSettings
from ..matching import MatchConfig, PNorm, QForm
from ..scores import Orientation, ScoreNormFlags

NORM_LETTERS = "DFSQCE"


def parse_norms(norms: str) -> NormalizationCombo:
    letters = norms.upper().replace(",", "").replace(" ", "")
    unknown = [c for c in letters if c not in NORM_LETTERS]
    if unknown:
        raise ConfigError(f"unknown normalization letters {unknown}; valid letters are {NORM_LETTERS}")
    if len(set(letters)) != len(letters):
        raise ConfigError(f"repeated normalization letters in {norms!r}")
    return NormalizationCombo(
        d="D" in letters,
        f="F" in letters,
        s="S" in letters,
        q="Q" in letters,
        c="C" in letters,
        e="E" in letters,
    )


class ConfigParams(BaseModel):
    """Operator-facing estimator configuration; every published-gap decision is a field."""

    kind: Literal["l1", "l2", "temporal", "unbalanced", "misspecified"] = "l2"
    p: Literal[1, 2] = 1
    epsilon: float = Field(default=0.05, ge=0)
    norms: str = ""
    q_form: Literal["as-written-reciprocal", "conditional"] = "as-written-reciprocal"
    orientation: Literal["as-written", "swapped"] = "as-written"
    role_convention: Literal["premise-as-cause", "choice-as-cause"] = "premise-as-cause"
    n_covariates: int = Field(default=100, ge=1)
    top_k: int | None = Field(default=None, ge=1)
    codes: list[str] = Field(default_factory=lambda: list(CONTROL_CODES))
    n_per_code: int = Field(default=3, ge=1)
    seed: int = 0

    def estimator_config(self) -> EstimatorConfig:
        combo = parse_norms(self.norms)
        base = EstimatorConfig(
            kind=ScoreKind(self.kind),
            match=MatchConfig(
                epsilon=self.epsilon,
                p_norm=PNorm(self.p),
                q_form=QForm(self.q_form),
            ),
            score_flags=ScoreNormFlags(orientation=Orientation(self.orientation)),
            n_covariates=self.n_covariates,
        )
        return combo.apply(base)

    def run_settings(self) -> RunSettings:
        return RunSettings(
            role_convention=RoleConvention(self.role_convention),
            codes=tuple(self.codes),
            n_per_code=self.n_per_code,
            top_k=self.top_k,
            seed=self.seed,
        )


class DatasetPayload(BaseModel):
    format: Literal["copa-xml", "glucose-d1-tsv", "suite-json", "dataset-json"]
    content: str
    name: str | None = None


class ScoreRequest(BaseModel):
    e1: str
    e2: str
    config: ConfigParams = ConfigParams()
    explain: bool = False


class ScoreResponse(BaseModel):
    value: float
    matched_count: int
    candidate_count: int
    fallback_used: bool
    explain: dict | None = None


class EvaluateRequest(BaseModel):
    dataset: DatasetPayload
    config: ConfigParams = ConfigParams()


class RunManifest(BaseModel):
    config_fingerprint: str
    dataset_hash: str
    backend_id: str
    elapsed_s: float
    transport_requests: int


class EvaluateResponse(BaseModel):
    report: dict
    csv: str
    manifest: RunManifest


class SweepRequest(BaseModel):
    dataset: DatasetPayload
    config: ConfigParams = ConfigParams()
    axis: Literal["epsilon", "covariate-count"] = "epsilon"
    grid: list[float] | None = None
    over_combos: bool = False  # threshold sweeps only: every combo's curve plus a per-point max


class SweepResponse(BaseModel):
    rows: list[dict]
    csv: str
    manifest: RunManifest


class AblateRequest(BaseModel):
    dataset: DatasetPayload
    config: ConfigParams = ConfigParams()
    kinds: list[Literal["l1", "l2", "temporal", "unbalanced", "misspecified"]] = ["l1", "l2"]


class AblateResponse(BaseModel):
    rows: dict[str, dict[str, float]]
    csv: str
    manifest: RunManifest


class VerifyPropositionRequest(BaseModel):
    worlds: int = Field(default=1000, ge=1)
    seed: int = 7
    k_max: int = Field(default=4, ge=1, le=8)
    q_form: Literal["as-written-reciprocal", "conditional"] = "as-written-reciprocal"


class VerifyPropositionResponse(BaseModel):
    worlds: int
    held: int
    all_hold: bool
    max_route_disagreement: float
    worst_slack: float


class MakeSuiteRequest(BaseModel):
    n_instances: int = Field(default=200, ge=1)
    seed: int = 42
    epsilon: float = Field(default=0.06, gt=0)
    confounding_strength: float = Field(default=1.0, ge=0, le=1)
    covariates_per_scene: int = Field(default=2, ge=2)


class MakeSuiteResponse(BaseModel):
    suite: dict
    certified_accuracy: dict[str, float]


class CacheStatsResponse(BaseModel):
    caches: list[dict]


class CacheCompactResponse(BaseModel):
    bytes_saved: int
    caches: list[dict]


class HealthResponse(BaseModel):
    status: str
    mode: str
    backend_id: str | None = None

"""The engine service: FastAPI app wrapping the core scoring package.

One process holds the backend connection (or embedded stub world), warm
response caches, and serves scoring, evaluation, sweeps, ablations, world
verification, and suite generation over HTTP. The CLI talks to this app, in
process by default or remotely via a base URL.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..backend.cache import ResponseCache
from ..backend.client import BackendClient
from ..backend.stub import StubBackend, stub_client
from ..datasets import Dataset, dataset_from_payload, dataset_hash, parse_copa_xml, parse_glucose_tsv
from ..engine import ScoringSession, derive_seed, explain_query
from ..errors import ConfigError, DataError, RockError
from ..estimators import ScoreKind
from ..events import CausalQuery, Event
from ..harness import (
    SweepAxis,
    ablate,
    ablate_to_csv,
    default_epsilon_grid,
    evaluate,
    report_to_payload,
    report_to_csv,
    sweep,
    sweep_combo_curves,
    sweep_to_csv,
)
from ..scores import Orientation
from ..suite import ConfoundedSuite, SuiteSpec, build_confounded_suite
from ..world import PrecedenceUniverse, random_world, verify_proposition
from ..matching import QForm
from .schemas import (
    AblateRequest,
    AblateResponse,
    CacheCompactResponse,
    CacheStatsResponse,
    ConfigParams,
    DatasetPayload,
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    MakeSuiteRequest,
    MakeSuiteResponse,
    RunManifest,
    ScoreRequest,
    ScoreResponse,
    SweepRequest,
    SweepResponse,
    VerifyPropositionRequest,
    VerifyPropositionResponse,
)

_STATUS_BY_EXIT = {2: 400, 3: 502, 4: 422}


@dataclass(frozen=True)
class ServiceSettings:
    """How the service reaches a model backend.

    At most one of ``backend_url`` (remote protocol server) or ``world_path``
    (embedded deterministic stub) may be set; with neither, only the
    backend-free endpoints (verification, suite generation, cache admin)
    are usable.
    """

    backend_url: str | None = None
    world_path: str | None = None
    cache_dir: str | None = None

    def __post_init__(self):
        if self.backend_url and self.world_path:
            raise ConfigError("backend_url and world_path are mutually exclusive")


def load_universe(path: str | Path) -> PrecedenceUniverse:
    """Accept either a world file or a suite file (its universe is used)."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read world file {path}: {exc}") from exc
    if "universe" in payload:
        return ConfoundedSuite.from_payload(payload).universe
    return PrecedenceUniverse.from_payload(payload)


def _parse_dataset(payload: DatasetPayload) -> Dataset:
    if payload.format == "copa-xml":
        return parse_copa_xml(payload.content, name=payload.name or "copa")
    if payload.format == "glucose-d1-tsv":
        return parse_glucose_tsv(payload.content, name=payload.name or "glucose-d1")
    if payload.format == "suite-json":
        suite = ConfoundedSuite.from_payload(json.loads(payload.content))
        return Dataset(name=payload.name or "confounded-suite", instances=tuple(suite.instances))
    return dataset_from_payload(json.loads(payload.content))


def create_app(settings: ServiceSettings) -> FastAPI:
    app = FastAPI(title="rock engine service", version="1")
    universe = load_universe(settings.world_path) if settings.world_path else None
    cache_pool: dict[str, ResponseCache] = {}

    def pooled_cache(backend_id: str) -> ResponseCache | None:
        if not settings.cache_dir:
            return None
        if backend_id not in cache_pool:
            cache_pool[backend_id] = ResponseCache(
                Path(settings.cache_dir) / f"{backend_id}.rockcache"
            )
        return cache_pool[backend_id]

    @app.exception_handler(RockError)
    async def _on_rock_error(request: Request, exc: RockError):
        status = _STATUS_BY_EXIT.get(exc.exit_code, 500)
        return JSONResponse(
            status_code=status,
            content={"error": {"class": exc.error_class, "message": str(exc), "exit_code": exc.exit_code}},
        )

    @app.exception_handler(RequestValidationError)
    async def _on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": {"class": "SchemaViolation", "message": str(exc.errors()), "exit_code": 2}},
        )

    def make_session(config: ConfigParams) -> ScoringSession:
        # config construction first: lattice violations must surface before
        # any client, cache, or backend work
        cfg = config.estimator_config()
        run = config.run_settings()
        if universe is not None:
            stub = StubBackend(universe, orientation=Orientation(config.orientation))
            client = BackendClient(
                stub_client(stub),
                cache_dir=settings.cache_dir,
                backend_id=stub.backend_id,
                cache=pooled_cache(stub.backend_id),
            )
        elif settings.backend_url:
            client = BackendClient.for_url(settings.backend_url, cache_dir=settings.cache_dir)
        else:
            raise ConfigError("this endpoint needs a backend: configure a backend URL or a world file")
        return ScoringSession(client, cfg, run)

    def manifest_for(session: ScoringSession, dataset_hash: str, elapsed: float) -> RunManifest:
        return RunManifest(
            config_fingerprint="",
            dataset_hash=dataset_hash,
            backend_id=session.client.backend_id,
            elapsed_s=elapsed,
            transport_requests=session.client.transport_requests,
        )

    @app.get("/api/health")
    def health() -> HealthResponse:
        if universe is not None:
            mode = "stub-world"
        elif settings.backend_url:
            mode = "remote-backend"
        else:
            mode = "no-backend"
        return HealthResponse(
            status="ok",
            mode=mode,
            backend_id=f"stub-{universe.fingerprint}" if universe is not None else None,
        )

    @app.post("/api/score")
    def score(req: ScoreRequest) -> ScoreResponse:
        session = make_session(req.config)
        query = CausalQuery(Event(req.e1), Event(req.e2))
        if req.explain:
            payload = explain_query(session, query)
            s = payload["score"]
            return ScoreResponse(
                value=s["value"],
                matched_count=s["matched_count"],
                candidate_count=s["candidate_count"],
                fallback_used=s["fallback_used"],
                explain=payload,
            )
        result, _, _ = session.score_query(query)
        return ScoreResponse(
            value=result.value,
            matched_count=result.matched_count,
            candidate_count=result.candidate_count,
            fallback_used=result.fallback_used,
        )

    @app.post("/api/evaluate")
    def evaluate_endpoint(req: EvaluateRequest) -> EvaluateResponse:
        session = make_session(req.config)
        dataset = _parse_dataset(req.dataset)
        started = time.perf_counter()
        report = evaluate(session, dataset)
        manifest = manifest_for(session, report.dataset_hash, time.perf_counter() - started)
        manifest.config_fingerprint = report.config_fingerprint
        return EvaluateResponse(report=report_to_payload(report), csv=report_to_csv(report), manifest=manifest)

    @app.post("/api/sweep")
    def sweep_endpoint(req: SweepRequest) -> SweepResponse:
        if req.axis == SweepAxis.COVARIATE_COUNT and not req.grid:
            raise ConfigError("covariate-count sweeps need an explicit grid")
        if req.over_combos and req.axis != SweepAxis.EPSILON:
            raise ConfigError("combo curves are only defined for threshold sweeps")
        grid = req.grid if req.grid else default_epsilon_grid()
        session = make_session(req.config)
        dataset = _parse_dataset(req.dataset)
        started = time.perf_counter()
        if req.over_combos:
            curve_rows = sweep_combo_curves(session, dataset, grid)
            elapsed = time.perf_counter() - started
            rows = [
                {"grid_point": point, "combo": combo, "accuracy": acc}
                for point, combo, acc in curve_rows
            ]
            csv_lines = ["grid_point,combo,accuracy"]
            csv_lines += [f"{p!r},{combo},{acc!r}" for p, combo, acc in curve_rows]
            manifest = manifest_for(session, dataset_hash(dataset), elapsed)
            return SweepResponse(rows=rows, csv="\n".join(csv_lines) + "\n", manifest=manifest)
        results = sweep(session, dataset, req.axis, grid)
        elapsed = time.perf_counter() - started
        rows = [
            {"grid_point": point, "accuracy": rep.accuracy, "config_fingerprint": rep.config_fingerprint}
            for point, rep in results
        ]
        manifest = manifest_for(session, results[0][1].dataset_hash, elapsed)
        manifest.config_fingerprint = results[0][1].config_fingerprint
        return SweepResponse(rows=rows, csv=sweep_to_csv(results), manifest=manifest)

    @app.post("/api/ablate")
    def ablate_endpoint(req: AblateRequest) -> AblateResponse:
        session = make_session(req.config)
        dataset = _parse_dataset(req.dataset)
        started = time.perf_counter()
        rows = ablate(session, dataset, kinds=tuple(ScoreKind(k) for k in req.kinds))
        elapsed = time.perf_counter() - started
        manifest = manifest_for(session, dataset_hash(dataset), elapsed)
        return AblateResponse(rows=rows, csv=ablate_to_csv(rows), manifest=manifest)

    @app.post("/api/verify-proposition")
    def verify_endpoint(req: VerifyPropositionRequest) -> VerifyPropositionResponse:
        held = 0
        max_disagreement = 0.0
        worst_slack = float("-inf")
        q_form = QForm(req.q_form)
        for i in range(req.worlds):
            world = random_world(derive_seed(req.seed, f"world:{i}"), k=(i % req.k_max) + 1)
            report = verify_proposition(world, q_form=q_form)
            held += report.holds
            max_disagreement = max(max_disagreement, abs(report.lhs - report.lhs_by_total_variance))
            worst_slack = max(worst_slack, report.lhs - report.bound)
        return VerifyPropositionResponse(
            worlds=req.worlds,
            held=held,
            all_hold=held == req.worlds,
            max_route_disagreement=max_disagreement,
            worst_slack=worst_slack,
        )

    @app.post("/api/make-suite")
    def make_suite_endpoint(req: MakeSuiteRequest) -> MakeSuiteResponse:
        spec = SuiteSpec(
            n_instances=req.n_instances,
            epsilon=req.epsilon,
            confounding_strength=req.confounding_strength,
            covariates_per_scene=req.covariates_per_scene,
        )
        suite = build_confounded_suite(spec, seed=req.seed)
        return MakeSuiteResponse(suite=suite.to_payload(), certified_accuracy=suite.certified_accuracy)

    def _cache_paths() -> list[Path]:
        if not settings.cache_dir:
            return []
        return sorted(Path(settings.cache_dir).glob("*.rockcache"))

    @app.get("/api/cache/stats")
    def cache_stats() -> CacheStatsResponse:
        return CacheStatsResponse(caches=[ResponseCache(p).stats() for p in _cache_paths()])

    @app.post("/api/cache/compact")
    def cache_compact() -> CacheCompactResponse:
        saved = 0
        stats = []
        for path in _cache_paths():
            cache = ResponseCache(path)
            saved += cache.compact()
            stats.append(cache.stats())
        return CacheCompactResponse(bytes_saved=saved, caches=stats)

    return app

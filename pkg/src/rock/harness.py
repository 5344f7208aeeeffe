"""Accuracy evaluation, parameter sweeps, ablation grids, and report emission."""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass

from .backend.wire import canonical_json
from .datasets import Dataset, dataset_hash
from .engine import PreparedInstance, RunSettings, ScoringSession
from .estimators import EstimatorConfig, ScoreKind, enumerate_combos

EPSILON_GRID_POINTS = 50
EPSILON_GRID_LO = 1e-4
EPSILON_GRID_HI = 1.0


@dataclass(frozen=True)
class PerInstanceRecord:
    source_id: str
    chosen: str
    correct: bool
    tie: bool
    score_a: float
    score_b: float
    matched_a: int
    candidates_a: int
    fallback_a: bool
    matched_b: int
    candidates_b: int
    fallback_b: bool


@dataclass(frozen=True)
class EvalReport:
    dataset_name: str
    dataset_hash: str
    backend_id: str
    config_fingerprint: str
    n: int
    accuracy: float
    random_baseline_std: float
    per_instance: tuple[PerInstanceRecord, ...]


def random_baseline_std(n: int) -> float:
    """Standard deviation of a fair-coin accuracy over n instances."""
    return math.sqrt(0.25 / n)


def config_payload(cfg: EstimatorConfig, settings: RunSettings) -> dict:
    return {
        "kind": cfg.kind.value,
        "epsilon": cfg.match.epsilon,
        "p_norm": cfg.effective_match().p_norm.value,
        "mode": cfg.match.mode.value,
        "q_normalized": cfg.match.q_normalized,
        "f_prefilter": cfg.match.f_prefilter,
        "q_form": cfg.match.q_form.value,
        "s_enabled": cfg.score_flags.s_enabled,
        "c_enabled": cfg.score_flags.c_enabled,
        "e_enabled": cfg.score_flags.e_enabled,
        "orientation": cfg.score_flags.orientation.value,
        "n_covariates": cfg.n_covariates,
        "role_convention": settings.role_convention.value,
        "codes": list(settings.codes),
        "n_per_code": settings.n_per_code,
        "top_k": settings.top_k,
        "seed": settings.seed,
    }


def config_fingerprint(cfg: EstimatorConfig, settings: RunSettings, backend_id: str) -> str:
    payload = config_payload(cfg, settings)
    payload["backend_id"] = backend_id
    return hashlib.sha256(canonical_json(payload)).hexdigest()[:16]


def prepare_dataset(
    session: ScoringSession, dataset: Dataset, *, include_null_pairs: bool | None = None
) -> list[PreparedInstance]:
    """Run all backend-facing work once; the result is re-scorable under any config."""
    return [
        session.prepare_instance(inst, include_null_pairs=include_null_pairs)
        for inst in dataset.instances
    ]


def evaluate_prepared(
    session: ScoringSession,
    dataset: Dataset,
    prepared: list[PreparedInstance],
    cfg: EstimatorConfig | None = None,
) -> EvalReport:
    cfg = cfg or session.cfg
    records = []
    n_correct = 0
    for prep in prepared:
        scored = session.score_instance(prep, cfg)
        a, b = scored.outcome.scores
        records.append(
            PerInstanceRecord(
                source_id=scored.source_id,
                chosen=scored.outcome.choice.value,
                correct=scored.correct,
                tie=scored.outcome.tie,
                score_a=a.value,
                score_b=b.value,
                matched_a=a.matched_count,
                candidates_a=a.candidate_count,
                fallback_a=a.fallback_used,
                matched_b=b.matched_count,
                candidates_b=b.candidate_count,
                fallback_b=b.fallback_used,
            )
        )
        n_correct += scored.correct
    n = len(records)
    return EvalReport(
        dataset_name=dataset.name,
        dataset_hash=dataset_hash(dataset),
        backend_id=session.client.backend_id,
        config_fingerprint=config_fingerprint(cfg, session.settings, session.client.backend_id),
        n=n,
        accuracy=n_correct / n,
        random_baseline_std=random_baseline_std(n),
        per_instance=tuple(records),
    )


def evaluate(session: ScoringSession, dataset: Dataset, cfg: EstimatorConfig | None = None) -> EvalReport:
    """Score every instance of the dataset and tally accuracy.

    A backend failure on any instance aborts the run: accuracy over a silently
    shrunken denominator would not be comparable across configs.
    """
    prepared = prepare_dataset(session, dataset)
    return evaluate_prepared(session, dataset, prepared, cfg)


# -- report emission --------------------------------------------------------------


def report_to_payload(report: EvalReport) -> dict:
    return {
        "dataset_name": report.dataset_name,
        "dataset_hash": report.dataset_hash,
        "backend_id": report.backend_id,
        "config_fingerprint": report.config_fingerprint,
        "n": report.n,
        "accuracy": report.accuracy,
        "random_baseline_std": report.random_baseline_std,
        "per_instance": [dataclasses.asdict(r) for r in report.per_instance],
    }


def report_to_json(report: EvalReport) -> bytes:
    """Canonical bytes; two runs against the same frozen cache compare equal."""
    return canonical_json(report_to_payload(report))


REPORT_CSV_HEADER = (
    "source_id,chosen,correct,tie,score_a,score_b,"
    "matched_a,candidates_a,fallback_a,matched_b,candidates_b,fallback_b"
)


def report_to_csv(report: EvalReport) -> str:
    lines = [REPORT_CSV_HEADER]
    for r in report.per_instance:
        lines.append(
            f"{r.source_id},{r.chosen},{int(r.correct)},{int(r.tie)},{r.score_a!r},{r.score_b!r},"
            f"{r.matched_a},{r.candidates_a},{int(r.fallback_a)},"
            f"{r.matched_b},{r.candidates_b},{int(r.fallback_b)}"
        )
    return "\n".join(lines) + "\n"


# -- sweeps ------------------------------------------------------------------------


def default_epsilon_grid() -> list[float]:
    """{0} plus 50 log-spaced thresholds spanning [1e-4, 1]."""
    span = math.log10(EPSILON_GRID_HI) - math.log10(EPSILON_GRID_LO)
    points = [
        10 ** (math.log10(EPSILON_GRID_LO) + span * i / (EPSILON_GRID_POINTS - 1))
        for i in range(EPSILON_GRID_POINTS)
    ]
    return [0.0] + points


class SweepAxis:
    EPSILON = "epsilon"
    COVARIATE_COUNT = "covariate-count"


def _cfg_at(cfg: EstimatorConfig, axis: str, point: float) -> EstimatorConfig:
    if axis == SweepAxis.EPSILON:
        return dataclasses.replace(cfg, match=dataclasses.replace(cfg.match, epsilon=point))
    if axis == SweepAxis.COVARIATE_COUNT:
        return dataclasses.replace(cfg, n_covariates=int(point))
    raise ValueError(f"unknown sweep axis {axis!r}")


def sweep(
    session: ScoringSession,
    dataset: Dataset,
    axis: str,
    grid: list[float],
    prepared: list[PreparedInstance] | None = None,
) -> list[tuple[float, EvalReport]]:
    """One evaluation per grid point against the same frozen score tables.

    Threshold sweeps re-match only; covariate-count sweeps keep prefixes of
    the sampled order. The grid must be non-empty and strictly increasing.
    """
    if not grid:
        raise ValueError("sweep grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("sweep grid must be strictly increasing")
    if prepared is None:
        prepared = prepare_dataset(session, dataset)
    return [
        (point, evaluate_prepared(session, dataset, prepared, _cfg_at(session.cfg, axis, point)))
        for point in grid
    ]


def sweep_to_csv(results: list[tuple[float, EvalReport]]) -> str:
    lines = ["grid_point,accuracy,std_band"]
    for point, report in results:
        band = math.sqrt(report.accuracy * (1.0 - report.accuracy) / report.n)
        lines.append(f"{point!r},{report.accuracy!r},{band!r}")
    return "\n".join(lines) + "\n"


def sweep_combo_curves(
    session: ScoringSession,
    dataset: Dataset,
    grid: list[float],
    prepared: list[PreparedInstance] | None = None,
) -> list[tuple[float, str, float]]:
    """Every combo's accuracy curve over the threshold grid plus a per-point
    max row (labeled "max"), covering both readings of a best-over-choices plot."""
    if prepared is None:
        prepared = prepare_dataset(session, dataset, include_null_pairs=True)
    rows: list[tuple[float, str, float]] = []
    for point in grid:
        best = -1.0
        for combo in enumerate_combos():
            cfg = _cfg_at(combo.apply(session.cfg), SweepAxis.EPSILON, point)
            report = evaluate_prepared(session, dataset, prepared, cfg)
            rows.append((point, combo.label, report.accuracy))
            best = max(best, report.accuracy)
        rows.append((point, "max", best))
    return rows


# -- ablation grid ------------------------------------------------------------------


def ablate(
    session: ScoringSession,
    dataset: Dataset,
    kinds: tuple[ScoreKind, ...] = (ScoreKind.BALANCED_L1, ScoreKind.BALANCED_L2),
    prepared: list[PreparedInstance] | None = None,
) -> dict[str, dict[str, float]]:
    """Accuracy per (normalization combo x score kind); exactly 30 rows.

    The prepared tables include null-event pairs so score normalization is
    servable for every combo.
    """
    if prepared is None:
        prepared = prepare_dataset(session, dataset, include_null_pairs=True)
    rows: dict[str, dict[str, float]] = {}
    for combo in enumerate_combos():
        row = {}
        for kind in kinds:
            cfg = dataclasses.replace(combo.apply(session.cfg), kind=kind)
            row[kind.value] = evaluate_prepared(session, dataset, prepared, cfg).accuracy
        rows[combo.label] = row
    return rows


def ablate_to_csv(rows: dict[str, dict[str, float]]) -> str:
    kinds = list(next(iter(rows.values())))
    best = {k: max(r[k] for r in rows.values()) for k in kinds}
    worst = {k: min(r[k] for r in rows.values()) for k in kinds}
    header = "combo," + ",".join(f"{k},{k}_flag" for k in kinds)
    lines = [header]
    for label, row in rows.items():
        cells = [label]
        for k in kinds:
            flag = "best" if row[k] == best[k] else ("worst" if row[k] == worst[k] else "")
            cells.append(f"{row[k]!r},{flag}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"

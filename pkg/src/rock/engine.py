"""End-to-end scoring pipeline: sample covariates, generate interventions,
fetch the score table, match, difference. Binds the protocol client to the
estimator stack."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

from .backend.client import BackendClient
from .backend.ops import fetch_pair_scores, generate_interventions, sample_covariates
from .backend.table import TemporalScoreTable
from .backend.wire import CONTROL_CODES
from .errors import EmptyAfterFilter, EmptyCovariates
from .estimators import BALANCED_KINDS, ChoiceOutcome, EstimatorConfig, ScoreKind, choose, delta_score
from .events import BenchmarkInstance, CausalQuery, Choice, RoleConvention, ScoreResult, query_roles
from .matching import CovariateSet, InterventionSet, MatchOutcome, prefilter_covariates

FINETUNED_CAPABILITY = "temporal-finetuned"
DEFAULT_TOP_K_FINETUNED = 5
DEFAULT_TOP_K_PRETRAINED = 30


@dataclass(frozen=True)
class RunSettings:
    """Run-level knobs that sit outside the estimator config."""

    role_convention: RoleConvention = RoleConvention.PREMISE_AS_CAUSE
    codes: tuple[str, ...] = CONTROL_CODES
    n_per_code: int = 3
    top_k: int | None = None  # resolved from backend capabilities when unset
    seed: int = 0


def derive_seed(run_seed: int, tag: str) -> int:
    """Stable per-subtask seed; independent of evaluation order."""
    digest = hashlib.sha256(f"{run_seed}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class PreparedQuery:
    """Frozen inputs for scoring one (cause, effect) query: re-scorable under
    different estimator configs without new backend calls."""

    query: CausalQuery
    covariates: CovariateSet
    interventions: InterventionSet
    table: TemporalScoreTable


@dataclass
class PreparedInstance:
    instance: BenchmarkInstance
    by_choice: dict[Choice, PreparedQuery]


@dataclass
class InstanceScore:
    source_id: str
    outcome: ChoiceOutcome
    correct: bool
    match_outcomes: dict[Choice, MatchOutcome | None]


class ScoringSession:
    def __init__(self, client: BackendClient, cfg: EstimatorConfig, settings: RunSettings = RunSettings()):
        self.client = client
        self.cfg = cfg
        self.settings = settings

    @property
    def top_k(self) -> int:
        if self.settings.top_k is not None:
            return self.settings.top_k
        caps = self.client.info().capabilities
        return DEFAULT_TOP_K_FINETUNED if FINETUNED_CAPABILITY in caps else DEFAULT_TOP_K_PRETRAINED

    def prepare_query(self, query: CausalQuery, *, include_null_pairs: bool | None = None) -> PreparedQuery:
        e1, e2 = query.cause_candidate, query.effect_candidate
        covariates = sample_covariates(
            e1,
            self.cfg.n_covariates,
            self.client,
            seed=derive_seed(self.settings.seed, f"sample:{e1.id}"),
        )
        interventions = generate_interventions(e1, self.settings.codes, self.settings.n_per_code, self.client)
        pairs = [(x, e1) for x in covariates.events]
        pairs += [(x, a) for x in covariates.events for a in interventions.events]
        pairs += [(x, e2) for x in covariates.events]
        pairs += [(a, e2) for a in interventions.events]
        pairs.append((e1, e2))
        if include_null_pairs is None:
            include_null_pairs = self.cfg.score_flags.s_enabled
        table = fetch_pair_scores(
            pairs, self.client, top_k=self.top_k, include_null_pairs=include_null_pairs
        )
        return PreparedQuery(query=query, covariates=covariates, interventions=interventions, table=table)

    def score_prepared(
        self, prep: PreparedQuery, cfg: EstimatorConfig | None = None
    ) -> tuple[ScoreResult, MatchOutcome | None, CovariateSet]:
        """Score a prepared query, optionally under an overriding config.

        Matching-side failures (no covariates sampled, or the pre-filter
        removed all of them) degrade to the temporal fallback so evaluation
        loops stay total; the score is flagged accordingly.
        """
        cfg = cfg or self.cfg
        x_set = prep.covariates
        if cfg.n_covariates < len(x_set):
            x_set = dataclasses.replace(x_set, events=x_set.events[: cfg.n_covariates])
        needs_covariates = cfg.kind in BALANCED_KINDS or cfg.kind is ScoreKind.MISSPECIFIED
        try:
            if cfg.match.f_prefilter and needs_covariates:
                x_set = prefilter_covariates(x_set, prep.query.cause_candidate, prep.table, cfg.match, cfg.score_flags)
            if needs_covariates and len(x_set) == 0:
                raise EmptyCovariates("no covariates available for matching")
            result, outcome = delta_score(prep.query, x_set, prep.interventions, prep.table, cfg)
            return result, outcome, x_set
        except (EmptyCovariates, EmptyAfterFilter):
            fallback_cfg = dataclasses.replace(cfg, kind=ScoreKind.TEMPORAL)
            temporal, _ = delta_score(prep.query, x_set, prep.interventions, prep.table, fallback_cfg)
            result = ScoreResult(
                value=temporal.value,
                matched_count=0,
                candidate_count=len(prep.interventions),
                fallback_used=True,
            )
            return result, None, x_set

    def score_query(self, query: CausalQuery) -> tuple[ScoreResult, PreparedQuery, MatchOutcome | None]:
        prep = self.prepare_query(query)
        result, outcome, _ = self.score_prepared(prep)
        return result, prep, outcome

    def prepare_instance(self, instance: BenchmarkInstance, *, include_null_pairs: bool | None = None) -> PreparedInstance:
        by_choice = {}
        for which in Choice:
            query = query_roles(instance, which, self.settings.role_convention)
            by_choice[which] = self.prepare_query(query, include_null_pairs=include_null_pairs)
        return PreparedInstance(instance=instance, by_choice=by_choice)

    def score_instance(self, prepared: PreparedInstance, cfg: EstimatorConfig | None = None) -> InstanceScore:
        results = {}
        outcomes = {}
        for which in Choice:
            result, outcome, _ = self.score_prepared(prepared.by_choice[which], cfg)
            results[which] = result
            outcomes[which] = outcome
        decision = choose(results[Choice.CHOICE_A], results[Choice.CHOICE_B])
        return InstanceScore(
            source_id=prepared.instance.source_id,
            outcome=decision,
            correct=decision.choice is prepared.instance.label,
            match_outcomes=outcomes,
        )


def explain_query(
    session: ScoringSession, query: CausalQuery
) -> dict:
    """Structured explain payload: covariates, interventions with distances and
    matched flags, per-intervention precedence against the effect, and the score."""
    from .scores import precedence

    prep = session.prepare_query(query)
    result, outcome, x_used = session.score_prepared(prep)
    flags = session.cfg.score_flags
    e2 = query.effect_candidate
    interventions = []
    for idx, a in enumerate(prep.interventions.events):
        distance = outcome.distances[idx] if outcome is not None else None
        matched = a in outcome.kept.events if outcome is not None else None
        interventions.append(
            {
                "text": a.text,
                "distance": distance,
                "matched": matched,
                "precedes_effect": precedence(prep.table, a, e2, flags).value,
            }
        )
    return {
        "cause_candidate": query.cause_candidate.text,
        "effect_candidate": query.effect_candidate.text,
        "treatment_precedes_effect": precedence(prep.table, query.cause_candidate, e2, flags).value,
        "covariates": [x.text for x in x_used.events],
        "interventions": interventions,
        "score": {
            "value": result.value,
            "matched_count": result.matched_count,
            "candidate_count": result.candidate_count,
            "fallback_used": result.fallback_used,
        },
    }

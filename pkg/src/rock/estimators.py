"""Score variants over a frozen score table, the normalization lattice, and
choice selection for benchmark instances."""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass
from enum import Enum

from .backend.table import TemporalScoreTable
from .errors import LatticeError
from .events import CausalQuery, Choice, Event, ScoreResult
from .matching import (
    CovariateSet,
    InterventionSet,
    MatchConfig,
    MatchMode,
    MatchOutcome,
    PNorm,
    matched_set,
)
from .scores import ScoreNormFlags, precedence


class ScoreKind(Enum):
    BALANCED_L1 = "l1"
    BALANCED_L2 = "l2"
    TEMPORAL = "temporal"
    UNBALANCED = "unbalanced"
    MISSPECIFIED = "misspecified"


BALANCED_KINDS = (ScoreKind.BALANCED_L1, ScoreKind.BALANCED_L2)


def validate_lattice(mode: MatchMode, s: bool, q: bool, c: bool, e: bool) -> None:
    """Enforce the exclusion rules of the normalization lattice."""
    if mode is MatchMode.DIRECT and s:
        raise LatticeError("rule violated: D excludes S (direct matching disables score normalization)")
    if mode is MatchMode.DIRECT and q:
        raise LatticeError("rule violated: D excludes Q (direct matching disables propensity normalization)")
    if c and e:
        raise LatticeError("rule violated: C excludes E (co-occurrence stabilization disables estimand normalization)")


@dataclass(frozen=True)
class EstimatorConfig:
    kind: ScoreKind = ScoreKind.BALANCED_L2
    match: MatchConfig = MatchConfig()
    score_flags: ScoreNormFlags = ScoreNormFlags()
    n_covariates: int = 100

    def __post_init__(self):
        if self.n_covariates < 1:
            raise ValueError("n_covariates must be positive")
        validate_lattice(
            self.match.mode,
            self.score_flags.s_enabled,
            self.match.q_normalized,
            self.score_flags.c_enabled,
            self.score_flags.e_enabled,
        )

    def effective_match(self) -> MatchConfig:
        """The match config with the norm implied by the score kind pinned."""
        if self.kind is ScoreKind.BALANCED_L1:
            return dataclasses.replace(self.match, p_norm=PNorm.L1)
        if self.kind is ScoreKind.BALANCED_L2:
            return dataclasses.replace(self.match, p_norm=PNorm.L2)
        return self.match


@dataclass(frozen=True)
class NormalizationCombo:
    """One point of the D/F/S/Q/C/E lattice."""

    d: bool = False
    f: bool = False
    s: bool = False
    q: bool = False
    c: bool = False
    e: bool = False

    @property
    def is_valid(self) -> bool:
        return not (self.d and (self.s or self.q)) and not (self.c and self.e)

    @property
    def label(self) -> str:
        letters = "".join(
            letter for letter, on in zip("DFSQCE", (self.d, self.f, self.s, self.q, self.c, self.e)) if on
        )
        return letters or "none"

    def apply(self, base: EstimatorConfig) -> EstimatorConfig:
        """Overlay this combo's flags on a base config (kind and epsilon survive)."""
        match = dataclasses.replace(
            base.match,
            mode=MatchMode.DIRECT if self.d else MatchMode.PROPENSITY,
            f_prefilter=self.f,
            q_normalized=self.q,
        )
        flags = dataclasses.replace(
            base.score_flags, s_enabled=self.s, c_enabled=self.c, e_enabled=self.e
        )
        return dataclasses.replace(base, match=match, score_flags=flags)


def enumerate_combos() -> list[NormalizationCombo]:
    """All valid combos in lexicographic (D, F, S, Q, C, E) order; exactly 30."""
    combos = [
        NormalizationCombo(d, f, s, q, c, e)
        for d, f, s, q, c, e in itertools.product((False, True), repeat=6)
    ]
    return [cb for cb in combos if cb.is_valid]


def _estimand_f(table: TemporalScoreTable, a: Event, b: Event, flags: ScoreNormFlags) -> float:
    # Estimand-side estimates take the full pipeline, including E.
    return precedence(table, a, b, flags).value


def _score_against(
    f_e1_e2: float,
    kept: tuple[Event, ...],
    e2: Event,
    table: TemporalScoreTable,
    flags: ScoreNormFlags,
    candidate_count: int,
) -> ScoreResult:
    """Shared difference-of-means path; every kind with a mean term funnels here
    so limit identities hold bit-for-bit."""
    if not kept:
        return ScoreResult(
            value=f_e1_e2, matched_count=0, candidate_count=candidate_count, fallback_used=True
        )
    mean_term = math.fsum(_estimand_f(table, a, e2, flags) for a in kept) / len(kept)
    return ScoreResult(
        value=f_e1_e2 - mean_term,
        matched_count=len(kept),
        candidate_count=candidate_count,
        fallback_used=False,
    )


def delta_score(
    query: CausalQuery,
    x_set: CovariateSet,
    a_set: InterventionSet,
    table: TemporalScoreTable,
    cfg: EstimatorConfig,
) -> tuple[ScoreResult, MatchOutcome | None]:
    """Compute the configured score variant for one (cause, effect) query.

    Returns the score plus the match outcome when matching ran (for explain
    output). The covariate set is expected pre-filtered by the caller when F
    is enabled. An empty matched set falls back to the plain temporal score
    with ``fallback_used`` set.
    """
    e1, e2 = query.cause_candidate, query.effect_candidate
    flags = cfg.score_flags
    f_e1_e2 = _estimand_f(table, e1, e2, flags)

    if cfg.kind is ScoreKind.TEMPORAL:
        return ScoreResult(f_e1_e2, 0, 0, False), None
    if cfg.kind is ScoreKind.UNBALANCED:
        return _score_against(f_e1_e2, a_set.events, e2, table, flags, len(a_set)), None
    if cfg.kind is ScoreKind.MISSPECIFIED:
        return _score_against(f_e1_e2, x_set.events, e2, table, flags, len(x_set)), None

    outcome = matched_set(a_set, e1, x_set, table, cfg.effective_match(), flags)
    return _score_against(f_e1_e2, outcome.kept.events, e2, table, flags, len(a_set)), outcome


@dataclass(frozen=True)
class ChoiceOutcome:
    choice: Choice
    scores: tuple[ScoreResult, ScoreResult]
    tie: bool


def choose(score_a: ScoreResult, score_b: ScoreResult) -> ChoiceOutcome:
    """Pick the alternative with the strictly higher score; exact ties go to the
    first alternative with the tie flag raised."""
    if score_b.value > score_a.value:
        return ChoiceOutcome(Choice.CHOICE_B, (score_a, score_b), tie=False)
    return ChoiceOutcome(Choice.CHOICE_A, (score_a, score_b), tie=score_a.value == score_b.value)

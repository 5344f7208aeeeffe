"""Temporal-propensity vectors and Lp-threshold selection of comparable interventions."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum

from .backend.table import TemporalScoreTable
from .errors import EmptyAfterFilter, EmptyCovariates
from .events import Event
from .scores import DENOMINATOR_FLOOR, ScoreNormFlags, precedence


class CovariateOrigin(Enum):
    SAMPLED = "sampled"
    INJECTED = "injected"


@dataclass(frozen=True)
class CovariateSet:
    """The ordered covariate events used for balancing. Order is load-bearing
    only for coordinate alignment; matching itself is permutation-invariant."""

    events: tuple[Event, ...]
    origin: CovariateOrigin = CovariateOrigin.INJECTED

    def __post_init__(self):
        ids = [e.id for e in self.events]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate covariate events")

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class InterventionSet:
    """Candidate counterfactual replacements of the treatment event."""

    events: tuple[Event, ...]

    def __post_init__(self):
        ids = [e.id for e in self.events]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate intervention events")

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class PropensityVector:
    """Matching signature of one event: one coordinate per covariate, in set order."""

    coords: tuple[float, ...]
    subject: str

    def __post_init__(self):
        for c in self.coords:
            if not math.isfinite(c) or c < 0:
                raise ValueError(f"propensity coordinate must be finite and >= 0, got {c}")


class PNorm(Enum):
    L1 = 1
    L2 = 2


class MatchMode(Enum):
    PROPENSITY = "propensity"
    DIRECT = "direct"


class QForm(Enum):
    """Shape of a propensity coordinate.

    AS_WRITTEN_RECIPROCAL is f(X, treatment) / f(X, subject), the published
    implementation equation; CONDITIONAL is its reciprocal, the literal
    conditional probability of the subject given the covariate.
    """

    AS_WRITTEN_RECIPROCAL = "as-written-reciprocal"
    CONDITIONAL = "conditional"


@dataclass(frozen=True)
class MatchConfig:
    epsilon: float = 0.05
    p_norm: PNorm = PNorm.L1
    mode: MatchMode = MatchMode.PROPENSITY
    q_normalized: bool = False
    f_prefilter: bool = False
    q_form: QForm = QForm.AS_WRITTEN_RECIPROCAL

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class MatchOutcome:
    kept: InterventionSet
    distances: tuple[float, ...]  # aligned with the input intervention order


def matching_flags(flags: ScoreNormFlags) -> ScoreNormFlags:
    """Flags for matching-side estimates: E is estimand-only and never fires here."""
    return dataclasses.replace(flags, e_enabled=False)


def _prefilter_flags(flags: ScoreNormFlags) -> ScoreNormFlags:
    # C would make the compared estimates symmetric and drop every covariate,
    # so the directional filter is computed pre-C (and pre-E, as everywhere
    # on the matching side).
    return dataclasses.replace(flags, c_enabled=False, e_enabled=False)


def _f(table: TemporalScoreTable, a: Event, b: Event, flags: ScoreNormFlags) -> float:
    return precedence(table, a, b, flags).value


def prefilter_covariates(
    x_set: CovariateSet,
    e1: Event,
    table: TemporalScoreTable,
    cfg: MatchConfig,
    flags: ScoreNormFlags,
) -> CovariateSet:
    """Keep covariates the temporal predictor itself judges to precede the treatment.

    A covariate X survives iff f(X, e1) > f(e1, X) strictly; ties drop. Returns
    the input unchanged when the filter is disabled; raises EmptyAfterFilter
    when nothing survives (the caller decides the fallback).
    """
    if not cfg.f_prefilter:
        return x_set
    pf = _prefilter_flags(flags)
    kept = tuple(x for x in x_set.events if _f(table, x, e1, pf) > _f(table, e1, x, pf))
    if not kept:
        raise EmptyAfterFilter("temporality pre-filter removed every covariate")
    return CovariateSet(events=kept, origin=x_set.origin)


def propensity_vector(
    subject: Event,
    e1: Event,
    x_set: CovariateSet,
    table: TemporalScoreTable,
    cfg: MatchConfig,
    flags: ScoreNormFlags,
) -> PropensityVector:
    """Temporal-propensity signature of ``subject`` against the covariate set.

    Numerators come from f(X, e1), denominators from f(X, subject) (or the
    reciprocal arrangement under the CONDITIONAL form). With Q enabled both
    families are first normalized to relative frequencies across the set.
    Vanishing denominators are floored rather than raised.
    """
    if len(x_set) == 0:
        raise EmptyCovariates("propensity vector requested over an empty covariate set")
    mf = matching_flags(flags)
    f_e1 = [_f(table, x, e1, mf) for x in x_set.events]
    f_subj = [_f(table, x, subject, mf) for x in x_set.events]
    if cfg.q_normalized:
        total_e1 = math.fsum(f_e1)
        total_subj = math.fsum(f_subj)
        f_e1 = [v / max(total_e1, DENOMINATOR_FLOOR) for v in f_e1]
        f_subj = [v / max(total_subj, DENOMINATOR_FLOOR) for v in f_subj]
    if cfg.q_form is QForm.AS_WRITTEN_RECIPROCAL:
        coords = tuple(num / max(den, DENOMINATOR_FLOOR) for num, den in zip(f_e1, f_subj))
    else:
        coords = tuple(num / max(den, DENOMINATOR_FLOOR) for num, den in zip(f_subj, f_e1))
    return PropensityVector(coords=coords, subject=subject.id)


def direct_vector(
    subject: Event,
    x_set: CovariateSet,
    table: TemporalScoreTable,
    flags: ScoreNormFlags,
) -> PropensityVector:
    """Direct matching signature: the raw estimates f(subject, X), no ratios."""
    if len(x_set) == 0:
        raise EmptyCovariates("direct vector requested over an empty covariate set")
    mf = matching_flags(flags)
    coords = tuple(_f(table, subject, x, mf) for x in x_set.events)
    return PropensityVector(coords=coords, subject=subject.id)


def _signature(
    subject: Event,
    e1: Event,
    x_set: CovariateSet,
    table: TemporalScoreTable,
    cfg: MatchConfig,
    flags: ScoreNormFlags,
) -> PropensityVector:
    if cfg.mode is MatchMode.DIRECT:
        return direct_vector(subject, x_set, table, flags)
    return propensity_vector(subject, e1, x_set, table, cfg, flags)


def scaled_distance(a: PropensityVector, b: PropensityVector, p_norm: PNorm) -> float:
    """(1/n) * ||a - b||_p with n the covariate count (not sqrt(n), for both norms).

    Reductions use fsum, so the value is independent of coordinate order.
    """
    n = len(a.coords)
    if n != len(b.coords):
        raise ValueError("propensity vectors of unequal length")
    diffs = [x - y for x, y in zip(a.coords, b.coords)]
    if p_norm is PNorm.L1:
        norm = math.fsum(abs(d) for d in diffs)
    else:
        norm = math.sqrt(math.fsum(d * d for d in diffs))
    return norm / n


def matched_set(
    a_set: InterventionSet,
    e1: Event,
    x_set: CovariateSet,
    table: TemporalScoreTable,
    cfg: MatchConfig,
    flags: ScoreNormFlags,
) -> MatchOutcome:
    """Select the interventions whose signature is within epsilon of the treatment's.

    The boundary is inclusive. Input order is preserved; per-intervention
    distances are returned alongside for reporting.
    """
    if len(x_set) == 0:
        raise EmptyCovariates("matching requested over an empty covariate set")
    anchor = _signature(e1, e1, x_set, table, cfg, flags)
    kept: list[Event] = []
    distances: list[float] = []
    for a in a_set.events:
        d = scaled_distance(_signature(a, e1, x_set, table, cfg, flags), anchor, cfg.p_norm)
        distances.append(d)
        if d <= cfg.epsilon:
            kept.append(a)
    return MatchOutcome(kept=InterventionSet(events=tuple(kept)), distances=tuple(distances))

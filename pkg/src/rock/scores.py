"""Precedence estimation: symmetrization of raw directional scores plus the
S (score), C (co-occurrence), and E (estimand) normalizations.

The composition order is fixed and part of the contract:
symmetrize -> S -> C -> E. C and E are mutually exclusive at config level,
so at most one of them ever fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from .events import Event

if TYPE_CHECKING:
    from .backend.table import TemporalScoreTable

# Denominator floor for the S and E normalizations: below it the ratio is 0.
DENOMINATOR_FLOOR = 1e-9


@dataclass(frozen=True)
class RawDirectionalScores:
    """Backend scores for one masked prompt "A <MASK> B".

    ``s_after`` is the score of the token "after", ``s_before`` of "before".
    Both are opaque non-negative reals; calibration is the backend's business.
    """

    s_after: float
    s_before: float

    def __post_init__(self):
        for name in ("s_after", "s_before"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class PrecedenceEstimate:
    """An estimate of Pr(A occurs before B); in [0,1] once normalized."""

    value: float
    normalized: bool

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("precedence estimate must be >= 0")
        if self.normalized and self.value > 1.0:
            raise ValueError("normalized precedence estimate must be <= 1")


class Orientation(Enum):
    """Which directional coordinates the symmetrization reads.

    AS_WRITTEN aggregates s_after(A,B) with s_before(B,A) -- the literal
    published formula. SWAPPED reads the complementary coordinates. The stub
    backend emits scores consistent with whichever orientation it is told,
    so the composed estimate recovers the world's law under either flag.
    """

    AS_WRITTEN = "as-written"
    SWAPPED = "swapped"


@dataclass(frozen=True)
class ScoreNormFlags:
    s_enabled: bool = False
    c_enabled: bool = False
    e_enabled: bool = False
    orientation: Orientation = Orientation.AS_WRITTEN


def symmetrize(
    raw_ab: RawDirectionalScores,
    raw_ba: RawDirectionalScores,
    orientation: Orientation = Orientation.AS_WRITTEN,
) -> float:
    """Average the two directional reads of an ordered pair.

    ``raw_ab`` comes from the prompt "A <MASK> B" and ``raw_ba`` from
    "B <MASK> A". Under AS_WRITTEN the result is (s_after(A,B) + s_before(B,A)) / 2.
    """
    if orientation is Orientation.AS_WRITTEN:
        return 0.5 * (raw_ab.s_after + raw_ba.s_before)
    return 0.5 * (raw_ab.s_before + raw_ba.s_after)


def score_normalize_S(s_ab: float, s_ba: float, s_an: float, s_na: float) -> PrecedenceEstimate:
    """Normalize a symmetrized score against its reverse and the null-event anchors.

    Returns s_ab / (s_ab + s_ba + s_an + s_na), or 0 when the denominator is
    below the floor (all four scores effectively vanish).
    """
    denom = math.fsum((s_ab, s_ba, s_an, s_na))
    if denom < DENOMINATOR_FLOOR:
        return PrecedenceEstimate(0.0, normalized=True)
    return PrecedenceEstimate(s_ab / denom, normalized=True)


def cooccurrence_stabilize_C(f_xa: float, f_ax: float) -> float:
    """Replace a directional estimate by the mean of both directions.

    The output is symmetric in its arguments, trading precedence for
    co-occurrence when the backend's directional coverage is poor.
    """
    return (f_ax + f_xa) / 2.0


def estimand_normalize_E(f_ab: float, f_ba: float) -> float:
    """Normalize f(A,B) by the two-direction total, flooring a vanishing denominator."""
    denom = f_ab + f_ba
    if denom < DENOMINATOR_FLOOR:
        return 0.0
    return f_ab / denom


def _symmetrized(table: TemporalScoreTable, a: Event, b: Event, orientation: Orientation) -> float:
    return symmetrize(table.raw(a, b), table.raw(b, a), orientation)


def _s_normalized(table: TemporalScoreTable, a: Event, b: Event, orientation: Orientation) -> float:
    null = Event.null()
    s_ab = _symmetrized(table, a, b, orientation)
    s_ba = _symmetrized(table, b, a, orientation)
    s_an = _symmetrized(table, a, null, orientation)
    s_na = _symmetrized(table, null, a, orientation)
    return score_normalize_S(s_ab, s_ba, s_an, s_na).value


def precedence(table: TemporalScoreTable, a: Event, b: Event, flags: ScoreNormFlags) -> PrecedenceEstimate:
    """Full precedence pipeline for f(a,b): symmetrize, then S, C, E as enabled.

    Raises MissingScore if a required raw pair is absent from the table.
    """
    if flags.s_enabled:
        f_ab = _s_normalized(table, a, b, flags.orientation)
    else:
        f_ab = _symmetrized(table, a, b, flags.orientation)

    if flags.c_enabled or flags.e_enabled:
        if flags.s_enabled:
            f_ba = _s_normalized(table, b, a, flags.orientation)
        else:
            f_ba = _symmetrized(table, b, a, flags.orientation)
        if flags.c_enabled:
            f_ab = cooccurrence_stabilize_C(f_ba, f_ab)
        else:
            f_ab = estimand_normalize_E(f_ab, f_ba)

    normalized = flags.s_enabled or flags.e_enabled
    return PrecedenceEstimate(f_ab, normalized=normalized)

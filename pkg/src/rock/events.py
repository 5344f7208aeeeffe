"""Domain types for events, benchmark instances, queries, and score results."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum


def normalize_text(text: str) -> str:
    """Trim and collapse internal whitespace; event equality is defined on this form."""
    return " ".join(text.split())


def _content_id(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Event:
    """A natural-language event, the atom of all scoring.

    ``text`` is stored normalized (trimmed, internal whitespace collapsed) and
    must be non-empty; the null event (empty text), used as the no-information
    anchor in score normalization, is only constructible via :meth:`null`.
    ``structure`` is an optional (arg0, verb, arg1) triple kept as advisory
    metadata; identity and equality are by text alone.
    """

    text: str
    structure: tuple[str, str, str] | None = None
    id: str = ""

    def __post_init__(self):
        norm = normalize_text(self.text)
        if not norm and self.id != _NULL_ID:
            raise ValueError("event text is empty after trimming whitespace")
        object.__setattr__(self, "text", norm)
        object.__setattr__(self, "id", _content_id(norm))

    @staticmethod
    def null() -> Event:
        """The unique null event: empty text, exempt from the non-empty invariant."""
        ev = object.__new__(Event)
        object.__setattr__(ev, "text", "")
        object.__setattr__(ev, "structure", None)
        object.__setattr__(ev, "id", _NULL_ID)
        return ev

    @property
    def is_null(self) -> bool:
        return self.text == ""

    def __eq__(self, other) -> bool:
        if not isinstance(other, Event):
            return NotImplemented
        return self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)


_NULL_ID = _content_id("")


class AsksFor(Enum):
    CAUSE = "cause"
    EFFECT = "effect"


class Choice(Enum):
    CHOICE_A = "a"
    CHOICE_B = "b"


class RoleConvention(Enum):
    """How a benchmark instance maps onto the ordered (candidate cause, candidate effect) pair.

    Under PREMISE_AS_CAUSE a cause-type question puts the premise in the cause
    slot and the chosen alternative in the effect slot (and mirrored for
    effect-type questions). CHOICE_AS_CAUSE is the same mapping with the two
    slots swapped, which is the intuitively expected assignment; both exist
    because reasonable readings of two-alternative benchmarks disagree here.
    """

    PREMISE_AS_CAUSE = "premise-as-cause"
    CHOICE_AS_CAUSE = "choice-as-cause"


@dataclass(frozen=True)
class BenchmarkInstance:
    premise: Event
    choice_a: Event
    choice_b: Event
    asks_for: AsksFor
    label: Choice
    source_id: str

    def __post_init__(self):
        if self.choice_a.id == self.choice_b.id:
            raise ValueError(f"instance {self.source_id}: identical alternatives")

    def choice(self, which: Choice) -> Event:
        return self.choice_a if which is Choice.CHOICE_A else self.choice_b


@dataclass(frozen=True)
class CausalQuery:
    """An ordered pair of events: does ``cause_candidate`` cause ``effect_candidate``?"""

    cause_candidate: Event
    effect_candidate: Event

    def __post_init__(self):
        if self.cause_candidate.is_null or self.effect_candidate.is_null:
            raise ValueError("causal queries must be over non-null events")


@dataclass(frozen=True)
class ScoreResult:
    """Outcome of one score computation.

    ``fallback_used`` is set when a balanced score kind found no matched
    interventions and fell back to the plain temporal score.
    """

    value: float
    matched_count: int
    candidate_count: int
    fallback_used: bool

    def __post_init__(self):
        if self.matched_count > self.candidate_count:
            raise ValueError("matched_count exceeds candidate_count")


def query_roles(
    instance: BenchmarkInstance,
    choice: Choice,
    role_convention: RoleConvention = RoleConvention.PREMISE_AS_CAUSE,
) -> CausalQuery:
    """Assign the premise and the chosen alternative to the (cause, effect) slots.

    Swapping the convention swaps the two slots on every instance, so the two
    conventions are bijective images of each other.
    """
    chosen = instance.choice(choice)
    if instance.asks_for is AsksFor.CAUSE:
        first, second = instance.premise, chosen
    else:
        first, second = chosen, instance.premise
    if role_convention is RoleConvention.CHOICE_AS_CAUSE:
        first, second = second, first
    return CausalQuery(cause_candidate=first, effect_candidate=second)

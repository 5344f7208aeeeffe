"""Materialized raw directional scores for every ordered pair a scoring run needs."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import MissingScore
from ..events import Event
from ..scores import RawDirectionalScores


@dataclass
class TemporalScoreTable:
    """Map from ordered event-id pairs to raw directional scores.

    Built once per run, then treated as frozen: scoring code only reads.
    ``provenance`` records which backend produced the entries.
    """

    provenance: str = ""
    entries: dict[tuple[str, str], RawDirectionalScores] = field(default_factory=dict)

    def put(self, a: Event, b: Event, raw: RawDirectionalScores) -> None:
        self.entries[(a.id, b.id)] = raw

    def has(self, a: Event, b: Event) -> bool:
        return (a.id, b.id) in self.entries

    def raw(self, a: Event, b: Event) -> RawDirectionalScores:
        try:
            return self.entries[(a.id, b.id)]
        except KeyError:
            raise MissingScore((a.text, b.text)) from None

    def __len__(self) -> int:
        return len(self.entries)

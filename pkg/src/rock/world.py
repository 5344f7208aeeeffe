"""Finite discrete generative worlds with known causal ground truth.

A world holds K binary covariate indicators (independent Bernoulli with given
marginals), a treatment event with a per-pattern occurrence probability, two
potential outcomes per (pattern, realized treatment), and occurrence rows for
any number of intervention-vocabulary events. Everything is exactly
enumerable, which makes these worlds usable three ways: as the data source of
the deterministic stub backend, as the generator of certified confounding
suites, and as the exact verifier of the perfect-matching error bound.

The precedence law is derived from the occurrence models with a narrative
stage rule: covariates (stage 0) precede the treatment family (stage 1),
which precedes the outcome (stage 2). law(U,V) is the joint occurrence
probability when stage(U) < stage(V), zero in the reverse direction, and the
joint split evenly within a stage, so law(U,V) + law(V,U) <= 1 always holds.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .backend.wire import canonical_json
from .errors import DataError
from .events import Event
from .matching import QForm
from .scores import DENOMINATOR_FLOOR

Pattern = tuple[int, ...]
Row = dict[Pattern, float]  # per-pattern occurrence probability

WORLD_FILE_VERSION = 1
SUITE_FILE_VERSION = 1


@dataclass(frozen=True)
class CovariateSpec:
    event: Event
    marginal: float

    def __post_init__(self):
        if not 0.0 <= self.marginal <= 1.0:
            raise ValueError("covariate marginal must be a probability")


@dataclass
class SyntheticWorld:
    seed: int
    covariates: tuple[CovariateSpec, ...]
    treatment: Event
    treatment_model: Row
    outcome: Event
    outcome_model: dict[tuple[Pattern, int], tuple[float, float]]  # (p_r1, p_r0)
    intervention_vocab: dict[Event, Row] = field(default_factory=dict)
    perturbations: dict[str, tuple[tuple[Event, str], ...]] = field(default_factory=dict)
    null_score: float = 0.05

    def __post_init__(self):
        for spec in self.covariates:
            if spec.event.is_null:
                raise ValueError("null event cannot be a covariate")
        for row in (self.treatment_model, *self.intervention_vocab.values()):
            for p in row.values():
                if not 0.0 <= p <= 1.0:
                    raise ValueError("occurrence probabilities must be in [0,1]")
        for p1, p0 in self.outcome_model.values():
            if not (0.0 <= p1 <= 1.0 and 0.0 <= p0 <= 1.0):
                raise ValueError("outcome probabilities must be in [0,1]")

    # -- enumeration ---------------------------------------------------------

    @property
    def k(self) -> int:
        return len(self.covariates)

    def patterns(self) -> list[tuple[Pattern, float]]:
        """All covariate patterns with their probabilities (independent marginals)."""
        out = []
        for bits in itertools.product((0, 1), repeat=self.k):
            prob = 1.0
            for bit, spec in zip(bits, self.covariates):
                prob *= spec.marginal if bit else (1.0 - spec.marginal)
            out.append((bits, prob))
        return out

    def treatment_prob(self, pattern: Pattern) -> float:
        return self.treatment_model[pattern]

    def outcome_probs(self, pattern: Pattern, treated: int) -> tuple[float, float]:
        return self.outcome_model[(pattern, treated)]

    def observed_outcome_prob(self, pattern: Pattern) -> float:
        """Pr(outcome occurs | pattern): treated units realize r1, others r0."""
        t = self.treatment_prob(pattern)
        p1, _ = self.outcome_probs(pattern, 1)
        _, p0 = self.outcome_probs(pattern, 0)
        return t * p1 + (1.0 - t) * p0

    def effect_moments(self, pattern: Pattern) -> tuple[float, float]:
        """E[r | pattern] and E[r^2 | pattern] for r = r1 - r0.

        r1 and r0 are conditionally independent Bernoulli given the pattern and
        the realized treatment, so r in {-1, 0, 1} has a definite law.
        """
        t = self.treatment_prob(pattern)
        mean = 0.0
        second = 0.0
        for treated, w in ((1, t), (0, 1.0 - t)):
            if w == 0.0:
                continue
            p1, p0 = self.outcome_probs(pattern, treated)
            mean += w * (p1 - p0)
            second += w * (p1 * (1.0 - p0) + p0 * (1.0 - p1))
        return mean, second

    # -- derived precedence law ----------------------------------------------

    def occurrence_rows(self) -> dict[Event, Row]:
        """Occurrence row of every stage-1 event (treatment plus vocabulary)."""
        rows = {self.treatment: self.treatment_model}
        rows.update(self.intervention_vocab)
        return rows

    def derived_law(self) -> dict[tuple[str, str], float]:
        pats = self.patterns()
        rows = self.occurrence_rows()
        law: dict[tuple[str, str], float] = {}

        def put(a: Event, b: Event, value: float) -> None:
            law[(a.id, b.id)] = value

        cov_events = [spec.event for spec in self.covariates]
        # covariate -> covariate (same stage: split the joint)
        for i, x in enumerate(cov_events):
            for j, y in enumerate(cov_events):
                if i == j:
                    continue
                joint = self.covariates[i].marginal * self.covariates[j].marginal
                put(x, y, joint / 2.0)
        # covariate -> stage-1 and covariate -> outcome
        for i, x in enumerate(cov_events):
            for ev, row in rows.items():
                joint = math.fsum(p * bits[i] * row[bits] for bits, p in pats)
                put(x, ev, joint)
                put(ev, x, 0.0)
            joint_y = math.fsum(
                p * bits[i] * self.observed_outcome_prob(bits) for bits, p in pats
            )
            put(x, self.outcome, joint_y)
            put(self.outcome, x, 0.0)
        # stage-1 -> stage-1 (split) and stage-1 -> outcome
        events_1 = list(rows)
        for a in events_1:
            for b in events_1:
                if a == b:
                    continue
                joint = math.fsum(p * rows[a][bits] * rows[b][bits] for bits, p in pats)
                put(a, b, joint / 2.0)
        for ev, row in rows.items():
            if ev == self.treatment:
                # treated units realize r1; the treatment co-occurs with the
                # outcome exactly when a treated unit's r1 fires
                joint = math.fsum(
                    p * row[bits] * self.outcome_probs(bits, 1)[0] for bits, p in pats
                )
            else:
                joint = math.fsum(
                    p * row[bits] * self.observed_outcome_prob(bits) for bits, p in pats
                )
            put(ev, self.outcome, joint)
            put(self.outcome, ev, 0.0)
        return law

    def all_events(self) -> list[Event]:
        return [spec.event for spec in self.covariates] + list(self.occurrence_rows()) + [self.outcome]

    def to_universe(self) -> PrecedenceUniverse:
        events = self.all_events()
        cov_texts = tuple(spec.event.text for spec in self.covariates)
        return PrecedenceUniverse(
            seed=self.seed,
            events={e.id: e for e in events},
            law=self.derived_law(),
            default_covariates=cov_texts,
            covariates_for={},
            perturbations=dict(self.perturbations),
            null_score=self.null_score,
        )


@dataclass
class PrecedenceUniverse:
    """What the stub backend serves: a frozen total precedence law over a
    finite event universe plus covariate and perturbation vocabularies."""

    seed: int
    events: dict[str, Event]
    law: dict[tuple[str, str], float]
    default_covariates: tuple[str, ...]
    covariates_for: dict[str, tuple[str, ...]] = field(default_factory=dict)
    perturbations: dict[str, tuple[tuple[Event, str], ...]] = field(default_factory=dict)
    null_score: float = 0.05

    def __post_init__(self):
        self._fingerprint: str | None = None
        self._by_text: dict[str, Event] | None = None

    def law_value(self, a: Event, b: Event) -> float:
        if a.is_null and b.is_null:
            return 0.0
        if a.is_null or b.is_null:
            return self.null_score
        return self.law.get((a.id, b.id), 0.0)

    def event_by_text(self, text: str) -> Event | None:
        norm = " ".join(text.split())
        if norm == "":
            return Event.null()
        if self._by_text is None:
            self._by_text = {e.text: e for e in self.events.values()}
        return self._by_text.get(norm)

    def covariate_texts(self, e1: Event) -> tuple[str, ...]:
        return self.covariates_for.get(e1.id, self.default_covariates)

    def merge(self, other: PrecedenceUniverse) -> None:
        self.events.update(other.events)
        self.law.update(other.law)
        self.covariates_for.update(other.covariates_for)
        self.perturbations.update(other.perturbations)
        self._fingerprint = None
        self._by_text = None

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            self._fingerprint = hashlib.sha256(canonical_json(self.to_payload())).hexdigest()[:16]
        return self._fingerprint

    def to_payload(self) -> dict:
        texts = {eid: e.text for eid, e in self.events.items()}
        return {
            "version": WORLD_FILE_VERSION,
            "seed": self.seed,
            "events": sorted(texts.values()),
            "law": sorted(
                [texts[a], texts[b], v] for (a, b), v in self.law.items() if a in texts and b in texts
            ),
            "default_covariates": list(self.default_covariates),
            "covariates_for": {
                texts[eid]: list(covs) for eid, covs in sorted(self.covariates_for.items()) if eid in texts
            },
            "perturbations": {
                texts[eid]: [[e.text, code] for e, code in perts]
                for eid, perts in sorted(self.perturbations.items())
                if eid in texts
            },
            "null_score": self.null_score,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> PrecedenceUniverse:
        if payload.get("version") != WORLD_FILE_VERSION:
            raise DataError(f"unsupported world file version {payload.get('version')!r}")
        events = {}
        for text in payload["events"]:
            e = Event(text)
            events[e.id] = e
        by_text = {e.text: e for e in events.values()}
        law = {
            (by_text[a].id, by_text[b].id): float(v) for a, b, v in payload["law"]
        }
        return cls(
            seed=int(payload["seed"]),
            events=events,
            law=law,
            default_covariates=tuple(payload["default_covariates"]),
            covariates_for={
                by_text[t].id: tuple(covs) for t, covs in payload.get("covariates_for", {}).items()
            },
            perturbations={
                by_text[t].id: tuple((Event(txt), code) for txt, code in perts)
                for t, perts in payload.get("perturbations", {}).items()
            },
            null_score=float(payload.get("null_score", 0.05)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(canonical_json(self.to_payload()))

    @classmethod
    def load(cls, path: str | Path) -> PrecedenceUniverse:
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read world file {path}: {exc}") from exc
        return cls.from_payload(payload)


# -- exact quantities ---------------------------------------------------------


def true_ate(world: SyntheticWorld) -> float:
    """Exact average treatment effect E[r1 - r0] by full enumeration."""
    return math.fsum(p * world.effect_moments(bits)[0] for bits, p in world.patterns())


def pattern_signature(world: SyntheticWorld, pattern: Pattern, q_form: QForm) -> tuple[float, ...]:
    """The matching signature a unit with this pattern presents.

    Coordinate j is built from Pr(treatment ∧ X_j = v_j) and Pr(X_j = v_j),
    both derived from the world's law and marginals; under the conditional
    form this is exactly Pr(treatment | X_j = v_j). Coordinates are rounded
    to 12 decimals so exact-equality grouping is float-safe.
    """
    pats = world.patterns()
    pr_treatment = math.fsum(p * world.treatment_prob(bits) for bits, p in pats)
    coords = []
    for j, spec in enumerate(world.covariates):
        joint_on = math.fsum(p * bits[j] * world.treatment_prob(bits) for bits, p in pats)
        if pattern[j]:
            joint, marginal = joint_on, spec.marginal
        else:
            joint, marginal = pr_treatment - joint_on, 1.0 - spec.marginal
        joint = max(joint, 0.0)
        if q_form is QForm.CONDITIONAL:
            coord = joint / max(marginal, DENOMINATOR_FLOOR)
        else:
            coord = marginal / max(joint, DENOMINATOR_FLOOR)
        coords.append(round(coord, 12))
    return tuple(coords)


@dataclass(frozen=True)
class PropositionReport:
    delta_true: float
    lhs: float
    rho: float
    bound: float
    holds: bool
    lhs_by_total_variance: float


def verify_proposition(
    world: SyntheticWorld,
    q_form: QForm = QForm.AS_WRITTEN_RECIPROCAL,
    slack: float = 1e-12,
) -> PropositionReport:
    """Check E[(Δ̂ - Δ)^2] <= 1 - ϱ^2 for Δ̂ = E[r | q(x)] by exact enumeration.

    Units are grouped on exact signature equality (perfect matching). ϱ is the
    essential infimum of |r - E[r | q(x)]| over the discrete support, i.e. the
    minimum over support points in a finite world. The left-hand side is also
    recomputed through the conditional variance decomposition as a second
    route; the two must agree to 1e-12.
    """
    pats = world.patterns()
    delta = true_ate(world)

    groups: dict[tuple[float, ...], list[tuple[Pattern, float]]] = {}
    for bits, p in pats:
        if p == 0.0:
            continue
        groups.setdefault(pattern_signature(world, bits, q_form), []).append((bits, p))

    lhs_terms = []
    var_within_terms = []
    second_total_terms = []
    group_mean: dict[Pattern, float] = {}
    for members in groups.values():
        w = math.fsum(p for _, p in members)
        mean = math.fsum(p * world.effect_moments(bits)[0] for bits, p in members) / w
        second = math.fsum(p * world.effect_moments(bits)[1] for bits, p in members) / w
        for bits, _ in members:
            group_mean[bits] = mean
        lhs_terms.append(w * (mean - delta) ** 2)
        var_within_terms.append(w * (second - mean * mean))
        second_total_terms.append(w * second)
    lhs = math.fsum(lhs_terms)

    second_total = math.fsum(second_total_terms)
    var_r = second_total - delta * delta
    lhs_alt = var_r - math.fsum(var_within_terms)

    rho = math.inf
    for bits, p in pats:
        if p == 0.0:
            continue
        mean = group_mean[bits]
        t = world.treatment_prob(bits)
        for treated, w in ((1, t), (0, 1.0 - t)):
            if w == 0.0:
                continue
            p1, p0 = world.outcome_probs(bits, treated)
            r_probs = {
                1: p1 * (1.0 - p0),
                -1: p0 * (1.0 - p1),
                0: p1 * p0 + (1.0 - p1) * (1.0 - p0),
            }
            for r, pr in r_probs.items():
                if pr > 0.0:
                    rho = min(rho, abs(r - mean))
    if not math.isfinite(rho):
        rho = 0.0
    bound = 1.0 - rho * rho
    return PropositionReport(
        delta_true=delta,
        lhs=lhs,
        rho=rho,
        bound=bound,
        holds=lhs <= bound + slack,
        lhs_by_total_variance=lhs_alt,
    )


# -- random worlds -------------------------------------------------------------


def random_world(seed: int, k: int | None = None) -> SyntheticWorld:
    """A seeded random world with K <= 4 covariates, mixing ignorable,
    confounded, deterministic-outcome, and uninformative-treatment regimes."""
    rng = random.Random(seed)
    k = k if k is not None else rng.randint(1, 4)
    covariates = tuple(
        CovariateSpec(Event(f"covariate {j} of world {seed}"), rng.uniform(0.1, 0.9))
        for j in range(k)
    )
    patterns = list(itertools.product((0, 1), repeat=k))

    treatment_style = rng.random()
    if treatment_style < 0.2:
        const = rng.uniform(0.1, 0.9)
        treatment_model = {bits: const for bits in patterns}
    elif treatment_style < 0.5:
        weights = [rng.uniform(-0.3, 0.3) for _ in range(k)]
        base = rng.uniform(0.2, 0.8)
        treatment_model = {
            bits: min(0.95, max(0.05, base + sum(w * b for w, b in zip(weights, bits))))
            for bits in patterns
        }
    else:
        treatment_model = {bits: rng.uniform(0.05, 0.95) for bits in patterns}

    outcome_style = rng.random()
    outcome_model: dict[tuple[Pattern, int], tuple[float, float]] = {}
    for bits in patterns:
        if outcome_style < 0.25:
            pair = {
                1: (float(rng.random() < 0.5), float(rng.random() < 0.5)),
                0: (float(rng.random() < 0.5), float(rng.random() < 0.5)),
            }
        elif outcome_style < 0.6:
            p1, p0 = rng.random(), rng.random()
            pair = {1: (p1, p0), 0: (p1, p0)}  # ignorable: no dependence on treatment
        else:
            pair = {1: (rng.random(), rng.random()), 0: (rng.random(), rng.random())}
        outcome_model[(bits, 1)] = pair[1]
        outcome_model[(bits, 0)] = pair[0]

    return SyntheticWorld(
        seed=seed,
        covariates=covariates,
        treatment=Event(f"treatment event of world {seed}"),
        treatment_model=treatment_model,
        outcome=Event(f"outcome event of world {seed}"),
        outcome_model=outcome_model,
    )

"""Certified confounding suites.

Each instance is a three-event scene drawn from a scene world: a genuine
trigger (the true cause), a bystander event that rides a common driver
covariate (the confounder), and an outcome the driver produces regardless of
the trigger. Raw precedence then favors the bystander while matched
comparisons favor the trigger. Scenes are accepted by rejection sampling
against exact enumeration: matching margins must hold under every matching
transform a lattice combo can select, and the score rankings must hold with a
gap under both the plain and the score-normalized estimand, so the certified
correctness booleans are reproduced exactly by the full pipeline.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .backend.wire import canonical_json
from .errors import DataError, SuiteConstructionFailed
from .events import AsksFor, BenchmarkInstance, Choice, Event, RoleConvention
from .world import (
    SUITE_FILE_VERSION,
    CovariateSpec,
    Pattern,
    PrecedenceUniverse,
    SyntheticWorld,
)

KIND_LABELS = ("l1", "l2", "temporal", "unbalanced", "misspecified")


@dataclass(frozen=True)
class SuiteSpec:
    n_instances: int = 200
    epsilon: float = 0.06
    covariates_per_scene: int = 2
    confounding_strength: float = 1.0
    max_attempts_per_instance: int = 400
    score_gap: float = 1e-6
    matching_margin: float = 0.25  # relative keep-out band around epsilon
    null_score: float = 0.25

    def __post_init__(self):
        if self.covariates_per_scene < 2:
            raise ValueError("scenes need at least the driver and one background covariate")
        if not 0.0 <= self.confounding_strength <= 1.0:
            raise ValueError("confounding strength must be in [0,1]")


@dataclass(frozen=True)
class InstanceCertificate:
    source_id: str
    correct: dict[str, bool]
    scores: dict[str, tuple[float, float]]  # per kind: (choice_a, choice_b)


@dataclass
class ConfoundedSuite:
    seed: int
    spec: SuiteSpec
    role_convention: RoleConvention
    instances: list[BenchmarkInstance]
    certificates: list[InstanceCertificate]
    universe: PrecedenceUniverse
    certified_accuracy: dict[str, float] = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "version": SUITE_FILE_VERSION,
            "seed": self.seed,
            "spec": asdict(self.spec),
            "role_convention": self.role_convention.value,
            "instances": [
                {
                    "source_id": inst.source_id,
                    "premise": inst.premise.text,
                    "choice_a": inst.choice_a.text,
                    "choice_b": inst.choice_b.text,
                    "asks_for": inst.asks_for.value,
                    "label": inst.label.value,
                }
                for inst in self.instances
            ],
            "certificates": [
                {"source_id": c.source_id, "correct": c.correct, "scores": c.scores}
                for c in self.certificates
            ],
            "certified_accuracy": self.certified_accuracy,
            "universe": self.universe.to_payload(),
        }

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_payload())

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_payload(cls, payload: dict) -> ConfoundedSuite:
        if payload.get("version") != SUITE_FILE_VERSION:
            raise DataError(f"unsupported suite file version {payload.get('version')!r}")
        instances = [
            BenchmarkInstance(
                premise=Event(row["premise"]),
                choice_a=Event(row["choice_a"]),
                choice_b=Event(row["choice_b"]),
                asks_for=AsksFor(row["asks_for"]),
                label=Choice(row["label"]),
                source_id=row["source_id"],
            )
            for row in payload["instances"]
        ]
        certificates = [
            InstanceCertificate(
                source_id=row["source_id"],
                correct=dict(row["correct"]),
                scores={k: (float(v[0]), float(v[1])) for k, v in row["scores"].items()},
            )
            for row in payload["certificates"]
        ]
        return cls(
            seed=int(payload["seed"]),
            spec=SuiteSpec(**payload["spec"]),
            role_convention=RoleConvention(payload["role_convention"]),
            instances=instances,
            certificates=certificates,
            universe=PrecedenceUniverse.from_payload(payload["universe"]),
            certified_accuracy={k: float(v) for k, v in payload["certified_accuracy"].items()},
        )

    @classmethod
    def load(cls, path: str | Path) -> ConfoundedSuite:
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read suite file {path}: {exc}") from exc
        return cls.from_payload(payload)


# -- scene construction ---------------------------------------------------------


def _lerp(a: float, b: float, t: float) -> float:
    return a + (b - a) * t


def _scene_world(spec: SuiteSpec, index: int, rng: random.Random) -> tuple[SyntheticWorld, dict]:
    """One candidate scene; returns the world plus the event roles."""
    s = spec.confounding_strength
    k = spec.covariates_per_scene
    covariate_events = [Event(f"Scene {index}: the common driver event was underway.")]
    covariate_events += [
        Event(f"Scene {index}: background event {j} had already happened.") for j in range(1, k)
    ]
    covariates = tuple(CovariateSpec(e, rng.uniform(0.45, 0.6)) for e in covariate_events)
    patterns = [bits for bits in _all_patterns(k)]

    def flat_row(base: float, jitter: float = 0.0) -> dict[Pattern, float]:
        return {bits: _clamp(base * (1.0 + rng.uniform(-jitter, jitter))) for bits in patterns}

    def driver_row(on: float, off: float, fallback: float) -> dict[Pattern, float]:
        # rides the driver covariate (coordinate 0) in proportion to strength
        return {
            bits: _clamp(_lerp(fallback, on if bits[0] else off, s)) for bits in patterns
        }

    trigger = Event(f"Scene {index}: the genuine trigger event took place.")
    trigger_base = rng.uniform(0.30, 0.42)
    trigger_row = flat_row(trigger_base, jitter=0.02)

    outcome = Event(f"Scene {index}: the outcome event followed.")
    outcome_model: dict[tuple[Pattern, int], tuple[float, float]] = {}
    for bits in patterns:
        p_r1 = _clamp(rng.uniform(0.55, 0.70) + (0.08 if bits[0] else 0.0))
        p_r0 = _clamp(_lerp(rng.uniform(0.02, 0.08), rng.uniform(0.72, 0.88), s if bits[0] else 0.0))
        outcome_model[(bits, 1)] = (p_r1, p_r0)
        outcome_model[(bits, 0)] = (p_r1, p_r0)

    bystander = Event(f"Scene {index}: the bystander event was also seen.")
    bystander_row = driver_row(rng.uniform(0.85, 0.95), rng.uniform(0.03, 0.08), rng.uniform(0.30, 0.42))

    def scaled(row: dict[Pattern, float], delta: float) -> dict[Pattern, float]:
        return {bits: _clamp(v * (1.0 + delta)) for bits, v in row.items()}

    def signed_delta() -> float:
        return rng.choice((-1, 1)) * rng.uniform(0.01, 0.03)

    trigger_goods = [
        Event(f"Scene {index}: a comparable stand-in for the trigger ({j}).") for j in range(2)
    ]
    trigger_decoys = [
        Event(f"Scene {index}: a driver-bound stand-in for the trigger ({j}).") for j in range(2)
    ]
    bystander_goods = [
        Event(f"Scene {index}: a comparable stand-in for the bystander ({j}).") for j in range(2)
    ]
    bystander_decoy = Event(f"Scene {index}: an unrelated stand-in for the bystander.")

    vocab: dict[Event, dict[Pattern, float]] = {bystander: bystander_row}
    for ev in trigger_goods:
        vocab[ev] = scaled(trigger_row, signed_delta())
    for ev in trigger_decoys:
        vocab[ev] = driver_row(rng.uniform(0.93, 0.98), rng.uniform(0.01, 0.05), rng.uniform(0.30, 0.42))
    for ev in bystander_goods:
        vocab[ev] = scaled(bystander_row, signed_delta())
    vocab[bystander_decoy] = flat_row(rng.uniform(0.30, 0.42), jitter=0.02)

    world = SyntheticWorld(
        seed=index,
        covariates=covariates,
        treatment=trigger,
        treatment_model=trigger_row,
        outcome=outcome,
        outcome_model=outcome_model,
        intervention_vocab=vocab,
        perturbations={
            trigger.id: (
                (trigger_goods[0], "lexical"),
                (trigger_goods[1], "resemantic"),
                (trigger_decoys[0], "negation"),
                (trigger_decoys[1], "restructure"),
            ),
            bystander.id: (
                (bystander_goods[0], "lexical"),
                (bystander_goods[1], "resemantic"),
                (bystander_decoy, "negation"),
            ),
        },
        null_score=spec.null_score,
    )
    roles = {
        "trigger": trigger,
        "bystander": bystander,
        "outcome": outcome,
        "covariates": covariate_events,
        "trigger_interventions": trigger_goods + trigger_decoys,
        "trigger_goods": trigger_goods,
        "bystander_interventions": bystander_goods + [bystander_decoy],
        "bystander_goods": bystander_goods,
    }
    return world, roles


def _all_patterns(k: int):
    return itertools.product((0, 1), repeat=k)


def _clamp(v: float, lo: float = 0.005, hi: float = 0.995) -> float:
    return min(hi, max(lo, v))


# -- independent certification ---------------------------------------------------
#
# Deliberately straight-line arithmetic over the stored law floats: no imports
# from the matching or estimator modules, so certificates and the engine are
# two routes to the same numbers.


def _cert_s_norm(value: float, reverse: float, null_score: float) -> float:
    denom = value + reverse + 2.0 * null_score
    return value / denom if denom > 0 else 0.0


def _cert_distances(
    law: dict[tuple[str, str], float],
    covs: list[Event],
    e1: Event,
    subject: Event,
    use_s: bool,
    use_q: bool,
    null_score: float,
) -> tuple[float, float]:
    """Scaled L1/L2 distance between the subject's and the treatment's signature."""

    def f(x: Event, ev: Event) -> float:
        fwd = law.get((x.id, ev.id), 0.0)
        if not use_s:
            return fwd
        return _cert_s_norm(fwd, law.get((ev.id, x.id), 0.0), null_score)

    num = [f(x, e1) for x in covs]
    den = [f(x, subject) for x in covs]
    if use_q:
        num_total, den_total = sum(num), sum(den)
        num = [v / num_total for v in num]
        den = [v / den_total for v in den]
    diffs = [n / d - 1.0 for n, d in zip(num, den)]  # anchor coordinates are all 1
    l1 = sum(abs(d) for d in diffs) / len(covs)
    l2 = math.sqrt(sum(d * d for d in diffs)) / len(covs)
    return l1, l2


def _cert_scores(
    law: dict[tuple[str, str], float],
    e1: Event,
    outcome: Event,
    matched: list[Event],
    everything: list[Event],
    covs: list[Event],
    use_s: bool,
    null_score: float,
) -> dict[str, float]:
    def f(a: Event, b: Event) -> float:
        fwd = law.get((a.id, b.id), 0.0)
        if not use_s:
            return fwd
        return _cert_s_norm(fwd, law.get((b.id, a.id), 0.0), null_score)

    t = f(e1, outcome)
    mean_matched = sum(f(a, outcome) for a in matched) / len(matched) if matched else None
    mean_all = sum(f(a, outcome) for a in everything) / len(everything)
    mean_cov = sum(f(x, outcome) for x in covs) / len(covs)
    return {
        "temporal": t,
        "balanced": t - mean_matched if mean_matched is not None else t,
        "unbalanced": t - mean_all,
        "misspecified": t - mean_cov,
    }


def _certify_scene(
    world: SyntheticWorld,
    roles: dict,
    spec: SuiteSpec,
) -> dict[str, dict[str, float]] | None:
    """Exact per-choice scores if every margin holds, else None (reject)."""
    law = world.derived_law()
    covs = roles["covariates"]
    eps = spec.epsilon
    lo, hi = eps * (1.0 - spec.matching_margin), eps * (1.0 + spec.matching_margin)

    sides = (
        (roles["trigger"], roles["trigger_interventions"], set(e.id for e in roles["trigger_goods"])),
        (roles["bystander"], roles["bystander_interventions"], set(e.id for e in roles["bystander_goods"])),
    )
    # matching margins must hold under every matching transform a combo can
    # pick: {plain, S} x {Q off, Q on}, both norms
    for e1, interventions, good_ids in sides:
        for a in interventions:
            should_match = a.id in good_ids
            for use_s in (False, True):
                for use_q in (False, True):
                    l1, l2 = _cert_distances(law, covs, e1, a, use_s, use_q, spec.null_score)
                    for d in (l1, l2):
                        if should_match and d > lo:
                            return None
                        if not should_match and d < hi:
                            return None

    # ranking margins under the plain and the S-normalized estimand
    out: dict[str, dict[str, float]] = {}
    for use_s, tag in ((False, "plain"), (True, "s")):
        per_side = []
        for e1, interventions, good_ids in sides:
            matched = [a for a in interventions if a.id in good_ids]
            per_side.append(
                _cert_scores(
                    law, e1, roles["outcome"], matched, interventions, covs, use_s, spec.null_score
                )
            )
        trigger_scores, bystander_scores = per_side
        gap = spec.score_gap
        if not (trigger_scores["balanced"] > bystander_scores["balanced"] + gap):
            return None
        if not (bystander_scores["temporal"] > trigger_scores["temporal"] + gap):
            return None
        if not (bystander_scores["unbalanced"] > trigger_scores["unbalanced"] + gap):
            return None
        out[tag] = {"trigger": trigger_scores, "bystander": bystander_scores}
    return out


def build_confounded_suite(spec: SuiteSpec, seed: int) -> ConfoundedSuite:
    """Generate a certified suite; deterministic given (spec, seed).

    Raises SuiteConstructionFailed when the per-instance retry budget runs out,
    which is the expected outcome for degenerate specs (e.g. zero confounding
    strength, where raw precedence already ranks the trigger first).
    """
    instances: list[BenchmarkInstance] = []
    certificates: list[InstanceCertificate] = []
    universe = PrecedenceUniverse(
        seed=seed,
        events={},
        law={},
        default_covariates=(),
        covariates_for={},
        perturbations={},
        null_score=spec.null_score,
    )

    for i in range(spec.n_instances):
        accepted = None
        for attempt in range(spec.max_attempts_per_instance):
            rng = random.Random(f"{seed}:{i}:{attempt}")
            world, roles = _scene_world(spec, i, rng)
            cert_scores = _certify_scene(world, roles, spec)
            if cert_scores is not None:
                accepted = (world, roles, cert_scores["plain"], rng)
                break
        if accepted is None:
            raise SuiteConstructionFailed(
                f"instance {i}: no scene satisfied the certification margins in "
                f"{spec.max_attempts_per_instance} attempts (confounding strength "
                f"{spec.confounding_strength})"
            )
        world, roles, plain_scores, rng = accepted

        trigger, bystander = roles["trigger"], roles["bystander"]
        trigger_is_a = rng.random() < 0.5
        choice_a, choice_b = (trigger, bystander) if trigger_is_a else (bystander, trigger)
        label = Choice.CHOICE_A if trigger_is_a else Choice.CHOICE_B
        instance = BenchmarkInstance(
            premise=roles["outcome"],
            choice_a=choice_a,
            choice_b=choice_b,
            asks_for=AsksFor.EFFECT,
            label=label,
            source_id=f"conf-{i:04d}",
        )
        instances.append(instance)

        def pair(kind_scores_key: str) -> tuple[float, float]:
            t = plain_scores["trigger"][kind_scores_key]
            b = plain_scores["bystander"][kind_scores_key]
            return (t, b) if trigger_is_a else (b, t)

        scores = {
            "l1": pair("balanced"),
            "l2": pair("balanced"),
            "temporal": pair("temporal"),
            "unbalanced": pair("unbalanced"),
            "misspecified": pair("misspecified"),
        }
        correct = {}
        for kind, (a, b) in scores.items():
            picked = Choice.CHOICE_A if a >= b else Choice.CHOICE_B
            correct[kind] = picked is label
        certificates.append(
            InstanceCertificate(source_id=instance.source_id, correct=correct, scores=scores)
        )

        scene_universe = world.to_universe()
        scene_universe.covariates_for = {
            trigger.id: tuple(e.text for e in roles["covariates"]),
            bystander.id: tuple(e.text for e in roles["covariates"]),
        }
        universe.merge(scene_universe)

    accuracy = {
        kind: sum(1 for c in certificates if c.correct[kind]) / len(certificates)
        for kind in KIND_LABELS
    }
    return ConfoundedSuite(
        seed=seed,
        spec=spec,
        role_convention=RoleConvention.PREMISE_AS_CAUSE,
        instances=instances,
        certificates=certificates,
        universe=universe,
        certified_accuracy=accuracy,
    )

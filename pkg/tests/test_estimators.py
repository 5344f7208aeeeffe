import dataclasses
import random

import pytest

from rock.backend.table import TemporalScoreTable
from rock.errors import LatticeError
from rock.events import CausalQuery, Choice, Event, ScoreResult
from rock.estimators import (
    EstimatorConfig,
    NormalizationCombo,
    ScoreKind,
    choose,
    delta_score,
    enumerate_combos,
)
from rock.matching import CovariateSet, InterventionSet, MatchConfig, MatchMode, PNorm
from rock.scores import RawDirectionalScores, ScoreNormFlags

E1 = Event("Alice walked into a restaurant.")
E2 = Event("Alice ordered a pizza.")
X1 = Event("Alice was hungry.")
A1 = Event("Alice walked into a bar.")
A2 = Event("Bob walked into a restaurant.")

QUERY = CausalQuery(E1, E2)


def table_for(values: dict[tuple[Event, Event], float]) -> TemporalScoreTable:
    t = TemporalScoreTable(provenance="test")
    events = {e for pair in values for e in pair}
    for a in events:
        for b in events:
            if a == b:
                continue
            fwd = values.get((a, b), 0.0)
            bwd = values.get((b, a), 0.0)
            t.put(a, b, RawDirectionalScores(s_after=fwd, s_before=bwd))
    return t


def hand_table():
    # The hand-evaluated scenario: A1 matches at distance 0, A2 sits at L1
    # distance 1.0; estimand scores 0.8 / 0.2 / 0.6.
    return table_for(
        {
            (X1, E1): 0.5,
            (X1, A1): 0.5,
            (X1, A2): 0.25,
            (E1, E2): 0.8,
            (A1, E2): 0.2,
            (A2, E2): 0.6,
            (X1, E2): 0.4,
        }
    )


def cfg_for(kind: ScoreKind, epsilon: float = 0.5) -> EstimatorConfig:
    return EstimatorConfig(kind=kind, match=MatchConfig(epsilon=epsilon), n_covariates=10)


class TestDeltaScore:
    def test_matched_intervention_indistinguishable_from_treatment(self):
        t = table_for({(X1, E1): 0.5, (X1, A1): 0.5, (E1, E2): 0.8, (A1, E2): 0.8})
        result, _ = delta_score(
            CausalQuery(E1, E2), CovariateSet((X1,)), InterventionSet((A1,)), t, cfg_for(ScoreKind.BALANCED_L1)
        )
        assert result.value == 0.0
        assert result.matched_count == 1 and not result.fallback_used

    def test_hand_evaluated_balanced_score(self):
        result, outcome = delta_score(
            QUERY, CovariateSet((X1,)), InterventionSet((A1, A2)), hand_table(), cfg_for(ScoreKind.BALANCED_L1)
        )
        assert result.value == pytest.approx(0.6)
        assert result.matched_count == 1 and result.candidate_count == 2
        assert outcome.kept.events == (A1,)

    def test_epsilon_zero_without_exact_match_falls_back_to_temporal(self):
        t = table_for({(X1, E1): 0.5, (X1, A2): 0.25, (E1, E2): 0.8, (A2, E2): 0.6})
        result, _ = delta_score(
            QUERY, CovariateSet((X1,)), InterventionSet((A2,)), t, cfg_for(ScoreKind.BALANCED_L2, epsilon=0.0)
        )
        assert result.value == 0.8
        assert result.fallback_used and result.matched_count == 0

    def test_temporal_kind(self):
        result, outcome = delta_score(
            QUERY, CovariateSet((X1,)), InterventionSet((A1,)), hand_table(), cfg_for(ScoreKind.TEMPORAL)
        )
        assert result.value == 0.8 and outcome is None
        assert not result.fallback_used

    def test_unbalanced_uses_all_interventions(self):
        result, _ = delta_score(
            QUERY, CovariateSet((X1,)), InterventionSet((A1, A2)), hand_table(), cfg_for(ScoreKind.UNBALANCED)
        )
        assert result.value == pytest.approx(0.8 - (0.2 + 0.6) / 2)
        assert result.matched_count == 2

    def test_misspecified_averages_covariates(self):
        result, _ = delta_score(
            QUERY, CovariateSet((X1,)), InterventionSet((A1, A2)), hand_table(), cfg_for(ScoreKind.MISSPECIFIED)
        )
        assert result.value == pytest.approx(0.8 - 0.4)

    def test_value_in_unit_band_for_normalized_tables(self):
        rng = random.Random(5)
        for _ in range(100):
            values = {}
            for a in (E1, A1, A2, X1):
                values[(a, E2)] = rng.random()
                values[(X1, a)] = rng.random() if a != X1 else 0.0
            t = table_for(values)
            for kind in ScoreKind:
                result, _ = delta_score(
                    QUERY, CovariateSet((X1,)), InterventionSet((A1, A2)), t, cfg_for(kind, epsilon=rng.random())
                )
                assert -1.0 <= result.value <= 1.0


class TestLimitIdentities:
    def random_setup(self, rng):
        xs = tuple(Event(f"x{i} {rng.random()}") for i in range(rng.randint(1, 4)))
        ats = tuple(Event(f"a{i} {rng.random()}") for i in range(rng.randint(1, 5)))
        values = {(E1, E2): rng.random()}
        for x in xs:
            values[(x, E1)] = rng.uniform(0.05, 1.0)
            values[(x, E2)] = rng.random()
            for a in ats:
                values[(x, a)] = rng.uniform(0.05, 1.0)
        for a in ats:
            values[(a, E2)] = rng.random()
        return CovariateSet(xs), InterventionSet(ats), table_for(values)

    def test_large_epsilon_equals_unbalanced_bitwise(self):
        rng = random.Random(42)
        for _ in range(100):
            x, a, t = self.random_setup(rng)
            balanced, _ = delta_score(QUERY, x, a, t, cfg_for(ScoreKind.BALANCED_L1, epsilon=1e12))
            unbalanced, _ = delta_score(QUERY, x, a, t, cfg_for(ScoreKind.UNBALANCED))
            assert balanced.value == unbalanced.value  # bit-for-bit

    def test_epsilon_zero_equals_temporal_bitwise(self):
        rng = random.Random(43)
        for _ in range(100):
            x, a, t = self.random_setup(rng)
            balanced, outcome = delta_score(QUERY, x, a, t, cfg_for(ScoreKind.BALANCED_L2, epsilon=0.0))
            temporal, _ = delta_score(QUERY, x, a, t, cfg_for(ScoreKind.TEMPORAL))
            if all(d > 0 for d in outcome.distances):
                assert balanced.fallback_used
                assert balanced.value == temporal.value  # bit-for-bit

    def test_unbalanced_and_misspecified_never_consult_epsilon_or_norm(self):
        rng = random.Random(44)
        x, a, t = self.random_setup(rng)
        for kind in (ScoreKind.UNBALANCED, ScoreKind.MISSPECIFIED):
            results = set()
            for eps in (0.0, 0.3, 1e9):
                for p in PNorm:
                    cfg = EstimatorConfig(kind=kind, match=MatchConfig(epsilon=eps, p_norm=p))
                    result, _ = delta_score(QUERY, x, a, t, cfg)
                    results.add(result.value)
            assert len(results) == 1


class TestChoose:
    def sr(self, v):
        return ScoreResult(value=v, matched_count=0, candidate_count=0, fallback_used=False)

    def test_higher_first(self):
        out = choose(self.sr(0.6), self.sr(0.1))
        assert out.choice is Choice.CHOICE_A and not out.tie

    def test_higher_second(self):
        out = choose(self.sr(0.1), self.sr(0.6))
        assert out.choice is Choice.CHOICE_B and not out.tie

    def test_tie_breaks_to_first_with_flag(self):
        out = choose(self.sr(0.3), self.sr(0.3))
        assert out.choice is Choice.CHOICE_A and out.tie

    def test_argmax_invariant_under_positive_affine_maps(self):
        rng = random.Random(7)
        for _ in range(200):
            a, b = rng.uniform(-1, 1), rng.uniform(-1, 1)
            alpha, beta = rng.uniform(0.01, 5), rng.uniform(-3, 3)
            base = choose(self.sr(a), self.sr(b))
            mapped = choose(self.sr(alpha * a + beta), self.sr(alpha * b + beta))
            assert base.choice is mapped.choice
            assert base.tie == mapped.tie


class TestComboLattice:
    def test_exactly_thirty(self):
        assert len(enumerate_combos()) == 30

    def test_all_false_combo_is_first(self):
        combos = enumerate_combos()
        assert combos[0] == NormalizationCombo()
        assert combos[0].label == "none"

    def test_exclusions_absent(self):
        combos = set(enumerate_combos())
        assert NormalizationCombo(d=True, s=True) not in combos
        assert NormalizationCombo(d=True, q=True) not in combos
        assert NormalizationCombo(c=True, e=True) not in combos

    def test_deterministic_canonical_order(self):
        assert enumerate_combos() == enumerate_combos()
        labels = [c.label for c in enumerate_combos()]
        assert len(set(labels)) == 30

    def test_combo_apply_round_trip(self):
        base = EstimatorConfig()
        for combo in enumerate_combos():
            cfg = combo.apply(base)
            assert (cfg.match.mode is MatchMode.DIRECT) == combo.d
            assert cfg.match.f_prefilter == combo.f
            assert cfg.score_flags.s_enabled == combo.s
            assert cfg.match.q_normalized == combo.q
            assert cfg.score_flags.c_enabled == combo.c
            assert cfg.score_flags.e_enabled == combo.e

    def test_config_validation_rejects_lattice_violations(self):
        with pytest.raises(LatticeError, match="D excludes S"):
            EstimatorConfig(
                match=MatchConfig(mode=MatchMode.DIRECT),
                score_flags=ScoreNormFlags(s_enabled=True),
            )
        with pytest.raises(LatticeError, match="C excludes E"):
            EstimatorConfig(score_flags=ScoreNormFlags(c_enabled=True, e_enabled=True))


class TestInactiveFlagNoOps:
    def test_matching_flags_are_noops_for_kinds_without_matching(self):
        t = hand_table()
        for kind in (ScoreKind.TEMPORAL, ScoreKind.UNBALANCED, ScoreKind.MISSPECIFIED):
            base = cfg_for(kind)
            toggled = dataclasses.replace(
                base, match=dataclasses.replace(base.match, q_normalized=True)
            )
            r1, _ = delta_score(QUERY, CovariateSet((X1,)), InterventionSet((A1, A2)), t, base)
            r2, _ = delta_score(QUERY, CovariateSet((X1,)), InterventionSet((A1, A2)), t, toggled)
            assert r1.value == r2.value  # bit-for-bit

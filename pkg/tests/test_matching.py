import random

import pytest

from rock.backend.table import TemporalScoreTable
from rock.errors import EmptyAfterFilter, EmptyCovariates
from rock.events import Event
from rock.matching import (
    CovariateSet,
    InterventionSet,
    MatchConfig,
    MatchMode,
    PNorm,
    QForm,
    direct_vector,
    matched_set,
    prefilter_covariates,
    propensity_vector,
    scaled_distance,
    PropensityVector,
)
from rock.scores import RawDirectionalScores, ScoreNormFlags

E1 = Event("Alice walked into a restaurant.")
X1 = Event("Alice was hungry.")
X2 = Event("Alice left home.")
A1 = Event("Alice walked into a bar.")
A2 = Event("Bob walked into a restaurant.")

FLAGS = ScoreNormFlags()


def table_for(values: dict[tuple[Event, Event], float]) -> TemporalScoreTable:
    """Build a table whose symmetrized estimate equals the given value per ordered pair."""
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


class TestPrefilter:
    def test_strict_inequality_keeps(self):
        t = table_for({(X1, E1): 0.7, (E1, X1): 0.3})
        cfg = MatchConfig(f_prefilter=True)
        out = prefilter_covariates(CovariateSet((X1,)), E1, t, cfg, FLAGS)
        assert out.events == (X1,)

    def test_tie_drops_and_empty_raises(self):
        t = table_for({(X1, E1): 0.5, (E1, X1): 0.5})
        cfg = MatchConfig(f_prefilter=True)
        with pytest.raises(EmptyAfterFilter):
            prefilter_covariates(CovariateSet((X1,)), E1, t, cfg, FLAGS)

    def test_disabled_filter_is_identity(self):
        t = TemporalScoreTable()  # never consulted
        x = CovariateSet((X1, X2))
        assert prefilter_covariates(x, E1, t, MatchConfig(f_prefilter=False), FLAGS) is x

    def test_order_preserved(self):
        t = table_for({(X1, E1): 0.7, (E1, X1): 0.1, (X2, E1): 0.6, (E1, X2): 0.2})
        out = prefilter_covariates(
            CovariateSet((X2, X1)), E1, t, MatchConfig(f_prefilter=True), FLAGS
        )
        assert out.events == (X2, X1)


class TestPropensityVector:
    def test_subject_equal_to_treatment_gives_ones(self):
        t = table_for({(X1, E1): 0.5, (X2, E1): 0.3})
        x = CovariateSet((X1, X2))
        for q_form in QForm:
            for q_norm in (False, True):
                cfg = MatchConfig(q_form=q_form, q_normalized=q_norm)
                v = propensity_vector(E1, E1, x, t, cfg, FLAGS)
                assert v.coords == (1.0, 1.0)

    def test_reciprocal_substitution(self):
        t = table_for({(X1, E1): 0.5, (X1, A1): 0.25})
        cfg = MatchConfig(q_form=QForm.AS_WRITTEN_RECIPROCAL)
        v = propensity_vector(A1, E1, CovariateSet((X1,)), t, cfg, FLAGS)
        assert v.coords == (2.0,)

    def test_conditional_is_reciprocal_arrangement(self):
        t = table_for({(X1, E1): 0.5, (X1, A1): 0.25})
        cfg = MatchConfig(q_form=QForm.CONDITIONAL)
        v = propensity_vector(A1, E1, CovariateSet((X1,)), t, cfg, FLAGS)
        assert v.coords == (0.5,)

    def test_q_normalization_makes_proportional_tables_match_perfectly(self):
        # f(.,A) = 0.5 * f(.,E1) across the set -> normalized families coincide.
        t = table_for({(X1, E1): 0.2, (X2, E1): 0.6, (X1, A1): 0.1, (X2, A1): 0.3})
        cfg = MatchConfig(q_form=QForm.AS_WRITTEN_RECIPROCAL, q_normalized=True)
        x = CovariateSet((X1, X2))
        v = propensity_vector(A1, E1, x, t, cfg, FLAGS)
        assert v.coords[0] == pytest.approx(1.0)
        assert v.coords[1] == pytest.approx(1.0)
        anchor = propensity_vector(E1, E1, x, t, cfg, FLAGS)
        assert scaled_distance(v, anchor, PNorm.L1) == pytest.approx(0.0)

    def test_empty_covariates_error(self):
        with pytest.raises(EmptyCovariates):
            propensity_vector(A1, E1, CovariateSet(()), TemporalScoreTable(), MatchConfig(), FLAGS)


class TestDirectVector:
    def test_reads_subject_first_argument_order(self):
        t = table_for({(A1, X1): 0.3, (A1, X2): 0.9})
        v = direct_vector(A1, CovariateSet((X1, X2)), t, FLAGS)
        assert v.coords == (0.3, 0.9)

    def test_empty_covariates_error(self):
        with pytest.raises(EmptyCovariates):
            direct_vector(A1, CovariateSet(()), TemporalScoreTable(), FLAGS)


class TestMatchedSet:
    def hand_table(self):
        return table_for(
            {
                (X1, E1): 0.5,
                (X1, A1): 0.5,
                (X1, A2): 0.25,
            }
        )

    def test_hand_evaluated_selection(self):
        # q(A1) = (1.0) at distance 0; q(A2) = (2.0) at L1 distance 1.0.
        t = self.hand_table()
        cfg = MatchConfig(epsilon=0.5, p_norm=PNorm.L1)
        out = matched_set(InterventionSet((A1, A2)), E1, CovariateSet((X1,)), t, cfg, FLAGS)
        assert out.kept.events == (A1,)
        assert out.distances == (0.0, 1.0)

    def test_large_epsilon_keeps_everything(self):
        t = self.hand_table()
        cfg = MatchConfig(epsilon=1e9)
        out = matched_set(InterventionSet((A1, A2)), E1, CovariateSet((X1,)), t, cfg, FLAGS)
        assert out.kept.events == (A1, A2)

    def test_identical_vectors_match_at_epsilon_zero(self):
        t = self.hand_table()
        cfg = MatchConfig(epsilon=0.0)
        out = matched_set(InterventionSet((A1,)), E1, CovariateSet((X1,)), t, cfg, FLAGS)
        assert out.kept.events == (A1,)

    def test_boundary_is_inclusive(self):
        t = self.hand_table()
        cfg = MatchConfig(epsilon=1.0, p_norm=PNorm.L1)
        out = matched_set(InterventionSet((A2,)), E1, CovariateSet((X1,)), t, cfg, FLAGS)
        assert out.kept.events == (A2,)

    def test_empty_covariates_error(self):
        with pytest.raises(EmptyCovariates):
            matched_set(InterventionSet((A1,)), E1, CovariateSet(()), TemporalScoreTable(), MatchConfig(), FLAGS)


def random_universe(rng: random.Random, n_cov: int, n_int: int):
    e1 = Event(f"treatment {rng.random()}")
    xs = tuple(Event(f"cov {i} {rng.random()}") for i in range(n_cov))
    ats = tuple(Event(f"int {i} {rng.random()}") for i in range(n_int))
    values = {}
    for x in xs:
        values[(x, e1)] = rng.uniform(0.05, 1.0)
        values[(e1, x)] = rng.uniform(0.0, 1.0)
        for a in ats:
            values[(x, a)] = rng.uniform(0.05, 1.0)
            values[(a, x)] = rng.uniform(0.0, 1.0)
    return e1, xs, ats, table_for(values)


class TestMatchingProperties:
    def test_monotone_in_epsilon_and_permutation_invariant(self):
        rng = random.Random(1234)
        for trial in range(200):
            e1, xs, ats, t = random_universe(rng, rng.randint(1, 5), rng.randint(1, 6))
            mode = rng.choice(list(MatchMode))
            q_form = rng.choice(list(QForm))
            p = rng.choice(list(PNorm))
            eps_small, eps_big = sorted((rng.uniform(0, 2), rng.uniform(0, 2)))
            base = dict(p_norm=p, mode=mode, q_form=q_form, q_normalized=rng.random() < 0.5 and mode is not MatchMode.DIRECT)
            x = CovariateSet(xs)
            a_set = InterventionSet(ats)
            small = matched_set(a_set, e1, x, t, MatchConfig(epsilon=eps_small, **base), FLAGS)
            big = matched_set(a_set, e1, x, t, MatchConfig(epsilon=eps_big, **base), FLAGS)
            assert set(e.id for e in small.kept.events) <= set(e.id for e in big.kept.events)

            perm = list(xs)
            rng.shuffle(perm)
            permuted = matched_set(
                a_set, e1, CovariateSet(tuple(perm)), t, MatchConfig(epsilon=eps_small, **base), FLAGS
            )
            assert permuted.kept.events == small.kept.events
            assert permuted.distances == small.distances

    def test_self_match_for_any_epsilon(self):
        rng = random.Random(77)
        for _ in range(50):
            e1, xs, ats, t = random_universe(rng, 3, 2)
            a_set = InterventionSet((e1,) + ats)
            out = matched_set(a_set, e1, CovariateSet(xs), t, MatchConfig(epsilon=0.0), FLAGS)
            assert e1 in out.kept.events
            assert out.distances[0] == 0.0

    def test_l1_matches_subset_of_l2_matches(self):
        rng = random.Random(99)
        for _ in range(100):
            e1, xs, ats, t = random_universe(rng, 4, 5)
            eps = rng.uniform(0, 1)
            l1 = matched_set(
                InterventionSet(ats), e1, CovariateSet(xs), t, MatchConfig(epsilon=eps, p_norm=PNorm.L1), FLAGS
            )
            l2 = matched_set(
                InterventionSet(ats), e1, CovariateSet(xs), t, MatchConfig(epsilon=eps, p_norm=PNorm.L2), FLAGS
            )
            assert set(e.id for e in l1.kept.events) <= set(e.id for e in l2.kept.events)

    def test_distance_uses_covariate_count_divisor_for_both_norms(self):
        v = PropensityVector((3.0, 4.0), subject="s")
        anchor = PropensityVector((0.0, 0.0), subject="t")
        assert scaled_distance(v, anchor, PNorm.L1) == pytest.approx(7.0 / 2.0)
        assert scaled_distance(v, anchor, PNorm.L2) == pytest.approx(5.0 / 2.0)

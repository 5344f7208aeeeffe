"""Causal scoring between natural-language events via temporal-propensity matching."""

__version__ = "0.1.0"

from .events import (
    AsksFor,
    BenchmarkInstance,
    CausalQuery,
    Choice,
    Event,
    RoleConvention,
    ScoreResult,
    query_roles,
)
from .estimators import EstimatorConfig, NormalizationCombo, ScoreKind, choose, delta_score, enumerate_combos
from .matching import CovariateSet, InterventionSet, MatchConfig, MatchMode, PNorm, QForm
from .scores import Orientation, ScoreNormFlags

__all__ = [
    "AsksFor",
    "BenchmarkInstance",
    "CausalQuery",
    "Choice",
    "CovariateSet",
    "EstimatorConfig",
    "Event",
    "InterventionSet",
    "MatchConfig",
    "MatchMode",
    "NormalizationCombo",
    "Orientation",
    "PNorm",
    "QForm",
    "RoleConvention",
    "ScoreKind",
    "ScoreNormFlags",
    "ScoreResult",
    "choose",
    "delta_score",
    "enumerate_combos",
    "query_roles",
]

"""Rare-event physician targeting on bipartite physician-patient graphs.

The package learns class-conditional feature distributions from labelled
cohorts, wires physicians and patients into a factor graph whose coupling
says "a physician is positive iff at least one linked patient is", and runs
log-domain belief propagation (exact on tree components, damped elsewhere)
to score every entity.  Evaluation utilities focus on the imbalanced-regime
metrics that matter at a 1-in-201 prior: PPV, sensitivity, F1 and MCC.
"""

from .errors import (
    DomainError,
    FitError,
    IntegrityError,
    ParameterError,
    ParseError,
    RaregraphError,
    SchemaMismatchError,
)
from .families import BernoulliParam, CategoricalParam, GaussianParam, PoissonParam
from .cohort import Cohort, FeatureSchema, load_cohort, save_cohort
from .learning import ModelParams, fit, load_params, save_params
from .graph_engine import (
    FactorGraph,
    InferenceResult,
    build,
    run_inference,
)
from .evaluation import (
    ConfusionCounts,
    MetricsReport,
    baseline_score,
    confusion_at,
    crossval,
    curve_and_auc,
    graph_score,
    metrics,
)
from .synthgen import GenConfig, default_model_params, sample_cohort
from .estimators import BaselineTargetingModel, GraphTargetingModel

__version__ = "0.1.0"

__all__ = [
    "RaregraphError",
    "ParameterError",
    "DomainError",
    "FitError",
    "ParseError",
    "IntegrityError",
    "SchemaMismatchError",
    "BernoulliParam",
    "CategoricalParam",
    "PoissonParam",
    "GaussianParam",
    "Cohort",
    "FeatureSchema",
    "load_cohort",
    "save_cohort",
    "ModelParams",
    "fit",
    "load_params",
    "save_params",
    "FactorGraph",
    "InferenceResult",
    "build",
    "run_inference",
    "ConfusionCounts",
    "MetricsReport",
    "confusion_at",
    "metrics",
    "curve_and_auc",
    "baseline_score",
    "graph_score",
    "crossval",
    "GenConfig",
    "default_model_params",
    "sample_cohort",
    "BaselineTargetingModel",
    "GraphTargetingModel",
    "__version__",
]

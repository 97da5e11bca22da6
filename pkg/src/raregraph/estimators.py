"""Estimator-style wrappers over the fit/score pipeline.

Both classes follow the scikit-learn protocol — ``__init__`` stores
hyperparameters verbatim, ``fit`` learns state into trailing-underscore
attributes, ``get_params``/``set_params`` expose the hyperparameters for
cloning and grid search — without depending on scikit-learn itself.  The
"X" of these estimators is a labeled :class:`~raregraph.cohort.Cohort`;
``y`` is accepted and ignored so the signatures stay drop-in compatible.
"""

from __future__ import annotations

import numpy as np

from . import learning
from .cohort import Cohort
from .errors import FitError, ParameterError
from .evaluation import baseline_score
from .graph_engine import (
    DEFAULT_DAMPING,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    InferenceResult,
    build,
    run_inference,
)


class _TargetingModel:
    """Shared plumbing: hyperparameter handling and the fitted-params check."""

    _param_names = ("prior_eta", "smoothing")

    def __init__(self, prior_eta=learning.DEFAULT_PRIOR_ETA,
                 smoothing=learning.DEFAULT_SMOOTHING):
        self.prior_eta = prior_eta
        self.smoothing = smoothing

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **kwargs):
        for name, value in kwargs.items():
            if name not in self._param_names:
                raise ParameterError(
                    f"unknown parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters are {sorted(self._param_names)}"
                )
            setattr(self, name, value)
        return self

    def fit(self, cohort: Cohort, y=None):
        self.params_ = learning.fit(cohort, smoothing=self.smoothing,
                                    prior_eta=self.prior_eta)
        self.classes_ = np.array([0, 1])
        return self

    def _fitted_params(self) -> learning.ModelParams:
        params = getattr(self, "params_", None)
        if params is None:
            raise FitError(f"{type(self).__name__} is not fitted; call fit first")
        return params

    def predict_proba(self, cohort: Cohort) -> np.ndarray:
        pos = self.decision_scores(cohort)
        return np.column_stack([1.0 - pos, pos])

    def predict(self, cohort: Cohort, threshold: float = 0.5) -> np.ndarray:
        return (self.decision_scores(cohort) >= threshold).astype(np.int8)

    def decision_scores(self, cohort: Cohort) -> np.ndarray:
        raise NotImplementedError


class BaselineTargetingModel(_TargetingModel):
    """Per-physician classifier from physician features and the prior alone.

    No relational information: each physician is scored independently, so
    identical feature rows always tie.  This is the reference point the
    graph model is measured against.
    """

    def decision_scores(self, cohort: Cohort) -> np.ndarray:
        """Positive-class probability for every physician row."""
        return baseline_score(cohort, self._fitted_params())


class GraphTargetingModel(_TargetingModel):
    """Relational classifier: posteriors from belief propagation.

    ``respect_labels`` clamps observed labels during inference (useful for
    in-sample diagnostics); leave it off when scoring held-out physicians.
    """

    _param_names = _TargetingModel._param_names + (
        "damping", "tol", "max_iters", "respect_labels"
    )

    def __init__(self, prior_eta=learning.DEFAULT_PRIOR_ETA,
                 smoothing=learning.DEFAULT_SMOOTHING,
                 damping=DEFAULT_DAMPING, tol=DEFAULT_TOL,
                 max_iters=DEFAULT_MAX_ITERS, respect_labels=False):
        super().__init__(prior_eta=prior_eta, smoothing=smoothing)
        self.damping = damping
        self.tol = tol
        self.max_iters = max_iters
        self.respect_labels = respect_labels

    def inference_report(self, cohort: Cohort) -> InferenceResult:
        """Full posteriors plus per-component convergence diagnostics."""
        graph = build(cohort, self._fitted_params(),
                      respect_labels=self.respect_labels)
        return run_inference(graph, damping=self.damping, tol=self.tol,
                             max_iters=self.max_iters)

    def decision_scores(self, cohort: Cohort) -> np.ndarray:
        """Posterior positive probability for every physician row."""
        return self.inference_report(cohort).physician_posterior

    def patient_scores(self, cohort: Cohort) -> np.ndarray:
        """Posterior positive probability for every patient row."""
        return self.inference_report(cohort).patient_posterior

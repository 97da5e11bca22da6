"""Parametric distribution families behind the cohort model.

Four families cover every feature the model touches: Bernoulli for binary
indicators, Categorical for coded demographics, Poisson for event counts and
a full-covariance multivariate Gaussian for the claims summary vector.  Each
family offers log-density evaluation, closed-form maximum-likelihood fitting
and seeded sampling, vectorised over numpy arrays.

All densities are computed and returned in natural-log space: linear-space
products over 58+ per-code terms underflow float64 long before a cohort-sized
likelihood is assembled.

Parameter objects are frozen after construction and safe to share across
threads; sampling takes a caller-owned ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .errors import DomainError, FitError, ParameterError

# Floor for fitted Poisson rates: empty or all-zero count cells would
# otherwise produce a degenerate likelihood that poisons every posterior.
POISSON_RATE_FLOOR = 1e-6

# Starting diagonal boost for near-singular sample covariances; doubled
# until the Cholesky factorisation succeeds.
COV_REGULARIZATION_EPS = 1e-6

_SIMPLEX_TOL = 1e-12


def _freeze_array(obj, name, value, dtype=np.float64):
    arr = np.array(value, dtype=dtype)
    arr.flags.writeable = False
    object.__setattr__(obj, name, arr)
    return arr


@dataclass(frozen=True)
class BernoulliParam:
    """Bernoulli distribution over {0, 1} with success probability ``p``."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not np.isfinite(p) or not 0.0 <= p <= 1.0:
            raise ParameterError(f"Bernoulli p must lie in [0, 1], got {self.p!r}")
        object.__setattr__(self, "p", p)

    @classmethod
    def fit(cls, observations, smoothing: float = 0.0) -> "BernoulliParam":
        """MLE with optional add-constant smoothing: p = (k + s) / (n + 2s)."""
        obs = _as_binary(observations, "Bernoulli fit")
        if obs.size == 0:
            raise FitError("Bernoulli fit requires at least one observation")
        if smoothing < 0:
            raise FitError(f"smoothing must be >= 0, got {smoothing}")
        k = float(obs.sum())
        n = float(obs.size)
        return cls((k + smoothing) / (n + 2.0 * smoothing))

    def log_density(self, value):
        """Log-mass of ``value`` (0 or 1, scalar or array)."""
        v = _as_binary(value, "Bernoulli observation")
        with np.errstate(divide="ignore"):
            out = np.where(v == 1, np.log(self.p), np.log1p(-self.p))
        return _match_shape(out, value)

    def sample(self, rng: np.random.Generator, size=None):
        out = (rng.random(size) < self.p).astype(np.int64)
        return int(out) if size is None else out


@dataclass(frozen=True)
class CategoricalParam:
    """Categorical distribution over indices 0..C-1."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _freeze_array(self, "probs", self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise ParameterError("Categorical probs must be a nonempty 1-D vector")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ParameterError("Categorical probs must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > _SIMPLEX_TOL:
            raise ParameterError(
                f"Categorical probs must sum to 1 within {_SIMPLEX_TOL}, got {probs.sum()!r}"
            )

    @property
    def num_categories(self) -> int:
        return int(self.probs.size)

    @classmethod
    def fit(cls, observations, num_categories: int, smoothing: float = 0.0) -> "CategoricalParam":
        """MLE with add-constant smoothing: p_c = (count_c + s) / (n + C*s)."""
        obs = np.asarray(observations)
        if obs.size == 0:
            raise FitError("Categorical fit requires at least one observation")
        if smoothing < 0:
            raise FitError(f"smoothing must be >= 0, got {smoothing}")
        obs = _as_index(obs, num_categories, "Categorical fit")
        counts = np.bincount(obs, minlength=num_categories).astype(np.float64)
        probs = (counts + smoothing) / (obs.size + num_categories * smoothing)
        # Exact renormalisation so the simplex invariant holds bit-tight.
        return cls(probs / probs.sum())

    def log_density(self, value):
        v = _as_index(value, self.num_categories, "Categorical observation")
        with np.errstate(divide="ignore"):
            out = np.log(self.probs)[v]
        return _match_shape(out, value)

    def sample(self, rng: np.random.Generator, size=None):
        out = rng.choice(self.num_categories, size=size, p=self.probs)
        return out


@dataclass(frozen=True)
class PoissonParam:
    """Poisson distribution over nonnegative integer counts."""

    rate: float

    def __post_init__(self):
        rate = float(self.rate)
        if not np.isfinite(rate) or rate <= 0:
            raise ParameterError(f"Poisson rate must be positive, got {self.rate!r}")
        object.__setattr__(self, "rate", rate)

    @classmethod
    def fit(cls, observations, rate_floor: float = POISSON_RATE_FLOOR) -> "PoissonParam":
        """MLE is the sample mean, floored away from zero."""
        obs = np.asarray(observations, dtype=np.float64)
        if obs.size == 0:
            raise FitError("Poisson fit requires at least one observation")
        if np.any(obs < 0) or np.any(obs != np.floor(obs)):
            raise DomainError("Poisson fit observations must be nonnegative integers")
        return cls(max(float(obs.mean()), rate_floor))

    def log_density(self, value):
        v = np.asarray(value)
        if np.any(v < 0) or not np.issubdtype(v.dtype, np.integer) and np.any(v != np.floor(v)):
            raise DomainError(f"Poisson observation must be a nonnegative integer, got {value!r}")
        vf = v.astype(np.float64)
        out = vf * np.log(self.rate) - self.rate - gammaln(vf + 1.0)
        return _match_shape(out, value)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.poisson(self.rate, size=size)


@dataclass(frozen=True)
class GaussianParam:
    """Multivariate Gaussian with full covariance.

    The covariance must be symmetric (within 1e-12) and positive definite;
    a Cholesky factor is cached at construction so batched log-density calls
    cost one triangular solve.
    """

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = _freeze_array(self, "mean", self.mean)
        cov = _freeze_array(self, "cov", self.cov)
        d = mean.size
        if mean.ndim != 1 or cov.shape != (d, d):
            raise ParameterError(f"Gaussian mean/cov shapes inconsistent: {mean.shape} vs {cov.shape}")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ParameterError("Gaussian parameters must be finite")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ParameterError("Gaussian covariance must be symmetric within 1e-12")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ParameterError("Gaussian covariance is not positive definite") from exc
        _freeze_array(self, "chol", chol)

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    @classmethod
    def fit(cls, observations) -> "GaussianParam":
        """Sample mean and MLE covariance, with a doubling diagonal boost until PD.

        Raises :class:`FitError` when fewer than dim+1 rows are available; the
        caller is expected to fall back to parameters pooled across classes.
        """
        obs = np.atleast_2d(np.asarray(observations, dtype=np.float64))
        n, d = obs.shape
        if n < d + 1:
            raise FitError(
                f"Gaussian fit needs at least dim+1 = {d + 1} samples, got {n}; "
                "fall back to pooled parameters"
            )
        mean = obs.mean(axis=0)
        centered = obs - mean
        cov = centered.T @ centered / n
        cov = (cov + cov.T) / 2.0
        eps = COV_REGULARIZATION_EPS
        for _ in range(64):
            try:
                np.linalg.cholesky(cov)
                return cls(mean, cov)
            except np.linalg.LinAlgError:
                cov = cov + eps * np.eye(d)
                eps *= 2.0
        raise FitError("Gaussian covariance could not be regularised to PD")

    def log_density(self, value):
        v = np.asarray(value, dtype=np.float64)
        squeeze = v.ndim == 1
        v = np.atleast_2d(v)
        if v.shape[-1] != self.dim:
            raise DomainError(f"Gaussian observation must have dimension {self.dim}, got {v.shape[-1]}")
        z = solve_triangular(self.chol, (v - self.mean).T, lower=True).T
        logdet = 2.0 * np.log(np.diag(self.chol)).sum()
        out = -0.5 * (self.dim * np.log(2.0 * np.pi) + logdet + (z * z).sum(axis=1))
        return float(out[0]) if squeeze else out

    def sample(self, rng: np.random.Generator, size=None):
        n = 1 if size is None else int(size)
        z = rng.standard_normal((n, self.dim))
        out = self.mean + z @ self.chol.T
        return out[0] if size is None else out


# --------------------------------------------------------------------------
# Tag-based dispatch, for callers that carry the family as data.
# --------------------------------------------------------------------------

FAMILIES = {
    "bernoulli": BernoulliParam,
    "categorical": CategoricalParam,
    "poisson": PoissonParam,
    "gaussian": GaussianParam,
}


def _family_class(family: str):
    try:
        return FAMILIES[family]
    except KeyError:
        raise ParameterError(f"unknown distribution family {family!r}") from None


def log_density(family: str, params, value):
    """Natural-log density/mass of ``value`` under ``params`` of ``family``."""
    cls = _family_class(family)
    if not isinstance(params, cls):
        raise ParameterError(f"params {type(params).__name__} do not match family {family!r}")
    return params.log_density(value)


def fit_mle(family: str, observations, smoothing: float = 0.0, num_categories: int | None = None):
    """Closed-form maximum-likelihood fit.

    ``smoothing`` applies to Bernoulli and Categorical as add-constant counts
    and is ignored for Poisson and Gaussian.  Categorical additionally needs
    ``num_categories``.
    """
    cls = _family_class(family)
    if cls is BernoulliParam:
        return BernoulliParam.fit(observations, smoothing)
    if cls is CategoricalParam:
        if num_categories is None:
            raise FitError("Categorical fit requires num_categories")
        return CategoricalParam.fit(observations, num_categories, smoothing)
    if cls is PoissonParam:
        return PoissonParam.fit(observations)
    return GaussianParam.fit(observations)


def sample(family: str, params, rng: np.random.Generator, size=None):
    """Draw from ``params`` using the caller-owned generator ``rng``."""
    cls = _family_class(family)
    if not isinstance(params, cls):
        raise ParameterError(f"params {type(params).__name__} do not match family {family!r}")
    return params.sample(rng, size=size)


# --------------------------------------------------------------------------
# Helpers
# --------------------------------------------------------------------------


def _as_binary(value, what):
    v = np.asarray(value)
    if v.size and not np.isin(v, (0, 1)).all():
        raise DomainError(f"{what}: values must be 0 or 1")
    return v.astype(np.int64)


def _as_index(value, num_categories, what):
    v = np.asarray(value)
    if np.any(v != np.floor(v)):
        raise DomainError(f"{what}: category indices must be integers")
    v = v.astype(np.int64)
    if v.size and (v.min() < 0 or v.max() >= num_categories):
        raise DomainError(f"{what}: index outside [0, {num_categories})")
    return v


def _match_shape(out, reference):
    if np.ndim(reference) == 0 and np.ndim(out) == 0:
        return out.item()
    if np.ndim(reference) == 0:
        return out.item() if out.ndim == 0 else out
    return out

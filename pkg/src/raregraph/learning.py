"""Maximum-likelihood estimation of the cohort model's parameters.

Training data is fully labelled, and the log-likelihood separates into
independent per-class, per-feature terms, so every fit below is a closed
form from the distributions module.  The learned object bundles:

  * patient side: class prior, gender Bernoulli, age/region categoricals,
    per-code indicator Bernoullis and shifted-Poisson frequency rates;
  * physician side: gender Bernoulli, specialty categorical, patient-count
    Poisson and a full-covariance Gaussian over the claims summary vector.

Code frequencies follow a shifted model: indicator 0 forces frequency 0,
indicator 1 gives ``frequency ~ 1 + Poisson(rate_class)``, so rates are fit
on ``frequency - 1`` restricted to indicator-1 records of each class.

This module also evaluates per-record class-conditional log-likelihood
matrices — the evidence that the graph engine and the features-only
baseline both consume.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .cohort import Cohort
from .errors import FitError, SchemaMismatchError
from .families import (
    POISSON_RATE_FLOOR,
    BernoulliParam,
    CategoricalParam,
    GaussianParam,
    PoissonParam,
)

DEFAULT_PRIOR_ETA = 1.0 / 201.0
DEFAULT_SMOOTHING = 1.0

# Below this many physicians in a class, the 4-D claims Gaussian is fit on
# the pooled population instead (a 4x4 covariance from 4 rows is singular).
MIN_GAUSSIAN_CLASS_SIZE = 5

PARAMS_FORMAT_VERSION = 1

# Log-probabilities entering matrix products are clipped here instead of -inf:
# 0 * -inf is NaN, while 0 * LOG_FLOOR is exactly 0, and any selected floor
# term still drowns every finite likelihood.  Only unsmoothed fits can
# produce the boundary probabilities this guards against.
LOG_FLOOR = -1e300


@dataclass(frozen=True)
class ClassPair:
    """A (negative-class, positive-class) pair of fitted parameters."""

    neg: object
    pos: object

    def __getitem__(self, label: int):
        if label == 0:
            return self.neg
        if label == 1:
            return self.pos
        raise KeyError(f"class label must be 0 or 1, got {label!r}")


@dataclass(frozen=True)
class PatientParams:
    prior_eta: float
    gender: ClassPair          # BernoulliParam per class
    age: ClassPair             # CategoricalParam over age decades
    region: ClassPair          # CategoricalParam over 1-based region codes
    code_indicator: ClassPair  # tuple[BernoulliParam], length Q, per class
    code_frequency: ClassPair  # tuple[PoissonParam], length Q, per class


@dataclass(frozen=True)
class PhysicianParams:
    gender: ClassPair          # BernoulliParam
    specialty: ClassPair       # CategoricalParam
    patient_count: ClassPair   # PoissonParam
    claims: ClassPair          # GaussianParam


@dataclass(frozen=True)
class ModelParams:
    patient: PatientParams
    physician: PhysicianParams
    schema_fingerprint: str

    @property
    def num_codes(self) -> int:
        return len(self.patient.code_indicator.neg)


def _require_schema(cohort: Cohort, params: ModelParams) -> None:
    fp = cohort.schema.fingerprint()
    if fp != params.schema_fingerprint:
        raise SchemaMismatchError(
            f"params were fit on schema {params.schema_fingerprint!r} "
            f"but the cohort has {fp!r}"
        )


# --------------------------------------------------------------------------
# Fitting
# --------------------------------------------------------------------------


def fit(cohort: Cohort, smoothing: float = DEFAULT_SMOOTHING,
        prior_eta: float = DEFAULT_PRIOR_ETA) -> ModelParams:
    """Fit every model parameter from a fully labelled cohort.

    The class prior is configuration, never estimated: the 1-in-201 default
    reflects the case-control construction of the source population, not
    the training sample's class balance.
    """
    if not 0.0 < prior_eta < 1.0:
        raise FitError(f"prior_eta must lie in (0, 1), got {prior_eta}")
    if not cohort.all_labels_present():
        raise FitError("fitting requires labels on every patient and physician")

    pat, phy = cohort.patients, cohort.physicians
    pat_masks = [pat.labels == 0, pat.labels == 1]
    phy_masks = [phy.labels == 0, phy.labels == 1]
    for cls in (0, 1):
        if not pat_masks[cls].any():
            raise FitError(f"patient class {cls} has zero members")
        if not phy_masks[cls].any():
            raise FitError(f"physician class {cls} has zero members")

    patient = PatientParams(
        prior_eta=prior_eta,
        gender=ClassPair(*(BernoulliParam.fit(pat.gender[m], smoothing) for m in pat_masks)),
        age=ClassPair(*(
            CategoricalParam.fit(pat.age_decade[m], cohort.schema.num_age_decades, smoothing)
            for m in pat_masks
        )),
        region=ClassPair(*(
            CategoricalParam.fit(pat.region[m] - 1, cohort.schema.num_regions, smoothing)
            for m in pat_masks
        )),
        code_indicator=ClassPair(*(
            _fit_indicator_row(pat.code_indicators[m], smoothing) for m in pat_masks
        )),
        code_frequency=_fit_frequency_rates(pat, pat_masks),
    )

    if phy.claims_features is None:
        raise FitError(
            "cohort has no claims_features; run derive_physician_claims_features first"
        )
    physician = PhysicianParams(
        gender=ClassPair(*(BernoulliParam.fit(phy.gender[m], smoothing) for m in phy_masks)),
        specialty=ClassPair(*(
            CategoricalParam.fit(phy.specialty[m], cohort.schema.num_specialties, smoothing)
            for m in phy_masks
        )),
        patient_count=ClassPair(*(
            PoissonParam.fit(phy.patient_count[m]) for m in phy_masks
        )),
        claims=_fit_claims_gaussians(phy, phy_masks),
    )

    return ModelParams(
        patient=patient,
        physician=physician,
        schema_fingerprint=cohort.schema.fingerprint(),
    )


def _fit_indicator_row(indicators: np.ndarray, smoothing: float):
    n = indicators.shape[0]
    k = indicators.sum(axis=0, dtype=np.float64)
    probs = (k + smoothing) / (n + 2.0 * smoothing)
    return tuple(BernoulliParam(p) for p in probs)


def _fit_frequency_rates(pat, pat_masks) -> ClassPair:
    """Per-class shifted-Poisson rates on frequency-1 of indicator-1 records.

    Class cells with zero indicator-1 patients fall back to the rate pooled
    across both classes (and to the global floor when even the pool is
    empty); each fallback is reported as a warning naming the code.
    """
    ind = pat.code_indicators
    shifted = (pat.code_frequencies - 1) * ind  # zero wherever indicator is 0
    per_class = []
    counts = [ind[m].sum(axis=0, dtype=np.float64) for m in pat_masks]
    sums = [shifted[m].sum(axis=0, dtype=np.float64) for m in pat_masks]
    pooled_n = counts[0] + counts[1]
    pooled_sum = sums[0] + sums[1]
    for cls in (0, 1):
        rates = np.empty(ind.shape[1])
        for q in range(ind.shape[1]):
            if counts[cls][q] > 0:
                rates[q] = sums[cls][q] / counts[cls][q]
            elif pooled_n[q] > 0:
                warnings.warn(
                    f"code {q}: class {cls} has no indicator-1 patients; "
                    f"using the pooled frequency rate",
                    stacklevel=3,
                )
                rates[q] = pooled_sum[q] / pooled_n[q]
            else:
                warnings.warn(
                    f"code {q}: no indicator-1 patients in either class; "
                    f"using the floor rate",
                    stacklevel=3,
                )
                rates[q] = POISSON_RATE_FLOOR
        per_class.append(tuple(PoissonParam(max(r, POISSON_RATE_FLOOR)) for r in rates))
    return ClassPair(*per_class)


def _fit_claims_gaussians(phy, phy_masks) -> ClassPair:
    claims = phy.claims_features
    fitted = []
    for cls in (0, 1):
        rows = claims[phy_masks[cls]]
        if rows.shape[0] < MIN_GAUSSIAN_CLASS_SIZE:
            warnings.warn(
                f"physician class {cls} has only {rows.shape[0]} members; "
                f"claims Gaussian fit on the pooled population",
                stacklevel=3,
            )
            rows = claims
        fitted.append(GaussianParam.fit(rows))
    return ClassPair(*fitted)


# --------------------------------------------------------------------------
# Likelihood evaluation
# --------------------------------------------------------------------------


def patient_log_likelihoods(cohort: Cohort, params: ModelParams) -> np.ndarray:
    """(M, 2) matrix of log p(patient features | class), without the prior."""
    _require_schema(cohort, params)
    pat = cohort.patients
    pp = params.patient
    M = len(pat)
    Q = params.num_codes

    ind = pat.code_indicators.astype(np.float64)
    shifted = ((pat.code_frequencies - 1) * pat.code_indicators).astype(np.float64)
    # gammaln(freq) = log (freq-1)!, the class-independent shifted-Poisson term.
    # Frequencies are floored at 1 before gammaln so that indicator-0 cells
    # (frequency 0, where gammaln diverges) contribute exactly zero.
    log_fact = (
        pat.code_indicators * gammaln(np.maximum(pat.code_frequencies, 1).astype(np.float64))
    ).sum(axis=1)

    out = np.empty((M, 2))
    with np.errstate(divide="ignore"):
        for cls in (0, 1):
            g = pp.gender[cls].p
            gender_term = np.where(pat.gender == 1, np.log(g), np.log1p(-g))
            age_term = np.log(pp.age[cls].probs)[pat.age_decade]
            region_term = np.log(pp.region[cls].probs)[pat.region - 1]

            eta = np.array([b.p for b in pp.code_indicator[cls]])
            rates = np.array([p.rate for p in pp.code_frequency[cls]])
            log_eta = np.maximum(np.log(eta), LOG_FLOOR)
            log_not_eta = np.maximum(np.log1p(-eta), LOG_FLOOR)
            ind_term = ind @ log_eta + (1.0 - ind) @ log_not_eta
            freq_term = shifted @ np.log(rates) - ind @ rates - log_fact

            out[:, cls] = gender_term + age_term + region_term + ind_term + freq_term
    return out


def physician_log_likelihoods(cohort: Cohort, params: ModelParams) -> np.ndarray:
    """(N, 2) matrix of log p(physician features | class)."""
    _require_schema(cohort, params)
    phy = cohort.physicians
    if phy.claims_features is None:
        raise FitError("cohort has no claims_features; derive them before scoring")
    dp = params.physician
    N = len(phy)

    out = np.empty((N, 2))
    counts = phy.patient_count.astype(np.float64)
    count_log_fact = gammaln(counts + 1.0)
    with np.errstate(divide="ignore"):
        for cls in (0, 1):
            g = dp.gender[cls].p
            gender_term = np.where(phy.gender == 1, np.log(g), np.log1p(-g))
            spec_term = np.log(dp.specialty[cls].probs)[phy.specialty]
            rate = dp.patient_count[cls].rate
            count_term = counts * np.log(rate) - rate - count_log_fact
            claims_term = dp.claims[cls].log_density(phy.claims_features)
            out[:, cls] = gender_term + spec_term + count_term + claims_term
    return out


def log_likelihood(cohort: Cohort, params: ModelParams) -> float:
    """Joint log-likelihood of a fully labelled cohort: evidence plus prior terms."""
    if cohort.num_patients == 0 and cohort.num_physicians == 0:
        return 0.0
    if not cohort.all_labels_present():
        raise FitError("log_likelihood requires labels on every record")
    eta = params.patient.prior_eta
    pat_ll = patient_log_likelihoods(cohort, params)
    phy_ll = physician_log_likelihoods(cohort, params)
    x = cohort.patients.labels.astype(np.int64)
    y = cohort.physicians.labels.astype(np.int64)
    prior = np.where(x == 1, np.log(eta), np.log1p(-eta)).sum()
    return float(pat_ll[np.arange(len(x)), x].sum()
                 + phy_ll[np.arange(len(y)), y].sum() + prior)


# --------------------------------------------------------------------------
# params.json
# --------------------------------------------------------------------------


def params_to_json_dict(params: ModelParams) -> dict:
    pp, dp = params.patient, params.physician
    return {
        "format_version": PARAMS_FORMAT_VERSION,
        "schema_fingerprint": params.schema_fingerprint,
        "patient": {
            "prior_eta": pp.prior_eta,
            "gender": {"neg": pp.gender.neg.p, "pos": pp.gender.pos.p},
            "age": {"neg": pp.age.neg.probs.tolist(), "pos": pp.age.pos.probs.tolist()},
            "region": {"neg": pp.region.neg.probs.tolist(), "pos": pp.region.pos.probs.tolist()},
            "code_indicator": {
                "neg": [b.p for b in pp.code_indicator.neg],
                "pos": [b.p for b in pp.code_indicator.pos],
            },
            "code_frequency": {
                "neg": [p.rate for p in pp.code_frequency.neg],
                "pos": [p.rate for p in pp.code_frequency.pos],
            },
        },
        "physician": {
            "gender": {"neg": dp.gender.neg.p, "pos": dp.gender.pos.p},
            "specialty": {
                "neg": dp.specialty.neg.probs.tolist(),
                "pos": dp.specialty.pos.probs.tolist(),
            },
            "patient_count": {"neg": dp.patient_count.neg.rate, "pos": dp.patient_count.pos.rate},
            "claims": {
                "neg": {"mean": dp.claims.neg.mean.tolist(), "cov": dp.claims.neg.cov.tolist()},
                "pos": {"mean": dp.claims.pos.mean.tolist(), "cov": dp.claims.pos.cov.tolist()},
            },
        },
    }


def params_from_json_dict(doc: dict) -> ModelParams:
    version = doc.get("format_version")
    if version != PARAMS_FORMAT_VERSION:
        raise SchemaMismatchError(f"unsupported params format_version {version!r}")
    p, d = doc["patient"], doc["physician"]
    patient = PatientParams(
        prior_eta=float(p["prior_eta"]),
        gender=ClassPair(BernoulliParam(p["gender"]["neg"]), BernoulliParam(p["gender"]["pos"])),
        age=ClassPair(CategoricalParam(p["age"]["neg"]), CategoricalParam(p["age"]["pos"])),
        region=ClassPair(
            CategoricalParam(p["region"]["neg"]), CategoricalParam(p["region"]["pos"])
        ),
        code_indicator=ClassPair(
            tuple(BernoulliParam(v) for v in p["code_indicator"]["neg"]),
            tuple(BernoulliParam(v) for v in p["code_indicator"]["pos"]),
        ),
        code_frequency=ClassPair(
            tuple(PoissonParam(v) for v in p["code_frequency"]["neg"]),
            tuple(PoissonParam(v) for v in p["code_frequency"]["pos"]),
        ),
    )
    physician = PhysicianParams(
        gender=ClassPair(BernoulliParam(d["gender"]["neg"]), BernoulliParam(d["gender"]["pos"])),
        specialty=ClassPair(
            CategoricalParam(d["specialty"]["neg"]), CategoricalParam(d["specialty"]["pos"])
        ),
        patient_count=ClassPair(
            PoissonParam(d["patient_count"]["neg"]), PoissonParam(d["patient_count"]["pos"])
        ),
        claims=ClassPair(
            GaussianParam(d["claims"]["neg"]["mean"], d["claims"]["neg"]["cov"]),
            GaussianParam(d["claims"]["pos"]["mean"], d["claims"]["pos"]["cov"]),
        ),
    )
    return ModelParams(
        patient=patient,
        physician=physician,
        schema_fingerprint=str(doc["schema_fingerprint"]),
    )


def save_params(params: ModelParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_json_dict(params), indent=2) + "\n")


def load_params(path) -> ModelParams:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatchError(f"{path}: invalid params JSON at line {exc.lineno}") from exc
    return params_from_json_dict(doc)

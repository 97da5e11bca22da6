"""Seeded synthetic cohorts with known generating parameters.

Samples complete labeled cohorts from the same generative story the model
assumes: patient labels are independent Bernoulli(eta) draws, patient
features come from the class-conditional families, physicians link to
patients through a configurable wiring scheme, physician labels are the OR
of their linked patients' labels, and physician features are then sampled
conditional on the realized label.

Default generating parameters use published point estimates from a real
rare-disease claims cohort where numbers exist (gender and region
probabilities, the five headline clinical-code indicator pairs, physician
gender, patient-count rates, and the 4-d claims Gaussians).  Everything
that was never reported as a number — age-decade profiles, the specialty
distribution, per-code frequency rates, and the remaining 53 code indicator
pairs — is a synthetic profile invented here, chosen to respect the known
qualitative shape (e.g. the negative age mode in the thirties vs. the
positive mode in the fifties).

Two wiring schemes:

``uniform``
    Each patient draws a degree d ~ 1 + Poisson(degree_mean) and attaches
    to d physicians chosen uniformly (duplicates collapsed).  Physicians
    that end up with no patients are given one random patient, so the
    degree >= 1 invariant always holds.  This is the default and matches
    the published per-patient link average of ~5.9.

``class_aware``
    Physicians draw an intended class first, then a panel size from the
    class-conditional patient-count Poisson; intended-negative physicians
    sample their panel from negative patients only, intended-positive ones
    from the whole population.  This concentrates both physician classes
    enough to estimate class-conditional physician parameters from one
    cohort, which uniform wiring cannot do at a realistic prior.

The ``signal`` knob interpolates the *patient* class-conditional parameters
between full separation (1.0) and the prior-weighted mixture (0.0, classes
indistinguishable).  Physician parameters are untouched; the marginal
patient feature distribution is the same at every knob setting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .cohort import (
    Cohort,
    EdgeList,
    FeatureSchema,
    PatientTable,
    PhysicianTable,
    save_cohort,
)
from .errors import IntegrityError, ParameterError
from .learning import (
    DEFAULT_PRIOR_ETA,
    ClassPair,
    ModelParams,
    PatientParams,
    PhysicianParams,
    params_from_json_dict,
    params_to_json_dict,
)
from .families import BernoulliParam, CategoricalParam, GaussianParam, PoissonParam

WIRING_MODES = ("uniform", "class_aware")

# ---- published point estimates -------------------------------------------

_PATIENT_GENDER = (0.3812, 0.2689)
_REGION_NEG = (0.394, 0.223, 0.217, 0.166)
_REGION_POS_RAW = (0.316, 0.303, 0.194, 0.186)   # sums to 0.999; normalized below
_TOP_CODE_INDICATOR = (
    (0.0031, 0.0592),
    (0.0280, 0.4184),
    (0.0054, 0.0357),
    (0.0482, 0.2685),
    (0.0152, 0.0414),
)
_PHYSICIAN_GENDER = (0.8108, 0.7975)
_PATIENT_COUNT_RATE = (20.1514, 29.0939)
_CLAIMS_MEAN = (
    (0.001, 0.006, 0.013, -0.026),
    (-0.007, -0.042, -0.097, 0.191),
)
_CLAIMS_COV = (
    (
        (0.977, 0.098, 0.820, 0.727),
        (0.098, 1.108, 0.246, 0.136),
        (0.820, 0.246, 0.997, 0.727),
        (0.727, 0.136, 0.727, 0.897),
    ),
    (
        (1.171, 0.066, 0.952, 1.011),
        (0.066, 0.216, 0.085, 0.055),
        (0.952, 0.085, 1.013, 0.919),
        (1.011, 0.055, 0.919, 1.704),
    ),
)
# Five most common specialties (published class-conditional shares).
_TOP_SPECIALTY = (
    (0.1563, 0.2518),
    (0.0778, 0.0991),
    (0.0857, 0.0602),
    (0.0851, 0.0583),
    (0.0297, 0.0418),
)

# ---- synthetic profiles (quantities never reported as numbers) -----------

# Age-decade profiles: negative mode in the thirties, positive in the
# fifties, with the positive class shifted older overall.
_AGE_NEG = (0.02, 0.06, 0.12, 0.20, 0.17, 0.14, 0.11, 0.09, 0.06, 0.03)
_AGE_POS = (0.01, 0.03, 0.07, 0.12, 0.16, 0.22, 0.17, 0.12, 0.07, 0.03)

# Remaining specialty mass split over seven synthetic categories so that
# each class sums to one.
_TAIL_SPECIALTY_NEG = (0.16, 0.12, 0.09, 0.08, 0.06, 0.04, 0.0154)
_TAIL_SPECIALTY_POS = (0.10, 0.13, 0.07, 0.06, 0.05, 0.03, 0.0488)

# Shifted-Poisson frequency rates for the five headline codes (rates are
# unpublished; large values keep relative estimation error small).
_TOP_CODE_RATE = ((150.0, 180.0), (160.0, 240.0), (300.0, 320.0),
                  (170.0, 200.0), (130.0, 140.0))

NUM_CODES = 58
_NUM_SYNTHETIC_CODES = NUM_CODES - len(_TOP_CODE_INDICATOR)
_SYNTHETIC_PROFILE_SEED = 58


def _synthetic_code_profile():
    """Deterministic indicator/rate pairs for the 53 unpublished codes."""
    rng = np.random.default_rng(_SYNTHETIC_PROFILE_SEED)
    p_neg = rng.uniform(0.10, 0.55, _NUM_SYNTHETIC_CODES)
    p_pos = np.clip(p_neg * rng.uniform(0.7, 1.4, _NUM_SYNTHETIC_CODES), 0.05, 0.65)
    r_neg = rng.uniform(30.0, 60.0, _NUM_SYNTHETIC_CODES)
    r_pos = np.clip(r_neg * rng.uniform(0.8, 1.25, _NUM_SYNTHETIC_CODES), 25.0, 75.0)
    return p_neg, p_pos, r_neg, r_pos


def default_model_params(prior_eta: float = DEFAULT_PRIOR_ETA) -> ModelParams:
    """Full-separation generating parameters (58 codes, 12 specialties)."""
    p_neg, p_pos, r_neg, r_pos = _synthetic_code_profile()
    ind_neg = tuple(BernoulliParam(p) for p, _ in _TOP_CODE_INDICATOR) + tuple(
        BernoulliParam(p) for p in p_neg
    )
    ind_pos = tuple(BernoulliParam(p) for _, p in _TOP_CODE_INDICATOR) + tuple(
        BernoulliParam(p) for p in p_pos
    )
    rate_neg = tuple(PoissonParam(r) for r, _ in _TOP_CODE_RATE) + tuple(
        PoissonParam(r) for r in r_neg
    )
    rate_pos = tuple(PoissonParam(r) for _, r in _TOP_CODE_RATE) + tuple(
        PoissonParam(r) for r in r_pos
    )

    region_pos = np.asarray(_REGION_POS_RAW) / np.sum(_REGION_POS_RAW)
    patient = PatientParams(
        prior_eta=prior_eta,
        gender=ClassPair(*(BernoulliParam(p) for p in _PATIENT_GENDER)),
        age=ClassPair(CategoricalParam(_AGE_NEG), CategoricalParam(_AGE_POS)),
        region=ClassPair(CategoricalParam(_REGION_NEG), CategoricalParam(region_pos)),
        code_indicator=ClassPair(ind_neg, ind_pos),
        code_frequency=ClassPair(rate_neg, rate_pos),
    )

    spec_neg = tuple(p for p, _ in _TOP_SPECIALTY) + _TAIL_SPECIALTY_NEG
    spec_pos = tuple(p for _, p in _TOP_SPECIALTY) + _TAIL_SPECIALTY_POS
    physician = PhysicianParams(
        gender=ClassPair(*(BernoulliParam(p) for p in _PHYSICIAN_GENDER)),
        specialty=ClassPair(CategoricalParam(spec_neg), CategoricalParam(spec_pos)),
        patient_count=ClassPair(*(PoissonParam(r) for r in _PATIENT_COUNT_RATE)),
        claims=ClassPair(*(
            GaussianParam(m, c) for m, c in zip(_CLAIMS_MEAN, _CLAIMS_COV)
        )),
    )

    schema = FeatureSchema(num_codes=NUM_CODES, num_specialties=len(spec_neg))
    return ModelParams(patient=patient, physician=physician,
                       schema_fingerprint=schema.fingerprint())


def apply_signal(params: ModelParams, signal: float, mix_eta: float) -> ModelParams:
    """Interpolate patient class parameters toward their mixture.

    ``signal = 1`` returns the params unchanged; ``signal = 0`` replaces
    both patient classes with the eta-weighted mixture of the two, so the
    classes carry no feature information while the marginal distribution
    stays put.  Physician parameters always pass through untouched.
    """
    if not 0.0 <= signal <= 1.0:
        raise ParameterError(f"signal must lie in [0, 1], got {signal}")
    if not 0.0 < mix_eta < 1.0:
        raise ParameterError(f"mix_eta must lie in (0, 1), got {mix_eta}")
    if signal == 1.0:
        return params

    w = np.array([1.0 - mix_eta, mix_eta])

    def blend(a, b):
        mix = w[0] * a + w[1] * b
        return (1.0 - signal) * mix + signal * a, (1.0 - signal) * mix + signal * b

    def bern(pair):
        lo, hi = blend(pair.neg.p, pair.pos.p)
        return ClassPair(BernoulliParam(lo), BernoulliParam(hi))

    def cat(pair):
        lo, hi = blend(pair.neg.probs, pair.pos.probs)
        return ClassPair(CategoricalParam(lo), CategoricalParam(hi))

    def rates(pair):
        out = ([], [])
        for pn, pp in zip(pair.neg, pair.pos):
            lo, hi = blend(pn.rate, pp.rate)
            out[0].append(PoissonParam(lo))
            out[1].append(PoissonParam(hi))
        return ClassPair(tuple(out[0]), tuple(out[1]))

    def berns(pair):
        out = ([], [])
        for bn, bp in zip(pair.neg, pair.pos):
            lo, hi = blend(bn.p, bp.p)
            out[0].append(BernoulliParam(lo))
            out[1].append(BernoulliParam(hi))
        return ClassPair(tuple(out[0]), tuple(out[1]))

    pp = params.patient
    patient = PatientParams(
        prior_eta=pp.prior_eta,
        gender=bern(pp.gender),
        age=cat(pp.age),
        region=cat(pp.region),
        code_indicator=berns(pp.code_indicator),
        code_frequency=rates(pp.code_frequency),
    )
    return replace(params, patient=patient)


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GenConfig:
    """Everything needed to sample one cohort deterministically."""

    num_physicians: int
    num_patients: int
    prior_eta: float = DEFAULT_PRIOR_ETA
    signal: float = 1.0
    degree_mean: float = 4.9       # patient excess degree: d ~ 1 + Poisson(mean)
    claims_rate: float = 3.0       # per-edge excess claims: c ~ 1 + Poisson(rate)
    wiring: str = "uniform"
    positive_physician_fraction: float = 0.5   # class_aware wiring only
    seed: int = 0
    params: ModelParams = None     # None -> default_model_params(prior_eta)

    def __post_init__(self):
        if self.num_physicians < 1 or self.num_patients < 1:
            raise ParameterError(
                f"need at least one physician and one patient, got "
                f"{self.num_physicians} / {self.num_patients}"
            )
        if not 0.0 <= self.prior_eta < 1.0:
            raise ParameterError(f"prior_eta must lie in [0, 1), got {self.prior_eta}")
        if not 0.0 <= self.signal <= 1.0:
            raise ParameterError(f"signal must lie in [0, 1], got {self.signal}")
        if self.degree_mean < 0 or self.claims_rate < 0:
            raise ParameterError("degree_mean and claims_rate must be >= 0")
        if self.wiring not in WIRING_MODES:
            raise ParameterError(
                f"wiring must be one of {WIRING_MODES}, got {self.wiring!r}"
            )
        if not 0.0 < self.positive_physician_fraction < 1.0:
            raise ParameterError("positive_physician_fraction must lie in (0, 1)")
        if int(self.seed) < 0:
            raise ParameterError(f"seed must be >= 0, got {self.seed}")


def effective_params(config: GenConfig) -> ModelParams:
    """The class-conditional parameters actually used for sampling.

    This is the ground truth a fit on the sampled cohort should recover:
    the configured (or default) params with the signal knob applied.  The
    mixture weight uses the configured prior; a prior of zero degenerates
    to the negative-class parameters.
    """
    base = config.params if config.params is not None else default_model_params(
        config.prior_eta if config.prior_eta > 0 else DEFAULT_PRIOR_ETA
    )
    if config.signal == 1.0:
        return base
    mix = config.prior_eta if config.prior_eta > 0 else 1e-12
    return apply_signal(base, config.signal, mix)


def gen_config_to_json_dict(config: GenConfig) -> dict:
    doc = {
        "num_physicians": config.num_physicians,
        "num_patients": config.num_patients,
        "prior_eta": config.prior_eta,
        "signal": config.signal,
        "degree_mean": config.degree_mean,
        "claims_rate": config.claims_rate,
        "wiring": config.wiring,
        "positive_physician_fraction": config.positive_physician_fraction,
        "seed": int(config.seed),
        "params": None if config.params is None
        else params_to_json_dict(config.params),
    }
    return doc


def gen_config_from_json_dict(doc: dict) -> GenConfig:
    try:
        params_doc = doc.get("params")
        return GenConfig(
            num_physicians=int(doc["num_physicians"]),
            num_patients=int(doc["num_patients"]),
            prior_eta=float(doc.get("prior_eta", DEFAULT_PRIOR_ETA)),
            signal=float(doc.get("signal", 1.0)),
            degree_mean=float(doc.get("degree_mean", 4.9)),
            claims_rate=float(doc.get("claims_rate", 3.0)),
            wiring=str(doc.get("wiring", "uniform")),
            positive_physician_fraction=float(
                doc.get("positive_physician_fraction", 0.5)
            ),
            seed=int(doc.get("seed", 0)),
            params=None if params_doc is None else params_from_json_dict(params_doc),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"malformed generator config ({exc})") from exc


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------


def _categorical(rng, cdf_by_class, labels):
    """Class-conditional categorical draws from one uniform block."""
    u = rng.random(labels.size)
    lo = np.searchsorted(cdf_by_class[0], u, side="right")
    hi = np.searchsorted(cdf_by_class[1], u, side="right")
    return np.where(labels == 1, hi, lo)


def _cdf_pair(pair):
    return [np.cumsum(pair[c].probs)[:-1] for c in (0, 1)]


def _draw_distinct(rng, pool: np.ndarray, k: int) -> np.ndarray:
    """k distinct elements of pool, uniform, via draw-and-topup rejection."""
    if k > pool.size:
        raise IntegrityError(
            f"cannot draw {k} distinct patients from a pool of {pool.size}"
        )
    seen: dict = {}
    while len(seen) < k:
        for v in rng.integers(0, pool.size, k - len(seen)):
            seen.setdefault(int(v), None)
    return pool[np.fromiter(seen.keys(), dtype=np.int64, count=k)]


def _wire_uniform(rng, config, x):
    M, N = config.num_patients, config.num_physicians
    deg = 1 + rng.poisson(config.degree_mean, M)
    targets = rng.integers(0, N, int(deg.sum()))
    pat_rep = np.repeat(np.arange(M, dtype=np.int64), deg)
    key = np.unique(pat_rep * N + targets)    # collapse duplicate links
    pat_e, phy_e = key // N, key % N

    present = np.zeros(N, dtype=bool)
    present[phy_e] = True
    orphans = np.flatnonzero(~present)
    if orphans.size:
        adopt = rng.integers(0, M, orphans.size)
        pat_e = np.concatenate([pat_e, adopt])
        phy_e = np.concatenate([phy_e, orphans])
    return phy_e, pat_e, None


def _wire_class_aware(rng, config, x):
    N = config.num_physicians
    dp = effective_params(config).physician
    intended = (rng.random(N) < config.positive_physician_fraction).astype(np.int8)
    lam = np.where(intended == 1, dp.patient_count.pos.rate, dp.patient_count.neg.rate)
    deg = rng.poisson(lam)
    while np.any(deg == 0):                   # panel size must be >= 1
        zero = deg == 0
        deg[zero] = rng.poisson(lam[zero])

    neg_pool = np.flatnonzero(x == 0)
    all_pool = np.arange(config.num_patients, dtype=np.int64)
    phy_e = np.repeat(np.arange(N, dtype=np.int64), deg)
    pat_e = np.empty(int(deg.sum()), dtype=np.int64)
    offset = 0
    for i in range(N):
        pool = all_pool if intended[i] == 1 else neg_pool
        pat_e[offset:offset + deg[i]] = _draw_distinct(rng, pool, int(deg[i]))
        offset += deg[i]
    return phy_e, pat_e, deg


def sample_cohort(config: GenConfig) -> Cohort:
    """Draw one fully labeled cohort; deterministic in config.seed."""
    rng = np.random.default_rng(int(config.seed))
    params = effective_params(config)
    pp, dp = params.patient, params.physician
    M, N = config.num_patients, config.num_physicians
    Q = params.num_codes

    # -- patients ----------------------------------------------------------
    x = (rng.random(M) < config.prior_eta).astype(np.int8)
    g = np.array([pp.gender.neg.p, pp.gender.pos.p])
    pat_gender = (rng.random(M) < g[x]).astype(np.int8)
    pat_age = _categorical(rng, _cdf_pair(pp.age), x).astype(np.int8)
    pat_region = (_categorical(rng, _cdf_pair(pp.region), x) + 1).astype(np.int8)

    ind_p = np.array([[b.p for b in pp.code_indicator[c]] for c in (0, 1)])
    indicators = (rng.random((M, Q)) < ind_p[x]).astype(np.int8)
    rate = np.array([[r.rate for r in pp.code_frequency[c]] for c in (0, 1)])
    frequencies = np.zeros((M, Q), dtype=np.int64)
    hot = indicators == 1
    frequencies[hot] = 1 + rng.poisson(rate[x][hot])

    # -- wiring ------------------------------------------------------------
    wire = _wire_uniform if config.wiring == "uniform" else _wire_class_aware
    phy_e, pat_e, drawn_deg = wire(rng, config, x)
    order = np.lexsort((pat_e, phy_e))
    phy_e, pat_e = phy_e[order], pat_e[order]
    claim_count = 1 + rng.poisson(config.claims_rate, phy_e.size)

    # -- physicians --------------------------------------------------------
    pos_link = np.bincount(phy_e[x[pat_e] == 1], minlength=N)
    y = (pos_link > 0).astype(np.int8)
    degree = np.bincount(phy_e, minlength=N) if drawn_deg is None else drawn_deg

    g = np.array([dp.gender.neg.p, dp.gender.pos.p])
    phy_gender = (rng.random(N) < g[y]).astype(np.int8)
    phy_spec = _categorical(rng, _cdf_pair(dp.specialty), y).astype(np.int16)
    z = rng.standard_normal((N, len(dp.claims.neg.mean)))
    claims = np.empty_like(z)
    for cls in (0, 1):
        rows = y == cls
        gauss = dp.claims[cls]
        claims[rows] = gauss.mean + z[rows] @ gauss.chol.T

    schema = FeatureSchema(
        num_codes=Q,
        num_specialties=dp.specialty.neg.num_categories,
        num_regions=pp.region.neg.num_categories,
        num_age_decades=pp.age.neg.num_categories,
    )
    cohort = Cohort(
        patients=PatientTable(
            ids=np.array([f"p{j}" for j in range(M)]),
            labels=x,
            gender=pat_gender,
            age_decade=pat_age,
            region=pat_region,
            code_indicators=indicators,
            code_frequencies=frequencies,
        ),
        physicians=PhysicianTable(
            ids=np.array([f"d{i}" for i in range(N)]),
            labels=y,
            gender=phy_gender,
            specialty=phy_spec,
            patient_count=np.asarray(degree, dtype=np.int64),
            claims_features=claims,
        ),
        edges=EdgeList(phy_e, pat_e, claim_count),
        schema=schema,
    )
    return cohort.validate(require_labels=True)


def generate_to_directory(config: GenConfig, directory) -> Cohort:
    """Sample a cohort and write it plus gentruth.json (the config echo)."""
    cohort = sample_cohort(config)
    d = Path(directory)
    save_cohort(cohort, d)
    truth = {
        "config": gen_config_to_json_dict(config),
        "effective_params": params_to_json_dict(effective_params(config)),
    }
    (d / "gentruth.json").write_text(
        json.dumps(truth, indent=2, sort_keys=True) + "\n"
    )
    return cohort

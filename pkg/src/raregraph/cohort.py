"""Data model for linked physician/patient populations.

A :class:`Cohort` bundles three columnar tables — patients, physicians and
the edge list that links them — plus a :class:`FeatureSchema` describing
feature dimensionalities.  Everything is stored as numpy arrays indexed by
position; entity ids are carried alongside for serialization and reporting.

The module also owns the on-disk representation (``patients.csv``,
``physicians.csv``, ``edges.csv``, ``schema.json``), derived physician
claims features, and the leakage-safe train/test split in which any patient
touching a held-out physician is excluded from training.

Conventions:
  * labels are stored as int8 with -1 meaning "unobserved";
  * ``region`` is 1-based (1..num_regions) as in the source coding, while
    ``age_decade`` and ``specialty`` are 0-based indices;
  * code frequencies satisfy ``freq >= 1`` exactly where the matching
    indicator is 1, and ``freq == 0`` where it is 0.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import IntegrityError, ParseError

_ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]+$")

# Patient-count / claims feature dimensions: (max, min, sum, avg).
CLAIMS_DIM = 4
CLAIMS_STD_FLOOR = 1e-9

SCHEMA_FORMAT_VERSION = 1


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureSchema:
    """Feature dimensionalities plus claims-standardization statistics."""

    num_codes: int = 58
    num_specialties: int = 189
    num_regions: int = 4
    num_age_decades: int = 10
    claims_mean: np.ndarray = None
    claims_std: np.ndarray = None

    def __post_init__(self):
        if self.num_codes < 1 or self.num_specialties < 1:
            raise IntegrityError("schema dimensions must be >= 1")
        mean = np.zeros(CLAIMS_DIM) if self.claims_mean is None else np.asarray(
            self.claims_mean, dtype=np.float64
        )
        std = np.ones(CLAIMS_DIM) if self.claims_std is None else np.asarray(
            self.claims_std, dtype=np.float64
        )
        if mean.shape != (CLAIMS_DIM,) or std.shape != (CLAIMS_DIM,):
            raise IntegrityError(f"claims standardization must be length-{CLAIMS_DIM} vectors")
        if np.any(std <= 0) or not np.all(np.isfinite(mean)) or not np.all(np.isfinite(std)):
            raise IntegrityError("claims std entries must be finite and > 0")
        object.__setattr__(self, "claims_mean", _frozen(mean))
        object.__setattr__(self, "claims_std", _frozen(std))

    def fingerprint(self) -> str:
        """Stable token identifying the feature space; stored inside fitted params."""
        parts = [
            f"codes={self.num_codes}",
            f"specialties={self.num_specialties}",
            f"regions={self.num_regions}",
            f"age_decades={self.num_age_decades}",
        ]
        return ";".join(parts)

    def to_json_dict(self) -> dict:
        return {
            "format_version": SCHEMA_FORMAT_VERSION,
            "num_codes": self.num_codes,
            "num_specialties": self.num_specialties,
            "num_regions": self.num_regions,
            "num_age_decades": self.num_age_decades,
            "claims_standardization": {
                "mean": self.claims_mean.tolist(),
                "std": self.claims_std.tolist(),
            },
        }

    @classmethod
    def from_json_dict(cls, doc: dict, source: str = "schema.json") -> "FeatureSchema":
        try:
            std_doc = doc.get("claims_standardization") or {}
            return cls(
                num_codes=int(doc["num_codes"]),
                num_specialties=int(doc["num_specialties"]),
                num_regions=int(doc.get("num_regions", 4)),
                num_age_decades=int(doc.get("num_age_decades", 10)),
                claims_mean=std_doc.get("mean"),
                claims_std=std_doc.get("std"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{source}: malformed schema document ({exc})") from exc


@dataclass(frozen=True)
class PatientTable:
    """Columnar patient records; row position is the patient index."""

    ids: np.ndarray
    labels: np.ndarray          # int8; -1 = unobserved
    gender: np.ndarray          # int8 in {0,1}
    age_decade: np.ndarray      # int8, 0-based
    region: np.ndarray          # int8, 1-based
    code_indicators: np.ndarray  # (M, Q) int8
    code_frequencies: np.ndarray  # (M, Q) int64

    def __post_init__(self):
        for name in ("ids", "labels", "gender", "age_decade", "region",
                     "code_indicators", "code_frequencies"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name))))

    def __len__(self) -> int:
        return int(self.ids.size)


@dataclass(frozen=True)
class PhysicianTable:
    """Columnar physician records; row position is the physician index."""

    ids: np.ndarray
    labels: np.ndarray          # int8; -1 = unobserved
    gender: np.ndarray          # int8 in {0,1}
    specialty: np.ndarray       # int16, 0-based
    patient_count: np.ndarray   # int64, >= 1
    claims_features: np.ndarray = None  # (N, 4) float64, or None before derive

    def __post_init__(self):
        for name in ("ids", "labels", "gender", "specialty", "patient_count"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name))))
        if self.claims_features is not None:
            object.__setattr__(
                self, "claims_features", _frozen(np.asarray(self.claims_features, dtype=np.float64))
            )

    def __len__(self) -> int:
        return int(self.ids.size)


@dataclass(frozen=True)
class EdgeList:
    """Physician-patient links with per-edge claim counts.

    Endpoints are stored as positions into the physician/patient tables;
    id resolution happens once at load time.
    """

    physician_idx: np.ndarray  # int64 positions
    patient_idx: np.ndarray    # int64 positions
    claim_count: np.ndarray    # int64, >= 1

    def __post_init__(self):
        for name in ("physician_idx", "patient_idx", "claim_count"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64)))

    def __len__(self) -> int:
        return int(self.physician_idx.size)


@dataclass(frozen=True)
class Cohort:
    """A validated bundle of patients, physicians and the links between them."""

    patients: PatientTable
    physicians: PhysicianTable
    edges: EdgeList
    schema: FeatureSchema

    @property
    def num_patients(self) -> int:
        return len(self.patients)

    @property
    def num_physicians(self) -> int:
        return len(self.physicians)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def physician_degrees(self) -> np.ndarray:
        """Edge-list degree of every physician (0 for isolated rows)."""
        return np.bincount(self.edges.physician_idx, minlength=self.num_physicians)

    def patient_degrees(self) -> np.ndarray:
        return np.bincount(self.edges.patient_idx, minlength=self.num_patients)

    def all_labels_present(self) -> bool:
        return bool(np.all(self.patients.labels >= 0) and np.all(self.physicians.labels >= 0))

    def validate(self, require_labels: bool = False, strict_degree: bool = True,
                 strict_or: bool = True) -> "Cohort":
        """Check every cross-record invariant; returns self for chaining.

        ``strict_degree`` enforces patient_count == edge-list degree and
        ``strict_or`` enforces the label-coupling rule (a physician is
        positive iff some linked patient is).  Both are relaxed for train
        subcohorts, whose edges to held-out patients have been removed while
        patient_count and labels deliberately keep their full-population
        values.
        """
        pat, phy, edges, schema = self.patients, self.physicians, self.edges, self.schema
        M, N, Q = len(pat), len(phy), schema.num_codes

        _check_ids(pat.ids, "patients")
        _check_ids(phy.ids, "physicians")

        _check_range(pat.labels, -1, 1, "patient label")
        _check_range(phy.labels, -1, 1, "physician label")
        if require_labels and (np.any(pat.labels < 0) or np.any(phy.labels < 0)):
            raise IntegrityError("labels are required but some records are unlabeled")

        _check_range(pat.gender, 0, 1, "patient gender")
        _check_range(phy.gender, 0, 1, "physician gender")
        _check_range(pat.age_decade, 0, schema.num_age_decades - 1, "age_decade")
        _check_range(pat.region, 1, schema.num_regions, "region")
        _check_range(phy.specialty, 0, schema.num_specialties - 1, "specialty")

        if pat.code_indicators.shape != (M, Q) or pat.code_frequencies.shape != (M, Q):
            raise IntegrityError(
                f"code matrices must be shaped ({M}, {Q}); got "
                f"{pat.code_indicators.shape} / {pat.code_frequencies.shape}"
            )
        ind, freq = pat.code_indicators, pat.code_frequencies
        if ind.size and (ind.min() < 0 or ind.max() > 1):
            raise IntegrityError("code indicators must be 0/1")
        bad = np.argwhere((ind == 0) & (freq != 0) | (ind == 1) & (freq < 1))
        if bad.size:
            j, q = bad[0]
            raise IntegrityError(
                f"patient {pat.ids[j]!r} code {q}: frequency {freq[j, q]} inconsistent "
                f"with indicator {ind[j, q]} (frequency >= 1 iff indicator = 1)"
            )

        if np.any(phy.patient_count < 1):
            i = int(np.argmax(phy.patient_count < 1))
            raise IntegrityError(f"physician {phy.ids[i]!r} has patient_count < 1")
        if phy.claims_features is not None:
            if phy.claims_features.shape != (N, CLAIMS_DIM):
                raise IntegrityError(f"claims_features must be shaped ({N}, {CLAIMS_DIM})")
            if not np.all(np.isfinite(phy.claims_features)):
                raise IntegrityError("claims_features must be finite")

        if len(edges):
            if edges.physician_idx.min() < 0 or edges.physician_idx.max() >= N:
                raise IntegrityError("edge physician index out of range")
            if edges.patient_idx.min() < 0 or edges.patient_idx.max() >= M:
                raise IntegrityError("edge patient index out of range")
            if np.any(edges.claim_count < 1):
                raise IntegrityError("edge claim_count must be >= 1")
            key = edges.physician_idx * M + edges.patient_idx
            if np.unique(key).size != key.size:
                raise IntegrityError("duplicate (physician, patient) edge")

        if strict_degree:
            deg = self.physician_degrees()
            mismatch = deg != phy.patient_count
            if np.any(mismatch):
                i = int(np.argmax(mismatch))
                raise IntegrityError(
                    f"physician {phy.ids[i]!r}: patient_count {phy.patient_count[i]} "
                    f"does not equal edge-list degree {deg[i]}"
                )

        if strict_or and self.all_labels_present():
            pos_edge = pat.labels[edges.patient_idx] == 1
            has_pos = np.bincount(edges.physician_idx[pos_edge], minlength=N) > 0
            bad_or = (phy.labels == 1) != has_pos
            if np.any(bad_or):
                i = int(np.argmax(bad_or))
                raise IntegrityError(
                    f"physician {phy.ids[i]!r}: label {phy.labels[i]} contradicts "
                    f"linked patient labels (positive iff >= 1 positive patient)"
                )
        return self


# --------------------------------------------------------------------------
# Derived physician claims features
# --------------------------------------------------------------------------


def derive_physician_claims_features(cohort: Cohort, stats=None) -> Cohort:
    """Fill claims_features with z-scored (max, min, sum, mean) of edge claim counts.

    ``stats`` is an optional ``(mean, std)`` pair of length-4 vectors — pass
    the training population's statistics when deriving for a held-out set.
    When omitted, statistics are computed from this cohort and recorded in
    the returned schema.  Idempotent for fixed statistics.
    """
    edges = cohort.edges
    N = cohort.num_physicians
    deg = cohort.physician_degrees()
    if np.any(deg == 0):
        i = int(np.argmax(deg == 0))
        raise IntegrityError(
            f"physician {cohort.physicians.ids[i]!r} has no edges; claims features undefined"
        )
    counts = edges.claim_count.astype(np.float64)
    order = np.argsort(edges.physician_idx, kind="stable")
    grouped = counts[order]
    bounds = np.zeros(N + 1, dtype=np.int64)
    np.cumsum(deg, out=bounds[1:])
    raw = np.empty((N, CLAIMS_DIM))
    raw[:, 0] = np.maximum.reduceat(grouped, bounds[:-1])
    raw[:, 1] = np.minimum.reduceat(grouped, bounds[:-1])
    raw[:, 2] = np.add.reduceat(grouped, bounds[:-1])
    raw[:, 3] = raw[:, 2] / deg

    if stats is None:
        mean = raw.mean(axis=0)
        std = np.maximum(raw.std(axis=0), CLAIMS_STD_FLOOR)
    else:
        mean = np.asarray(stats[0], dtype=np.float64)
        std = np.asarray(stats[1], dtype=np.float64)
    standardized = (raw - mean) / std

    schema = dataclasses.replace(cohort.schema, claims_mean=mean, claims_std=std)
    physicians = dataclasses.replace(cohort.physicians, claims_features=standardized)
    return dataclasses.replace(cohort, physicians=physicians, schema=schema)


# --------------------------------------------------------------------------
# Leakage-safe splitting
# --------------------------------------------------------------------------


def split_by_physician_mask(cohort: Cohort, test_mask: np.ndarray) -> tuple[Cohort, Cohort]:
    """Partition by a boolean test mask over physicians.

    Every patient linked to at least one test physician goes to the test
    side; remaining patients go to train.  Train keeps only edges with both
    endpoints in train.  Test physicians keep all their edges (their
    patients are all in test by construction), so the test side still
    satisfies the strict degree and label-coupling invariants; the train
    side generally does not and must be validated with the strict flags off.
    """
    test_mask = np.asarray(test_mask, dtype=bool)
    if test_mask.shape != (cohort.num_physicians,):
        raise IntegrityError("test mask must have one entry per physician")
    if not test_mask.any() or test_mask.all():
        raise IntegrityError("split would leave an empty train or test side")

    edges = cohort.edges
    patient_test = np.zeros(cohort.num_patients, dtype=bool)
    patient_test[edges.patient_idx[test_mask[edges.physician_idx]]] = True

    train = _subcohort(cohort, ~test_mask, ~patient_test)
    test = _subcohort(cohort, test_mask, patient_test)
    return train, test


def split_train_test(cohort: Cohort, test_fraction: float, seed) -> tuple[Cohort, Cohort]:
    """Seeded physician-level split with the leakage rule above.

    ``test_fraction`` is the share of physicians held out; it must leave at
    least one physician on each side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise IntegrityError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    N = cohort.num_physicians
    n_test = int(round(test_fraction * N))
    if n_test == 0 or n_test == N:
        raise IntegrityError(
            f"test_fraction {test_fraction} yields an empty side for {N} physicians"
        )
    rng = np.random.default_rng(seed)
    mask = np.zeros(N, dtype=bool)
    mask[rng.permutation(N)[:n_test]] = True
    return split_by_physician_mask(cohort, mask)


def _subcohort(cohort: Cohort, phys_mask: np.ndarray, pat_mask: np.ndarray) -> Cohort:
    phys_pos = np.flatnonzero(phys_mask)
    pat_pos = np.flatnonzero(pat_mask)
    phys_map = np.full(cohort.num_physicians, -1, dtype=np.int64)
    phys_map[phys_pos] = np.arange(phys_pos.size)
    pat_map = np.full(cohort.num_patients, -1, dtype=np.int64)
    pat_map[pat_pos] = np.arange(pat_pos.size)

    e = cohort.edges
    keep = phys_mask[e.physician_idx] & pat_mask[e.patient_idx]
    edges = EdgeList(
        physician_idx=phys_map[e.physician_idx[keep]],
        patient_idx=pat_map[e.patient_idx[keep]],
        claim_count=e.claim_count[keep],
    )

    p = cohort.patients
    patients = PatientTable(
        ids=p.ids[pat_pos], labels=p.labels[pat_pos], gender=p.gender[pat_pos],
        age_decade=p.age_decade[pat_pos], region=p.region[pat_pos],
        code_indicators=p.code_indicators[pat_pos],
        code_frequencies=p.code_frequencies[pat_pos],
    )
    d = cohort.physicians
    physicians = PhysicianTable(
        ids=d.ids[phys_pos], labels=d.labels[phys_pos], gender=d.gender[phys_pos],
        specialty=d.specialty[phys_pos], patient_count=d.patient_count[phys_pos],
        claims_features=None if d.claims_features is None else d.claims_features[phys_pos],
    )
    return Cohort(patients=patients, physicians=physicians, edges=edges, schema=cohort.schema)


# --------------------------------------------------------------------------
# File IO
# --------------------------------------------------------------------------

PATIENT_FIXED_COLS = ["patient_id", "label", "gender", "age_decade", "region"]
PHYSICIAN_FIXED_COLS = ["physician_id", "label", "gender", "specialty", "patient_count"]
CLAIMS_COLS = ["claims_max", "claims_min", "claims_sum", "claims_avg"]
EDGE_COLS = ["physician_id", "patient_id", "claim_count"]


def load_cohort(directory, validate: bool = True, strict_degree: bool = True) -> Cohort:
    """Read ``patients.csv``, ``physicians.csv``, ``edges.csv``, ``schema.json``."""
    d = Path(directory)
    schema_path = d / "schema.json"
    try:
        schema_doc = json.loads(schema_path.read_text())
    except FileNotFoundError:
        raise ParseError(f"{schema_path}: missing schema file") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{schema_path}: invalid JSON at line {exc.lineno}") from exc
    schema = FeatureSchema.from_json_dict(schema_doc, source=str(schema_path))
    Q = schema.num_codes

    pat_df = _read_csv(d / "patients.csv")
    ind_cols = [f"ind_{q}" for q in range(Q)]
    freq_cols = [f"freq_{q}" for q in range(Q)]
    _require_columns(pat_df, PATIENT_FIXED_COLS + ind_cols + freq_cols, d / "patients.csv")
    patients = PatientTable(
        ids=pat_df["patient_id"].to_numpy(dtype=str),
        labels=_parse_labels(pat_df["label"], d / "patients.csv"),
        gender=_parse_int(pat_df["gender"], d / "patients.csv", "gender", np.int8),
        age_decade=_parse_int(pat_df["age_decade"], d / "patients.csv", "age_decade", np.int8),
        region=_parse_int(pat_df["region"], d / "patients.csv", "region", np.int8),
        code_indicators=_parse_int(pat_df[ind_cols], d / "patients.csv", "indicators", np.int8),
        code_frequencies=_parse_int(pat_df[freq_cols], d / "patients.csv", "frequencies", np.int64),
    )

    phy_df = _read_csv(d / "physicians.csv")
    _require_columns(phy_df, PHYSICIAN_FIXED_COLS, d / "physicians.csv")
    has_claims = all(c in phy_df.columns for c in CLAIMS_COLS)
    physicians = PhysicianTable(
        ids=phy_df["physician_id"].to_numpy(dtype=str),
        labels=_parse_labels(phy_df["label"], d / "physicians.csv"),
        gender=_parse_int(phy_df["gender"], d / "physicians.csv", "gender", np.int8),
        specialty=_parse_int(phy_df["specialty"], d / "physicians.csv", "specialty", np.int16),
        patient_count=_parse_int(phy_df["patient_count"], d / "physicians.csv",
                                 "patient_count", np.int64),
        claims_features=phy_df[CLAIMS_COLS].to_numpy(dtype=np.float64) if has_claims else None,
    )

    edge_df = _read_csv(d / "edges.csv")
    _require_columns(edge_df, EDGE_COLS, d / "edges.csv")
    phys_index = pd.Index(physicians.ids)
    pat_index = pd.Index(patients.ids)
    phys_pos = phys_index.get_indexer(edge_df["physician_id"].to_numpy(dtype=str))
    pat_pos = pat_index.get_indexer(edge_df["patient_id"].to_numpy(dtype=str))
    for pos, col in ((phys_pos, "physician_id"), (pat_pos, "patient_id")):
        if np.any(pos < 0):
            row = int(np.argmax(pos < 0))
            raise IntegrityError(
                f"{d / 'edges.csv'} line {row + 2}: {col} "
                f"{edge_df[col].iloc[row]!r} does not exist"
            )
    edges = EdgeList(
        physician_idx=phys_pos,
        patient_idx=pat_pos,
        claim_count=_parse_int(edge_df["claim_count"], d / "edges.csv", "claim_count", np.int64),
    )

    cohort = Cohort(patients=patients, physicians=physicians, edges=edges, schema=schema)
    if validate:
        cohort.validate(strict_degree=strict_degree)
    return cohort


def save_cohort(cohort: Cohort, directory) -> None:
    """Write the four cohort files; output is byte-stable for a fixed cohort."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    Q = cohort.schema.num_codes

    pat = cohort.patients
    pat_df = pd.concat([
        pd.DataFrame({
            "patient_id": pat.ids,
            "label": _format_labels(pat.labels),
            "gender": pat.gender,
            "age_decade": pat.age_decade,
            "region": pat.region,
        }),
        pd.DataFrame(pat.code_indicators, columns=[f"ind_{q}" for q in range(Q)]),
        pd.DataFrame(pat.code_frequencies, columns=[f"freq_{q}" for q in range(Q)]),
    ], axis=1)
    pat_df.to_csv(d / "patients.csv", index=False)

    phy = cohort.physicians
    phy_df = pd.DataFrame({
        "physician_id": phy.ids,
        "label": _format_labels(phy.labels),
        "gender": phy.gender,
        "specialty": phy.specialty,
        "patient_count": phy.patient_count,
    })
    if phy.claims_features is not None:
        for k, col in enumerate(CLAIMS_COLS):
            phy_df[col] = phy.claims_features[:, k]
    phy_df.to_csv(d / "physicians.csv", index=False)

    edge_df = pd.DataFrame({
        "physician_id": phy.ids[cohort.edges.physician_idx],
        "patient_id": pat.ids[cohort.edges.patient_idx],
        "claim_count": cohort.edges.claim_count,
    })
    edge_df.to_csv(d / "edges.csv", index=False)

    (d / "schema.json").write_text(
        json.dumps(cohort.schema.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )


# --------------------------------------------------------------------------
# Parse helpers
# --------------------------------------------------------------------------


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path}: file is empty (expected a header row)") from None
    except pd.errors.ParserError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _require_columns(df: pd.DataFrame, columns, path: Path) -> None:
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ParseError(f"{path}: missing required columns {missing[:5]}")


def _parse_labels(series: pd.Series, path: Path) -> np.ndarray:
    missing = series.isna().to_numpy()
    try:
        arr = np.asarray(series.fillna(-1).to_numpy(), dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError(f"{path}: label column must contain 0, 1 or empty fields") from None
    out = arr.astype(np.int8)
    bad = ~missing & (~np.isin(out, (0, 1)) | (arr != np.floor(arr)))
    if np.any(bad):
        row = int(np.argmax(bad))
        raise ParseError(
            f"{path} line {row + 2}: label must be 0, 1 or empty, got {series.iloc[row]!r}"
        )
    return out


def _parse_int(frame, path: Path, what: str, dtype) -> np.ndarray:
    values = frame.to_numpy()
    na = pd.isna(values)
    if na.any():
        row = int(np.argwhere(na)[0][0]) if values.ndim > 1 else int(np.argmax(na))
        raise ParseError(f"{path} line {row + 2}: missing {what} value")
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError(f"{path}: non-numeric {what} value") from None
    if np.any(arr != np.floor(arr)):
        raise ParseError(f"{path}: non-integer {what} value")
    return arr.astype(dtype)


def _format_labels(labels: np.ndarray):
    out = labels.astype(object)
    out[labels < 0] = ""
    return out


def _check_ids(ids: np.ndarray, what: str) -> None:
    if ids.size == 0:
        raise IntegrityError(f"{what} table is empty")
    if np.unique(ids).size != ids.size:
        raise IntegrityError(f"duplicate id in {what} table")
    ok = pd.Series(ids).astype(str).str.fullmatch(_ID_PATTERN.pattern).to_numpy()
    if not ok.all():
        token = ids[int(np.argmax(~ok))]
        raise IntegrityError(f"{what} id {token!r} contains characters outside [A-Za-z0-9_-]")


def _check_range(values: np.ndarray, lo: int, hi: int, what: str) -> None:
    if values.size and (values.min() < lo or values.max() > hi):
        raise IntegrityError(f"{what} outside [{lo}, {hi}]")

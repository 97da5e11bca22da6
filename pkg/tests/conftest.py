"""Shared fixture builders for hand-sized cohorts."""

import numpy as np
import pytest

from raregraph.cohort import Cohort, EdgeList, FeatureSchema, PatientTable, PhysicianTable


def build_cohort(patient_rows, physician_rows, edge_rows, num_codes=2,
                 num_specialties=3, claims=None):
    """Assemble a Cohort from plain tuples.

    patient_rows: (id, label, gender, age_decade, region, indicators, frequencies)
    physician_rows: (id, label, gender, specialty, patient_count)
    edge_rows: (physician_id, patient_id, claim_count)
    """
    pat_ids = [r[0] for r in patient_rows]
    phy_ids = [r[0] for r in physician_rows]
    patients = PatientTable(
        ids=np.array(pat_ids),
        labels=np.array([r[1] for r in patient_rows], dtype=np.int8),
        gender=np.array([r[2] for r in patient_rows], dtype=np.int8),
        age_decade=np.array([r[3] for r in patient_rows], dtype=np.int8),
        region=np.array([r[4] for r in patient_rows], dtype=np.int8),
        code_indicators=np.array([r[5] for r in patient_rows], dtype=np.int8),
        code_frequencies=np.array([r[6] for r in patient_rows], dtype=np.int64),
    )
    physicians = PhysicianTable(
        ids=np.array(phy_ids),
        labels=np.array([r[1] for r in physician_rows], dtype=np.int8),
        gender=np.array([r[2] for r in physician_rows], dtype=np.int8),
        specialty=np.array([r[3] for r in physician_rows], dtype=np.int16),
        patient_count=np.array([r[4] for r in physician_rows], dtype=np.int64),
        claims_features=claims,
    )
    edges = EdgeList(
        physician_idx=np.array([phy_ids.index(r[0]) for r in edge_rows], dtype=np.int64),
        patient_idx=np.array([pat_ids.index(r[1]) for r in edge_rows], dtype=np.int64),
        claim_count=np.array([r[2] for r in edge_rows], dtype=np.int64),
    )
    schema = FeatureSchema(num_codes=num_codes, num_specialties=num_specialties)
    return Cohort(patients=patients, physicians=physicians, edges=edges, schema=schema)


@pytest.fixture
def tiny_cohort():
    """Two physicians, three patients, a tree: d1-{p1,p2}, d2-{p3}."""
    return build_cohort(
        patient_rows=[
            ("p1", 1, 0, 3, 1, [1, 0], [4, 0]),
            ("p2", 0, 1, 5, 2, [0, 1], [0, 2]),
            ("p3", 0, 0, 7, 4, [0, 0], [0, 0]),
        ],
        physician_rows=[
            ("d1", 1, 1, 0, 2),
            ("d2", 0, 0, 2, 1),
        ],
        edge_rows=[("d1", "p1", 3), ("d1", "p2", 5), ("d2", "p3", 2)],
    )


def random_cohort(seed=0, n_patients=30, n_physicians=10, num_codes=3,
                  num_specialties=4, positive_fraction=0.3, max_degree=3):
    """A random but fully valid labelled cohort for likelihood/inference tests.

    Physician labels are derived from patient labels via the OR rule, and
    patient_count always equals the edge-list degree.
    """
    rng = np.random.default_rng(seed)
    x = (rng.random(n_patients) < positive_fraction).astype(np.int8)
    ind = (rng.random((n_patients, num_codes)) < 0.4).astype(np.int8)
    freq = ind * (1 + rng.poisson(2.0, (n_patients, num_codes)))

    e_phys, e_pat = [], []
    for i in range(n_physicians):
        deg = int(rng.integers(1, max_degree + 1))
        for j in rng.choice(n_patients, size=deg, replace=False):
            e_phys.append(i)
            e_pat.append(int(j))
    e_phys = np.array(e_phys, dtype=np.int64)
    e_pat = np.array(e_pat, dtype=np.int64)
    degrees = np.bincount(e_phys, minlength=n_physicians)
    has_pos = np.bincount(e_phys[x[e_pat] == 1], minlength=n_physicians) > 0

    patients = PatientTable(
        ids=np.array([f"p{j}" for j in range(n_patients)]),
        labels=x,
        gender=(rng.random(n_patients) < 0.5).astype(np.int8),
        age_decade=rng.integers(0, 10, n_patients).astype(np.int8),
        region=rng.integers(1, 5, n_patients).astype(np.int8),
        code_indicators=ind,
        code_frequencies=freq,
    )
    physicians = PhysicianTable(
        ids=np.array([f"d{i}" for i in range(n_physicians)]),
        labels=has_pos.astype(np.int8),
        gender=(rng.random(n_physicians) < 0.6).astype(np.int8),
        specialty=rng.integers(0, num_specialties, n_physicians).astype(np.int16),
        patient_count=degrees.astype(np.int64),
        claims_features=rng.normal(size=(n_physicians, 4)),
    )
    edges = EdgeList(
        physician_idx=e_phys,
        patient_idx=e_pat,
        claim_count=1 + rng.poisson(2.0, e_phys.size).astype(np.int64),
    )
    schema = FeatureSchema(num_codes=num_codes, num_specialties=num_specialties)
    return Cohort(
        patients=patients, physicians=physicians, edges=edges, schema=schema
    ).validate(require_labels=True)


@pytest.fixture
def shared_patient_cohort():
    """Two physicians sharing a patient: d1-{p1,p2}, d2-{p2,p3} (a path, still a tree)."""
    return build_cohort(
        patient_rows=[
            ("p1", 0, 0, 1, 1, [0, 0], [0, 0]),
            ("p2", 1, 1, 2, 2, [1, 1], [2, 1]),
            ("p3", 0, 0, 3, 3, [0, 0], [0, 0]),
        ],
        physician_rows=[
            ("d1", 1, 1, 0, 2),
            ("d2", 1, 0, 1, 2),
        ],
        edge_rows=[("d1", "p1", 1), ("d1", "p2", 2), ("d2", "p2", 4), ("d2", "p3", 1)],
    )

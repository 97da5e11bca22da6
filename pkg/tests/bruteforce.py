"""Brute-force enumeration oracle for label-coupled bipartite models.

Computes exact posterior marginals by summing the unnormalized joint over
every patient-label assignment (physician labels are determined: a physician
is positive iff at least one linked patient is).  Deliberately independent
of the package's inference code — plain enumeration, linear-domain weights
assembled from log evidence via logsumexp at the end.

Feasible for up to ~16 patients.
"""

import itertools

import numpy as np
from scipy.special import logsumexp


def enumerate_posteriors(patient_log_ev, phys_log_ev, adjacency):
    """Exact positive-class marginals by full enumeration.

    patient_log_ev: (M, 2) log evidence per patient label (prior and any
        observed-label -inf deltas already folded in).
    phys_log_ev: (N, 2) log evidence per physician label.
    adjacency: length-N list of patient-index lists (each physician's patients).

    Returns (patient_positive (M,), physician_positive (N,)) probabilities.
    """
    patient_log_ev = np.asarray(patient_log_ev, dtype=np.float64)
    phys_log_ev = np.asarray(phys_log_ev, dtype=np.float64)
    M = patient_log_ev.shape[0]
    N = phys_log_ev.shape[0]

    log_weights = []
    assignments = []
    for x in itertools.product((0, 1), repeat=M):
        xa = np.array(x)
        logw = patient_log_ev[np.arange(M), xa].sum()
        for i in range(N):
            y = 1 if (len(adjacency[i]) and xa[adjacency[i]].any()) else 0
            logw += phys_log_ev[i, y]
        log_weights.append(logw)
        assignments.append(xa)
    log_weights = np.array(log_weights)
    assignments = np.array(assignments)  # (2^M, M)

    total = logsumexp(log_weights)
    if not np.isfinite(total):
        raise ValueError("total probability is zero: contradictory evidence")

    pat_pos = np.empty(M)
    for j in range(M):
        mask = assignments[:, j] == 1
        pat_pos[j] = np.exp(logsumexp(log_weights[mask]) - total)

    phys_pos = np.empty(N)
    for i in range(N):
        if len(adjacency[i]) == 0:
            raise ValueError(f"physician {i} has no patients")
        mask = assignments[:, adjacency[i]].any(axis=1)
        phys_pos[i] = np.exp(logsumexp(log_weights[mask]) - total)

    return pat_pos, phys_pos


def enumerate_or_message_to_physician(linear_messages):
    """Naive 2^k sum-product message from the coupling factor to its physician."""
    k = len(linear_messages)
    out = np.zeros(2)
    for x in itertools.product((0, 1), repeat=k):
        w = 1.0
        for q, xq in zip(linear_messages, x):
            w *= q[xq]
        out[1 if any(x) else 0] += w
    return out


def enumerate_or_message_to_patient(phys_message, other_linear_messages):
    """Naive enumeration of the coupling-factor message to one patient."""
    k = len(other_linear_messages)
    out = np.zeros(2)
    for xj in (0, 1):
        for rest in itertools.product((0, 1), repeat=k):
            y = 1 if (xj or any(rest)) else 0
            w = phys_message[y]
            for q, xq in zip(other_linear_messages, rest):
                w *= q[xq]
            out[xj] += w
    return out


def random_bipartite_tree(rng, num_nodes):
    """A random physician-patient tree with `num_nodes` total variables.

    Returns (num_physicians, num_patients, edges) with edges as
    (physician, patient) index pairs.  The root is a physician and every
    physician has at least one patient.
    """
    assert num_nodes >= 2
    phys_of_node = [True]   # node 0 is the root physician
    edges = []
    # First growth step must give the root a patient.
    for _ in range(1, num_nodes):
        parent = int(rng.choice(len(phys_of_node))) if len(phys_of_node) > 1 else 0
        new = len(phys_of_node)
        phys_of_node.append(not phys_of_node[parent])
        edges.append((parent, new) if phys_of_node[parent] else (new, parent))
    # Compact per-type indexing.
    phys_index, pat_index = {}, {}
    for node, is_phys in enumerate(phys_of_node):
        if is_phys:
            phys_index[node] = len(phys_index)
        else:
            pat_index[node] = len(pat_index)
    index_edges = [(phys_index[a], pat_index[b]) for a, b in edges]
    # A physician leaf attached to a patient already has its one edge; the
    # root got a patient in the first step, so every physician has >= 1.
    return len(phys_index), len(pat_index), index_edges


def random_log_evidence(rng, n):
    """(n, 2) random normalized log-evidence rows."""
    ev = np.log(rng.random((n, 2)) + 1e-3)
    return ev - ev.max(axis=1, keepdims=True)

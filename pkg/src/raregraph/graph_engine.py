"""Factor-graph construction and log-domain sum-product inference.

The model couples one binary variable per patient (x_j) and per physician
(y_i) through three factor kinds:

  * a patient evidence factor carrying log p(features_j | x_j) plus the
    class prior on x_j (and an observed-label delta when labels are given);
  * a physician evidence factor carrying log p(features_i | y_i);
  * a deterministic coupling factor per physician asserting y_i = 1 iff at
    least one linked x_j = 1.

Because y_i touches nothing but its own evidence and coupling factor, the
whole computation reduces to messages on the bipartite physician-patient
edges.  The coupling factor has O(degree) closed forms in both directions
(never 2^degree enumeration): with normalized incoming patient messages
q_j and physician evidence message a,

    to physician:  m(0) = prod_j q_j(0),          m(1) = 1 - prod_j q_j(0)
    to patient j:  m(1) = a(1),                   with P0 = prod_{k != j} q_k(0):
                   m(0) = a(1) * (1 - P0) + a(0) * P0

All messages live in natural-log space, normalized so the max entry is 0;
exact zeros (deterministic evidence) are -inf entries with explicit
handling.  Products excluding one term are computed by tracking a finite
log-sum plus a count of -inf contributions — subtracting a -inf would
otherwise poison the exclusion.

Components that are trees (edge count = node count - 1) get an exact
two-pass schedule: messages sweep leaves-to-root, then root-to-leaves.
Cyclic components run flooding-schedule loopy propagation with damped
log-message updates, stopping per component when the largest absolute
message change falls below tolerance.  Non-convergence is reported in the
result, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .cohort import Cohort
from .errors import IntegrityError
from .learning import ModelParams, patient_log_likelihoods, physician_log_likelihoods

DEFAULT_DAMPING = 0.5
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 100

SCORE_COLUMNS = ["entity_type", "entity_id", "posterior_positive", "component_id", "converged"]


def _frozen(arr) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FactorGraph:
    """Immutable flattened factor graph over one cohort.

    Edges are the physician-patient links; evidence vectors are
    length-2 log arrays per variable with any observed-label deltas folded
    in.  Component ids partition physicians and patients jointly.
    """

    edge_phys: np.ndarray       # (E,) physician index per coupling edge
    edge_pat: np.ndarray        # (E,) patient index per coupling edge
    patient_log_ev: np.ndarray  # (M, 2)
    phys_log_ev: np.ndarray     # (N, 2)
    phys_component: np.ndarray  # (N,)
    patient_component: np.ndarray  # (M,)
    num_components: int
    component_is_tree: np.ndarray  # (C,) bool
    physician_ids: np.ndarray
    patient_ids: np.ndarray

    @property
    def num_physicians(self) -> int:
        return int(self.phys_log_ev.shape[0])

    @property
    def num_patients(self) -> int:
        return int(self.patient_log_ev.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edge_phys.size)

    @property
    def num_variable_nodes(self) -> int:
        return self.num_physicians + self.num_patients

    @property
    def num_factor_nodes(self) -> int:
        # one evidence factor per variable plus one coupling factor per physician
        return 2 * self.num_physicians + self.num_patients

    @property
    def num_nodes(self) -> int:
        return self.num_variable_nodes + self.num_factor_nodes

    @classmethod
    def from_arrays(cls, edge_phys, edge_pat, patient_log_ev, phys_log_ev,
                    physician_ids=None, patient_ids=None) -> "FactorGraph":
        edge_phys = np.asarray(edge_phys, dtype=np.int64)
        edge_pat = np.asarray(edge_pat, dtype=np.int64)
        patient_log_ev = np.asarray(patient_log_ev, dtype=np.float64)
        phys_log_ev = np.asarray(phys_log_ev, dtype=np.float64)
        N = phys_log_ev.shape[0]
        M = patient_log_ev.shape[0]
        if phys_log_ev.shape != (N, 2) or patient_log_ev.shape != (M, 2):
            raise IntegrityError("evidence arrays must be (n, 2) log vectors")
        for ev, what in ((patient_log_ev, "patient"), (phys_log_ev, "physician")):
            if np.isnan(ev).any() or np.isposinf(ev).any():
                raise IntegrityError(f"{what} evidence must be finite or -inf")
            if np.isneginf(ev).all(axis=1).any():
                raise IntegrityError(f"{what} evidence row has zero total mass")
        if edge_phys.size:
            if edge_phys.min() < 0 or edge_phys.max() >= N:
                raise IntegrityError("edge physician index out of range")
            if edge_pat.min() < 0 or edge_pat.max() >= M:
                raise IntegrityError("edge patient index out of range")
        degrees = np.bincount(edge_phys, minlength=N)
        if np.any(degrees == 0):
            i = int(np.argmax(degrees == 0))
            raise IntegrityError(
                f"physician index {i} has no linked patients; the coupling "
                f"factor requires degree >= 1"
            )

        n_nodes = N + M
        graph = csr_matrix(
            (np.ones(edge_phys.size, dtype=np.int8), (edge_phys, edge_pat + N)),
            shape=(n_nodes, n_nodes),
        )
        n_comp, labels = connected_components(graph, directed=False)
        comp_sizes = np.bincount(labels, minlength=n_comp)
        comp_edges = np.bincount(labels[edge_phys], minlength=n_comp)
        is_tree = comp_edges == comp_sizes - 1

        if physician_ids is None:
            physician_ids = np.array([f"d{i}" for i in range(N)])
        if patient_ids is None:
            patient_ids = np.array([f"p{j}" for j in range(M)])
        return cls(
            edge_phys=_frozen(edge_phys),
            edge_pat=_frozen(edge_pat),
            patient_log_ev=_frozen(patient_log_ev),
            phys_log_ev=_frozen(phys_log_ev),
            phys_component=_frozen(labels[:N]),
            patient_component=_frozen(labels[N:]),
            num_components=int(n_comp),
            component_is_tree=_frozen(is_tree),
            physician_ids=_frozen(np.asarray(physician_ids)),
            patient_ids=_frozen(np.asarray(patient_ids)),
        )


def build(cohort: Cohort, params: ModelParams, respect_labels: bool = False) -> FactorGraph:
    """Assemble evidence and topology for one cohort under fitted params.

    With ``respect_labels`` the observed labels become -inf delta evidence
    on their variables (the uniform code path for clamping); contradictory
    observed labels across a coupling factor are rejected here rather than
    surfacing as zero-mass messages mid-inference.
    """
    if respect_labels:
        _check_label_consistency(cohort)
    eta = params.patient.prior_eta
    pat_ev = patient_log_likelihoods(cohort, params)
    pat_ev = pat_ev + np.array([np.log1p(-eta), np.log(eta)])
    phy_ev = physician_log_likelihoods(cohort, params).copy()

    if respect_labels:
        x = cohort.patients.labels
        y = cohort.physicians.labels
        pat_ev[x == 0, 1] = -np.inf
        pat_ev[x == 1, 0] = -np.inf
        phy_ev[y == 0, 1] = -np.inf
        phy_ev[y == 1, 0] = -np.inf

    return FactorGraph.from_arrays(
        edge_phys=cohort.edges.physician_idx,
        edge_pat=cohort.edges.patient_idx,
        patient_log_ev=pat_ev,
        phys_log_ev=phy_ev,
        physician_ids=cohort.physicians.ids,
        patient_ids=cohort.patients.ids,
    )


def _check_label_consistency(cohort: Cohort) -> None:
    e = cohort.edges
    x = cohort.patients.labels[e.patient_idx]
    y = cohort.physicians.labels[e.physician_idx]
    direct = (y == 0) & (x == 1)
    if direct.any():
        k = int(np.argmax(direct))
        raise IntegrityError(
            f"physician {cohort.physicians.ids[e.physician_idx[k]]!r} is observed "
            f"negative but linked patient {cohort.patients.ids[e.patient_idx[k]]!r} "
            f"is observed positive"
        )
    N = cohort.num_physicians
    # A positive physician needs at least one linked patient that is not
    # observed negative.
    possible = np.bincount(e.physician_idx[x != 0], minlength=N)
    starved = (cohort.physicians.labels == 1) & (possible == 0)
    if starved.any():
        i = int(np.argmax(starved))
        raise IntegrityError(
            f"physician {cohort.physicians.ids[i]!r} is observed positive but "
            f"every linked patient is observed negative"
        )


# --------------------------------------------------------------------------
# Message algebra
# --------------------------------------------------------------------------


def or_factor_message_to_physician(linear_messages) -> np.ndarray:
    """Coupling-factor message to its physician from normalized patient messages.

    O(degree) closed form: m(0) is the product of the incoming negative
    probabilities, m(1) the complement.
    """
    q = np.asarray(linear_messages, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] == 0:
        raise IntegrityError("coupling factor requires at least one patient message")
    q = q / q.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        lp0 = np.log(q[:, 0]).sum()
    p0 = np.exp(lp0)
    return np.array([p0, -np.expm1(lp0)])


def or_factor_message_to_patient(phys_message, other_linear_messages) -> np.ndarray:
    """Coupling-factor message to one patient given the physician message and
    the messages of every *other* linked patient."""
    a = np.asarray(phys_message, dtype=np.float64)
    a = a / a.sum()
    others = np.asarray(other_linear_messages, dtype=np.float64)
    if others.size:
        others = others / others.sum(axis=1, keepdims=True)
        p0 = np.prod(others[:, 0])
    else:
        p0 = 1.0
    return np.array([a[1] * (1.0 - p0) + a[0] * p0, a[1]])


def _lognorm_rows(m: np.ndarray, context: str) -> np.ndarray:
    mx = m.max(axis=1, keepdims=True)
    if np.isneginf(mx).any():
        raise IntegrityError(
            f"{context}: a message lost all probability mass; the observed "
            f"labels are mutually contradictory"
        )
    return m - mx


def _or_to_patient_log(la0, la1, lp0):
    """Vectorized log-domain coupling message toward patients.

    lp0 is the log product of the other patients' negative probabilities
    (<= 0 up to rounding; -inf when some other patient is certainly
    positive).  The clip guards log(-expm1(x)) against cancellation noise
    pushing an all-certain product a few ulps above zero.
    """
    lp0 = np.minimum(lp0, 0.0)
    with np.errstate(divide="ignore"):
        log_one_minus_p0 = np.log(-np.expm1(lp0))
    m0 = np.logaddexp(la1 + log_one_minus_p0, la0 + lp0)
    m1 = np.broadcast_to(la1, m0.shape)
    return np.stack([m0, m1], axis=-1)


def _or_to_physician_log(lp0_full):
    lp0_full = np.minimum(lp0_full, 0.0)
    with np.errstate(divide="ignore"):
        m1 = np.log(-np.expm1(lp0_full))
    return np.stack([lp0_full, m1], axis=-1)


def _exclude(total_finite, total_inf_count, contribution):
    """Log-sum over all contributions except one, with -inf bookkeeping."""
    is_inf = np.isneginf(contribution)
    others_f = total_finite - np.where(is_inf, 0.0, contribution)
    others_k = total_inf_count - is_inf
    return np.where(others_k > 0, -np.inf, others_f)


def _combine(total_finite, total_inf_count):
    return np.where(total_inf_count > 0, -np.inf, total_finite)


def _patient_to_factor(graph: FactorGraph, m_bp: np.ndarray) -> np.ndarray:
    """All patient-to-coupling-factor messages given the current m_bp state."""
    M = graph.num_patients
    ep = graph.edge_pat
    finite = np.isfinite(m_bp)
    fvals = np.where(finite, m_bp, 0.0)
    m_pb = np.empty_like(m_bp)
    for c in (0, 1):
        bf = np.bincount(ep, weights=fvals[:, c], minlength=M)
        bk = np.bincount(ep[~finite[:, c]], minlength=M)
        others = _exclude(bf[ep], bk[ep], m_bp[:, c])
        m_pb[:, c] = graph.patient_log_ev[ep, c] + others
    return _lognorm_rows(m_pb, "patient-to-factor message")


def _neg_log_prob(m_pb: np.ndarray) -> np.ndarray:
    """log q(0) of each normalized patient message."""
    return m_pb[:, 0] - np.logaddexp(m_pb[:, 0], m_pb[:, 1])


def _factor_to_patient(graph: FactorGraph, la: np.ndarray, lq0: np.ndarray) -> np.ndarray:
    """All coupling-factor-to-patient messages given per-edge log q(0)."""
    N = graph.num_physicians
    ei = graph.edge_phys
    finite = np.isfinite(lq0)
    af = np.bincount(ei, weights=np.where(finite, lq0, 0.0), minlength=N)
    ak = np.bincount(ei[~finite], minlength=N)
    lp0 = _exclude(af[ei], ak[ei], lq0)
    m = _or_to_patient_log(la[ei, 0], la[ei, 1], lp0)
    return _lognorm_rows(m, "factor-to-patient message")


# --------------------------------------------------------------------------
# Exact two-pass schedule on tree components
# --------------------------------------------------------------------------


def _bfs_forest(graph: FactorGraph):
    """BFS over tree components only: depths, parent nodes and parent edges.

    Nodes are 0..N-1 (physicians) then N..N+M-1 (patients); the root of
    each tree component is its smallest node id.
    """
    N, M, E = graph.num_physicians, graph.num_patients, graph.num_edges
    n_nodes = N + M
    rows = np.concatenate([graph.edge_phys, graph.edge_pat + N])
    cols = np.concatenate([graph.edge_pat + N, graph.edge_phys])
    eids = np.concatenate([np.arange(E), np.arange(E)])
    order = np.argsort(rows, kind="stable")
    adj_col = cols[order]
    adj_eid = eids[order]
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_nodes), out=indptr[1:])

    node_comp = np.concatenate([graph.phys_component, graph.patient_component])
    uniq_comp, first_node = np.unique(node_comp, return_index=True)
    roots = first_node[graph.component_is_tree[uniq_comp]]

    depth = np.full(n_nodes, -1, dtype=np.int64)
    parent_node = np.full(n_nodes, -1, dtype=np.int64)
    parent_edge = np.full(n_nodes, -1, dtype=np.int64)
    depth[roots] = 0
    frontier = roots
    d = 0
    while frontier.size:
        counts = indptr[frontier + 1] - indptr[frontier]
        flat = np.repeat(indptr[frontier], counts) + _concat_ranges(counts)
        nbr = adj_col[flat]
        via = adj_eid[flat]
        src = np.repeat(frontier, counts)
        fresh = depth[nbr] == -1
        nbr, via, src = nbr[fresh], via[fresh], src[fresh]
        nbr, take = np.unique(nbr, return_index=True)
        d += 1
        depth[nbr] = d
        parent_edge[nbr] = via[take]
        parent_node[nbr] = src[take]
        frontier = nbr
    return depth, parent_node, parent_edge


def _concat_ranges(counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.cumsum(counts) - counts
    return np.arange(total, dtype=np.int64) - np.repeat(starts, counts)


def _tree_pass(graph: FactorGraph, la: np.ndarray, m_bp: np.ndarray) -> None:
    """Fill m_bp with the exact fixed point on every tree component.

    Two sweeps: leaves-to-root computes each edge's child-side message from
    children-only accumulators; root-to-leaves completes the accumulators
    and emits parent-side messages with single-edge exclusion.  Accumulators
    hold (finite log-sum, -inf count) per node, so deterministic-evidence
    zeros stay exact.
    """
    N, M = graph.num_physicians, graph.num_patients
    depth, parent_node, parent_edge = _bfs_forest(graph)
    visited = np.flatnonzero(depth > 0)  # non-root tree nodes: one parent edge each
    if visited.size == 0:
        return
    order = np.argsort(depth[visited], kind="stable")
    nodes_by_depth = visited[order]
    node_depth = depth[nodes_by_depth]
    max_depth = int(node_depth[-1])
    level_slices = np.searchsorted(node_depth, np.arange(1, max_depth + 2))

    pat_ev = graph.patient_log_ev
    af = np.zeros(N)
    ak = np.zeros(N, dtype=np.int64)
    bf = np.zeros((M, 2))
    bk = np.zeros((M, 2), dtype=np.int64)
    lq0_up = np.full(graph.num_edges, np.nan)

    def emit_patient_messages(j, e, excl_bp):
        """Patient j's message along edge e, excluding excl_bp (or nothing)."""
        m = np.empty((j.size, 2))
        for c in (0, 1):
            if excl_bp is None:
                others = _combine(bf[j, c], bk[j, c])
            else:
                others = _exclude(bf[j, c], bk[j, c], excl_bp[:, c])
            m[:, c] = pat_ev[j, c] + others
        m = _lognorm_rows(m, "tree pass patient message")
        lq0 = _neg_log_prob(m)
        i = graph.edge_phys[e]
        finite = np.isfinite(lq0)
        np.add.at(af, i[finite], lq0[finite])
        np.add.at(ak, i[~finite], 1)
        return lq0

    def emit_physician_messages(i, e, excl_lq0):
        """Coupling message from physician i along edge e toward its patient."""
        if excl_lq0 is None:
            lp0 = _combine(af[i], ak[i])
        else:
            lp0 = _exclude(af[i], ak[i], excl_lq0)
        m = _lognorm_rows(_or_to_patient_log(la[i, 0], la[i, 1], lp0), "tree pass coupling message")
        m_bp[e] = m
        j = graph.edge_pat[e]
        finite = np.isfinite(m)
        for c in (0, 1):
            np.add.at(bf[:, c], j[finite[:, c]], m[finite[:, c], c])
            np.add.at(bk[:, c], j[~finite[:, c]], 1)

    # Leaves-to-root: children-only accumulators are complete at each level.
    for d in range(max_depth, 0, -1):
        lo, hi = level_slices[d - 1], level_slices[d]
        nodes = nodes_by_depth[lo:hi]
        e = parent_edge[nodes]
        is_pat = nodes >= N
        if is_pat.any():
            lq0_up[e[is_pat]] = emit_patient_messages(nodes[is_pat] - N, e[is_pat], None)
        if (~is_pat).any():
            emit_physician_messages(nodes[~is_pat], e[~is_pat], None)

    # Root-to-leaves: each node's accumulator is now complete (children plus
    # parent), so messages to children exclude only the child's own upward term.
    for d in range(1, max_depth + 1):
        lo, hi = level_slices[d - 1], level_slices[d]
        nodes = nodes_by_depth[lo:hi]
        e = parent_edge[nodes]
        parents = parent_node[nodes]
        parent_is_phys = parents < N
        if parent_is_phys.any():
            sel = parent_is_phys
            emit_physician_messages(parents[sel], e[sel], lq0_up[e[sel]])
        if (~parent_is_phys).any():
            sel = ~parent_is_phys
            emit_patient_messages(parents[sel] - N, e[sel], m_bp[e[sel]])


# --------------------------------------------------------------------------
# Inference driver
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InferenceResult:
    """Posterior positive probabilities plus per-component diagnostics."""

    patient_posterior: np.ndarray
    physician_posterior: np.ndarray
    patient_component: np.ndarray
    phys_component: np.ndarray
    component_is_tree: np.ndarray
    component_converged: np.ndarray
    component_iterations: np.ndarray
    component_final_delta: np.ndarray
    physician_ids: np.ndarray
    patient_ids: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(self.component_converged.all())

    def posterior_mean(self, entity_type: str, entity_id) -> float:
        """Minimum-mean-square-error estimate of one label: its positive belief."""
        if entity_type == "physician":
            ids, values = self.physician_ids, self.physician_posterior
        elif entity_type == "patient":
            ids, values = self.patient_ids, self.patient_posterior
        else:
            raise KeyError(f"entity_type must be 'physician' or 'patient', got {entity_type!r}")
        hits = np.flatnonzero(ids == entity_id)
        if hits.size == 0:
            raise KeyError(f"unknown {entity_type} id {entity_id!r}")
        return float(values[hits[0]])


def run_inference(graph: FactorGraph, damping: float = DEFAULT_DAMPING,
                  tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS
                  ) -> InferenceResult:
    """Posterior marginals for every variable.

    Tree components are solved exactly in two passes.  Cyclic components
    iterate a damped flooding schedule together, each component freezing
    once its largest log-message change drops below ``tol``; components
    still moving at ``max_iters`` are flagged unconverged in the result.
    """
    if not 0.0 < damping <= 1.0:
        raise IntegrityError(f"damping must lie in (0, 1], got {damping}")
    if tol <= 0 or max_iters < 1:
        raise IntegrityError(f"need tol > 0 and max_iters >= 1, got {tol}, {max_iters}")

    E = graph.num_edges
    C = graph.num_components
    ev = graph.phys_log_ev
    la = ev - np.logaddexp(ev[:, 0], ev[:, 1])[:, None]

    m_bp = np.zeros((E, 2))
    comp_converged = np.zeros(C, dtype=bool)
    comp_iters = np.zeros(C, dtype=np.int64)
    comp_delta = np.zeros(C)

    # Singleton components (isolated patients) and trees converge exactly.
    comp_converged[:] = True
    _tree_pass(graph, la, m_bp)

    edge_comp = graph.phys_component[graph.edge_phys]
    cyclic_edge = ~graph.component_is_tree[edge_comp]
    if cyclic_edge.any():
        comp_converged[edge_comp[cyclic_edge]] = False
        # Per-component segmentation of the cyclic edges, for reduceat maxima.
        cyc_ids = np.flatnonzero(cyclic_edge)
        seg_order = cyc_ids[np.argsort(edge_comp[cyc_ids], kind="stable")]
        seg_comp_sorted = edge_comp[seg_order]
        seg_starts = np.flatnonzero(
            np.r_[True, seg_comp_sorted[1:] != seg_comp_sorted[:-1]]
        )
        seg_comps = seg_comp_sorted[seg_starts]

        active = np.ones(seg_comps.size, dtype=bool)
        for iteration in range(1, max_iters + 1):
            m_pb = _patient_to_factor(graph, m_bp)
            new_bp = _factor_to_patient(graph, la, _neg_log_prob(m_pb))
            if damping < 1.0:
                blended = (1.0 - damping) * m_bp + damping * new_bp
                blended = _lognorm_rows(blended, "damped message")
            else:
                blended = new_bp

            diff = np.abs(blended - m_bp)
            diff[np.isneginf(blended) & np.isneginf(m_bp)] = 0.0
            edge_delta = diff.max(axis=1)

            # Commit updates only on edges of still-active components.
            live_comp = np.zeros(C, dtype=bool)
            live_comp[seg_comps[active]] = True
            live_edge = live_comp[edge_comp] & cyclic_edge
            m_bp[live_edge] = blended[live_edge]

            seg_delta = np.maximum.reduceat(edge_delta[seg_order], seg_starts)
            newly_done = active & (seg_delta < tol)
            comp_iters[seg_comps[active]] = iteration
            comp_delta[seg_comps[active]] = seg_delta[active]
            if newly_done.any():
                comp_converged[seg_comps[newly_done]] = True
                active = active & ~newly_done
            if not active.any():
                break

    return _finalize(graph, la, m_bp, comp_converged, comp_iters, comp_delta)


def _finalize(graph, la, m_bp, comp_converged, comp_iters, comp_delta) -> InferenceResult:
    N, M = graph.num_physicians, graph.num_patients
    ep, ei = graph.edge_pat, graph.edge_phys

    finite = np.isfinite(m_bp)
    fvals = np.where(finite, m_bp, 0.0)
    b_pat = graph.patient_log_ev.copy()
    for c in (0, 1):
        bf = np.bincount(ep, weights=fvals[:, c], minlength=M)
        bk = np.bincount(ep[~finite[:, c]], minlength=M)
        b_pat[:, c] += _combine(bf, bk)

    m_pb = _patient_to_factor(graph, m_bp)
    lq0 = _neg_log_prob(m_pb)
    fin = np.isfinite(lq0)
    af = np.bincount(ei, weights=np.where(fin, lq0, 0.0), minlength=N)
    ak = np.bincount(ei[~fin], minlength=N)
    b_phy = graph.phys_log_ev + _or_to_physician_log(_combine(af, ak))

    pat_posterior = _posterior_from_beliefs(b_pat, "patient")
    phy_posterior = _posterior_from_beliefs(b_phy, "physician")

    return InferenceResult(
        patient_posterior=_frozen(pat_posterior),
        physician_posterior=_frozen(phy_posterior),
        patient_component=graph.patient_component,
        phys_component=graph.phys_component,
        component_is_tree=graph.component_is_tree,
        component_converged=_frozen(comp_converged),
        component_iterations=_frozen(comp_iters),
        component_final_delta=_frozen(comp_delta),
        physician_ids=graph.physician_ids,
        patient_ids=graph.patient_ids,
    )


def _posterior_from_beliefs(beliefs: np.ndarray, what: str) -> np.ndarray:
    total = np.logaddexp(beliefs[:, 0], beliefs[:, 1])
    if np.isneginf(total).any() or np.isnan(total).any():
        raise IntegrityError(
            f"{what} belief has zero total mass; observed labels are "
            f"mutually contradictory"
        )
    return np.exp(beliefs[:, 1] - total)


# --------------------------------------------------------------------------
# scores.csv
# --------------------------------------------------------------------------


def save_scores(result: InferenceResult, path) -> None:
    """Write physician then patient rows: entity_type, entity_id,
    posterior_positive, component_id, converged."""
    conv_phys = result.component_converged[result.phys_component]
    conv_pat = result.component_converged[result.patient_component]
    frame = pd.DataFrame({
        "entity_type": ["physician"] * result.physician_ids.size
                       + ["patient"] * result.patient_ids.size,
        "entity_id": np.concatenate([result.physician_ids, result.patient_ids]),
        "posterior_positive": np.concatenate(
            [result.physician_posterior, result.patient_posterior]
        ),
        "component_id": np.concatenate([result.phys_component, result.patient_component]),
        "converged": np.concatenate([conv_phys, conv_pat]),
    })
    frame.to_csv(path, index=False)


def load_scores(path) -> pd.DataFrame:
    frame = pd.read_csv(Path(path))
    missing = [c for c in SCORE_COLUMNS if c not in frame.columns]
    if missing:
        raise IntegrityError(f"{path}: scores file missing columns {missing}")
    return frame

"""Adaptive pairwise quadrature for the singular kernel |x-y|^(-alpha).

Each cell-pair integral  I = int_{C_i x C_j} |x-y|^(-alpha) dx dy  is
computed by recursive dyadic subdivision with the midpoint rule per
sub-pair: a sub-pair is accepted when its midpoint estimate agrees with the
sum over its 4^N children's midpoint estimates to the requested relative
tolerance, otherwise the children are refined.

Touching pairs are subdivided away from the shared boundary.  The touching
child configuration is an exact half-scale copy of its parent (the kernel
is a pure power law and the split is dyadic), so the contributions of the
shrinking touching remainder form an exactly geometric series:  with
rho = (number of touching copies) * 2^(alpha - 2N) < 1 the remainder sums
to  a / (1 - rho)  where a is the refined content of the separated
children.  This renewal identity is applied by queueing the separated
children once with weight 1/(1-rho); 2D edge contacts additionally spawn
two corner-contact families handled the same way.  rho >= 1 (possible for
2D edge contacts with s*p >= 1, where the pair measure genuinely diverges)
raises BudgetExceededError.

All pairs of a batch are processed together in vectorized waves with fixed
summation order, so results are bitwise reproducible.  Pairs whose
geometries coincide after translation and scaling are computed once.
"""

from __future__ import annotations

import numpy as np

from .errors import BudgetExceededError

__all__ = ["pair_weight", "batch_pair_weights", "MAX_DEPTH"]

#: adaptive subdivision depth budget
MAX_DEPTH = 40


def _box_gap(lo1, hi1, lo2, hi2):
    """Per-axis gaps between two boxes; 0 on axes where they overlap/touch."""
    return np.maximum(np.maximum(lo2 - hi1, lo1 - hi2), 0.0)


def _midpoint_value(lo1, hi1, lo2, hi2, alpha):
    """Midpoint-rule estimate vol1*vol2*|m1-m2|^(-alpha), vectorized."""
    m1 = 0.5 * (lo1 + hi1)
    m2 = 0.5 * (lo2 + hi2)
    d2 = np.sum((m1 - m2) ** 2, axis=1)
    vol = np.prod(hi1 - lo1, axis=1) * np.prod(hi2 - lo2, axis=1)
    return vol * d2 ** (-0.5 * alpha)


def _split_boxes(lo, hi):
    """All 2^N dyadic children of each box; returns list of (lo, hi)."""
    mid = 0.5 * (lo + hi)
    ndim = lo.shape[1]
    out = []
    for mask in range(1 << ndim):
        clo = lo.copy()
        chi = hi.copy()
        for ax in range(ndim):
            if mask >> ax & 1:
                clo[:, ax] = mid[:, ax]
            else:
                chi[:, ax] = mid[:, ax]
        out.append((clo, chi))
    return out


def _children(lo1, hi1, lo2, hi2):
    """All 4^N child pairs; returns stacked arrays plus the parent index."""
    parts1 = _split_boxes(lo1, hi1)
    parts2 = _split_boxes(lo2, hi2)
    idx = np.arange(lo1.shape[0])
    clo1, chi1, clo2, chi2, parent = [], [], [], [], []
    for a_lo, a_hi in parts1:
        for b_lo, b_hi in parts2:
            clo1.append(a_lo)
            chi1.append(a_hi)
            clo2.append(b_lo)
            chi2.append(b_hi)
            parent.append(idx)
    return (
        np.concatenate(clo1),
        np.concatenate(chi1),
        np.concatenate(clo2),
        np.concatenate(chi2),
        np.concatenate(parent),
    )


class _Queue:
    """Work list of separated sub-pairs awaiting the two-level test."""

    def __init__(self, ndim):
        self.ndim = ndim
        self.items = []

    def push(self, pid, mult, alpha, depth, lo1, hi1, lo2, hi2):
        if pid.size:
            est = _midpoint_value(lo1, hi1, lo2, hi2, alpha)
            self.items.append((pid, mult, alpha, depth, lo1, hi1, lo2, hi2, est))

    def pair_estimates(self, n):
        """Midpoint proxy of each pair's total from the queued entries."""
        est = np.zeros(n)
        for pid, mult, _, _, _, _, _, _, v in self.items:
            est += np.bincount(pid, weights=mult * v, minlength=n)
        return est

    def drain(self):
        if not self.items:
            return None
        cols = tuple(np.concatenate(parts) for parts in zip(*self.items))
        self.items = []
        return cols


#: fraction of the per-pair error budget a single sub-pair may consume
_LEAF_BUDGET_FRACTION = 0.01


def _run_adaptive(queue: _Queue, value, error, rel_tol):
    """Refine queued sub-pairs until each one's two-level difference is an
    acceptably small fraction of its pair's total integral."""
    n = value.size
    budget = _LEAF_BUDGET_FRACTION * rel_tol * queue.pair_estimates(n)
    batch = queue.drain()
    while batch is not None:
        pid, mult, alpha, depth, lo1, hi1, lo2, hi2, est = batch
        if np.any(depth > MAX_DEPTH):
            raise BudgetExceededError(
                f"adaptive refinement exceeded depth {MAX_DEPTH}; "
                "the requested rel_tol may be unattainable"
            )
        clo1, chi1, clo2, chi2, parent = _children(lo1, hi1, lo2, hi2)
        alpha_c = alpha[parent]
        v_child = _midpoint_value(clo1, chi1, clo2, chi2, alpha_c)
        two_level = np.bincount(parent, weights=v_child, minlength=est.size)

        diff = np.abs(two_level - est)
        accept = mult * diff <= budget[pid]
        value += np.bincount(pid[accept], weights=mult[accept] * est[accept],
                             minlength=value.size)
        error += np.bincount(pid[accept], weights=mult[accept] * diff[accept],
                             minlength=error.size)

        keep = ~accept[parent]
        queue.push(
            pid[parent][keep], mult[parent][keep], alpha_c[keep],
            depth[parent][keep] + 1,
            clo1[keep], chi1[keep], clo2[keep], chi2[keep],
        )
        batch = queue.drain()


def _enqueue_corner(queue, pid, mult, alpha, depth, lo1, hi1, lo2, hi2):
    """Renewal step for pairs touching at a single point (any dimension).

    The one touching child is an exact half-scale copy, so the whole pair
    equals (content of the separated children) / (1 - rho).
    """
    ndim = lo1.shape[1]
    rho = 2.0 ** (alpha - 2 * ndim)
    if np.any(rho >= 1.0):
        raise BudgetExceededError(
            "point-touching pair measure diverges (alpha >= 2N); "
            "check that s*p stays below the dimension"
        )
    mult = mult / (1.0 - rho)
    clo1, chi1, clo2, chi2, parent = _children(lo1, hi1, lo2, hi2)
    g = _box_gap(clo1, chi1, clo2, chi2)
    sep = np.sum(g * g, axis=1) > 0.0
    queue.push(
        pid[parent][sep], mult[parent][sep], alpha[parent][sep],
        depth[parent][sep] + 1,
        clo1[sep], chi1[sep], clo2[sep], chi2[sep],
    )


def _enqueue_edge_aligned(queue, pid, mult, alpha, depth, lo1, hi1, lo2, hi2):
    """Renewal step for 2D pairs sharing a full (aligned) edge.

    Children: 2 half-scale edge copies (absorbed into rho = 2^(alpha-3)),
    2 corner-contact pairs (their own renewal) and 12 separated pairs.
    """
    rho = 2.0 * 2.0 ** (alpha - 4.0)
    if np.any(rho >= 1.0):
        raise BudgetExceededError(
            "edge-adjacent cell pairs have divergent kernel measure for "
            "s*p >= 1 in 2D (alpha >= 3)"
        )
    mult = mult / (1.0 - rho)
    clo1, chi1, clo2, chi2, parent = _children(lo1, hi1, lo2, hi2)
    g = _box_gap(clo1, chi1, clo2, chi2)
    touching = np.sum(g * g, axis=1) == 0.0
    sep = ~touching
    queue.push(
        pid[parent][sep], mult[parent][sep], alpha[parent][sep],
        depth[parent][sep] + 1,
        clo1[sep], chi1[sep], clo2[sep], chi2[sep],
    )
    # touching children: drop the 2 edge copies, recurse into the 2 corners
    span = np.minimum(chi1, chi2) - np.maximum(clo1, clo2)
    corner = touching & (np.sum(span > 0, axis=1) == 0)
    _enqueue_corner(
        queue, pid[parent][corner], mult[parent][corner], alpha[parent][corner],
        depth[parent][corner] + 1,
        clo1[corner], chi1[corner], clo2[corner], chi2[corner],
    )


def _dispatch_pairs(queue, pid, mult, alpha, depth, lo1, hi1, lo2, hi2):
    """Route box pairs to the separated queue or a touching renewal."""
    ndim = lo1.shape[1]
    g = _box_gap(lo1, hi1, lo2, hi2)
    touching = np.sum(g * g, axis=1) == 0.0

    sep = ~touching
    queue.push(pid[sep], mult[sep], alpha[sep], depth[sep],
               lo1[sep], hi1[sep], lo2[sep], hi2[sep])
    if not np.any(touching):
        return

    t = np.flatnonzero(touching)
    if ndim == 1:
        _enqueue_corner(queue, pid[t], mult[t], alpha[t], depth[t],
                        lo1[t], hi1[t], lo2[t], hi2[t])
        return

    span = np.minimum(hi1[t], hi2[t]) - np.maximum(lo1[t], lo2[t])
    corner = np.sum(span > 0, axis=1) == 0
    _enqueue_corner(queue, pid[t][corner], mult[t][corner], alpha[t][corner],
                    depth[t][corner],
                    lo1[t][corner], hi1[t][corner], lo2[t][corner], hi2[t][corner])

    edge = ~corner
    if not np.any(edge):
        return
    e = t[edge]
    # split the contact-parallel axis at each box's span endpoints, so every
    # resulting piece pair is an aligned edge, a corner, or separated
    for i in e:
        ax = int(np.argmax(
            (np.minimum(hi1[i], hi2[i]) - np.maximum(lo1[i], lo2[i])) > 0
        ))
        pieces1 = _cut_axis(lo1[i], hi1[i], ax, (lo2[i, ax], hi2[i, ax]))
        pieces2 = _cut_axis(lo2[i], hi2[i], ax, (lo1[i, ax], hi1[i, ax]))
        p_lo1, p_hi1, p_lo2, p_hi2 = [], [], [], []
        for a_lo, a_hi in pieces1:
            for b_lo, b_hi in pieces2:
                p_lo1.append(a_lo)
                p_hi1.append(a_hi)
                p_lo2.append(b_lo)
                p_hi2.append(b_hi)
        p_lo1 = np.array(p_lo1)
        p_hi1 = np.array(p_hi1)
        p_lo2 = np.array(p_lo2)
        p_hi2 = np.array(p_hi2)
        k = p_lo1.shape[0]
        pids = np.full(k, pid[i], dtype=np.intp)
        mults = np.full(k, mult[i])
        alphas = np.full(k, alpha[i])
        depths = np.full(k, depth[i], dtype=np.int16)

        gg = _box_gap(p_lo1, p_hi1, p_lo2, p_hi2)
        tt = np.sum(gg * gg, axis=1) == 0.0
        queue.push(pids[~tt], mults[~tt], alphas[~tt], depths[~tt],
                   p_lo1[~tt], p_hi1[~tt], p_lo2[~tt], p_hi2[~tt])
        tt = np.flatnonzero(tt)
        spans = np.minimum(p_hi1[tt], p_hi2[tt]) - np.maximum(p_lo1[tt], p_lo2[tt])
        crn = np.sum(spans > 0, axis=1) == 0
        _enqueue_corner(queue, pids[tt][crn], mults[tt][crn], alphas[tt][crn],
                        depths[tt][crn], p_lo1[tt][crn], p_hi1[tt][crn],
                        p_lo2[tt][crn], p_hi2[tt][crn])
        aligned = tt[~crn]
        _enqueue_edge_aligned(queue, pids[aligned], mults[aligned],
                              alphas[aligned], depths[aligned],
                              p_lo1[aligned], p_hi1[aligned],
                              p_lo2[aligned], p_hi2[aligned])


def _cut_axis(lo, hi, ax, cuts):
    """Split one box along axis ax at the given coordinates (if interior)."""
    marks = [lo[ax]] + sorted(c for c in cuts if lo[ax] < c < hi[ax]) + [hi[ax]]
    out = []
    for a, b in zip(marks[:-1], marks[1:]):
        plo = lo.copy()
        phi = hi.copy()
        plo[ax] = a
        phi[ax] = b
        out.append((plo, phi))
    return out


def _geometry_keys(lo1, hi1, lo2, hi2, alpha):
    """Group pairs equal up to translation and scaling.

    Returns (keys to first-occurrence index, scale power lambda^(2N-alpha)).
    """
    n, ndim = lo1.shape
    size1 = hi1 - lo1
    size2 = hi2 - lo2
    offset = lo2 - lo1
    lam = np.max(np.concatenate([size1, size2, np.abs(offset)], axis=1), axis=1)
    sig = np.column_stack([size1, size2, offset]) / lam[:, None]
    sig = np.round(sig, 12)
    rec = np.concatenate([sig, alpha[:, None]], axis=1)
    _, first, inverse = np.unique(
        rec.round(12).view([("", rec.dtype)] * rec.shape[1]).ravel(),
        return_index=True, return_inverse=True,
    )
    power = lam ** (2.0 * ndim - alpha)
    return first, inverse, lam, power


def batch_pair_weights(lo1, hi1, lo2, hi2, alpha, rel_tol, *, full_output=False,
                       deduplicate=True):
    """Kernel measures for many cell pairs at once.

    Parameters
    ----------
    lo1, hi1, lo2, hi2 : (n, N) arrays
        Corner coordinates of the cell pairs (disjoint interiors).
    alpha : (n,) array
        Kernel exponents N + s*p per pair.
    rel_tol : float
        Relative two-level acceptance tolerance of the midpoint refinement.
    deduplicate : bool
        Compute geometrically similar pairs (equal after translation and
        scaling, same alpha) only once.

    Returns the (n,) array of pair measures; with ``full_output`` also the
    per-pair absolute error estimates.
    """
    lo1 = np.atleast_2d(np.asarray(lo1, float))
    hi1 = np.atleast_2d(np.asarray(hi1, float))
    lo2 = np.atleast_2d(np.asarray(lo2, float))
    hi2 = np.atleast_2d(np.asarray(hi2, float))
    alpha = np.atleast_1d(np.asarray(alpha, float))
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    n, ndim = lo1.shape

    if deduplicate and n > 1:
        first, inverse, lam, power = _geometry_keys(lo1, hi1, lo2, hi2, alpha)
        # run the unique normalized geometries, then scale back
        idx = first
        norm = lam[idx, None]
        v, e = batch_pair_weights(
            (lo1[idx] - lo1[idx]) / norm, (hi1[idx] - lo1[idx]) / norm,
            (lo2[idx] - lo1[idx]) / norm, (hi2[idx] - lo1[idx]) / norm,
            alpha[idx], rel_tol, full_output=True, deduplicate=False,
        )
        value = v[inverse] * power
        error = e[inverse] * power
        if full_output:
            return value, error
        return value

    value = np.zeros(n)
    error = np.zeros(n)
    queue = _Queue(ndim)
    _dispatch_pairs(
        queue,
        np.arange(n, dtype=np.intp),
        np.ones(n),
        alpha,
        np.ones(n, dtype=np.int16),
        lo1, hi1, lo2, hi2,
    )
    _run_adaptive(queue, value, error, rel_tol)
    # |true - midpoint| of an accepted sub-pair is about 4/3 of the recorded
    # two-level difference; factor 2 keeps the estimate conservative
    error *= 2.0
    if full_output:
        return value, error
    return value


def pair_weight(cell_i, cell_j, s: float, p_ij: float, rel_tol: float,
                *, full_output: bool = False):
    """Kernel measure of a single cell pair.

    cell_i and cell_j are (lower, upper) corner pairs; the kernel exponent
    is N + s*p_ij.  Returns the measure (with ``full_output``, also an
    absolute error estimate).  Raises BudgetExceededError when the depth
    budget is exhausted or the pair measure diverges.
    """
    lo_i, hi_i = (np.atleast_1d(np.asarray(v, float)) for v in cell_i)
    lo_j, hi_j = (np.atleast_1d(np.asarray(v, float)) for v in cell_j)
    alpha = lo_i.size + float(s) * float(p_ij)
    out = batch_pair_weights(
        lo_i[None, :], hi_i[None, :], lo_j[None, :], hi_j[None, :],
        np.array([alpha]), rel_tol, full_output=full_output, deduplicate=False,
    )
    if full_output:
        return float(out[0][0]), float(out[1][0])
    return float(out[0])

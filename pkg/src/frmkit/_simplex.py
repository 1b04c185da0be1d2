"""Dense tableau primal simplex for LPs whose columns come in ``+/-`` pairs.

Split variables (``x = x+ - x-``) give constraint columns that are exact
negatives of each other, so only one of each pair is stored. A logical
column ``j`` maps to physical column ``phys[j]`` with sign ``sgn[j]``, and
the tableau entry is ``sgn[j] * P[i, phys[j]]``.

``P`` has shape ``(m + 2, H + 1)``: ``m`` constraint rows ``B^-1 [A | b]``
followed by two rows ``z = c_B' B^-1 [A | b]`` for the primary cost and a
secondary tie-break cost. Reduced costs are ``c[j] - sgn[j] * z[phys[j]]``,
and the last column holds the right-hand side.
"""
from __future__ import annotations

import numpy as np
from numba import njit

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


@njit(cache=True)
def pivot(P, m, r, q, phys, sgn, costs):
    """Make logical column ``q`` basic in row ``r``.

    Constraint rows are eliminated as usual. The two ``z`` rows change by
    ``d_q`` times the new pivot row, where ``d_q`` is the reduced cost of
    ``q`` under the matching row of ``costs``.
    """
    width = P.shape[1]
    h = phys[q]
    s = sgn[q]
    piv = s * P[r, h]
    for k in range(width):
        P[r, k] /= piv
    for i in range(m):
        if i == r:
            continue
        f = s * P[i, h]
        if f != 0.0:
            for k in range(width):
                P[i, k] -= f * P[r, k]
            P[i, h] = 0.0
    P[r, h] = s
    for row in range(2):
        i = m + row
        dq = costs[row, q] - s * P[i, h]
        if dq != 0.0:
            for k in range(width):
                P[i, k] += dq * P[r, k]


@njit(cache=True)
def run(P, basis, m, phys, sgn, costs, k, eligible, gated, gate_tol, tol_d, zero_tol, max_iter):
    """Primal simplex from a feasible basis.

    Minimises ``costs[k]``, whose ``z`` row is ``P[m + k]``. Entering
    columns must be nonbasic, ``eligible`` and, when ``gated``, have a
    primary reduced cost of at most ``gate_tol`` in magnitude. Dantzig pricing;
    after a degenerate step the next choice uses Bland's rule. Returns
    ``(status, iterations)``.
    """
    ncols = phys.shape[0]
    rhs = P.shape[1] - 1
    is_basic = np.zeros(ncols, dtype=np.bool_)
    for i in range(m):
        is_basic[basis[i]] = True
    bland = False
    it = 0
    while True:
        q = -1
        best = -tol_d
        for j in range(ncols):
            if is_basic[j] or not eligible[j]:
                continue
            h = phys[j]
            if gated and abs(costs[0, j] - sgn[j] * P[m, h]) > gate_tol:
                continue
            dj = costs[k, j] - sgn[j] * P[m + k, h]
            if dj < -tol_d:
                if bland:
                    q = j
                    break
                if dj < best:
                    best = dj
                    q = j
        if q < 0:
            return OPTIMAL, it
        if it >= max_iter:
            return ITERATION_LIMIT, it

        hq = phys[q]
        sq = sgn[q]
        colmax = 0.0
        for i in range(m):
            a = abs(P[i, hq])
            if a > colmax:
                colmax = a
        piv_tol = 1e-9 * colmax
        r = -1
        best_ratio = np.inf
        for i in range(m):
            a = sq * P[i, hq]
            if a > piv_tol:
                ratio = P[i, rhs] / a
                if ratio < 0.0:
                    ratio = 0.0
                if r < 0 or ratio < best_ratio - zero_tol:
                    r = i
                    best_ratio = ratio
                elif ratio <= best_ratio + zero_tol and basis[i] < basis[r]:
                    r = i
                    if ratio < best_ratio:
                        best_ratio = ratio
        if r < 0:
            return UNBOUNDED, it
        bland = best_ratio <= zero_tol
        pivot(P, m, r, q, phys, sgn, costs)
        is_basic[basis[r]] = False
        basis[r] = q
        is_basic[q] = True
        it += 1


@njit(cache=True)
def price(P, m, row, cost, basis):
    """Write ``c_B' B^-1 [A | b]`` for ``cost`` into ``P[row]``."""
    width = P.shape[1]
    for k in range(width):
        P[row, k] = 0.0
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            for k in range(width):
                P[row, k] += cb * P[i, k]


@njit(cache=True)
def refactor(P, basis, phys, sgn, A, b):
    """Rebuild the constraint rows from scratch as ``B^-1 [A | b]``."""
    m = A.shape[0]
    H = A.shape[1]
    B = np.empty((m, m))
    for i in range(m):
        B[:, i] = sgn[basis[i]] * A[:, phys[basis[i]]]
    rhs = np.empty((m, H + 1))
    rhs[:, :H] = A
    rhs[:, H] = b
    P[:m, :] = np.linalg.solve(B, rhs)


@njit(cache=True)
def trace_path(P, basis, A, b, phys, sgn, loss_cost, pen_lo, pen_hi, lams,
               tie_cost, tie_eligible, zero_tol, max_iter, refactor_every):
    """Solve the LP for each penalty in ``lams`` in turn, warm-starting each time.

    Logical columns ``pen_lo:pen_hi`` carry the penalty cost. After each
    primary solve a secondary phase restricted to zero-reduced-cost columns
    in ``tie_eligible`` minimises ``tie_cost``. Returns
    ``(status, x_basic[L, m], bases[L, m], pivots)``; on failure ``status``
    is nonzero and the arrays are only filled up to the failing index.
    """
    m = A.shape[0]
    rhs = P.shape[1] - 1
    ncols = phys.shape[0]
    nl = lams.shape[0]
    xs = np.zeros((nl, m))
    bases = np.zeros((nl, m), dtype=np.int64)
    all_eligible = np.ones(ncols, dtype=np.bool_)
    costs = np.empty((2, ncols))
    costs[0] = loss_cost
    costs[1] = tie_cost
    cost = costs[0]
    since = 0
    total = 0
    for li in range(nl):
        lam = lams[li]
        for k in range(pen_lo, pen_hi):
            cost[k] = lam
        cmax = 0.0
        for k in range(ncols):
            if cost[k] > cmax:
                cmax = cost[k]
        tol_d = 1e-12 * cmax
        price(P, m, m, cost, basis)
        status, its = run(P, basis, m, phys, sgn, costs, 0, all_eligible, False, 0.0,
                          tol_d, zero_tol, max_iter)
        since += its
        total += its
        if status != OPTIMAL:
            return status, xs, bases, total
        if since > refactor_every:
            refactor(P, basis, phys, sgn, A, b)
            price(P, m, m, cost, basis)
            status, its = run(P, basis, m, phys, sgn, costs, 0, all_eligible, False, 0.0,
                              tol_d, zero_tol, max_iter)
            total += its
            since = 0
            if status != OPTIMAL:
                return status, xs, bases, total
        price(P, m, m + 1, tie_cost, basis)
        status, its = run(P, basis, m, phys, sgn, costs, 1, tie_eligible, True, tol_d,
                          1e-12, zero_tol, max_iter)
        since += its
        total += its
        if status == ITERATION_LIMIT:
            return status, xs, bases, total
        for i in range(m):
            xs[li, i] = P[i, rhs]
            bases[li, i] = basis[i]
    return OPTIMAL, xs, bases, total

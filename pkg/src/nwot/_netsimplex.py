"""Network simplex kernel for dense transportation problems.

Operates on the bipartite flow formulation: sources 0..n-1 (supplies a),
sinks n..n+m-1 (demands b), every (source, sink) arc present with cost
C[i, j]. The spanning-tree basis lives in caller-owned arrays so a basis
can be reused across solves: when only the demands change, tree flows are
recomputed and primal feasibility is restored by dual-simplex pivots; when
only the costs change, potentials are recomputed and primal pivoting
continues from the old basis. Pricing uses cyclic block search; the
leaving arc in primal pivots is the last blocking arc encountered when the
cycle is traversed from its apex in the entering arc's direction
(Cunningham's rule), which keeps the basis strongly feasible and prevents
degenerate cycling. Zero supplies/demands are allowed and simply ride
along as degenerate tree arcs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_FLOW_DUST = 1e-15  # negative flow magnitudes below this are rounding noise

STATUS_OPTIMAL = 0
STATUS_PIVOT_LIMIT = 1
STATUS_REPAIR_LIMIT = 2


@njit(cache=True, nogil=True)
def build_basis(a, b, C, parent, first_child, next_sib, prev_sib, flow, pot, depth):
    """Initial spanning tree by the north-west corner rule (root = node 0).

    The staircase walk introduces exactly one unseen node per arc, so the
    tree links, flows and potentials are assembled on the fly.
    """
    n = a.shape[0]
    m = b.shape[0]
    N = n + m
    for w in range(N):
        parent[w] = -1
        first_child[w] = -1
        next_sib[w] = -1
        prev_sib[w] = -1
        flow[w] = 0.0
        pot[w] = 0.0
        depth[w] = 0

    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    for _ in range(N - 1):
        t = ra[i] if ra[i] < rb[j] else rb[j]
        un = i
        vn = n + j
        if un == 0 or parent[un] >= 0:  # source already in the tree
            new = vn
            old = un
        else:
            new = un
            old = vn
        parent[new] = old
        next_sib[new] = first_child[old]
        if first_child[old] >= 0:
            prev_sib[first_child[old]] = new
        first_child[old] = new
        flow[new] = t
        depth[new] = depth[old] + 1
        pot[new] = C[i, j] - pot[old]
        ra[i] -= t
        rb[j] -= t
        if i < n - 1 and (ra[i] <= _FLOW_DUST or j == m - 1):
            i += 1
        else:
            j += 1


@njit(cache=True, nogil=True)
def _bfs_order(parent, first_child, next_sib, order):
    """Preorder traversal from the root into `order`; returns node count."""
    order[0] = 0
    top = 0
    count = 1
    while top < count:
        w = order[top]
        top += 1
        c = first_child[w]
        while c >= 0:
            order[count] = c
            count += 1
            c = next_sib[c]
    return count


@njit(cache=True, nogil=True)
def refresh_flows(a, b, parent, first_child, next_sib, flow, order, excess):
    """Recompute tree-arc flows for (possibly new) marginals a, b.

    Leaf-to-root accumulation: the arc between w and its parent carries the
    accumulated excess of w's subtree, signed by the arc's natural
    (source -> sink) orientation. Flows may come out negative; the caller
    repairs with dual pivots.
    """
    n = a.shape[0]
    N = n + b.shape[0]
    count = _bfs_order(parent, first_child, next_sib, order)
    for w in range(N):
        excess[w] = a[w] if w < n else -b[w - n]
    for idx in range(count - 1, 0, -1):
        w = order[idx]
        e = excess[w]
        flow[w] = e if w < n else -e
        excess[parent[w]] += e


@njit(cache=True, nogil=True)
def refresh_potentials(C, n, parent, first_child, next_sib, pot, depth, order):
    """Recompute potentials and depths from the tree for (new) costs."""
    count = _bfs_order(parent, first_child, next_sib, order)
    pot[0] = 0.0
    depth[0] = 0
    for idx in range(1, count):
        w = order[idx]
        p = parent[w]
        if w < n:
            c = C[w, p - n]
        else:
            c = C[p, w - n]
        pot[w] = c - pot[p]
        depth[w] = depth[p] + 1


@njit(cache=True, nogil=True)
def _apply_pivot(n, iE, jE, theta, leave_side, leave_idx, rcE,
                 parent, first_child, next_sib, prev_sib, flow, pot, depth,
                 path_u, path_v, pu, pv, stack):
    """Push theta around the entering arc's cycle and swap basis arcs.

    path_u / path_v hold the tree paths from the entering arc's endpoints
    to their common ancestor; (leave_side, leave_idx) names the leaving
    arc's position on them. Flows on the cycle move by +-theta (sign by
    the usual source/sink parity); the subtree cut off by the leaving arc
    is re-rooted on the entering arc and its depths/potentials shift.
    """
    for q in range(pu):
        w = path_u[q]
        if w < n:
            flow[w] -= theta
            if -_FLOW_DUST < flow[w] < 0.0:
                flow[w] = 0.0
        else:
            flow[w] += theta
    for q in range(pv):
        w = path_v[q]
        if w >= n:
            flow[w] -= theta
            if -_FLOW_DUST < flow[w] < 0.0:
                flow[w] = 0.0
        else:
            flow[w] += theta

    uN = iE
    vN = n + jE
    if leave_side == 0:
        q0 = uN
        attach = vN
        z = path_u[leave_idx]
    else:
        q0 = vN
        attach = uN
        z = path_v[leave_idx]

    n_chain = 0
    node = q0
    while True:
        stack[n_chain] = node
        n_chain += 1
        if node == z:
            break
        node = parent[node]

    for q in range(n_chain):
        w = stack[q]
        p = parent[w]
        if prev_sib[w] >= 0:
            next_sib[prev_sib[w]] = next_sib[w]
        else:
            first_child[p] = next_sib[w]
        if next_sib[w] >= 0:
            prev_sib[next_sib[w]] = prev_sib[w]

    prev = attach
    fprev = theta
    for q in range(n_chain):
        w = stack[q]
        fcur = flow[w]
        parent[w] = prev
        next_sib[w] = first_child[prev]
        if first_child[prev] >= 0:
            prev_sib[first_child[prev]] = w
        prev_sib[w] = -1
        first_child[prev] = w
        flow[w] = fprev
        prev = w
        fprev = fcur

    if q0 < n:
        d_src = rcE
        d_snk = -rcE
    else:
        d_src = -rcE
        d_snk = rcE
    depth[q0] = depth[attach] + 1
    stack[0] = q0
    top = 1
    while top > 0:
        top -= 1
        w = stack[top]
        if w < n:
            pot[w] += d_src
        else:
            pot[w] += d_snk
        c = first_child[w]
        while c >= 0:
            depth[c] = depth[w] + 1
            stack[top] = c
            top += 1
            c = next_sib[c]


@njit(cache=True, nogil=True)
def primal_loop(a, b, C, tol, max_pivots,
                parent, first_child, next_sib, prev_sib, flow, pot, depth,
                path_u, path_v, stack):
    """Primal network simplex from the current (primal-feasible) basis."""
    n = a.shape[0]
    m = b.shape[0]
    n_arcs = n * m
    block = int(np.sqrt(n_arcs)) + 1
    if block < 64:
        block = 64
    next_arc = 0
    pivots = 0

    while True:
        best_rc = -tol
        best_e = -1
        scanned = 0
        while scanned < n_arcs:
            hi = next_arc + block
            if hi > n_arcs:
                hi = n_arcs
            for e in range(next_arc, hi):
                ii = e // m
                jj = e - ii * m
                rc = C[ii, jj] - pot[ii] - pot[n + jj]
                if rc < best_rc:
                    best_rc = rc
                    best_e = e
            scanned += hi - next_arc
            next_arc = hi
            if next_arc >= n_arcs:
                next_arc = 0
            if best_e >= 0:
                break
        if best_e < 0:
            return STATUS_OPTIMAL, pivots

        iE = best_e // m
        jE = best_e - iE * m
        uN = iE
        vN = n + jE

        pu = 0
        pv = 0
        x = uN
        y = vN
        while depth[x] > depth[y]:
            path_u[pu] = x
            pu += 1
            x = parent[x]
        while depth[y] > depth[x]:
            path_v[pv] = y
            pv += 1
            y = parent[y]
        while x != y:
            path_u[pu] = x
            pu += 1
            x = parent[x]
            path_v[pv] = y
            pv += 1
            y = parent[y]

        theta = np.inf
        leave_side = -1
        leave_idx = -1
        for q in range(pu - 1, -1, -1):
            w = path_u[q]
            if w < n and flow[w] <= theta:
                theta = flow[w]
                leave_side = 0
                leave_idx = q
        for q in range(pv):
            w = path_v[q]
            if w >= n and flow[w] <= theta:
                theta = flow[w]
                leave_side = 1
                leave_idx = q

        _apply_pivot(n, iE, jE, theta, leave_side, leave_idx, best_rc,
                     parent, first_child, next_sib, prev_sib, flow, pot,
                     depth, path_u, path_v, pu, pv, stack)

        pivots += 1
        if pivots > max_pivots:
            return STATUS_PIVOT_LIMIT, pivots


@njit(cache=True, nogil=True)
def dual_repair(a, b, C, tol, max_pivots,
                parent, first_child, next_sib, prev_sib, flow, pot, depth,
                path_u, path_v, stack, in_sub):
    """Restore primal feasibility after a demand change, dual-simplex style.

    While some tree arc carries negative flow: cut the tree there, pick the
    cheapest (minimum reduced cost) arc crossing the cut in the direction
    that feeds the starved side, and pivot with exactly the deficit as the
    push. Dual feasibility (all reduced costs >= 0) is preserved by the
    argmin choice, so when no negative flow remains the basis is optimal up
    to the usual final pricing sweep.
    """
    n = a.shape[0]
    m = b.shape[0]
    N = n + m
    pivots = 0

    while True:
        wstar = -1
        worst = -_FLOW_DUST
        for w in range(1, N):
            if flow[w] < worst:
                worst = flow[w]
                wstar = w
        if wstar < 0:
            return STATUS_OPTIMAL, pivots

        # mark the subtree under wstar
        for w in range(N):
            in_sub[w] = False
        stack[0] = wstar
        top = 1
        while top > 0:
            top -= 1
            w = stack[top]
            in_sub[w] = True
            c = first_child[w]
            while c >= 0:
                stack[top] = c
                top += 1
                c = next_sib[c]

        # entering arc: min reduced cost among arcs feeding the starved side
        best_rc = np.inf
        best_i = -1
        best_j = -1
        if wstar < n:
            # subtree needs inflow: sources outside -> sinks inside
            for i in range(n):
                if in_sub[i]:
                    continue
                ui = pot[i]
                for j in range(m):
                    if not in_sub[n + j]:
                        continue
                    rc = C[i, j] - ui - pot[n + j]
                    if rc < best_rc:
                        best_rc = rc
                        best_i = i
                        best_j = j
        else:
            # subtree needs outflow: sources inside -> sinks outside
            for i in range(n):
                if not in_sub[i]:
                    continue
                ui = pot[i]
                for j in range(m):
                    if in_sub[n + j]:
                        continue
                    rc = C[i, j] - ui - pot[n + j]
                    if rc < best_rc:
                        best_rc = rc
                        best_i = i
                        best_j = j
        if best_i < 0:
            return STATUS_REPAIR_LIMIT, pivots
        if best_rc < 0.0 and best_rc > -tol:
            best_rc = 0.0

        iE = best_i
        jE = best_j
        uN = iE
        vN = n + jE

        pu = 0
        pv = 0
        x = uN
        y = vN
        while depth[x] > depth[y]:
            path_u[pu] = x
            pu += 1
            x = parent[x]
        while depth[y] > depth[x]:
            path_v[pv] = y
            pv += 1
            y = parent[y]
        while x != y:
            path_u[pu] = x
            pu += 1
            x = parent[x]
            path_v[pv] = y
            pv += 1
            y = parent[y]

        # locate the leaving (negative) arc on the cycle
        leave_side = -1
        leave_idx = -1
        for q in range(pu):
            if path_u[q] == wstar:
                leave_side = 0
                leave_idx = q
                break
        if leave_side < 0:
            for q in range(pv):
                if path_v[q] == wstar:
                    leave_side = 1
                    leave_idx = q
                    break
        if leave_side < 0:
            return STATUS_REPAIR_LIMIT, pivots

        theta = -flow[wstar]
        _apply_pivot(n, iE, jE, theta, leave_side, leave_idx, best_rc,
                     parent, first_child, next_sib, prev_sib, flow, pot,
                     depth, path_u, path_v, pu, pv, stack)

        pivots += 1
        if pivots > max_pivots:
            return STATUS_REPAIR_LIMIT, pivots


@njit(cache=True, nogil=True)
def northwest_corner_min(a, b, C, row_perms, col_perms):
    """Exhaustive oracle: minimum transport cost over every basic solution
    reachable by the north-west corner rule under row/column reorderings.

    Every vertex of the transportation polytope arises this way, so the
    minimum over all n! * m! ordering pairs is the exact LP optimum.
    """
    n = a.shape[0]
    m = b.shape[0]
    ra = np.empty(n)
    rb = np.empty(m)
    best = np.inf
    for r in range(row_perms.shape[0]):
        for c in range(col_perms.shape[0]):
            for ii in range(n):
                ra[ii] = a[row_perms[r, ii]]
            for jj in range(m):
                rb[jj] = b[col_perms[c, jj]]
            total = 0.0
            i = 0
            j = 0
            while i < n and j < m:
                t = ra[i] if ra[i] < rb[j] else rb[j]
                total += t * C[row_perms[r, i], col_perms[c, j]]
                if total >= best:
                    break
                ra[i] -= t
                rb[j] -= t
                if i < n - 1 and (ra[i] <= _FLOW_DUST or j == m - 1):
                    i += 1
                else:
                    j += 1
            if total < best:
                best = total
    return best

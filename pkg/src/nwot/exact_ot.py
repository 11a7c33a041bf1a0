"""Exact Wasserstein distances between weighted point clouds.

The solver is a network simplex on the bipartite transportation formulation
(`nwot._netsimplex`). Every solve returns a vertex optimal plan together
with dual potentials (u, v); the wrapper checks dual feasibility and the
zero duality gap before returning, so a returned plan is a certified
optimum. A `TransportState` keeps the spanning-tree basis alive between
related solves (demand changes are repaired dually, cost changes restart
primal pivoting from the old basis), which is what makes the alternating
solvers fast; a failed warm start silently falls back to a cold solve. A
brute-force enumeration oracle backs the test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from nwot import _netsimplex as kernel
from nwot.core import DiscreteDistribution, pairwise_costs

MARGINAL_TOL = 1e-7
_CERT_TOL = 1e-9  # internal certificate tolerance, relative to cost scale


class SolverError(RuntimeError):
    """Internal solver failure (non-convergence or certificate violation)."""


class _Solution(NamedTuple):
    """Sparse optimal plan plus certified duals for one transport solve."""

    rows: np.ndarray
    cols: np.ndarray
    flows: np.ndarray
    u: np.ndarray
    v: np.ndarray
    value: float

    def dense(self, shape) -> np.ndarray:
        P = np.zeros(shape)
        np.add.at(P, (self.rows, self.cols), self.flows)
        return P

    def row_costs(self, cost: np.ndarray) -> np.ndarray:
        """Transport cost attributed to each source point."""
        out = np.zeros(cost.shape[0])
        np.add.at(out, self.rows, self.flows * cost[self.rows, self.cols])
        return out


class TransportState:
    """Reusable basis for a sequence of related transportation solves."""

    def __init__(self, n: int, m: int):
        N = n + m
        self.n = n
        self.m = m
        self.parent = np.empty(N, np.int64)
        self.first_child = np.empty(N, np.int64)
        self.next_sib = np.empty(N, np.int64)
        self.prev_sib = np.empty(N, np.int64)
        self.flow = np.empty(N)
        self.pot = np.empty(N)
        self.depth = np.empty(N, np.int64)
        self.path_u = np.empty(N, np.int64)
        self.path_v = np.empty(N, np.int64)
        self.stack = np.empty(N, np.int64)
        self.order = np.empty(N, np.int64)
        self.excess = np.empty(N)
        self.in_sub = np.empty(N, np.bool_)
        self.ready = False

    def _tree_args(self):
        return (self.parent, self.first_child, self.next_sib, self.prev_sib,
                self.flow, self.pot, self.depth)

    def solve(self, a, b, C) -> tuple[int, int]:
        """Solve with warm start when a basis is available; returns
        (status, pivots). On any warm-start failure the caller should cold
        re-solve via reset()."""
        tol = 1e-12 * max(1.0, float(np.abs(C).max()))
        max_pivots = 200 * (self.n + self.m) + 10000
        if not self.ready:
            kernel.build_basis(a, b, C, *self._tree_args())
        else:
            kernel.refresh_potentials(
                C, self.n, self.parent, self.first_child, self.next_sib,
                self.pot, self.depth, self.order,
            )
            kernel.refresh_flows(
                a, b, self.parent, self.first_child, self.next_sib,
                self.flow, self.order, self.excess,
            )
            # each repair pivot rescans the cut arcs, so repairing is only
            # worth it near the old basis; beyond the cap a cold build wins
            repair_cap = max(500, (self.n + self.m) // 2)
            status, _ = kernel.dual_repair(
                a, b, C, tol, repair_cap, *self._tree_args(),
                self.path_u, self.path_v, self.stack, self.in_sub,
            )
            if status != kernel.STATUS_OPTIMAL:
                kernel.build_basis(a, b, C, *self._tree_args())
        status, pivots = kernel.primal_loop(
            a, b, C, tol, max_pivots, *self._tree_args(),
            self.path_u, self.path_v, self.stack,
        )
        self.ready = status == kernel.STATUS_OPTIMAL
        return status, pivots

    def reset(self):
        self.ready = False

    def extract(self, a, b, C) -> _Solution:
        n, m = self.n, self.m
        nodes = np.arange(1, n + m)
        parents = self.parent[1:]
        is_src = nodes < n
        rows = np.where(is_src, nodes, parents)
        cols = np.where(is_src, parents, nodes) - n
        flows = self.flow[1:]
        keep = flows > 0.0
        rows, cols, flows = rows[keep], cols[keep], flows[keep]
        value = float(np.sum(flows * C[rows, cols]))
        return _Solution(rows, cols, flows, self.pot[:n].copy(),
                         self.pot[n:].copy(), value)


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between two weighted point clouds.

    Rows marginalize to `source_marginal`, columns to `target_marginal`
    (within 1e-7), and `objective` is the transport cost of `matrix` under
    the cost matrix it was solved against. `potential_source` and
    `potential_target` are the dual potentials certifying optimality.
    """

    matrix: np.ndarray
    source_marginal: np.ndarray
    target_marginal: np.ndarray
    objective: float
    potential_source: np.ndarray
    potential_target: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        src = np.asarray(self.source_marginal, dtype=np.float64).reshape(-1)
        tgt = np.asarray(self.target_marginal, dtype=np.float64).reshape(-1)
        if matrix.shape != (src.shape[0], tgt.shape[0]):
            raise ValueError("plan shape must match the marginals")
        if matrix.size and float(matrix.min()) < -MARGINAL_TOL:
            raise ValueError("plan entries must be nonnegative")
        row_err = float(np.abs(matrix.sum(axis=1) - src).max())
        col_err = float(np.abs(matrix.sum(axis=0) - tgt).max())
        if row_err > MARGINAL_TOL or col_err > MARGINAL_TOL:
            raise ValueError(
                f"marginal violation: rows {row_err:.3e}, cols {col_err:.3e}"
            )
        for name in ("matrix", "source_marginal", "target_marginal",
                     "potential_source", "potential_target"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "objective", float(self.objective))


def solve_transport(
    a: np.ndarray,
    cost: np.ndarray,
    b: np.ndarray,
    state: TransportState | None = None,
) -> _Solution:
    """Exact transportation solve with certificate checks.

    `a` and `b` are nonnegative marginals with equal sums; zero entries are
    allowed (their basis arcs are degenerate and their potentials come out
    dual-feasible like everyone else's). Passing a TransportState of the
    right shape reuses the previous basis. Raises SolverError if the solver
    fails to converge or the optimality certificate does not hold.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n, m = cost.shape
    if a.shape[0] != n or b.shape[0] != m:
        raise ValueError("marginal lengths must match the cost matrix")
    if a.size and float(a.min()) < 0.0 or b.size and float(b.min()) < 0.0:
        raise ValueError("marginals must be nonnegative")
    sa, sb = float(a.sum()), float(b.sum())
    if abs(sa - sb) > 1e-9:
        raise ValueError(f"marginals must carry equal mass: {sa} vs {sb}")
    if sa <= 0.0 or sb <= 0.0:
        raise ValueError("marginals must carry positive mass")
    if sb != sa:
        b = b * (sa / sb)

    if state is None or state.n != n or state.m != m:
        state = TransportState(n, m)

    attempts = (True, False) if state.ready else (False,)
    last_error = "network simplex failed"
    for warm in attempts:
        if not warm:
            state.reset()
        status, _ = state.solve(a, b, cost)
        if status != kernel.STATUS_OPTIMAL:
            last_error = "network simplex hit its pivot limit"
            continue
        sol = state.extract(a, b, cost)
        scale = max(1.0, float(np.abs(cost).max()))
        slack_min = float((cost - sol.u[:, None] - sol.v[None, :]).min())
        dual_val = float(a @ sol.u + b @ sol.v)
        if (
            slack_min >= -_CERT_TOL * scale
            and abs(dual_val - sol.value) <= _CERT_TOL * scale * 10.0
        ):
            return sol
        last_error = (
            f"optimality certificate failed: slack {slack_min:.3e}, "
            f"gap {dual_val - sol.value:.3e}"
        )
    state.reset()
    raise SolverError(last_error)


def tighten_free_duals(sol: _Solution, cost: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Strongest feasible sink potentials on zero-demand columns.

    Tree potentials on massless columns are feasible but loose; replacing
    v_j by min_i (c_ij - u_i) sharpens cutting planes built from the duals.
    """
    v = sol.v.copy()
    free = np.flatnonzero(b <= 0.0)
    if free.size:
        v[free] = np.min(cost[:, free] - sol.u[:, None], axis=0)
    return v


def wasserstein(
    a: DiscreteDistribution, b: DiscreteDistribution, exponent: float = 1.0
) -> tuple[float, TransportPlan]:
    """Exact Wasserstein transport cost between two distributions.

    Returns the optimal objective and the optimal plan. For exponent 2 the
    value is the optimal squared-distance cost itself, not its square root;
    callers wanting W_2 take the root explicitly.
    """
    if a.dimension != b.dimension:
        raise ValueError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    exponent = float(exponent)
    cost = pairwise_costs(a.points, b.points, exponent)
    sol = solve_transport(a.weights, cost, b.weights)
    matrix = sol.dense(cost.shape)
    recomputed = float((matrix * cost).sum())
    if abs(recomputed - sol.value) > MARGINAL_TOL * max(1.0, abs(sol.value)):
        raise SolverError("plan objective re-verification failed")
    plan = TransportPlan(
        matrix=matrix,
        source_marginal=a.weights,
        target_marginal=b.weights,
        objective=sol.value,
        potential_source=sol.u,
        potential_target=sol.v,
    )
    return sol.value, plan


def _permutation_minimum(cost: np.ndarray) -> float:
    n = cost.shape[0]
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
    return float(totals.min()) / n


def wasserstein_bruteforce(
    a: DiscreteDistribution, b: DiscreteDistribution, exponent: float = 1.0
) -> float:
    """Exhaustive-enumeration oracle for small instances.

    Uniform equal-size inputs (n == m <= 8) are solved by enumerating all
    point-to-point assignments. Otherwise both sides must have at most 6
    points; every vertex of the transportation polytope is enumerated via
    north-west-corner fills under all row/column orderings.
    """
    if a.dimension != b.dimension:
        raise ValueError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    cost = pairwise_costs(a.points, b.points, float(exponent))
    n, m = cost.shape
    uniform = (
        n == m
        and np.allclose(a.weights, 1.0 / n, atol=1e-12)
        and np.allclose(b.weights, 1.0 / m, atol=1e-12)
    )
    if uniform:
        if n > 8:
            raise ValueError("brute force limited to n = m <= 8 uniform points")
        return _permutation_minimum(cost)
    if n > 6 or m > 6:
        raise ValueError("brute force limited to 6x6 for general weights")
    row_perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    col_perms = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
    return float(
        kernel.northwest_corner_min(
            np.ascontiguousarray(a.weights),
            np.ascontiguousarray(b.weights),
            np.ascontiguousarray(cost),
            row_perms,
            col_perms,
        )
    )

"""Exact proportion fitting for fixed component supports.

Solves  min_{pi in simplex} W(data, mixture(pi))  where mixture(pi) places
mass pi_c * w_{cj} on support point j of component c. The problem is a
single linear program in (plan, pi); here it is solved by cutting planes:
each transport solve at a fixed pi yields dual potentials (u, v), hence the
supporting hyperplane  f(pi') >= u.a + (B^T v).pi'  valid on the whole
simplex because the transport dual's feasible set does not depend on pi.
The master problem over (pi, z) is a tiny LP. Queries are stabilized
in-out style: the next point interpolates between the incumbent and the
master argmin, switching to a pure master step whenever the incumbent
stalls, which avoids Kelley zigzag. The gap between the best transport
value and the master bound certifies optimality on exit.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from nwot.exact_ot import (
    SolverError,
    TransportState,
    _Solution,
    solve_transport,
    tighten_free_duals,
)

_IN_STEP = 0.5    # interpolation toward the master argmin on stabilized steps
_TRUST_STEP = 0.25  # per-coordinate query-step bound around the incumbent


class MixtureWeightsResult(NamedTuple):
    pi: np.ndarray
    value: float
    solution: _Solution  # transport solve at the returned pi
    gap: float
    cuts: int


def solve_mixture_weights(
    a: np.ndarray,
    cost: np.ndarray,
    profile: np.ndarray,
    comp_of: np.ndarray,
    k: int,
    pi0: np.ndarray | None = None,
    pi_floor: float = 0.0,
    rel_tol: float = 1e-9,
    max_cuts: int = 400,
    state: TransportState | None = None,
) -> MixtureWeightsResult:
    """Minimize W(data, mixture(pi)) over the simplex.

    a: data weights (n,), summing to 1.
    cost: (n, M) ground costs against the stacked component supports.
    profile: (M,) within-component weights (each component block sums to 1).
    comp_of: (M,) component index of each support column.
    pi0: optional warm-start proportions.
    pi_floor: lower bound per proportion entry (0 disables).
    rel_tol / max_cuts: certificate gap target and cut budget. The returned
    value is always exact at the returned pi; `gap` bounds its distance
    from the global optimum.
    state: optional reusable transport basis (also reused across calls).
    """
    n, M = cost.shape
    if profile.shape[0] != M or comp_of.shape[0] != M:
        raise ValueError("profile and comp_of must match the cost columns")
    if pi_floor * k > 1.0 + 1e-12:
        raise ValueError("proportion floor is infeasible for this k")

    if pi0 is not None and pi0.shape[0] == k and abs(pi0.sum() - 1.0) < 1e-9:
        pi = np.maximum(pi0, pi_floor)
        pi = pi / pi.sum()
    else:
        pi = np.full(k, 1.0 / k)

    if k == 1:
        sol = solve_transport(a, cost, profile, state=state)
        return MixtureWeightsResult(np.array([1.0]), sol.value, sol, 0.0, 1)

    cut_alpha: list[float] = []
    cut_g: list[np.ndarray] = []
    best_val = np.inf
    best_pi = pi
    best_sol: _Solution | None = None
    gap = np.inf
    bounds = [(pi_floor, None)] * k + [(None, None)]
    c_obj = np.zeros(k + 1)
    c_obj[k] = 1.0
    A_eq = np.zeros((1, k + 1))
    A_eq[0, :k] = 1.0

    cuts = 0
    pure_step = False  # alternate stabilized and pure master steps on stall
    for cuts in range(1, max_cuts + 1):
        b = profile * pi[comp_of]
        sol = solve_transport(a, cost, b, state=state)
        improved = sol.value < best_val - 1e-14 * max(1.0, abs(best_val))
        if sol.value < best_val:
            best_val = sol.value
            best_pi = pi
            best_sol = sol
        alpha = float(a @ sol.u)
        v = tighten_free_duals(sol, cost, b)
        g = np.bincount(comp_of, weights=profile * v, minlength=k)
        cut_alpha.append(alpha)
        cut_g.append(g)

        if cuts == max_cuts:
            break

        # master: min z  s.t.  z >= alpha_s + g_s . pi, pi in simplex
        A_ub = np.column_stack([np.array(cut_g), -np.ones(len(cut_g))])
        b_ub = -np.array(cut_alpha)
        res = linprog(
            c_obj, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
            bounds=bounds, method="highs",
        )
        if res.status != 0:
            raise SolverError(f"cutting-plane master failed: {res.message}")
        lower = float(res.x[k])
        gap = best_val - lower
        if gap <= rel_tol * max(1.0, abs(best_val)):
            break
        hat = np.maximum(res.x[:k], pi_floor)
        hat = hat / hat.sum()
        if pure_step:
            pi = hat
            pure_step = False
        else:
            # stabilized step, additionally bounded so warm transport
            # restarts stay cheap; a stalled incumbent escapes via the
            # next pure master step
            delta = _IN_STEP * (hat - best_pi)
            overshoot = float(np.abs(delta).max())
            if overshoot > _TRUST_STEP:
                delta *= _TRUST_STEP / overshoot
            pi = best_pi + delta
            pi = np.maximum(pi, pi_floor)
            pi = pi / pi.sum()
            pure_step = not improved
    assert best_sol is not None
    return MixtureWeightsResult(best_pi, best_val, best_sol, max(gap, 0.0), cuts)

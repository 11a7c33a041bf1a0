"""Normalized Wasserstein between two distributions.

Given a component budget k, jointly fits shared components G_1..G_k and two
free proportion vectors so that the sum
W(x, mixture(G, pi1)) + W(y, mixture(G, pi2)) is minimized. For fixed
component supports each term is a single LP in (plan, proportions), solved
exactly (`nwot._mixture_lp`); the supports themselves are improved by
block-coordinate descent with barycentric-projection moves. Moves are only
accepted when they do not increase the objective, so the per-iteration
trace is monotone by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nwot._mixture_lp import MixtureWeightsResult, solve_mixture_weights
from nwot._parallel import run_indexed
from nwot.core import (
    DiscreteDistribution,
    MixtureComponent,
    SimplexVector,
    pairwise_costs,
)
from nwot.exact_ot import SolverError, TransportPlan, TransportState

_ACCEPT_SLACK = 1e-12  # absolute slack when comparing candidate objectives
_DEAD_MASS = 1e-12     # combined proportion below which a component is dead
_STEP_FACTORS = (1.0, 0.5, 0.25)

# cut budgets for the proportion LP: QUICK evaluates a candidate at the
# warm-started proportions only (its value is exact there, which is all the
# accept/reject test needs); INNER improves proportions between support
# moves; FINAL refines the winning restart before reporting.
_QUICK = {"rel_tol": 1e-5, "max_cuts": 1}
_INNER = {"rel_tol": 1e-5, "max_cuts": 5}
_FINAL = {"rel_tol": 1e-7, "max_cuts": 25}


@dataclass(frozen=True)
class NwConfig:
    """Settings for the normalized Wasserstein solver.

    k: component budget.
    exponent: ground-cost exponent (1 or 2).
    points_per_component: support size of each fitted component.
    max_outer_iters / tol: stop when the relative objective drop per outer
        iteration falls below tol, or after max_outer_iters iterations.
    proportion_floor: optional lower bound on every proportion entry.
    seed / restarts: seeded random initializations; the best run wins.
    """

    k: int
    exponent: float = 1.0
    points_per_component: int = 32
    max_outer_iters: int = 100
    tol: float = 1e-6
    proportion_floor: float = 0.0
    seed: int = 0
    restarts: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if float(self.exponent) not in (1.0, 2.0):
            raise ValueError("exponent must be 1 or 2")
        if self.points_per_component < 1:
            raise ValueError("points_per_component must be >= 1")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if not 0.0 <= self.proportion_floor <= 1.0 / self.k:
            raise ValueError("proportion_floor must lie in [0, 1/k]")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class NwResult:
    """Outcome of a normalized Wasserstein solve.

    value equals plan1.objective + plan2.objective; trace holds the
    objective after each accepted outer iteration and never increases.
    """

    value: float
    pi1: SimplexVector
    pi2: SimplexVector
    components: tuple
    plan1: TransportPlan
    plan2: TransportPlan
    trace: tuple
    converged: bool


class _Supports:
    """Stacked component supports: positions, per-column weight, owner index."""

    __slots__ = ("positions", "profile", "comp_of", "k")

    def __init__(self, positions, profile, comp_of, k):
        self.positions = positions
        self.profile = profile
        self.comp_of = comp_of
        self.k = k

    def with_positions(self, positions) -> "_Supports":
        return _Supports(positions, self.profile, self.comp_of, self.k)

    def block(self, c) -> np.ndarray:
        return np.flatnonzero(self.comp_of == c)

    def to_components(self) -> tuple:
        comps = []
        for c in range(self.k):
            idx = self.block(c)
            w = self.profile[idx]
            comps.append(
                MixtureComponent(self.positions[idx], SimplexVector(w / w.sum()))
            )
        return tuple(comps)


def _supports_from_components(components) -> _Supports:
    comps = tuple(components)
    if not comps:
        raise ValueError("need at least one component")
    dims = {c.dimension for c in comps}
    if len(dims) != 1:
        raise ValueError("components disagree on dimension")
    positions = np.concatenate([c.support for c in comps], axis=0)
    profile = np.concatenate([c.weights.values for c in comps])
    comp_of = np.concatenate(
        [np.full(len(c.weights), i, dtype=np.int64) for i, c in enumerate(comps)]
    )
    return _Supports(positions, profile, comp_of, len(comps))


def _canonical_pool(x: DiscreteDistribution, y: DiscreteDistribution):
    """Pool both supports, sorted lexicographically so the initialization is
    identical for (x, y) and (y, x); also returns pooled slots of each side."""
    pts = np.concatenate([x.points, y.points], axis=0)
    w = np.concatenate([x.weights, y.weights]) / 2.0
    order = np.lexsort(pts.T[::-1])
    inv = np.empty_like(order)
    inv[order] = np.arange(order.shape[0])
    return pts[order], w[order], inv[: len(x)], inv[len(x):]


def _kmeanspp_indices(points, probs, k, rng) -> np.ndarray:
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.choice(n, p=probs)
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for t in range(1, k):
        mass = probs * d2
        total = mass.sum()
        if total <= 0.0:
            chosen[t] = rng.choice(n, p=probs)
        else:
            chosen[t] = rng.choice(n, p=mass / total)
        d2 = np.minimum(d2, ((points - points[chosen[t]]) ** 2).sum(axis=1))
    return chosen


_LLOYD_ROUNDS = 2  # cheap center polish after k-means++ seeding


def _seed_supports(points, weights, k, ppc, rng):
    """k-means++ seeding (plus a couple of Lloyd rounds) on the pooled
    support; each component takes up to `ppc` of its cluster's points as
    its initial support. Also returns the clusters' mass shares, the
    natural warm start for the proportions."""
    n = points.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} pooled support points, got {n}")
    probs = weights / weights.sum()
    seeds = _kmeanspp_indices(points, probs, k, rng)
    centers = points[seeds].copy()
    for _ in range(_LLOYD_ROUNDS + 1):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        moved = False
        for c in range(k):
            members = np.flatnonzero(labels == c)
            if members.size:
                w = weights[members]
                new_center = (w @ points[members]) / w.sum() if w.sum() > 0 \
                    else points[members].mean(axis=0)
                if not np.array_equal(new_center, centers[c]):
                    centers[c] = new_center
                    moved = True
        if not moved:
            break
    blocks = []
    shares = np.zeros(k)
    for c in range(k):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            members = seeds[c : c + 1]
        shares[c] = weights[members].sum()
        if members.size > ppc:
            p = weights[members]
            members = rng.choice(members, size=ppc, replace=False, p=p / p.sum())
            members = np.sort(members)
        blocks.append(points[members])
    positions = np.concatenate(blocks, axis=0)
    profile = np.concatenate([np.full(len(b), 1.0 / len(b)) for b in blocks])
    comp_of = np.concatenate(
        [np.full(len(b), c, dtype=np.int64) for c, b in enumerate(blocks)]
    )
    shares = shares / shares.sum()
    return _Supports(positions, profile, comp_of, k), shares


class _PairState:
    """One evaluation of both transport terms at fixed supports."""

    __slots__ = ("value", "r1", "r2", "cost1", "cost2")

    def __init__(self, value, r1, r2, cost1, cost2):
        self.value = value
        self.r1 = r1
        self.r2 = r2
        self.cost1 = cost1
        self.cost2 = cost2


def _solve_pair(x, y, sup, exponent, warm1, warm2, floor, budget, same,
                states=None) -> _PairState:
    s1, s2 = states if states is not None else (None, None)
    cost1 = pairwise_costs(x.points, sup.positions, exponent)
    r1 = solve_mixture_weights(
        x.weights, cost1, sup.profile, sup.comp_of, sup.k,
        pi0=warm1, pi_floor=floor, state=s1, **budget,
    )
    if same:
        return _PairState(2.0 * r1.value, r1, r1, cost1, cost1)
    cost2 = pairwise_costs(y.points, sup.positions, exponent)
    r2 = solve_mixture_weights(
        y.weights, cost2, sup.profile, sup.comp_of, sup.k,
        pi0=warm2, pi_floor=floor, state=s2, **budget,
    )
    return _PairState(r1.value + r2.value, r1, r2, cost1, cost2)


def _barycentric_target(x, y, sup, state, same, exponent) -> np.ndarray:
    """Transport-weighted projection target for every support point.

    For squared costs each point moves to the plain weighted mean of the
    data coupled to it (the exact minimizer given the plans). For absolute
    costs the mean overshoots, so the weights are tempered by the inverse
    current distances (one Weiszfeld step toward the weighted geometric
    median). Zero-mass points stay put."""
    M, d = sup.positions.shape
    num = np.zeros((M, d))
    den = np.zeros(M)
    passes = ((x, state.r1),) if same else ((x, state.r1), (y, state.r2))
    for dist, res in passes:
        sol = res.solution
        w = sol.flows
        if exponent == 1.0:
            gaps = np.sqrt(
                ((dist.points[sol.rows] - sup.positions[sol.cols]) ** 2).sum(axis=1)
            )
            w = w / np.maximum(gaps, 1e-12)
        np.add.at(num, sol.cols, w[:, None] * dist.points[sol.rows])
        np.add.at(den, sol.cols, w)
    target = sup.positions.copy()
    moving = den > 0.0
    target[moving] = num[moving] / den[moving, None]
    return target


def _pooled_cost_contributions(pool_n, slots_x, slots_y, state, same):
    contrib = np.zeros(pool_n)
    c1 = state.r1.solution.row_costs(state.cost1)
    contrib[slots_x] += c1
    contrib[slots_y] += c1 if same else state.r2.solution.row_costs(state.cost2)
    return contrib


def _relocate_dead(sup, dead, pool_pts, contrib) -> _Supports:
    """Re-seed dead components around the data points that currently pay the
    most transport cost (worst-first, one target point per component)."""
    order = np.argsort(-contrib, kind="stable")
    positions = sup.positions.copy()
    for rank, c in enumerate(np.flatnonzero(dead)):
        target = pool_pts[order[rank % len(order)]]
        idx = sup.block(c)
        d2 = ((pool_pts - target) ** 2).sum(axis=1)
        nearest = np.argsort(d2, kind="stable")[: idx.size]
        positions[idx] = pool_pts[nearest]
    return sup.with_positions(positions)


class _RunOutcome:
    __slots__ = ("value", "sup", "state", "trace", "converged", "lp_states")

    def __init__(self, value, sup, state, trace, converged, lp_states):
        self.value = value
        self.sup = sup
        self.state = state
        self.trace = trace
        self.converged = converged
        self.lp_states = lp_states


def _nw_run(x, y, cfg, run_seed, same, pool) -> _RunOutcome:
    pool_pts, pool_w, slots_x, slots_y = pool
    rng = np.random.default_rng(run_seed)
    sup, shares = _seed_supports(
        pool_pts, pool_w, cfg.k, cfg.points_per_component, rng
    )
    exponent = float(cfg.exponent)
    floor = cfg.proportion_floor
    M = sup.positions.shape[0]
    states = (TransportState(len(x), M), TransportState(len(y), M))
    state = _solve_pair(x, y, sup, exponent, shares, shares, floor, _INNER,
                        same, states)
    value = state.value
    trace = [value]
    converged = False
    reseeded = np.zeros(cfg.k, dtype=bool)

    for _ in range(cfg.max_outer_iters):
        if floor == 0.0:
            dead = (state.r1.pi + state.r2.pi <= _DEAD_MASS) & ~reseeded
            if dead.any():
                contrib = _pooled_cost_contributions(
                    len(pool_pts), slots_x, slots_y, state, same
                )
                sup = _relocate_dead(sup, dead, pool_pts, contrib)
                reseeded |= dead
                cand = _solve_pair(x, y, sup, exponent, state.r1.pi,
                                   state.r2.pi, floor, _INNER, same, states)
                # prior solution stays feasible (dead components carry no
                # mass), so this never increases the objective
                if cand.value <= value + _ACCEPT_SLACK * max(1.0, abs(value)):
                    state, value = cand, cand.value
                    trace.append(value)

        # candidate support moves are screened with the proportions held at
        # their warm values (single transport solve per side: cheap, and
        # still an exact objective value, so monotonicity is preserved)
        target = _barycentric_target(x, y, sup, state, same, exponent)
        accepted = None
        for step in _STEP_FACTORS:
            cand_sup = sup.with_positions(
                sup.positions + step * (target - sup.positions)
            )
            cand = _solve_pair(x, y, cand_sup, exponent, state.r1.pi,
                               state.r2.pi, floor, _QUICK, same, states)
            if cand.value <= value + _ACCEPT_SLACK * max(1.0, abs(value)):
                accepted = (cand_sup, cand)
                break
        if accepted is None:
            # before giving up, let the proportions adapt to the full move
            cand_sup = sup.with_positions(target)
            cand = _solve_pair(x, y, cand_sup, exponent, state.r1.pi,
                               state.r2.pi, floor, _INNER, same, states)
            if cand.value <= value + _ACCEPT_SLACK * max(1.0, abs(value)):
                accepted = (cand_sup, cand)
        if accepted is None:
            converged = True
            break
        sup, cand = accepted
        # proportion improvement at the accepted supports (never increases)
        state = _solve_pair(x, y, sup, exponent, cand.r1.pi, cand.r2.pi,
                            floor, _INNER, same, states)
        if state.value > cand.value:
            state = cand
        drop = value - state.value
        value = state.value
        trace.append(value)
        if drop <= cfg.tol * max(abs(value), 1e-12):
            converged = True
            break

    return _RunOutcome(value, sup, state, trace, converged, states)


def _plan_from(res: MixtureWeightsResult, data, sup) -> TransportPlan:
    sol = res.solution
    n, M = len(data), sup.positions.shape[0]
    matrix = np.zeros((n, M))
    np.add.at(matrix, (sol.rows, sol.cols), sol.flows)
    return TransportPlan(
        matrix=matrix,
        source_marginal=data.weights,
        target_marginal=sup.profile * res.pi[sup.comp_of],
        objective=sol.value,
        potential_source=sol.u,
        potential_target=sol.v,
    )


def _result_from(x, y, sup, state, components, trace, converged) -> NwResult:
    return NwResult(
        value=state.value,
        pi1=SimplexVector(state.r1.pi),
        pi2=SimplexVector(state.r2.pi),
        components=components,
        plan1=_plan_from(state.r1, x, sup),
        plan2=_plan_from(state.r2, y, sup),
        trace=tuple(float(v) for v in trace),
        converged=converged,
    )


def nw_fixed_components(
    x: DiscreteDistribution,
    y: DiscreteDistribution,
    components,
    exponent: float = 1.0,
    rel_tol: float = 1e-9,
    max_cuts: int = 1000,
) -> NwResult:
    """Normalized Wasserstein with the components held fixed.

    For fixed supports the constraint "column mass of support point j of
    component c equals pi_c * w_cj" is linear in (plan, pi), so each term is
    one LP and the two terms decouple; both are solved to global optimality
    (certified within rel_tol) and the proportions are read off the LP
    solutions. Large, highly symmetric instances may need a looser rel_tol
    to converge within the cut budget; the certified bound still holds.
    """
    sup = _supports_from_components(components)
    if x.dimension != sup.positions.shape[1] or y.dimension != sup.positions.shape[1]:
        raise ValueError("dimension mismatch between inputs and components")
    same = x is y or (
        x.points.shape == y.points.shape
        and np.array_equal(x.points, y.points)
        and np.array_equal(x.weights, y.weights)
    )
    budget = {"rel_tol": rel_tol, "max_cuts": max_cuts}
    state = _solve_pair(x, y, sup, float(exponent), None, None, 0.0, budget, same)
    gap_cap = max(1e-7, 10.0 * rel_tol)
    for res in (state.r1, state.r2):
        if res.gap > gap_cap * max(1.0, abs(res.value)):
            raise SolverError(
                f"proportion LP gap {res.gap:.3e} exceeds the budget "
                f"{gap_cap:.1e}; raise max_cuts or rel_tol"
            )
    return _result_from(x, y, sup, state, tuple(components), [state.value], True)


def nw_measure(
    x: DiscreteDistribution, y: DiscreteDistribution, cfg: NwConfig
) -> NwResult:
    """Normalized Wasserstein measure between two distributions.

    Block-coordinate descent: exact (plan, proportion) LPs for the current
    supports alternate with barycentric-projection support moves, accepted
    only when the objective does not increase. A component whose proportions
    vanish on both sides is re-seeded once at the costliest data point. The
    best of cfg.restarts seeded initializations is returned.
    """
    if x.dimension != y.dimension:
        raise ValueError(f"dimension mismatch: {x.dimension} vs {y.dimension}")
    if len(x) + len(y) < cfg.k:
        raise ValueError("inputs need at least k support points combined")
    same = x is y or (
        x.points.shape == y.points.shape
        and np.array_equal(x.points, y.points)
        and np.array_equal(x.weights, y.weights)
    )
    pool = _canonical_pool(x, y)

    def one_restart(r):
        return _nw_run(x, y, cfg, cfg.seed + r, same, pool)

    outcomes = run_indexed(one_restart, cfg.restarts)
    best = min(range(cfg.restarts), key=lambda r: (outcomes[r].value, r))
    out = outcomes[best]
    # refine the winner's proportions before reporting
    final = _solve_pair(
        x, y, out.sup, float(cfg.exponent), out.state.r1.pi, out.state.r2.pi,
        cfg.proportion_floor, _FINAL, same, out.lp_states,
    )
    state, trace = out.state, out.trace
    if final.value <= out.value:
        state = final
        trace = list(trace) + [final.value]
    return _result_from(
        x, y, out.sup, state, out.sup.to_components(), trace, out.converged
    )

"""Estimate the number of mixture components from the NW(k) curve.

Runs the normalized Wasserstein solver for every k in a range with a shared
seed schedule, then selects the smallest k whose value has reached the
curve's saturation floor while the drop from k-1 is still substantial.

Components are single points here (overridable): a one-point component is
unimodal by construction, which is the discrete stand-in for "every
component captures exactly one mode". With richer supports one component
can quantize several modes at once and the curve degenerates into a smooth
capacity measure with no elbow at the true count. With Dirac components
NW(k) is twice the k-medians cost of the pooled data, which drops sharply
until every mode owns a center and flattens after.

The curve is monotone up to restart noise (k+1 centers can always emulate
k by leaving one unused); violations beyond the noise tolerance are
flagged in the report rather than silently accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from nwot.core import DiscreteDistribution
from nwot.nw import NwConfig, nw_measure

# selection defaults, relative to the saturation floor NW(k_max): a value
# counts as "small" within SMALL_FACTOR of the floor, and the drop from the
# previous k must exceed GAP_FACTOR times the floor. Both are overridable.
SMALL_FACTOR = 1.5
GAP_FACTOR = 0.3
MONOTONE_NOISE = 0.05  # relative restart-noise tolerance for the curve


@dataclass(frozen=True)
class ModeSweepReport:
    """NW(k) curve with the selected component count.

    first_diffs[i] = nw_values[i-1] - nw_values[i] (nan for the first k).
    heuristic_selection marks a fallback pick (no k met both thresholds);
    monotonicity_violations lists ks where the curve rose by more than 5%
    relative, which indicates solver noise worth investigating.
    """

    ks: tuple
    nw_values: tuple
    first_diffs: tuple
    selected_k: int
    small_threshold: float
    gap_threshold: float
    heuristic_selection: bool
    monotonicity_violations: tuple


def nw_sweep(
    x: DiscreteDistribution,
    y: DiscreteDistribution,
    k_min: int,
    k_max: int,
    cfg: NwConfig,
    small_threshold: float | None = None,
    gap_threshold: float | None = None,
    points_per_component: int = 1,
) -> ModeSweepReport:
    """Sweep NW(k) for k in [k_min, k_max] and select the component count.

    y may equal x (self-sweep) to size a mixture for a single dataset.
    Components default to single points so that one component cannot span
    several modes (see the module docstring); cfg.k and
    cfg.points_per_component are ignored. Each sweep entry runs with the
    same seed schedule so the curve's restart noise is correlated.
    """
    if not (1 <= k_min < k_max):
        raise ValueError("need 1 <= k_min < k_max")
    if points_per_component < 1:
        raise ValueError("points_per_component must be >= 1")

    ks = list(range(k_min, k_max + 1))
    values = []
    for k in ks:
        cfg_k = replace(cfg, k=k, points_per_component=points_per_component)
        values.append(nw_measure(x, y, cfg_k).value)
    values = np.asarray(values)

    diffs = np.full(len(ks), np.nan)
    diffs[1:] = values[:-1] - values[1:]

    violations = tuple(
        ks[i]
        for i in range(1, len(ks))
        if values[i] > values[i - 1] * (1.0 + MONOTONE_NOISE)
    )

    floor = float(values[-1])
    small = small_threshold if small_threshold is not None else SMALL_FACTOR * floor
    gap = gap_threshold if gap_threshold is not None else GAP_FACTOR * floor

    selected = None
    heuristic = False
    for i, k in enumerate(ks):
        if values[i] <= small and (i == 0 or diffs[i] >= gap):
            selected = k
            break
    if selected is None:
        # fallback: the biggest drop among the candidates that reached "small"
        small_idx = [i for i in range(len(ks)) if values[i] <= small]
        heuristic = True
        if small_idx:
            selected = ks[max(small_idx, key=lambda i: -np.inf if np.isnan(diffs[i]) else diffs[i])]
        else:
            selected = ks[-1]

    return ModeSweepReport(
        ks=tuple(ks),
        nw_values=tuple(float(v) for v in values),
        first_diffs=tuple(float(d) for d in diffs),
        selected_k=int(selected),
        small_threshold=float(small),
        gap_threshold=float(gap),
        heuristic_selection=heuristic,
        monotonicity_violations=violations,
    )

"""Shared domain types: weighted point clouds, mixtures and simplex vectors.

All types are immutable after construction (their arrays are set read-only)
and validate themselves eagerly, so downstream solvers never re-check. A
point is simply a row of a float64 array; the containers own dimension and
finiteness checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

WEIGHT_TOL = 1e-9
_NEG_CLAMP = 1e-9  # magnitude of negative noise tolerated (clamped to 0)


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def _clamped_nonneg(values: np.ndarray, what: str) -> np.ndarray:
    """Clamp tiny negative noise to zero; reject genuinely negative entries."""
    if values.size and float(values.min()) < -_NEG_CLAMP:
        raise ValueError(f"{what} must be nonnegative, got min {values.min()}")
    return np.where(values < 0.0, 0.0, values)


@dataclass(frozen=True)
class SimplexVector:
    """Nonnegative vector summing to one (within 1e-9). Never renormalized:
    inputs that do not already sum to one are rejected."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise ValueError("simplex vector must have at least one entry")
        if not np.all(np.isfinite(values)):
            raise ValueError("simplex vector entries must be finite")
        values = _clamped_nonneg(values, "simplex vector entries")
        total = float(values.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(
                f"simplex vector must sum to 1 within {WEIGHT_TOL}, got {total!r}"
            )
        object.__setattr__(self, "values", _readonly(values))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, idx):
        return self.values[idx]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Empirical measure: n points in R^d with nonnegative weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise ValueError("points must be a nonempty (n, d) array")
        if not np.all(np.isfinite(points)):
            raise ValueError("point coordinates must be finite")
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != points.shape[0]:
            raise ValueError(
                f"{weights.shape[0]} weights for {points.shape[0]} points"
            )
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        weights = _clamped_nonneg(weights, "weights")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(
                f"weights must sum to 1 within {WEIGHT_TOL}, got {total!r}"
            )
        object.__setattr__(self, "points", _readonly(points))
        object.__setattr__(self, "weights", _readonly(weights))

    @classmethod
    def uniform(cls, points) -> "DiscreteDistribution":
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        n = points.shape[0]
        if n < 1:
            raise ValueError("need at least one point")
        return cls(points, np.full(n, 1.0 / n))

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class MixtureComponent:
    """One mode of a mixture: a weighted point cloud of its own."""

    support: np.ndarray
    weights: SimplexVector

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.float64)
        if support.ndim == 1:
            support = support.reshape(-1, 1)
        if support.ndim != 2 or support.shape[0] < 1:
            raise ValueError("component support must be a nonempty (m, d) array")
        if not np.all(np.isfinite(support)):
            raise ValueError("component support must be finite")
        weights = self.weights
        if not isinstance(weights, SimplexVector):
            weights = SimplexVector(np.asarray(weights, dtype=np.float64))
        if len(weights) != support.shape[0]:
            raise ValueError("component weights must match its support size")
        object.__setattr__(self, "support", _readonly(support))
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, support) -> "MixtureComponent":
        support = np.asarray(support, dtype=np.float64)
        if support.ndim == 1:
            support = support.reshape(-1, 1)
        m = support.shape[0]
        return cls(support, SimplexVector(np.full(m, 1.0 / m)))

    @property
    def dimension(self) -> int:
        return self.support.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights.values @ self.support

    def as_distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.support, self.weights.values)


@dataclass(frozen=True)
class MixtureModel:
    """k components plus a proportion vector over them."""

    components: tuple
    proportions: SimplexVector

    def __post_init__(self):
        components = tuple(self.components)
        if len(components) < 1:
            raise ValueError("mixture needs at least one component")
        for c in components:
            if not isinstance(c, MixtureComponent):
                raise TypeError("components must be MixtureComponent instances")
        dims = {c.dimension for c in components}
        if len(dims) != 1:
            raise ValueError(f"components disagree on dimension: {sorted(dims)}")
        proportions = self.proportions
        if not isinstance(proportions, SimplexVector):
            proportions = SimplexVector(np.asarray(proportions, dtype=np.float64))
        if len(proportions) != len(components):
            raise ValueError("one proportion per component required")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "proportions", proportions)

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dimension(self) -> int:
        return self.components[0].dimension


@dataclass(frozen=True)
class GaussianComponent:
    """Gaussian mode parameters used by the synthetic data generators."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        if mean.size < 1 or not np.all(np.isfinite(mean)):
            raise ValueError("mean must be a finite vector")
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance must be d x d")
        if not np.all(np.isfinite(cov)):
            raise ValueError("covariance must be finite")
        if float(np.abs(cov - cov.T).max()) > 1e-9:
            raise ValueError("covariance must be symmetric within 1e-9")
        eigs = np.linalg.eigvalsh((cov + cov.T) / 2.0)
        if float(eigs.min()) < -1e-9:
            raise ValueError("covariance must be positive semi-definite")
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "covariance", _readonly(cov))

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise ground costs: Euclidean distance raised to exponent 1 or 2."""

    entries: np.ndarray
    exponent: float

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise ValueError("cost entries must form a 2-d matrix")
        if not np.all(np.isfinite(entries)) or float(entries.min(initial=0.0)) < 0.0:
            raise ValueError("cost entries must be finite and nonnegative")
        exponent = float(self.exponent)
        if exponent not in (1.0, 2.0):
            raise ValueError("exponent must be 1 or 2")
        object.__setattr__(self, "entries", _readonly(entries))
        object.__setattr__(self, "exponent", exponent)

    @property
    def shape(self):
        return self.entries.shape


def flatten(model: MixtureModel) -> DiscreteDistribution:
    """Realize a mixture as a single weighted point cloud.

    The weight of support point j of component i is
    proportions[i] * component_weights[j]; total mass stays 1 exactly.
    """
    pts = np.concatenate([c.support for c in model.components], axis=0)
    w = np.concatenate(
        [
            model.proportions[i] * c.weights.values
            for i, c in enumerate(model.components)
        ]
    )
    return DiscreteDistribution(pts, w)


def pairwise_costs(a_points: np.ndarray, b_points: np.ndarray, exponent: float) -> np.ndarray:
    """Raw cost array between two point sets (no validation, internal fast path)."""
    if exponent == 1.0:
        return cdist(a_points, b_points, metric="euclidean")
    if exponent == 2.0:
        return cdist(a_points, b_points, metric="sqeuclidean")
    raise ValueError("exponent must be 1 or 2")


def cost_matrix(
    a: DiscreteDistribution, b: DiscreteDistribution, exponent: float = 1.0
) -> CostMatrix:
    """Ground-cost matrix between two distributions, entry (i, j) equal to
    the Euclidean distance between point i of `a` and point j of `b`,
    raised to `exponent`."""
    if a.dimension != b.dimension:
        raise ValueError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )
    return CostMatrix(pairwise_costs(a.points, b.points, float(exponent)), float(exponent))

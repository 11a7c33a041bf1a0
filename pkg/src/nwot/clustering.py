"""Cluster points with a fitted mixture and score against ground truth.

Each point goes to the component holding its nearest support point
(squared Euclidean distance, ties to the lowest component index). Scores
are the standard external metrics: purity, normalized mutual information
(normalized by the arithmetic mean of the two entropies) and the adjusted
Rand index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nwot.core import DiscreteDistribution, MixtureModel, pairwise_costs


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray    # component index per point
    distances: np.ndarray  # squared distance to the chosen component

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        distances = np.asarray(self.distances, dtype=np.float64)
        if labels.shape != distances.shape or labels.ndim != 1:
            raise ValueError("labels and distances must be equal-length vectors")
        labels.setflags(write=False)
        distances.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "distances", distances)

    def __len__(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class ClusterScores:
    purity: float
    nmi: float
    ari: float

    def __post_init__(self):
        if not (0.0 <= self.purity <= 1.0 and 0.0 <= self.nmi <= 1.0):
            raise ValueError("purity and NMI must lie in [0, 1]")
        if not -1.0 <= self.ari <= 1.0 + 1e-12:
            raise ValueError("ARI must lie in [-1, 1]")


def assign(x: DiscreteDistribution, model: MixtureModel) -> ClusterAssignment:
    """Label each point with the component owning its nearest support point."""
    if x.dimension != model.dimension:
        raise ValueError(f"dimension mismatch: {x.dimension} vs {model.dimension}")
    best = np.full((len(x), model.k), np.inf)
    for c, comp in enumerate(model.components):
        d2 = pairwise_costs(x.points, comp.support, 2.0)
        best[:, c] = d2.min(axis=1)
    labels = np.argmin(best, axis=1)  # argmin takes the lowest index on ties
    return ClusterAssignment(labels, best[np.arange(len(x)), labels])


def _contingency(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    p_ids, p_inv = np.unique(pred, return_inverse=True)
    t_ids, t_inv = np.unique(truth, return_inverse=True)
    table = np.zeros((p_ids.size, t_ids.size), dtype=np.int64)
    np.add.at(table, (p_inv, t_inv), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def _mutual_information(table: np.ndarray) -> float:
    n = table.sum()
    pi = table.sum(axis=1)
    pj = table.sum(axis=0)
    nz = table > 0
    t = table[nz].astype(np.float64)
    outer = np.outer(pi, pj)[nz].astype(np.float64)
    return float((t / n * (np.log(t * n) - np.log(outer))).sum())


def _comb2(v: np.ndarray) -> float:
    v = v.astype(np.float64)
    return float((v * (v - 1.0) / 2.0).sum())


def score(pred, truth) -> ClusterScores:
    """Purity, NMI and ARI of predicted clusters against true labels.

    `pred` is a ClusterAssignment or a label vector. All three scores are
    invariant to relabeling either side. Degenerate single-cluster cases
    follow the usual conventions: NMI and ARI are 1 when both partitions
    are trivial (hence identical) and the ARI denominator vanishes.
    """
    pred_labels = pred.labels if isinstance(pred, ClusterAssignment) else np.asarray(pred)
    pred_labels = np.asarray(pred_labels, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if pred_labels.shape != truth.shape:
        raise ValueError(
            f"length mismatch: {pred_labels.shape[0]} vs {truth.shape[0]}"
        )
    n = pred_labels.shape[0]
    table = _contingency(pred_labels, truth)

    purity = float(table.max(axis=1).sum()) / n

    h_pred = _entropy(table.sum(axis=1))
    h_true = _entropy(table.sum(axis=0))
    denom = 0.5 * (h_pred + h_true)
    if denom <= 0.0:
        nmi = 1.0 if (table.shape[0] == 1 and table.shape[1] == 1) else 0.0
    else:
        nmi = min(1.0, max(0.0, _mutual_information(table) / denom))

    sum_cells = _comb2(table.ravel())
    sum_rows = _comb2(table.sum(axis=1))
    sum_cols = _comb2(table.sum(axis=0))
    total = n * (n - 1.0) / 2.0
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if abs(max_index - expected) <= 0.0:
        ari = 1.0
    else:
        ari = (sum_cells - expected) / (max_index - expected)

    return ClusterScores(purity=purity, nmi=float(nmi), ari=float(ari))

"""Evaluation suite: joint clustering, retrieval, the text-to-image linear
probe, and least-squares trend fitting.

Everything here is deterministic: k-means takes an explicit seed, retrieval
ties break toward the lower index, and the probe is a closed-form ridge
system. The probe is the interchangeability measure: a classifier fit only on
text embeddings scored only on image embeddings, so its accuracy tracks how
freely one modality substitutes for the other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb, log

import numpy as np

from .geometry import EmbeddingBatch
from .numerics import as_matrix, similarity_matrix

__all__ = [
    "ClusterReport",
    "SweepRecord",
    "kmeans",
    "adjusted_rand_index",
    "v_measure",
    "joint_clustering_eval",
    "recall_at_k",
    "interchangeability_probe",
    "linear_fit_r2",
]


@dataclass
class ClusterReport:
    v_measure: float
    ari: float
    k: int
    n_points: int
    inertia: float

    def to_dict(self) -> dict:
        return {
            "v_measure": self.v_measure,
            "ari": self.ari,
            "k": self.k,
            "n_points": self.n_points,
            "inertia": self.inertia,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class SweepRecord:
    """Final eval-split metrics of one trained model. Field order is the CSV
    column order; keep them in sync."""

    alpha_target: float
    raw_gap: float
    centroid_gap: float
    distribution_gap: float
    ari: float
    v_measure: float
    i2t_r1: float
    t2i_r1: float
    probe_accuracy: float
    erank_image: float
    erank_text: float
    fusion_index: float

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in SWEEP_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


SWEEP_FIELDS = (
    "alpha_target",
    "raw_gap",
    "centroid_gap",
    "distribution_gap",
    "ari",
    "v_measure",
    "i2t_r1",
    "t2i_r1",
    "probe_accuracy",
    "erank_image",
    "erank_text",
    "fusion_index",
)


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (points**2).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def kmeans(points, k: int, seed: int = 0) -> tuple[np.ndarray, float]:
    """Seeded k-means++ initialization plus Lloyd iterations.

    Stops when every centroid moves less than 1e-6 or after 100 iterations.
    An emptied cluster is re-seeded with the point currently farthest from its
    own centroid (lowest point index on ties). Returns (labels, inertia).
    """
    points = as_matrix(points, "points")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = _squared_distances(points, centers[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = points[idx]
        d2 = np.minimum(d2, _squared_distances(points, centers[j:j + 1]).ravel())

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(100):
        dist = _squared_distances(points, centers)
        labels = dist.argmin(axis=1)

        new_centers = np.empty_like(centers)
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c] > 0:
                new_centers[c] = points[labels == c].mean(axis=0)
        for c in np.flatnonzero(counts == 0):
            own = dist[np.arange(n), labels]
            # steal the globally worst-fit point
            worst = int(own.argmax())
            new_centers[c] = points[worst]
            labels[worst] = c
            dist[worst] = 0.0
        shift = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if shift < 1e-6:
            break

    dist = _squared_distances(points, centers)
    labels = dist.argmin(axis=1)
    inertia = float(dist[np.arange(n), labels].sum())
    return labels, inertia


def _check_labelings(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape[0] != truth.shape[0]:
        raise ValueError(f"labelings differ in length: {pred.shape[0]} vs {truth.shape[0]}")
    if pred.shape[0] < 2:
        raise ValueError("need at least 2 points")
    return pred, truth


def _contingency(pred, truth) -> np.ndarray:
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    table = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def adjusted_rand_index(pred, truth) -> float:
    """Chance-corrected pair-counting agreement between two labelings.

    Evaluated in exact integer arithmetic; the degenerate case where the
    expected and maximum index coincide (e.g. both labelings trivial) is 1.
    """
    pred, truth = _check_labelings(pred, truth)
    table = _contingency(pred, truth)
    n = int(table.sum())

    sum_cells = sum(comb(int(x), 2) for x in table.ravel())
    sum_rows = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_cols = sum(comb(int(x), 2) for x in table.sum(axis=0))
    pairs = comb(n, 2)

    # ARI = (sum_cells - sum_rows*sum_cols/pairs) / ((sum_rows+sum_cols)/2 - sum_rows*sum_cols/pairs)
    # scaled by 2*pairs to stay in integers
    numer = 2 * (pairs * sum_cells - sum_rows * sum_cols)
    denom = pairs * (sum_rows + sum_cols) - 2 * sum_rows * sum_cols
    if denom == 0:
        return 1.0
    return numer / denom


def v_measure(pred, truth) -> float:
    """Harmonic mean of homogeneity and completeness from contingency entropies.

    Conventions: 0*log(0) = 0; a zero marginal entropy makes that side's score
    1 (nothing left to violate); if homogeneity and completeness are both 0
    the harmonic mean is 0.
    """
    pred, truth = _check_labelings(pred, truth)
    table = _contingency(pred, truth).astype(np.float64)
    n = table.sum()
    p_cluster = table.sum(axis=1) / n  # pred marginal
    p_class = table.sum(axis=0) / n    # truth marginal

    def entropy(p) -> float:
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())

    h_class = entropy(p_class)
    h_cluster = entropy(p_cluster)

    # H(truth | pred) and H(pred | truth)
    h_class_given = 0.0
    h_cluster_given = 0.0
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            nij = table[i, j]
            if nij > 0:
                h_class_given -= (nij / n) * log(nij / table[i, :].sum())
                h_cluster_given -= (nij / n) * log(nij / table[:, j].sum())

    homogeneity = 1.0 if h_class == 0 else 1.0 - h_class_given / h_class
    completeness = 1.0 if h_cluster == 0 else 1.0 - h_cluster_given / h_cluster
    if homogeneity + completeness == 0.0:
        return 0.0
    return 2.0 * homogeneity * completeness / (homogeneity + completeness)


def joint_clustering_eval(images: EmbeddingBatch, texts: EmbeddingBatch,
                          k: int | None = None, seed: int = 0) -> ClusterReport:
    """Pool both modalities into one point set, cluster, and score against the
    duplicated class labels. Each embedding contributes one point."""
    if images.labels is None or texts.labels is None:
        raise ValueError("both batches need labels for clustering evaluation")
    points = np.vstack([images.vectors, texts.vectors])
    truth = np.concatenate([images.labels, texts.labels])
    if k is None:
        k = int(np.unique(truth).size)
    if k < 2:
        raise ValueError("need at least 2 clusters")
    labels, inertia = kmeans(points, k, seed=seed)
    return ClusterReport(
        v_measure=v_measure(labels, truth),
        ari=adjusted_rand_index(labels, truth),
        k=k,
        n_points=points.shape[0],
        inertia=inertia,
    )


def recall_at_k(v, t, k: int) -> tuple[float, float]:
    """Fraction of queries whose true partner ranks in the top k by cosine.

    Both directions are returned (image-to-text, text-to-image). A competitor
    with a similarity equal to the true partner's outranks it only at a lower
    index, so results carry no platform sort ambiguity.
    """
    v = as_matrix(v, "V")
    t = as_matrix(t, "T")
    if v.shape != t.shape:
        raise ValueError(f"V and T must share a shape, got {v.shape} vs {t.shape}")
    n = v.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    sims = similarity_matrix(v, t)

    def direction(s: np.ndarray) -> float:
        hits = 0
        for i in range(n):
            row = s[i]
            rank = 1 + int((row > row[i]).sum()) + int((row[:i] == row[i]).sum())
            hits += rank <= k
        return hits / n

    return direction(sims), direction(sims.T)


def interchangeability_probe(train_texts: EmbeddingBatch, test_images: EmbeddingBatch,
                             ridge_lambda: float = 1e-2) -> float:
    """Accuracy of a ridge one-vs-all classifier fit on texts, scored on images.

    The ridge strength is ridge_lambda times the mean diagonal of the text
    Gram matrix, so it is scale-free. Ties in the class scores resolve to the
    first class in sorted label order.
    """
    if train_texts.labels is None or test_images.labels is None:
        raise ValueError("both batches need labels for the probe")
    if ridge_lambda <= 0:
        raise ValueError("ridge_lambda must be positive")
    x = train_texts.vectors
    classes = np.unique(train_texts.labels)
    if classes.size < 2:
        raise ValueError("probe needs at least 2 classes")
    if not np.isin(test_images.labels, classes).all():
        raise ValueError("test labels contain classes absent from the training labels")

    onehot = (train_texts.labels[:, None] == classes[None, :]).astype(np.float64)
    gram = x.T @ x
    lam = ridge_lambda * float(np.diag(gram).mean())
    weights = np.linalg.solve(gram + lam * np.eye(x.shape[1]), x.T @ onehot)

    scores = test_images.vectors @ weights
    pred = classes[scores.argmax(axis=1)]
    return float((pred == test_images.labels).mean())


def linear_fit_r2(x, y) -> tuple[float, float, float]:
    """Ordinary least squares of y on x: (slope, intercept, r_squared).

    Constant x is an error (no slope is identified); constant y fits slope 0
    with r_squared defined as 0.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must have equal length")
    if x.shape[0] < 3:
        raise ValueError("need at least 3 points")
    if np.ptp(x) == 0.0:
        raise ValueError("x is constant; the slope is not identified")

    xm = x - x.mean()
    ym = y - y.mean()
    slope = float((xm * ym).sum() / (xm * xm).sum())
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float((ym * ym).sum())
    if ss_tot == 0.0:
        return 0.0, float(y.mean()), 0.0
    residual = y - (slope * x + intercept)
    r_squared = 1.0 - float((residual * residual).sum()) / ss_tot
    return slope, intercept, r_squared

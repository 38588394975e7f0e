"""Gap decomposition and spectral diagnostics for paired embedding batches.

The central quantities: the raw paired-cosine gap, the distance between the
two modality centroids, the residual "shape" gap left after each modality is
centered on its own mean, effective ranks of the embedding matrices, and the
fusion index (joint rank over mean per-modality rank).

Typical full-scale magnitudes for an untouched pretrained dual encoder are a
raw gap around 0.7 and a distribution gap around 0.69; nothing in this module
asserts those, they are only context for reading reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix, l2_normalize_rows, singular_values

__all__ = [
    "EmbeddingBatch",
    "GapReport",
    "raw_gap",
    "centroid_gap",
    "distribution_gap",
    "mean_center",
    "effective_rank",
    "fusion_index",
    "gap_report",
]

MODALITIES = ("image", "text")


@dataclass
class EmbeddingBatch:
    """One modality's embeddings: an N x d matrix plus optional class labels."""

    vectors: np.ndarray
    labels: np.ndarray | None = None
    modality: str = "image"
    normalized: bool = False

    def __post_init__(self):
        self.vectors = as_matrix(self.vectors, "vectors")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.shape[0] != self.vectors.shape[0]:
                raise ValueError(
                    f"labels must have length {self.vectors.shape[0]}, got shape {labels.shape}"
                )
            self.labels = labels.astype(np.int64)
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.normalized:
            norms = np.linalg.norm(self.vectors, axis=1)
            worst = float(np.abs(norms - 1.0).max())
            if worst > 1e-6:
                raise ValueError(f"batch declared normalized but a row norm is off by {worst:.3e}")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class GapReport:
    """All gap and rank diagnostics for one paired batch."""

    raw_gap: float
    centroid_gap: float
    distribution_gap: float
    erank_image: float
    erank_text: float
    erank_joint: float
    fusion_index: float
    n_pairs: int
    degenerate_pairs: int

    def to_dict(self) -> dict:
        return {
            "raw_gap": self.raw_gap,
            "centroid_gap": self.centroid_gap,
            "distribution_gap": self.distribution_gap,
            "erank_image": self.erank_image,
            "erank_text": self.erank_text,
            "erank_joint": self.erank_joint,
            "fusion_index": self.fusion_index,
            "n_pairs": self.n_pairs,
            "degenerate_pairs": self.degenerate_pairs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GapReport":
        return cls(**d)

    def summary(self) -> str:
        return (
            f"raw_gap={self.raw_gap:.6f} centroid_gap={self.centroid_gap:.6f} "
            f"distribution_gap={self.distribution_gap:.6f} fusion_index={self.fusion_index:.6f}"
        )


def _vectors_of(batch) -> np.ndarray:
    if isinstance(batch, EmbeddingBatch):
        return batch.vectors
    return as_matrix(batch, "batch")


def _paired(images, texts) -> tuple[np.ndarray, np.ndarray]:
    v = _vectors_of(images)
    t = _vectors_of(texts)
    if v.shape[0] != t.shape[0]:
        raise ValueError(f"pair count mismatch: {v.shape[0]} images vs {t.shape[0]} texts")
    if v.shape[1] != t.shape[1]:
        raise ValueError(f"embedding dim mismatch: {v.shape[1]} vs {t.shape[1]}")
    return v, t


def raw_gap(images, texts) -> float:
    """1 minus the mean paired cosine similarity.

    Rows are expected unit-norm (dot product = cosine); no renormalization is
    applied here.
    """
    v, t = _paired(images, texts)
    return float(1.0 - np.einsum("ij,ij->i", v, t).mean())


def centroid_gap(images, texts) -> float:
    """Euclidean distance between the two modality means."""
    v, t = _paired(images, texts)
    return float(np.linalg.norm(v.mean(axis=0) - t.mean(axis=0)))


def distribution_gap(images, texts) -> tuple[float, int]:
    """Residual gap after per-modality centering.

    Each modality is shifted by its own mean and the centered rows are
    re-normalized; the value is 1 minus the mean paired cosine of those rows.
    Pairs where either centered row has norm < 1e-12 are excluded from the
    mean and returned as the degenerate count. Shifting either modality by a
    constant vector leaves the value unchanged.
    """
    v, t = _paired(images, texts)
    vc, v_bad = l2_normalize_rows(v - v.mean(axis=0))
    tc, t_bad = l2_normalize_rows(t - t.mean(axis=0))
    bad = v_bad | t_bad
    n_bad = int(bad.sum())
    if n_bad == v.shape[0]:
        raise ValueError("all pairs are degenerate after centering")
    keep = ~bad
    value = float(1.0 - np.einsum("ij,ij->i", vc[keep], tc[keep]).mean())
    return value, n_bad


def mean_center(images, texts, renormalize: bool = False) -> tuple[EmbeddingBatch, EmbeddingBatch]:
    """Shift each modality by -(its own centroid); optionally re-normalize rows.

    The default is a pure translation, which zeroes the centroid gap while
    preserving the distribution gap exactly; renormalization re-projects rows
    to the unit sphere at the cost of that exactness.
    """
    v, t = _paired(images, texts)
    vc = v - v.mean(axis=0)
    tc = t - t.mean(axis=0)
    if renormalize:
        vc, _ = l2_normalize_rows(vc)
        tc, _ = l2_normalize_rows(tc)

    def rebuild(batch, vectors, default_modality):
        if isinstance(batch, EmbeddingBatch):
            return EmbeddingBatch(vectors, labels=batch.labels, modality=batch.modality)
        return EmbeddingBatch(vectors, modality=default_modality)

    return rebuild(images, vc, "image"), rebuild(texts, tc, "text")


def effective_rank(batch) -> float:
    """exp(entropy) of the normalized singular-value distribution.

    Computed on the raw (non-centered) matrix. Singular values below
    1e-12 * sigma_max are dropped before normalization.
    """
    m = _vectors_of(batch)
    if m.shape[0] < 2:
        raise ValueError(f"need at least 2 rows, got {m.shape[0]}")
    sv = singular_values(m)
    if sv[0] <= 0.0:
        raise ValueError("all-zero matrix has no effective rank")
    sv = sv[sv >= 1e-12 * sv[0]]
    p = sv / sv.sum()
    return float(np.exp(-(p * np.log(p)).sum()))


def fusion_index(images, texts) -> float:
    """Effective rank of the pooled rows over the mean per-modality rank.

    Near 2 when the modalities occupy orthogonal subspaces, near 1 when they
    overlap fully. Row counts may differ; dimensions must match.
    """
    v = _vectors_of(images)
    t = _vectors_of(texts)
    if v.shape[1] != t.shape[1]:
        raise ValueError(f"embedding dim mismatch: {v.shape[1]} vs {t.shape[1]}")
    er_v = effective_rank(v)
    er_t = effective_rank(t)
    er_joint = effective_rank(np.vstack([v, t]))
    return er_joint / (0.5 * (er_v + er_t))


def gap_report(images, texts) -> GapReport:
    """Compute every gap and rank diagnostic for one paired batch."""
    v, t = _paired(images, texts)
    dist, n_bad = distribution_gap(v, t)
    er_v = effective_rank(v)
    er_t = effective_rank(t)
    er_joint = effective_rank(np.vstack([v, t]))
    return GapReport(
        raw_gap=raw_gap(v, t),
        centroid_gap=centroid_gap(v, t),
        distribution_gap=dist,
        erank_image=er_v,
        erank_text=er_t,
        erank_joint=er_joint,
        fusion_index=er_joint / (0.5 * (er_v + er_t)),
        n_pairs=v.shape[0],
        degenerate_pairs=n_bad,
    )

"""Dense float64 building blocks shared by every other module.

Everything here is a pure function of its inputs: row normalization,
similarity products, numerically stable softmax cross-entropy with analytic
gradients, singular values, and a deterministic 2-D PCA projection.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_matrix",
    "l2_normalize_rows",
    "similarity_matrix",
    "row_cross_entropy",
    "singular_values",
    "pca_project_2d",
]


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array with >= 1 row and column and finite entries."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} needs at least one row and one column, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def l2_normalize_rows(m, eps: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Scale each row to unit Euclidean norm.

    Rows whose norm is below ``eps`` are returned unchanged and flagged in the
    boolean mask (second return value) instead of raising; callers decide what
    a degenerate row means for them.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    m = as_matrix(m)
    norms = np.linalg.norm(m, axis=1)
    degenerate = norms < eps
    safe = np.where(degenerate, 1.0, norms)
    return m / safe[:, None], degenerate


def similarity_matrix(a, b) -> np.ndarray:
    """Pairwise dot products: out[i, j] = a_i . b_j, shape (a rows, b rows).

    Uses a fixed-order einsum contraction so similarity_matrix(a, b).T and
    similarity_matrix(b, a) are bitwise identical (BLAS matmul is not
    guaranteed to be, at larger sizes).
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return np.einsum("ik,jk->ij", a, b)


def _log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    # max subtraction: scaled similarities can reach ~100 before exp
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_rows(logits) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction."""
    return np.exp(_log_softmax_rows(as_matrix(logits, "logits")))


def row_cross_entropy(logits, labels) -> tuple[float, np.ndarray]:
    """Mean over rows of -log softmax(logits_i)[labels_i], plus its gradient.

    The gradient is (softmax - onehot) / n_rows, so it sums to zero along each
    row and feeding it back through any logit parameterization is exact.
    """
    logits = as_matrix(logits, "logits")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ValueError(f"labels must be a vector of length {logits.shape[0]}")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label index out of range")
    labels = labels.astype(np.intp)

    n = logits.shape[0]
    log_p = _log_softmax_rows(logits)
    loss = 0.0 - log_p[np.arange(n), labels].mean()  # 0.0 - x avoids a -0.0 result
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return float(loss), grad


def singular_values(m) -> np.ndarray:
    """Singular values in descending order, length min(rows, cols)."""
    return np.linalg.svd(as_matrix(m), compute_uv=False)


def pca_project_2d(m) -> np.ndarray:
    """Project rows onto the top-2 principal components of the centered data.

    Sign convention: each component's largest-magnitude loading is made
    positive, so the projection is deterministic across runs.
    """
    m = as_matrix(m)
    if m.shape[0] < 2:
        raise ValueError(f"need at least 2 rows, got {m.shape[0]}")
    if m.shape[1] < 2:
        raise ValueError(f"need at least 2 columns, got {m.shape[1]}")

    centered = m - m.mean(axis=0)
    scatter = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(scatter)
    components = eigvecs[:, ::-1][:, :2].copy()  # eigh is ascending
    for j in range(2):
        lead = np.argmax(np.abs(components[:, j]))
        if components[lead, j] < 0:
            components[:, j] = -components[:, j]
    return centered @ components

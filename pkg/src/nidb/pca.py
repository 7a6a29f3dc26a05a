"""Principal component analysis by covariance eigendecomposition.

Fit on a training design matrix, project any conforming matrix onto the
top-k components. The eigendecomposition is a dense symmetric solve
(LAPACK), which is exact and reproducible at the feature counts used
here (d around 122).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionMismatch, RankError
from .preprocess import DesignMatrix


@dataclass(frozen=True)
class PcaModel:
    """Fitted projection: column mean, orthonormal components, spectrum.

    Components are the top-k eigenvectors of the sample covariance
    (divisor n-1), columns orthonormal, eigenvalues non-increasing.
    """

    mean: np.ndarray                       # (d,)
    components: np.ndarray                 # (d, k), orthonormal columns
    eigenvalues: np.ndarray                # (k,), descending, >= 0
    explained_variance_ratio: np.ndarray   # (k,)

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    @property
    def input_dim(self) -> int:
        return self.components.shape[0]


def _matrix_values(m) -> np.ndarray:
    if isinstance(m, DesignMatrix):
        return m.values
    return np.asarray(m, dtype=np.float64)


def _canonical_signs(components: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Ties in magnitude break toward the lowest index. Makes eigenvector
    sign deterministic across runs and BLAS builds.
    """
    out = components.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        anchor = int(np.argmax(np.abs(col)))
        if col[anchor] < 0:
            out[:, j] = -col
    return out


def fit_pca(train, k: int) -> PcaModel:
    """Fit a k-component PCA on the training matrix.

    k must satisfy 1 <= k <= min(n-1, d). Zero-variance input gets the
    first k standard basis vectors as components and all-zero ratios.
    """
    X = _matrix_values(train)
    n, d = X.shape
    if n < 2:
        raise RankError(f"need at least 2 rows to fit PCA, got {n}")
    if not 1 <= k <= min(n - 1, d):
        raise RankError(
            f"k={k} outside valid range 1..{min(n - 1, d)} for {n}x{d} data")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    total_variance = float(np.trace(cov))
    if total_variance == 0.0:
        components = np.eye(d, k)
        zeros = np.zeros(k)
        return PcaModel(mean, components, zeros, zeros.copy())
    try:
        eigvals, eigvecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition failed: {exc}")
    order = np.argsort(eigvals)[::-1][:k]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = _canonical_signs(eigvecs[:, order])
    ratios = eigvals / total_variance
    return PcaModel(mean, components, eigvals, ratios)


def transform(model: PcaModel, m):
    """Project onto the components: (m - mean) @ components.

    DesignMatrix input keeps its labels and categories; score columns
    are named pc1..pck. Plain arrays come back as plain arrays.
    """
    X = _matrix_values(m)
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"matrix has {X.shape[1]} columns, model expects {model.input_dim}")
    scores = (X - model.mean) @ model.components
    if isinstance(m, DesignMatrix):
        names = tuple(f"pc{i + 1}" for i in range(model.n_components))
        return DesignMatrix(scores, names, m.labels, m.categories)
    return scores


def inverse_transform(model: PcaModel, scores) -> np.ndarray:
    """Reconstruct inputs from scores: mean + scores @ components.T."""
    S = _matrix_values(scores)
    if S.shape[1] != model.n_components:
        raise DimensionMismatch(
            f"scores have {S.shape[1]} columns, model has {model.n_components}")
    return model.mean + S @ model.components.T


def explained_variance(model: PcaModel) -> np.ndarray:
    """Per-component fraction of the fit data's total variance."""
    return model.explained_variance_ratio.copy()

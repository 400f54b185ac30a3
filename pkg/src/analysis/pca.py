"""
Principal Component Analysis - Projection of the actor's middle layer

Eigendecomposition of the sample covariance (ddof=1), sorted by
decreasing variance. Directions whose eigenvalue is numerically zero
are not returned as components; the model is flagged rank deficient.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.errors import EmptyBatchError, ShapeMismatchError

# relative to the largest eigenvalue
ZERO_EIGENVALUE_TOLERANCE = 1e-10


@dataclass
class PcaModel:
    """
    Fitted PCA

    Attributes:
        mean: (d,) sample mean
        basis: (d, d) all eigenvectors as rows, decreasing variance
        spectrum: (d,) all eigenvalues, decreasing, clipped at 0
        num_components: requested component count
        rank_deficient: fewer than num_components nonzero eigenvalues
    """
    mean: np.ndarray
    basis: np.ndarray
    spectrum: np.ndarray
    num_components: int = 2
    rank_deficient: bool = False

    @property
    def rank(self) -> int:
        if self.spectrum.size == 0 or self.spectrum[0] <= 0.0:
            return 0
        return int(np.sum(self.spectrum > ZERO_EIGENVALUE_TOLERANCE * self.spectrum[0]))

    @property
    def components(self) -> np.ndarray:
        """(k, d) orthonormal rows for nonzero eigenvalues only"""
        return self.basis[:min(self.num_components, self.rank)]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum[:self.components.shape[0]]

    @property
    def explained_fractions(self) -> np.ndarray:
        total = float(np.sum(self.spectrum))
        if total <= 0.0:
            return np.zeros(self.components.shape[0])
        return self.eigenvalues / total

    def _check(self, data: np.ndarray) -> np.ndarray:
        data = np.atleast_2d(np.asarray(data, dtype=np.float64))
        if data.shape[1] != self.mean.size:
            raise ShapeMismatchError((data.shape[0], self.mean.size), data.shape, where="pca input")
        return data

    def project(self, data: np.ndarray) -> np.ndarray:
        """(n, d) -> (n, k) coordinates along the components"""
        return (self._check(data) - self.mean) @ self.components.T

    def reconstruction_error(self, data: np.ndarray, k: Optional[int] = None) -> float:
        """
        Squared residual after keeping the top `k` directions,
        summed over samples and divided by n - 1

        On the fitting data this equals the sum of discarded eigenvalues.
        """
        data = self._check(data)
        k = self.components.shape[0] if k is None else k
        centered = data - self.mean
        kept = self.basis[:k]
        residual = centered - (centered @ kept.T) @ kept
        return float(np.sum(residual ** 2) / max(data.shape[0] - 1, 1))


def fit_pca(data: np.ndarray, num_components: int = 2) -> PcaModel:
    """
    Fit PCA on (n, d) samples

    Raises:
        EmptyBatchError: fewer than 3 samples or fewer than 2 dimensions
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 3 or data.shape[1] < 2:
        raise EmptyBatchError(f"PCA needs at least 3 samples of dimension >= 2, got shape {data.shape}")

    mean = data.mean(axis=0)
    covariance = np.cov(data, rowvar=False, ddof=1)
    values, vectors = np.linalg.eigh(covariance)
    order = np.argsort(values)[::-1]
    spectrum = np.clip(values[order], 0.0, None)
    basis = vectors[:, order].T

    model = PcaModel(mean=mean, basis=basis, spectrum=spectrum, num_components=num_components)
    model.rank_deficient = model.rank < num_components
    return model

"""Lloyd's k-means with k-means++ seeding, used as the shared binning step."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

_CHUNK = 2048


class DegenerateClusteringWarning(UserWarning):
    pass


@dataclass
class ClusterAssignment:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    seed: int
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)
    degenerate: bool = False

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    def histogram(self, indices=None) -> np.ndarray:
        """Fraction of the selected samples falling in each cluster."""
        labels = self.labels if indices is None else self.labels[indices]
        counts = np.bincount(labels, minlength=self.k).astype(float)
        total = counts.sum()
        return counts / total if total else counts


def squared_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    out = np.empty((x.shape[0], centroids.shape[0]))
    for start in range(0, x.shape[0], _CHUNK):
        block = x[start : start + _CHUNK]
        diff = block[:, None, :] - centroids[None, :, :]
        out[start : start + _CHUNK] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def assign(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (ties go to the lowest index) and squared distances."""
    d2 = squared_distances(x, centroids)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(x.shape[0]), labels]


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    closest = squared_distances(x, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(x[idx])
        closest = np.minimum(closest, squared_distances(x, x[idx][None, :])[:, 0])
    return np.array(centers)


def kmeans(
    vectors: np.ndarray,
    k: int,
    seed: int = 0,
    max_iters: int = 300,
    tol: float = 1e-10,
) -> ClusterAssignment:
    """Cluster ``vectors`` into ``k`` groups.

    Iteration stops once the centroids move less than ``tol`` (Frobenius
    norm of the shift) or after ``max_iters`` update steps. A cluster that
    empties out is re-seeded at the point farthest from its centroid.

    With fewer distinct points than ``k``, each distinct point becomes its own
    cluster, the remaining clusters stay empty, and the result is flagged
    ``degenerate``.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("kmeans needs a non-empty (n, dim) array")
    if k < 1:
        raise ValueError("k must be positive")

    distinct = np.unique(x, axis=0)
    if distinct.shape[0] < k:
        warnings.warn(
            f"{distinct.shape[0]} distinct points for k={k}; clusters padded",
            DegenerateClusteringWarning,
            stacklevel=2,
        )
        pad = np.repeat(distinct[:1], k - distinct.shape[0], axis=0)
        centroids = np.vstack([distinct, pad])
        labels, d2 = assign(x, centroids)
        inertia = float(d2.sum())
        return ClusterAssignment(centroids, labels, inertia, seed, 0, [inertia], degenerate=True)

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, k, rng)
    labels, d2 = assign(x, centroids)
    history = [float(d2.sum())]
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        new = np.empty_like(centroids)
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        far = d2.copy()
        for j in range(k):
            if counts[j]:
                new[j] = sums[j] / counts[j]
            else:
                idx = int(np.argmax(far))
                new[j] = x[idx]
                far[idx] = -1.0
        shift = float(np.linalg.norm(new - centroids))
        centroids = new
        labels, d2 = assign(x, centroids)
        history.append(float(d2.sum()))
        if shift < tol:
            break
    return ClusterAssignment(centroids, labels, history[-1], seed, n_iter, history)

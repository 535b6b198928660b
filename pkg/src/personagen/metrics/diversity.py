"""Within-emotion spread and between-emotion separation of an embedded corpus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from ..embedding import EmbeddedCorpus, l2_normalize_rows
from ..errors import InsufficientSamples
from .kmeans import ClusterAssignment, kmeans


def mean_cosine_distance(vectors: np.ndarray) -> float:
    """Mean of 1 - cos(u, v) over all unordered pairs of distinct rows."""
    x = np.asarray(vectors, dtype=float)
    n = x.shape[0] if x.ndim == 2 else 0
    if n < 2:
        raise InsufficientSamples(f"mean cosine distance needs >= 2 vectors, got {n}")
    unit = l2_normalize_rows(x)
    gram = unit @ unit.T
    iu = np.triu_indices(n, k=1)
    value = float(np.mean(1.0 - gram[iu]))
    return min(max(value, 0.0), 2.0)


def cluster_entropy(assignment: ClusterAssignment, subset: Sequence[int] | np.ndarray) -> float:
    """Shannon entropy (nats) of the subset's occupancy over the shared clusters."""
    idx = np.asarray(subset)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    if idx.size == 0:
        raise InsufficientSamples("cluster entropy of an empty subset")
    p = assignment.histogram(idx)
    p = p[p > 0]
    return float(max(-np.sum(p * np.log(p)), 0.0))


def centroid_distance(centroids: Mapping[str, np.ndarray] | np.ndarray) -> float:
    """Mean pairwise cosine distance between emotion centroids."""
    mat = np.array(list(centroids.values()) if isinstance(centroids, Mapping) else centroids, dtype=float)
    if mat.ndim != 2 or mat.shape[0] < 2:
        raise InsufficientSamples("centroid distance needs at least two emotion categories")
    return mean_cosine_distance(mat)


def emotion_centroids(corpus: EmbeddedCorpus) -> dict[str, np.ndarray]:
    unit = l2_normalize_rows(corpus.vectors)
    labels = np.asarray(corpus.labels)
    return {lbl: unit[labels == lbl].mean(axis=0) for lbl in corpus.label_set}


@dataclass
class EmotionDiversity:
    mcd: float
    ce: float
    n: int


@dataclass
class DiversityReport:
    per_emotion: dict[str, EmotionDiversity]
    cd: float
    k_clusters: int
    seed: int = 0
    cluster_flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        bound = math.log(self.k_clusters) + 1e-12
        for label, row in self.per_emotion.items():
            if not (0.0 <= row.mcd <= 2.0 and 0.0 <= row.ce <= bound):
                raise ValueError(f"diversity values for {label!r} out of range: {row}")
        if self.cd < 0:
            raise ValueError("negative centroid distance")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "diversity_report",
            "k_clusters": self.k_clusters,
            "seed": self.seed,
            "cd": self.cd,
            "per_emotion": {
                lbl: {"mcd": r.mcd, "ce": r.ce, "cd": self.cd, "n": r.n}
                for lbl, r in self.per_emotion.items()
            },
            "flags": list(self.cluster_flags),
        }


def evaluate_diversity(corpus: EmbeddedCorpus, k_clusters: int = 20, seed: int = 0) -> DiversityReport:
    """MCD and CE per emotion plus the corpus-level CD.

    Clusters are fit once on the l2-normalized corpus and shared across
    emotions, so CE values are comparable between rows.
    """
    labels = corpus.label_set
    if len(labels) < 2:
        raise InsufficientSamples("diversity evaluation needs at least two emotion categories")
    unit = l2_normalize_rows(corpus.vectors)
    assignment = kmeans(unit, k_clusters, seed=seed)
    arr = np.asarray(corpus.labels)
    rows = {}
    for lbl in labels:
        idx = np.flatnonzero(arr == lbl)
        rows[lbl] = EmotionDiversity(
            mcd=mean_cosine_distance(unit[idx]),
            ce=cluster_entropy(assignment, idx),
            n=int(idx.size),
        )
    flags = ["degenerate_clustering"] if assignment.degenerate else []
    return DiversityReport(rows, centroid_distance(emotion_centroids(corpus)), k_clusters, seed, flags)

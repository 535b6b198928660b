from __future__ import annotations

import numpy as np

from ..embedding import EmbeddedCorpus
from ..errors import DegenerateInput, InsufficientSamples


def pca_project(vectors: np.ndarray, out_dim: int = 2) -> np.ndarray:
    """Coordinates of the mean-centred data on its top principal components.

    Each component's sign is fixed so that its largest-magnitude loading is
    positive, which makes the output deterministic.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2 or x.shape[0] < 3:
        raise InsufficientSamples("PCA projection needs at least 3 samples")
    centred = x - x.mean(axis=0)
    if not np.any(centred):
        raise DegenerateInput("all points are identical")
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    comps = vt[:out_dim]
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    coords = centred @ comps.T
    if coords.shape[1] < out_dim:
        coords = np.hstack([coords, np.zeros((coords.shape[0], out_dim - coords.shape[1]))])
    return coords


def projection_table(corpus: EmbeddedCorpus) -> list[dict[str, object]]:
    """Rows of (sample_id, label, x, y) ready for an external plotting tool."""
    coords = pca_project(corpus.vectors, 2)
    return [
        {"sample_id": sid, "label": lbl, "x": float(c[0]), "y": float(c[1])}
        for sid, lbl, c in zip(corpus.sample_ids, corpus.labels, coords)
    ]

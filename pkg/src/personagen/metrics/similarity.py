"""Distribution-level similarity between a reference corpus and a synthetic one."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..embedding import EmbeddedCorpus, l2_normalize_rows
from ..errors import DimensionMismatch, InsufficientSamples, InvalidHistogram, ZeroHistogram
from .kmeans import ClusterAssignment, kmeans

logger = logging.getLogger(__name__)

HIST_SUM_TOL = 1e-6


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Square root of a symmetric PSD matrix; negative round-off eigenvalues become 0."""
    sym = (np.asarray(m, dtype=float) + np.asarray(m, dtype=float).T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def covariance_sqrt_term(sigma_a: np.ndarray, sigma_b: np.ndarray) -> np.ndarray:
    """``sqrt(sqrt(A) B sqrt(A))``, whose trace equals ``Tr((A B)^(1/2))``."""
    root_a = sqrtm_psd(sigma_a)
    return sqrtm_psd(root_a @ sigma_b @ root_a)


def gaussian_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the rows of ``x``.

    With fewer than dim + 1 samples the covariance is rank deficient, so
    ``1e-6 * trace / dim`` is added to its diagonal.
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    if n < 2:
        raise InsufficientSamples(f"a Gaussian fit needs >= 2 samples, got {n}")
    mu = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    if n < d + 1:
        gamma = 1e-6 * np.trace(cov) / d
        cov = cov + gamma * np.eye(d)
    return mu, cov


def frechet_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Fréchet distance between Gaussian fits of two sample sets (rows are samples)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dims {a.shape[1]} and {b.shape[1]} differ")
    mu_a, cov_a = gaussian_fit(a)
    mu_b, cov_b = gaussian_fit(b)
    diff = mu_a - mu_b
    cross = np.trace(covariance_sqrt_term(cov_a, cov_b))
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * cross)
    if value < -1e-8:
        logger.warning("Fréchet distance %.3g below zero; clamped", value)
    return max(value, 0.0)


def _probability_histogram(h, name: str) -> np.ndarray:
    arr = np.asarray(h, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidHistogram(f"{name} must be a non-empty 1-D histogram")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidHistogram(f"{name} has negative or non-finite mass")
    if abs(arr.sum() - 1.0) > HIST_SUM_TOL:
        raise InvalidHistogram(f"{name} sums to {arr.sum():.8g}, not 1")
    return arr


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = _probability_histogram(p, "P")
    q = _probability_histogram(q, "Q")
    if p.shape != q.shape:
        raise InvalidHistogram(f"histograms have {p.size} and {q.size} bins")
    return p, q


def angular_lambdas(num_angles: int = 1001, eps: float = 1e-10) -> np.ndarray:
    return np.tan(np.linspace(eps, np.pi / 2 - eps, num_angles))


def prd_curve(
    p, q, num_angles: int = 1001, lambda_grid: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Precision/recall pairs of the PRD curve of Q (synthetic) against P (reference).

    Besides the angular grid, the slopes ``q_i / p_i`` are evaluated: the
    curve is piecewise linear between them, and F-beta is monotone on each
    piece, so its maximum always falls on one of these kinks.
    """
    p, q = _pair(p, q)
    lams = angular_lambdas(num_angles) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if lambda_grid is None:
        both = (p > 0) & (q > 0)
        kinks = np.clip(q[both] / p[both], lams[0], lams[-1])
        lams = np.unique(np.concatenate([lams, kinks]))
    # Dividing by the actual masses keeps P == Q at exactly 1 despite rounding.
    precision = np.minimum(lams[:, None] * p[None, :], q[None, :]).sum(axis=1) / q.sum()
    recall = np.minimum(p[None, :], q[None, :] / lams[:, None]).sum(axis=1) / p.sum()
    return np.clip(precision, 0.0, 1.0), np.clip(recall, 0.0, 1.0)


def f_beta(precision: np.ndarray, recall: np.ndarray, beta: float) -> np.ndarray:
    b2 = beta * beta
    num = (1.0 + b2) * precision * recall
    den = b2 * precision + recall
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def prd_f_beta(
    p, q, beta: float = 8.0, num_angles: int = 1001, lambda_grid: np.ndarray | None = None
) -> float:
    """Maximum F-beta along the PRD curve; beta > 1 favours recall."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    precision, recall = prd_curve(p, q, num_angles, lambda_grid)
    return float(np.clip(f_beta(precision, recall, beta).max(), 0.0, 1.0))


def kl_divergence(p, q, epsilon: float = 1e-6) -> float:
    """KL(P || Q) in nats after adding ``epsilon`` to every bin and renormalizing."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    p, q = _pair(p, q)
    ps = (p + epsilon) / (p + epsilon).sum()
    qs = (q + epsilon) / (q + epsilon).sum()
    return float(max(np.sum(ps * np.log(ps / qs)), 0.0))


def histogram_cosine(p, q) -> float:
    """Cosine similarity between two (count or frequency) histograms."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim != 1 or p.shape != q.shape:
        raise InvalidHistogram("histograms must be 1-D with the same number of bins")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))) or np.any(p < 0) or np.any(q < 0):
        raise InvalidHistogram("histograms must be finite and non-negative")
    np_, nq = np.linalg.norm(p), np.linalg.norm(q)
    if np_ == 0 or nq == 0:
        raise ZeroHistogram("cosine of an all-zero histogram is undefined")
    return float(np.clip(p @ q / (np_ * nq), 0.0, 1.0))


def bin_corpora(
    real: EmbeddedCorpus | np.ndarray,
    synthetic: EmbeddedCorpus | np.ndarray,
    k_bins: int = 20,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, ClusterAssignment]:
    """Cluster the union of both corpora and histogram each side over the clusters."""
    xr = real.vectors if isinstance(real, EmbeddedCorpus) else np.asarray(real, dtype=float)
    xs = synthetic.vectors if isinstance(synthetic, EmbeddedCorpus) else np.asarray(synthetic, dtype=float)
    if xr.shape[1] != xs.shape[1]:
        raise DimensionMismatch(f"dims {xr.shape[1]} and {xs.shape[1]} differ")
    union = l2_normalize_rows(np.vstack([xr, xs]))
    assignment = kmeans(union, k_bins, seed=seed)
    n = xr.shape[0]
    p = assignment.histogram(np.arange(n))
    q = assignment.histogram(np.arange(n, union.shape[0]))
    return p, q, assignment


@dataclass
class SimilarityReport:
    fid: float
    prd_f_beta: float
    beta: float
    kl: float
    hc: float
    k_bins: int
    epsilon: float
    seed: int = 0
    real_provider: str = ""
    synthetic_provider: str = ""
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.fid < 0 or not 0 <= self.prd_f_beta <= 1 or self.kl < 0 or not -1 <= self.hc <= 1:
            raise ValueError(f"similarity values out of range: {self}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "similarity_report",
            "fid": self.fid,
            "prd_f_beta": self.prd_f_beta,
            "beta": self.beta,
            "kl": self.kl,
            "hc": self.hc,
            "k_bins": self.k_bins,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "real_provider": self.real_provider,
            "synthetic_provider": self.synthetic_provider,
            "flags": list(self.flags),
        }


def evaluate_similarity(
    real: EmbeddedCorpus,
    synthetic: EmbeddedCorpus,
    k_bins: int = 20,
    beta: float = 8.0,
    epsilon: float = 1e-6,
    seed: int = 0,
) -> SimilarityReport:
    """FID on raw vectors; PRD-F-beta, KL and HC on shared k-means bins."""
    if real.dim != synthetic.dim:
        raise DimensionMismatch(f"dims {real.dim} and {synthetic.dim} differ")
    flags = []
    if real.provider_tag != synthetic.provider_tag:
        logger.warning(
            "provider tags differ: %s vs %s", real.provider_tag, synthetic.provider_tag
        )
        flags.append("provider_tag_mismatch")
    p, q, assignment = bin_corpora(real, synthetic, k_bins, seed)
    if assignment.degenerate:
        flags.append("degenerate_clustering")
    return SimilarityReport(
        fid=frechet_distance(real.vectors, synthetic.vectors),
        prd_f_beta=prd_f_beta(p, q, beta),
        beta=beta,
        kl=kl_divergence(p, q, epsilon),
        hc=histogram_cosine(p, q),
        k_bins=k_bins,
        epsilon=epsilon,
        seed=seed,
        real_provider=real.provider_tag,
        synthetic_provider=synthetic.provider_tag,
        flags=flags,
    )

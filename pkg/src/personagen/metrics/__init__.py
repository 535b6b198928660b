from .diversity import (
    DiversityReport,
    EmotionDiversity,
    centroid_distance,
    cluster_entropy,
    emotion_centroids,
    evaluate_diversity,
    mean_cosine_distance,
)
from .kmeans import ClusterAssignment, kmeans
from .projection import pca_project, projection_table
from .similarity import (
    SimilarityReport,
    bin_corpora,
    covariance_sqrt_term,
    evaluate_similarity,
    frechet_distance,
    histogram_cosine,
    kl_divergence,
    prd_curve,
    prd_f_beta,
    sqrtm_psd,
)

__all__ = [
    "ClusterAssignment",
    "DiversityReport",
    "EmotionDiversity",
    "SimilarityReport",
    "bin_corpora",
    "centroid_distance",
    "cluster_entropy",
    "covariance_sqrt_term",
    "emotion_centroids",
    "evaluate_diversity",
    "evaluate_similarity",
    "frechet_distance",
    "histogram_cosine",
    "kl_divergence",
    "kmeans",
    "mean_cosine_distance",
    "pca_project",
    "prd_curve",
    "prd_f_beta",
    "projection_table",
    "sqrtm_psd",
]

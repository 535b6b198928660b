from __future__ import annotations

import logging
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import diagonal_fid, factorial_set, prd_oracle

from personagen.embedding import EmbeddedCorpus
from personagen.errors import DimensionMismatch, InsufficientSamples, InvalidHistogram, ZeroHistogram
from personagen.metrics import (
    ClusterAssignment,
    bin_corpora,
    centroid_distance,
    cluster_entropy,
    covariance_sqrt_term,
    evaluate_diversity,
    evaluate_similarity,
    frechet_distance,
    histogram_cosine,
    kl_divergence,
    kmeans,
    mean_cosine_distance,
    pca_project,
    prd_curve,
    prd_f_beta,
    projection_table,
    sqrtm_psd,
)
from personagen.metrics.kmeans import DegenerateClusteringWarning

SIXTY_DEGREES = np.array([[1, 1, 0], [1, 0, 1], [0, 1, 1]]) / math.sqrt(2)


# --- k-means -------------------------------------------------------------------


def test_kmeans_single_cluster_is_mean():
    x = np.random.default_rng(0).normal(size=(50, 3))
    res = kmeans(x, 1)
    assert np.allclose(res.centroids[0], x.mean(0))


def test_kmeans_two_blobs_inertia():
    offsets = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    x = np.vstack([offsets, offsets + [100.0, 0.0]])
    res = kmeans(x, 2, seed=3)
    assert len(set(res.labels[:4])) == 1 and len(set(res.labels[4:])) == 1
    assert res.labels[0] != res.labels[4]
    assert res.inertia == pytest.approx(8.0)


def test_kmeans_k_equals_n():
    x = np.random.default_rng(1).normal(size=(7, 4))
    assert kmeans(x, 7).inertia == pytest.approx(0.0, abs=1e-12)


def test_kmeans_degenerate_flagged():
    with pytest.warns(DegenerateClusteringWarning):
        res = kmeans(np.ones((5, 2)), 3)
    assert res.degenerate


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 6), n=st.integers(8, 60))
def test_kmeans_inertia_monotone_and_labels_valid(seed, k, n):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    res = kmeans(x, k, seed=seed)
    hist = res.inertia_history
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
    assert res.labels.min() >= 0 and res.labels.max() < k
    assert res.centroids.shape == (k, 3)
    assert np.array_equal(res.labels, kmeans(x, k, seed=seed).labels)


# --- diversity -----------------------------------------------------------------


def test_mcd_examples():
    assert mean_cosine_distance(np.tile([1.0, 2.0], (4, 1))) == pytest.approx(0.0, abs=1e-12)
    assert mean_cosine_distance(np.eye(2)) == pytest.approx(1.0)
    assert mean_cosine_distance(SIXTY_DEGREES) == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(InsufficientSamples):
        mean_cosine_distance(np.ones((1, 3)))


def _assignment(labels, k):
    return ClusterAssignment(np.zeros((k, 2)), np.asarray(labels), 0.0, 0)


def test_cluster_entropy_examples():
    assert cluster_entropy(_assignment([0] * 10, 10), np.arange(10)) == 0.0
    uniform = _assignment(np.repeat(np.arange(10), 3), 10)
    assert cluster_entropy(uniform, np.arange(30)) == pytest.approx(math.log(10), abs=1e-9)
    half = _assignment([0, 1, 0, 1], 2)
    assert cluster_entropy(half, np.arange(4)) == pytest.approx(math.log(2), abs=1e-12)


def test_centroid_distance_examples():
    assert centroid_distance({"a": np.array([1.0, 0]), "b": np.array([1.0, 0])}) == pytest.approx(0.0)
    assert centroid_distance({"a": np.array([1.0, 0]), "b": np.array([0, 1.0])}) == pytest.approx(1.0)
    assert centroid_distance(SIXTY_DEGREES) == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(InsufficientSamples):
        centroid_distance({"a": np.array([1.0, 0])})


def _corpus(vectors, labels, tag="t"):
    return EmbeddedCorpus([f"s{i}" for i in range(len(labels))], labels, vectors, tag)


def test_diversity_single_emotion_rejected():
    with pytest.raises(InsufficientSamples):
        evaluate_diversity(_corpus(np.eye(4), ["joy"] * 4), k_clusters=2)


def test_diversity_identical_vectors_zero_mcd():
    x = np.tile([1.0, 0.5, 0.0], (6, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateClusteringWarning)
        report = evaluate_diversity(_corpus(x, ["joy", "fear"] * 3), k_clusters=3)
    assert all(r.mcd == pytest.approx(0.0, abs=1e-12) for r in report.per_emotion.values())
    assert report.cd == pytest.approx(0.0, abs=1e-12)
    assert "degenerate_clustering" in report.cluster_flags


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(2, 10))
def test_diversity_ranges_random(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(60, 8))
    labels = [["joy", "anger", "fear"][i % 3] for i in range(60)]
    report = evaluate_diversity(_corpus(x, labels), k_clusters=k, seed=seed)
    for row in report.per_emotion.values():
        assert 0.0 <= row.mcd <= 2.0
        assert 0.0 <= row.ce <= math.log(k) + 1e-12
    assert report.cd >= 0
    assert report.to_dict()["k_clusters"] == k


# --- Fréchet distance ----------------------------------------------------------


def test_fid_identical_sets():
    x = np.random.default_rng(2).normal(size=(64, 16))
    assert frechet_distance(x, x) <= 1e-6
    small = np.random.default_rng(3).normal(size=(5, 16))
    assert frechet_distance(small, small) <= 1e-6


def test_fid_one_dimensional_closed_form():
    c = 1 / math.sqrt(2)
    a = np.array([-c, c])
    b = np.array([1 - c, 1 + c])
    assert a.var(ddof=1) == pytest.approx(1.0) and b.mean() == pytest.approx(1.0)
    assert frechet_distance(a, b) == pytest.approx(1.0, abs=1e-6)


def test_fid_diagonal_closed_form():
    a = factorial_set([0.0, 1.0, -2.0, 0.5], [1.0, 2.0, 0.5, 1.5])
    b = factorial_set([1.0, 0.0, 0.0, 0.5], [3.0, 1.0, 0.5, 0.2])
    assert frechet_distance(a, b) == pytest.approx(diagonal_fid(a, b), abs=1e-6)


def test_fid_symmetric_and_validated():
    rng = np.random.default_rng(4)
    a, b = rng.normal(size=(40, 5)), rng.normal(1.0, 2.0, size=(30, 5))
    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-8)
    with pytest.raises(DimensionMismatch):
        frechet_distance(a, b[:, :4])
    with pytest.raises(InsufficientSamples):
        frechet_distance(a[:1], b)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), d=st.integers(1, 12))
def test_matrix_sqrt_reconstruction(seed, d):
    rng = np.random.default_rng(seed)
    ma, mb = rng.normal(size=(d, d)), rng.normal(size=(d, d))
    sa, sb = ma @ ma.T + 0.1 * np.eye(d), mb @ mb.T + 0.1 * np.eye(d)
    root_a = sqrtm_psd(sa)
    target = root_a @ sb @ root_a
    s = covariance_sqrt_term(sa, sb)
    assert np.linalg.norm(s @ s - target) / np.linalg.norm(target) < 1e-6


# --- PRD -----------------------------------------------------------------------


def test_prd_identities():
    p = np.array([0.2, 0.3, 0.5])
    assert prd_f_beta(p, p) == pytest.approx(1.0, abs=1e-9)
    sevenths = np.full(7, 1 / 7)
    assert sevenths.sum() != 1.0
    assert prd_f_beta(sevenths, sevenths) == 1.0
    assert prd_f_beta([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_prd_worked_example_against_oracle():
    p, q = np.array([1.0, 0.0]), np.array([0.5, 0.5])
    assert prd_f_beta(p, q, beta=8) == pytest.approx(prd_oracle(p, q), abs=1e-3)


def test_prd_matches_fine_grid_oracle_on_random_pairs():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(2, 21))
        p, q = rng.dirichlet(np.ones(k) * 0.7), rng.dirichlet(np.ones(k) * 0.7)
        p[rng.random(k) < 0.15] = 0
        q[rng.random(k) < 0.15] = 0
        if p.sum() == 0 or q.sum() == 0:
            continue
        p, q = p / p.sum(), q / q.sum()
        worst = max(worst, abs(prd_f_beta(p, q, 8) - prd_oracle(p, q)))
    assert worst < 1e-3


def test_prd_curve_bounds():
    rng = np.random.default_rng(0)
    p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
    prec, rec = prd_curve(p, q)
    assert np.all((0 <= prec) & (prec <= 1)) and np.all((0 <= rec) & (rec <= 1))


def test_histogram_validation():
    with pytest.raises(InvalidHistogram):
        prd_f_beta([0.5, 0.4], [0.5, 0.5])
    with pytest.raises(InvalidHistogram):
        kl_divergence([0.5, 0.5], [1.0])
    with pytest.raises(InvalidHistogram):
        kl_divergence([1.5, -0.5], [0.5, 0.5])


# --- KL and histogram cosine ---------------------------------------------------


def test_kl_examples():
    assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)
    expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-4)
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.1438, abs=1e-4)


def test_kl_zero_bin_and_epsilon_limit():
    p, q = [0.5, 0.3, 0.2], [0.6, 0.4, 0.0]
    assert math.isfinite(kl_divergence(p, q, 1e-6))
    assert kl_divergence(p, q, 1e-6) > kl_divergence(p, q, 1e-3)
    exact = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
    gaps = [abs(kl_divergence([0.5, 0.5], [0.25, 0.75], e) - exact) for e in (1e-2, 1e-4, 1e-6)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_kl_asymmetric_witness():
    p, q = [0.9, 0.1], [0.5, 0.5]
    assert kl_divergence(p, q) != pytest.approx(kl_divergence(q, p), abs=1e-3)


def test_histogram_cosine_examples():
    assert histogram_cosine([2, 3], [2, 3]) == pytest.approx(1.0)
    assert histogram_cosine([1, 0], [0, 1]) == 0.0
    assert histogram_cosine([1, 1], [1, 0]) == pytest.approx(0.7071, abs=1e-4)
    assert histogram_cosine([1, 4, 2], [3, 0, 5]) == pytest.approx(histogram_cosine([3, 0, 5], [1, 4, 2]))
    with pytest.raises(ZeroHistogram):
        histogram_cosine([0, 0], [1, 0])


# --- binning and similarity report ---------------------------------------------


def test_bin_identical_corpora():
    x = np.random.default_rng(5).normal(size=(40, 6))
    p, q, _ = bin_corpora(x, x.copy(), k_bins=5)
    assert np.array_equal(p, q)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


def test_bin_disjoint_half_spaces():
    rng = np.random.default_rng(6)
    a = np.abs(rng.normal(size=(30, 4))) + [5, 0, 0, 0]
    b = -np.abs(rng.normal(size=(30, 4))) - [5, 0, 0, 0]
    p, q, _ = bin_corpora(a, b, k_bins=2)
    assert np.all(p * q == 0)
    assert p.sum() == pytest.approx(1.0) and q.sum() == pytest.approx(1.0)


def test_similarity_self():
    x = np.random.default_rng(7).normal(size=(80, 8))
    c = _corpus(x, ["joy"] * 80)
    r = evaluate_similarity(c, c, k_bins=10, epsilon=1e-5)
    assert r.fid <= 1e-6 and r.prd_f_beta == 1.0 and r.kl <= 1e-9 and r.hc >= 1 - 1e-9
    assert r.k_bins == 10 and r.epsilon == 1e-5 and r.beta == 8.0


def test_similarity_disjoint_blobs():
    rng = np.random.default_rng(8)
    a = _corpus(rng.normal(size=(40, 4)) * 0.1 + [10, 0, 0, 0], ["joy"] * 40)
    b = _corpus(rng.normal(size=(40, 4)) * 0.1 - [10, 0, 0, 0], ["joy"] * 40)
    r = evaluate_similarity(a, b, k_bins=2)
    assert r.prd_f_beta == 0.0
    assert r.hc == 0.0
    assert r.fid > 100


def test_similarity_provider_mismatch_warns(caplog):
    x = np.random.default_rng(9).normal(size=(20, 3))
    with caplog.at_level(logging.WARNING):
        r = evaluate_similarity(_corpus(x, ["a"] * 20, "p1"), _corpus(x, ["a"] * 20, "p2"), k_bins=3)
    assert "provider_tag_mismatch" in r.flags
    assert "provider" in caplog.text


def test_similarity_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        evaluate_similarity(_corpus(np.ones((3, 2)), ["a"] * 3), _corpus(np.ones((3, 3)), ["a"] * 3))


# --- PCA -----------------------------------------------------------------------


def test_pca_collinear_points():
    rng = np.random.default_rng(10)
    direction = rng.normal(size=20)
    x = np.outer(rng.normal(size=30), direction) + rng.normal(size=20)
    coords = pca_project(x)
    assert coords[:, 1].var() == pytest.approx(0.0, abs=1e-18)
    assert np.allclose(coords.mean(0), 0.0, atol=1e-9)


def test_pca_rotation_invariant_distances():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(25, 5)) * [5, 3, 1, 0.5, 0.1]
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    d = lambda c: np.linalg.norm(c[:, None] - c[None, :], axis=-1)
    assert np.allclose(d(pca_project(x)), d(pca_project(x @ q)), atol=1e-6)


def test_projection_table_rows():
    x = np.random.default_rng(12).normal(size=(6, 4))
    rows = projection_table(_corpus(x, ["joy", "fear"] * 3))
    assert [r["sample_id"] for r in rows] == [f"s{i}" for i in range(6)]
    assert set(rows[0]) == {"sample_id", "label", "x", "y"}

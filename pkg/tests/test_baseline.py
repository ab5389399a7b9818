import itertools

import numpy as np
import pytest

from neuncut.baseline import bottom_k_eigs, canonical_signs, kmeans, ncut_baseline, spectral_embedding
from neuncut.data import gen_double_rings
from neuncut.errors import InvalidConfig, InvalidInput
from neuncut.graph import AffinityGraph, laplacian
from neuncut.metrics import accuracy, ari

from conftest import block_graph, connected_random_graph, random_graph


def test_identity_eigs():
    emb = bottom_k_eigs(np.eye(3), 2)
    np.testing.assert_allclose(emb.eigenvalues, [1.0, 1.0])


def test_path_graph_eigenvalues():
    A = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    emb = bottom_k_eigs(laplacian(AffinityGraph.from_affinity(A)).unnormalized, 3)
    # det(L - x I) = -x (x - 1)(x - 3)
    np.testing.assert_allclose(emb.eigenvalues, [0.0, 1.0, 3.0], atol=1e-12)


def test_connected_kernel_vector(rng):
    A = connected_random_graph(rng, 12)
    G = AffinityGraph.from_affinity(A)
    emb = spectral_embedding(G, 1)
    assert abs(emb.eigenvalues[0]) <= 1e-12
    ref = np.sqrt(G.degrees) / np.linalg.norm(np.sqrt(G.degrees))
    np.testing.assert_allclose(emb.F[:, 0], ref, atol=1e-10)


def test_eigen_residual_orthonormality_and_optimality(rng):
    for trial in range(50):
        n = int(rng.integers(2, 201))
        k = int(rng.integers(1, min(n, 6) + 1))
        G = AffinityGraph.from_affinity(random_graph(rng, n, density=rng.uniform(0.05, 0.9)))
        S = laplacian(G).normalized
        emb = bottom_k_eigs(S, k)
        F, lam = emb.F, emb.eigenvalues
        assert np.linalg.norm(S @ F - F * lam) / np.linalg.norm(F) <= 1e-6
        assert np.abs(F.T @ F - np.eye(k)).max() <= 1e-8
        assert np.all(np.diff(lam) >= 0)
        big = np.abs(F).argmax(0)
        assert np.all(F[big, np.arange(k)] > 0)
        if trial < 10:
            best = np.trace(F.T @ S @ F)
            for _ in range(100):
                Q, _ = np.linalg.qr(rng.normal(size=(n, k)))
                assert best <= np.trace(Q.T @ S @ Q) + 1e-9


def test_eigs_rejects_bad_input():
    with pytest.raises(InvalidInput):
        bottom_k_eigs(np.array([[0.0, 1.0], [0.5, 0.0]]), 1)
    with pytest.raises(InvalidInput):
        bottom_k_eigs(np.zeros((2, 3)), 1)
    with pytest.raises(InvalidConfig):
        bottom_k_eigs(np.eye(2), 3)


def test_canonical_signs():
    V = np.array([[0.1, -0.9], [-0.8, 0.2]])
    np.testing.assert_array_equal(canonical_signs(V), [[-0.1, 0.9], [0.8, -0.2]])


def test_kmeans_separated_clouds(rng):
    X = np.vstack([rng.normal(size=(20, 2)), 100 + rng.normal(size=(20, 2))])
    labels = kmeans(X, 2, seed=0)
    assert ari(labels, np.repeat([0, 1], 20)) == 1.0


def test_kmeans_n_equals_k(rng):
    X = rng.normal(size=(5, 2))
    assert sorted(kmeans(X, 5, seed=1)) == [0, 1, 2, 3, 4]


def _wcss(X, labels):
    return sum(((X[labels == j] - X[labels == j].mean(0)) ** 2).sum() for j in np.unique(labels))


def test_kmeans_matches_exhaustive(rng):
    # two loose groups; several near-optimal Lloyd fixed points exist, hence the extra restarts
    for _ in range(30):
        X = rng.normal(size=(8, 2))
        X[:4, 0] += 3.0
        best = min(_wcss(X, np.array((0,) + bits)) for bits in itertools.product((0, 1), repeat=7)
                   if 1 in bits)
        assert _wcss(X, kmeans(X, 2, seed=0, restarts=50)) == pytest.approx(best, rel=1e-12)


def test_kmeans_result_is_lloyd_fixed_point(rng):
    for _ in range(20):
        X = rng.normal(size=(30, 3))
        labels = kmeans(X, 3, seed=1)
        centers = np.array([X[labels == j].mean(0) for j in range(3)])
        d2 = ((X[:, None] - centers[None]) ** 2).sum(-1)
        np.testing.assert_array_equal(np.argmin(d2, 1), labels)


def test_kmeans_reproducible(rng):
    X = rng.normal(size=(50, 3))
    np.testing.assert_array_equal(kmeans(X, 4, seed=9), kmeans(X, 4, seed=9))


@pytest.mark.parametrize("sizes", [[5, 7], [3, 4, 6], [10, 2, 8, 5], [25, 25, 25, 25]])
def test_baseline_disconnected_components(sizes):
    A, labels = block_graph(sizes)
    pred = ncut_baseline(AffinityGraph.from_affinity(A), len(sizes))
    assert ari(pred, labels) == 1.0


def test_baseline_double_rings():
    D = gen_double_rings(2000, seed=0)
    pred = ncut_baseline(D, 2, sigma=3.0)
    assert accuracy(pred, D.labels) >= 0.98
    np.testing.assert_array_equal(pred, ncut_baseline(D, 2, sigma=3.0))


def test_baseline_size_cap(rng):
    with pytest.raises(InvalidConfig):
        ncut_baseline(rng.normal(size=(30, 2)), 2, max_n=20)

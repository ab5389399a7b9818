import numpy as np
import pytest

from neuncut.errors import InvalidConfig, NumericalError
from neuncut.graph import AffinityGraph
from neuncut.loss import (estimate_sizes, estimate_volumes, loss_and_grad, ncut_value,
                          neuncut_loss, neuncut_loss_grad, neurcut_loss, neurcut_loss_grad,
                          rcut_value)

from conftest import block_graph, connected_random_graph, random_graph


def _binary(rng, n, k, cover=True):
    labels = rng.integers(0, k, n)
    if cover:
        labels[:k] = np.arange(k)
        rng.shuffle(labels)
    return labels, np.eye(k)[labels]


def _random_stochastic(rng, m, k):
    Z = rng.normal(size=(m, k))
    E = np.exp(Z - Z.max(1, keepdims=True))
    return E / E.sum(1, keepdims=True)


def test_volumes_examples():
    est = estimate_volumes(np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([2.0, 3.0]))
    np.testing.assert_allclose(est.volumes, [5.0, 1e-8 * 5.0])
    est = estimate_volumes(np.full((4, 2), 0.5), np.array([1.0, 2.0, 3.0, 4.0]))
    np.testing.assert_allclose(est.volumes, [5.0, 5.0])


def test_volumes_naive_loop(rng):
    Y, deg = _random_stochastic(rng, 5, 3), rng.uniform(0.5, 2, 5)
    est = estimate_volumes(Y, deg)
    for l in range(3):
        ref = 0.0
        for i in range(5):
            ref += Y[i, l] * deg[i]
        assert abs(est.volumes[l] - ref) <= 1e-12
    np.testing.assert_allclose(est.lambda_inv_diag, est.volumes ** -0.5)


def test_sizes():
    est = estimate_sizes(np.array([[0.25, 0.75], [1.0, 0.0]]))
    np.testing.assert_allclose(est.volumes, [1.25, 0.75])


def test_binary_memberships_orthonormal_and_interior_rows_shrink(rng):
    for _ in range(100):
        n = int(rng.integers(3, 21))
        k = int(rng.integers(2, min(n, 4) + 1))
        G = AffinityGraph.from_affinity(connected_random_graph(rng, n))
        _, Y = _binary(rng, n, k)
        est = estimate_volumes(Y, G.degrees)
        B = Y * est.lambda_inv_diag
        M = B.T @ (G.degrees[:, None] * B)
        assert np.linalg.norm(M - np.eye(k)) <= 1e-9

        i = int(rng.integers(n))
        old = int(np.argmax(Y[i]))
        other = (old + 1 + int(rng.integers(k - 1))) % k
        t = rng.uniform(0.05, 0.95)
        Yp = Y.copy()
        Yp[i] = 0.0
        Yp[i, old], Yp[i, other] = t, 1.0 - t
        estp = estimate_volumes(Yp, G.degrees)
        Bp = Yp * estp.lambda_inv_diag
        diag = np.einsum("il,i,il->l", Bp, G.degrees, Bp)
        assert diag[old] < 1.0 and diag[other] < 1.0


@pytest.mark.parametrize("objective", ["ncut", "rcut"])
def test_trace_form_equals_combinatorial_cut(rng, objective):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, min(n, 3) + 1))
        A = connected_random_graph(rng, n)
        G = AffinityGraph.from_affinity(A)
        labels, Y = _binary(rng, n, k)
        br, _, _ = loss_and_grad(objective, Y, G, gamma=1.0)
        ref = (ncut_value if objective == "ncut" else rcut_value)(A, labels, k)
        assert abs(br.lap - ref) <= 1e-10
        assert br.orth == pytest.approx(0.0, abs=1e-20 + 1e-12)


def test_cut_oracle_brute_force():
    # hand-computed: path 0-1-2 with weights 1 and 2, split {0} | {1,2}
    A = np.array([[0, 1, 0], [1, 0, 2], [0, 2, 0]], dtype=float)
    assert ncut_value(A, [0, 1, 1]) == pytest.approx(1 / 1 + 1 / 5)
    assert rcut_value(A, [0, 1, 1]) == pytest.approx(1 / 1 + 1 / 2)


def test_two_cliques_zero_loss():
    A, labels = block_graph([5, 7])
    G = AffinityGraph.from_affinity(A)
    Y = np.eye(2)[labels]
    for objective in ("ncut", "rcut"):
        br, dY, _ = loss_and_grad(objective, Y, G, gamma=3.0)
        assert abs(br.lap) <= 1e-12 and abs(br.orth) <= 1e-12
        # the lap part of the gradient vanishes; orth part is zero at the optimum too
        np.testing.assert_allclose(dY, 0.0, atol=1e-12)


def test_uniform_y_orth_dense_oracle(rng):
    n, k = 7, 3
    A = connected_random_graph(rng, n)
    G = AffinityGraph.from_affinity(A)
    Y = np.full((n, k), 1.0 / k)
    est = estimate_volumes(Y, G.degrees)
    br = neuncut_loss(Y, G, est, gamma=2.0)
    Lam = np.diag(est.volumes ** -0.5)
    B = Y @ Lam
    D = np.diag(A.sum(1))
    ref_orth = np.linalg.norm(B.T @ D @ B - np.eye(k)) ** 2
    ref_lap = np.trace(B.T @ (D - A) @ B)
    assert br.orth == pytest.approx(ref_orth, rel=1e-12)
    # B^T D B = (1/k) 11^T, so orth = ||(1/k)11^T - I||^2 = k - 1
    assert br.orth == pytest.approx(k - 1, rel=1e-12)
    assert br.lap == pytest.approx(ref_lap, abs=1e-12)
    assert br.total == pytest.approx(br.lap + 1.0 * br.orth)


def _fd_grad(loss_fn, Y, h=1e-6):
    g = np.zeros_like(Y)
    for idx in np.ndindex(Y.shape):
        up, down = Y.copy(), Y.copy()
        up[idx] += h
        down[idx] -= h
        g[idx] = (loss_fn(up) - loss_fn(down)) / (2 * h)
    return g


@pytest.mark.parametrize("which", ["ncut", "rcut"])
def test_gradient_finite_differences(rng, which):
    for _ in range(20):
        n, k = int(rng.integers(2, 11)), int(rng.integers(2, 5))
        G = AffinityGraph.from_affinity(random_graph(rng, n, density=0.7) + 0.01 * (1 - np.eye(n)))
        Y = _random_stochastic(rng, n, k)
        gamma = float(rng.uniform(0, 5))
        if which == "ncut":
            est = estimate_volumes(Y, G.degrees)
            loss, grad = neuncut_loss, neuncut_loss_grad
        else:
            est = estimate_sizes(Y)
            loss, grad = neurcut_loss, neurcut_loss_grad
        g = grad(Y, G, est, gamma)
        fd = _fd_grad(lambda Z: loss(Z, G, est, gamma).total, Y)
        err = np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd)))
        assert err <= 1e-6


def test_gamma_zero_is_lap_only(rng):
    G = AffinityGraph.from_affinity(connected_random_graph(rng, 6))
    Y = _random_stochastic(rng, 6, 3)
    est = estimate_volumes(Y, G.degrees)
    g0 = neuncut_loss_grad(Y, G, est, 0.0)
    B = Y * est.lambda_inv_diag
    L = np.diag(G.degrees) - G.affinity
    np.testing.assert_allclose(g0, 2 * (L @ B) * est.lambda_inv_diag, rtol=1e-12, atol=1e-14)


def test_loss_and_grad_matches_components(rng):
    G = AffinityGraph.from_affinity(connected_random_graph(rng, 6))
    Y = _random_stochastic(rng, 6, 2)
    br, dY, est = loss_and_grad("ncut", Y, G, 0.7)
    assert br == neuncut_loss(Y, G, est, 0.7)
    np.testing.assert_array_equal(dY, neuncut_loss_grad(Y, G, est, 0.7))
    with pytest.raises(InvalidConfig):
        loss_and_grad("mincut", Y, G, 1.0)


def test_regular_graph_ratio():
    # circulant 4-regular graph on 10 nodes with unit weights
    n = 10
    A = np.zeros((n, n))
    for i in range(n):
        for off in (1, 2):
            A[i, (i + off) % n] = A[(i + off) % n, i] = 1.0
    G = AffinityGraph.from_affinity(A)
    rng = np.random.default_rng(3)
    for _ in range(10):
        labels, Y = _binary(rng, n, 3)
        nc = neuncut_loss(Y, G, estimate_volumes(Y, G.degrees), 0.0).lap
        rc = neurcut_loss(Y, G, estimate_sizes(Y), 0.0).lap
        assert rc == pytest.approx(4.0 * nc, rel=1e-12)


def test_lap_nonnegative_and_scale_invariant(rng):
    for _ in range(20):
        n = int(rng.integers(3, 10))
        A = connected_random_graph(rng, n)
        labels, Y = _binary(rng, n, 2)
        G1 = AffinityGraph.from_affinity(A)
        G2 = AffinityGraph.from_affinity(A * 7.5)
        l1 = neuncut_loss(Y, G1, estimate_volumes(Y, G1.degrees), 1.0).lap
        l2 = neuncut_loss(Y, G2, estimate_volumes(Y, G2.degrees), 1.0).lap
        assert l1 >= -1e-12
        assert l1 == pytest.approx(l2, rel=1e-12)
        Ys = _random_stochastic(rng, n, 3)
        assert neuncut_loss(Ys, G1, estimate_volumes(Ys, G1.degrees), 1.0).lap >= -1e-12


def test_nonfinite_raises():
    G = AffinityGraph.from_affinity(np.array([[0.0, 1.0], [1.0, 0.0]]))
    Y = np.array([[np.nan, 0.5], [0.5, 0.5]])
    with pytest.raises(NumericalError):
        neuncut_loss(Y, G, estimate_volumes(np.full((2, 2), 0.5), G.degrees), 1.0)

import sys
import numpy as np
import pytest


def random_graph(rng, n, density=0.7, zero_diag=True):
    """Symmetric nonnegative affinity with a random sparsity pattern."""
    W = rng.uniform(0.1, 1.0, (n, n)) * (rng.uniform(size=(n, n)) < density)
    W = np.triu(W, 1)
    W = W + W.T
    if not zero_diag:
        W[np.diag_indices(n)] = rng.uniform(0.1, 1.0, n)
    return W


def connected_random_graph(rng, n, density=0.7):
    while True:
        W = random_graph(rng, n, density)
        if np.all(W.sum(1) > 0):
            # path backbone guarantees connectivity
            for i in range(n - 1):
                if W[i, i + 1] == 0:
                    W[i, i + 1] = W[i + 1, i] = 0.5
            return W


def block_graph(sizes, w=1.0):
    n = sum(sizes)
    A = np.zeros((n, n))
    labels = np.repeat(np.arange(len(sizes)), sizes)
    start = 0
    for s in sizes:
        A[start:start + s, start:start + s] = w
        start += s
    np.fill_diagonal(A, 0.0)
    return A, labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(rng, k, per=20, spread=0.5, radius=30.0):
    """k tight Gaussian blobs on a circle; far enough apart that a sigma=1 heat kernel disconnects them."""
    from neuncut.data import DataMatrix

    ang = 2 * np.pi * np.arange(k) / k
    centers = radius * np.column_stack([np.cos(ang), np.sin(ang)])
    pts = np.vstack([c + spread * rng.normal(size=(per, 2)) for c in centers])
    labels = np.repeat(np.arange(k), per)
    perm = rng.permutation(len(labels))
    return DataMatrix(pts[perm], labels[perm])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])

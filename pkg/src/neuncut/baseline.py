"""Classical spectral clustering: bottom eigenvectors of the normalized Laplacian + k-means."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, InvalidInput, NumericalError
from .graph import AffinityGraph, heat_kernel_affinity, laplacian, sparsify_knn

MAX_N = 5000
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class SpectralEmbedding:
    F: np.ndarray
    eigenvalues: np.ndarray


def canonical_signs(V: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (first one on ties)."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def bottom_k_eigs(S, k: int) -> SpectralEmbedding:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInput(f"matrix must be square, got {S.shape}")
    n = S.shape[0]
    if not 1 <= k <= n:
        raise InvalidConfig(f"need 1 <= k <= n={n}, got {k}")
    if not np.all(np.isfinite(S)):
        raise InvalidInput("matrix has non-finite entries")
    if np.max(np.abs(S - S.T), initial=0.0) > SYMMETRY_TOL:
        raise InvalidInput("matrix is not symmetric")
    try:
        # LAPACK syevr: Householder tridiagonalization + MRRR, eigenvalues ascending
        w, V = np.linalg.eigh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from None
    return SpectralEmbedding(canonical_signs(V[:, :k]), w[:k])


def _wcss(X, labels, centers):
    return float(((X - centers[labels]) ** 2).sum())


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(1)
    for j in range(1, k):
        total = d2.sum()
        i = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[j] = X[i]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(1))
    return centers


def _lloyd(X, centers, max_iter, tol):
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        labels = np.argmin(d2, axis=1)
        new = centers.copy()
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                new[j] = X[members].mean(0)
            else:
                # reseed the empty cluster at the point farthest from its center
                far = np.argmax(d2[np.arange(len(X)), labels])
                new[j] = X[far]
                labels[far] = j
        shift = np.abs(new - centers).max()
        centers = new
        if shift <= tol:
            break
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
    labels = np.argmin(d2, axis=1)
    return labels, centers


def kmeans(F, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300, tol: float = 1e-10):
    """Lloyd's algorithm from k-means++ seeds; best of ``restarts`` runs by within-cluster SS."""
    X = np.asarray(F, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise InvalidConfig(f"need 1 <= k <= n={n}, got {k}")
    rng = np.random.default_rng(seed)
    best, best_score = None, np.inf
    for _ in range(max(1, restarts)):
        labels, centers = _lloyd(X, _kmeanspp(X, k, rng), max_iter, tol)
        score = _wcss(X, labels, centers)
        if best is None or score < best_score - 1e-12 * max(1.0, best_score):
            best, best_score = labels, score
    return best


def spectral_embedding(G: AffinityGraph, k: int) -> SpectralEmbedding:
    return bottom_k_eigs(laplacian(G).normalized, k)


def ncut_baseline(X, k: int, sigma: float = 3.0, s: int | None = None, seed: int = 0,
                  restarts: int = 10, max_n: int = MAX_N, self_loops: bool = False):
    """Spectral clustering on a heat-kernel graph of ``X`` (or on a given AffinityGraph)."""
    if isinstance(X, AffinityGraph):
        G = X
    else:
        X = getattr(X, "points", X)
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] > max_n:
            raise InvalidConfig(
                f"dense spectral baseline is capped at n={max_n} points, got {X.shape[0]}"
            )
        G = heat_kernel_affinity(X, sigma, self_loops=self_loops)
    if G.size > max_n:
        raise InvalidConfig(f"dense spectral baseline is capped at n={max_n} points, got {G.size}")
    if s is not None and s < G.size - 1:
        G = sparsify_knn(G, s)
    emb = spectral_embedding(G, k)
    F = emb.F
    norms = np.linalg.norm(F, axis=1, keepdims=True)
    F = F / np.where(norms > 0, norms, 1.0)
    return kmeans(F, k, seed=seed, restarts=restarts)

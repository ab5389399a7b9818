"""Affinity graphs, degrees and Laplacians for dense (mini-)batches."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidConfig, InvalidData, InvalidInput

DEGREE_FLOOR = 1e-12


@dataclass(frozen=True)
class AffinityGraph:
    affinity: np.ndarray
    degrees: np.ndarray

    @classmethod
    def from_affinity(cls, A) -> "AffinityGraph":
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInput(f"affinity must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InvalidData("affinity contains non-finite entries")
        if np.any(A < 0):
            raise InvalidData("affinity entries must be nonnegative")
        if not np.array_equal(A, A.T):
            raise InvalidData("affinity must be exactly symmetric")
        return cls(A, A.sum(axis=1))

    @property
    def size(self) -> int:
        return self.affinity.shape[0]

    def floored_degrees(self) -> np.ndarray:
        return floor_degrees(self.degrees)


def floor_degrees(degrees) -> np.ndarray:
    """Clamp degrees from below at 1e-12 times the mean degree so they can be inverted."""
    degrees = np.asarray(degrees, dtype=np.float64)
    mean = degrees.mean() if degrees.size else 0.0
    floor = DEGREE_FLOOR * mean if mean > 0 else DEGREE_FLOOR
    return np.maximum(degrees, floor)


def pairwise_sq_dists(X, Y=None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    Y = X if Y is None else np.asarray(Y, dtype=np.float64)
    sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.maximum(sq, 0.0)


def heat_kernel_affinity(X, sigma: float, self_loops: bool = False) -> AffinityGraph:
    """Gaussian (heat kernel) affinity exp(-|x_i - x_j|^2 / (2 sigma^2)).

    The diagonal is zero unless ``self_loops`` is set. Only the strict upper
    triangle is evaluated and mirrored, so the result is exactly symmetric.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInput(f"expected a 2-D batch, got shape {X.shape}")
    if X.shape[0] < 2:
        raise InvalidInput("need at least two points to build a graph")
    if not np.all(np.isfinite(X)):
        raise InvalidData("input batch contains non-finite values")
    if not sigma > 0:
        raise InvalidConfig(f"sigma must be positive, got {sigma}")

    A = np.exp(-pairwise_sq_dists(X) / (2.0 * sigma**2))
    A = np.triu(A, 1)
    A = A + A.T
    if self_loops:
        np.fill_diagonal(A, 1.0)
    return AffinityGraph(A, A.sum(axis=1))


def sparsify_knn(G: AffinityGraph, s: int) -> AffinityGraph:
    """Keep the ``s`` largest off-diagonal entries of every row, then average with the transpose.

    Ties at the s-th value keep the lowest column index.
    """
    n = G.size
    s = int(s)
    if s < 1 or s >= n:
        raise InvalidConfig(f"s must satisfy 1 <= s < n={n}, got {s}")
    A = G.affinity
    if s == n - 1:
        return G

    scores = A.copy()
    np.fill_diagonal(scores, -np.inf)
    # stable sort on negated values: among equal values the lower index comes first
    keep = np.argsort(-scores, axis=1, kind="stable")[:, :s]
    mask = np.zeros_like(A, dtype=bool)
    np.put_along_axis(mask, keep, True, axis=1)
    M = np.where(mask, A, 0.0)
    if np.any(np.diag(A) != 0):
        np.fill_diagonal(M, np.diag(A))
    S = 0.5 * (M + M.T)
    return AffinityGraph(S, S.sum(axis=1))


@dataclass(frozen=True)
class Laplacian:
    graph: AffinityGraph

    @cached_property
    def unnormalized(self) -> np.ndarray:
        A = self.graph.affinity
        return np.diag(self.graph.degrees) - A

    @cached_property
    def normalized(self) -> np.ndarray:
        """D^{-1/2} (D - A) D^{-1/2} with degrees floored before inversion."""
        d = 1.0 / np.sqrt(self.graph.floored_degrees())
        Ln = self.unnormalized * d[:, None] * d[None, :]
        return 0.5 * (Ln + Ln.T)


def laplacian(G: AffinityGraph) -> Laplacian:
    return Laplacian(G)


def cut_value(A, members) -> float:
    """Total affinity between vertices in ``members`` and the rest."""
    A = np.asarray(A)
    members = np.asarray(members, dtype=bool)
    return float(A[np.ix_(members, ~members)].sum())

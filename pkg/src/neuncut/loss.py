"""Relaxed normalized-cut (and ratio-cut) losses on soft memberships.

With memberships Y (m x k, rows on the simplex) and per-cluster scales
c_l = vol_l^{-1/2}, the relaxed indicator is B = Y diag(c). The loss is

    lap  = trace(B^T L B)
    orth = || B^T W B - I ||_F^2
    total = lap + gamma/2 * orth

where W = D for the normalized cut and W = I for the ratio cut (volumes are
then soft cluster sizes). The scales are treated as constants when
differentiating: they are re-estimated from the current forward pass before
each gradient step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, InvalidInput, NumericalError
from .graph import AffinityGraph

VOLUME_FLOOR = 1e-8
OBJECTIVES = ("ncut", "rcut")


@dataclass(frozen=True)
class VolumeEstimate:
    volumes: np.ndarray
    lambda_inv_diag: np.ndarray


# for the ratio cut the "volumes" are soft cluster sizes
SizeEstimate = VolumeEstimate


@dataclass(frozen=True)
class LossBreakdown:
    lap: float
    orth: float
    total: float
    gamma: float


def _make_estimate(raw: np.ndarray, total_mass: float) -> VolumeEstimate:
    floor = VOLUME_FLOOR * total_mass
    vol = np.maximum(raw, floor)
    if np.any(vol <= 0):
        raise NumericalError("cluster volume is zero; graph has no edges")
    return VolumeEstimate(vol, 1.0 / np.sqrt(vol))


def estimate_volumes(Y, degrees) -> VolumeEstimate:
    """Soft volumes sum_i Y[i, l] * D_ii, floored at 1e-8 * sum(D)."""
    Y = np.asarray(Y, dtype=np.float64)
    degrees = np.asarray(degrees, dtype=np.float64)
    if Y.ndim != 2 or degrees.shape != (Y.shape[0],):
        raise InvalidInput(f"Y {Y.shape} and degrees {degrees.shape} are inconsistent")
    return _make_estimate(degrees @ Y, float(degrees.sum()))


def estimate_sizes(Y) -> SizeEstimate:
    """Soft cluster sizes sum_i Y[i, l], floored at 1e-8 * m."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise InvalidInput(f"Y must be 2-D, got {Y.shape}")
    return _make_estimate(Y.sum(axis=0), float(Y.shape[0]))


def _check(Y, G: AffinityGraph, est: VolumeEstimate):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != G.size:
        raise InvalidInput(f"Y shape {Y.shape} does not match graph size {G.size}")
    if est.lambda_inv_diag.shape != (Y.shape[1],):
        raise InvalidInput("volume estimate does not match the number of clusters")
    return Y


def _terms(Y, G, est, weight):
    """Shared pieces: B, L B, W B and the orthogonality residual."""
    c = est.lambda_inv_diag
    B = Y * c[None, :]
    LB = G.degrees[:, None] * B - G.affinity @ B
    WB = B if weight is None else weight[:, None] * B
    R = B.T @ WB - np.eye(B.shape[1])
    return B, LB, WB, R


def _breakdown(B, LB, R, gamma) -> LossBreakdown:
    lap = float(np.sum(B * LB))
    orth = float(np.sum(R * R))
    total = lap + 0.5 * gamma * orth
    if not np.isfinite(total):
        raise NumericalError("loss is not finite")
    return LossBreakdown(lap, orth, total, float(gamma))


def _grad(B, LB, WB, R, c, gamma) -> np.ndarray:
    # d lap / dB = 2 L B ; d orth / dB = 4 W B R ; then chain through B = Y diag(c)
    dB = 2.0 * LB + 2.0 * gamma * (WB @ R)
    g = dB * c[None, :]
    if not np.all(np.isfinite(g)):
        raise NumericalError("loss gradient is not finite")
    return g


def neuncut_loss(Y, G: AffinityGraph, vol: VolumeEstimate, gamma: float) -> LossBreakdown:
    Y = _check(Y, G, vol)
    B, LB, _, R = _terms(Y, G, vol, G.degrees)
    return _breakdown(B, LB, R, gamma)


def neuncut_loss_grad(Y, G: AffinityGraph, vol: VolumeEstimate, gamma: float) -> np.ndarray:
    Y = _check(Y, G, vol)
    B, LB, WB, R = _terms(Y, G, vol, G.degrees)
    return _grad(B, LB, WB, R, vol.lambda_inv_diag, gamma)


def neurcut_loss(Y, G: AffinityGraph, sizes: SizeEstimate, gamma: float) -> LossBreakdown:
    Y = _check(Y, G, sizes)
    B, LB, _, R = _terms(Y, G, sizes, None)
    return _breakdown(B, LB, R, gamma)


def neurcut_loss_grad(Y, G: AffinityGraph, sizes: SizeEstimate, gamma: float) -> np.ndarray:
    Y = _check(Y, G, sizes)
    B, LB, WB, R = _terms(Y, G, sizes, None)
    return _grad(B, LB, WB, R, sizes.lambda_inv_diag, gamma)


def loss_and_grad(objective: str, Y, G: AffinityGraph, gamma: float):
    """E-step then loss: estimate the scales from Y, return (breakdown, dLoss/dY, estimate)."""
    Y = np.asarray(Y, dtype=np.float64)
    if objective == "ncut":
        est = estimate_volumes(Y, G.degrees)
        weight = G.degrees
    elif objective == "rcut":
        est = estimate_sizes(Y)
        weight = None
    else:
        raise InvalidConfig(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    Y = _check(Y, G, est)
    B, LB, WB, R = _terms(Y, G, est, weight)
    return _breakdown(B, LB, R, gamma), _grad(B, LB, WB, R, est.lambda_inv_diag, gamma), est


def ncut_value(A, labels, k=None) -> float:
    """Combinatorial normalized cut: sum over clusters of cut / vol."""
    return _cut_ratio(A, labels, k, by_volume=True)


def rcut_value(A, labels, k=None) -> float:
    """Combinatorial ratio cut: sum over clusters of cut / |cluster|."""
    return _cut_ratio(A, labels, k, by_volume=False)


def _cut_ratio(A, labels, k, by_volume):
    A = np.asarray(A, dtype=np.float64)
    labels = np.asarray(labels)
    k = int(labels.max()) + 1 if k is None else k
    deg = A.sum(axis=1)
    total = 0.0
    for l in range(k):
        inside = labels == l
        if not inside.any():
            continue
        cut = A[np.ix_(inside, ~inside)].sum()
        total += cut / (deg[inside].sum() if by_volume else inside.sum())
    return float(total)

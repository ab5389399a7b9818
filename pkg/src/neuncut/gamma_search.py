"""Label-free choice of the orthogonality penalty weight.

A very large penalty drives L_orth to its lowest reachable value, which
serves as a bound. Walking down a descending grid, too small a penalty lets
the memberships collapse and L_orth stays well above that bound; the
selected value is the smallest grid value whose probe still reaches it.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .data import atomic_write_text, fmt_float
from .errors import InvalidConfig, SearchFailed
from .trainer import TrainConfig, train

DEFAULT_TAU = 0.05
# absolute slack on top of the relative one; the bound itself can be ~0 when
# the largest penalty yields (near) binary memberships
DEFAULT_ABS_TOL = 1e-3
# share of the full epoch budget per probe; shorter probes converge too slowly
# near the collapse threshold and push the selection upwards
DEFAULT_PROBE_FRACTION = 1.0


def default_grid(high: float = 1e6, low: float = 1e-3, ratio: float = math.sqrt(10.0)) -> list[float]:
    """Geometric grid from ``high`` down to ``low`` (inclusive up to rounding)."""
    if not (high > low > 0 and ratio > 1):
        raise InvalidConfig("grid needs high > low > 0 and ratio > 1")
    steps = int(math.floor(math.log(high / low) / math.log(ratio) + 1e-9))
    return [float(high / ratio**i) for i in range(steps + 1)]


@dataclass(frozen=True)
class GammaProbe:
    gamma: float
    optimal_lap: float
    optimal_orth: float


@dataclass
class SearchReport:
    probes: list[GammaProbe]
    bound: float
    tau: float
    abs_tol: float
    selected: float | None = None
    threshold: float = field(init=False)

    def __post_init__(self):
        self.threshold = self.bound * (1.0 + self.tau) + self.abs_tol

    def satisfies(self, p: GammaProbe) -> bool:
        return p.optimal_orth <= self.threshold

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gamma", "optimal_lap", "optimal_orth", "selected_flag"])
        for p in self.probes:
            w.writerow([fmt_float(p.gamma), fmt_float(p.optimal_lap), fmt_float(p.optimal_orth),
                        int(self.selected is not None and p.gamma == self.selected)])
        return buf.getvalue()

    def save_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())


def probe_config(cfg: TrainConfig, gamma: float, epoch_fraction: float = DEFAULT_PROBE_FRACTION) -> TrainConfig:
    if not 0 < epoch_fraction <= 1:
        raise InvalidConfig(f"epoch_fraction must be in (0, 1], got {epoch_fraction}")
    return cfg.with_(gamma=float(gamma), epochs=max(1, int(round(cfg.epochs * epoch_fraction))))


def probe(X, cfg: TrainConfig, gamma: float, epoch_fraction: float = DEFAULT_PROBE_FRACTION) -> GammaProbe:
    """Training run at ``gamma`` (a share of the epoch budget); minima of both loss terms over the run."""
    _, trainlog = train(X, probe_config(cfg, gamma, epoch_fraction), labels=None, track_metrics=False)
    return GammaProbe(float(gamma), float(trainlog.column("lap").min()),
                      float(trainlog.column("orth").min()))


def search(X, cfg: TrainConfig, grid=None, tau: float = DEFAULT_TAU, abs_tol: float = DEFAULT_ABS_TOL,
           epoch_fraction: float = DEFAULT_PROBE_FRACTION, progress=None) -> SearchReport:
    """Probe every grid value (descending) and pick the smallest one meeting the bound.

    Raises SearchFailed (carrying the report) when no grid value qualifies.
    """
    grid = default_grid() if grid is None else [float(g) for g in grid]
    if not grid:
        raise InvalidConfig("gamma grid is empty")
    if any(g <= 0 for g in grid):
        raise InvalidConfig("gamma grid values must be positive")
    if any(a <= b for a, b in zip(grid, grid[1:])):
        raise InvalidConfig("gamma grid must be strictly descending")
    if tau < 0 or abs_tol < 0:
        raise InvalidConfig("tolerances must be >= 0")

    probes = []
    for g in grid:
        p = probe(X, cfg, g, epoch_fraction)
        probes.append(p)
        if progress is not None:
            progress(p)
    report = SearchReport(probes, probes[0].optimal_orth, tau, abs_tol)
    ok = [p.gamma for p in probes if np.isfinite(p.optimal_orth) and report.satisfies(p)]
    if not ok:
        raise SearchFailed("no gamma in the grid reaches the orthogonality bound", report)
    report.selected = min(ok)
    return report

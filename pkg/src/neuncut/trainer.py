"""Mini-batch training of the membership network (EM-style alternation) and inference."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import model as mlp
from .data import BatchSampler, DataMatrix, atomic_write_text, fmt_float
from .errors import InvalidConfig, InvalidInput, NumericalError
from .graph import heat_kernel_affinity, sparsify_knn
from .loss import OBJECTIVES, loss_and_grad

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    k: int = 2
    gamma: float = 0.05
    lr0: float = 0.005
    weight_decay: float = 1e-4
    batch_size: int = 1000
    epochs: int = 150
    sigma: float = 3.0
    knn_s: int | None = None
    seed: int = 0
    objective: str = "ncut"
    hidden_dims: tuple[int, ...] = mlp.DEFAULT_HIDDEN
    self_loops: bool = False
    output_scale: float = mlp.DEFAULT_OUTPUT_SCALE
    standardize: bool = True
    restarts: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")
        if not self.gamma > 0:
            raise InvalidConfig(f"gamma must be positive, got {self.gamma}")
        if not self.lr0 > 0:
            raise InvalidConfig(f"lr0 must be positive, got {self.lr0}")
        if self.weight_decay < 0:
            raise InvalidConfig(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 2:
            raise InvalidConfig(f"batch_size must be >= 2, got {self.batch_size}")
        if self.restarts < 1:
            raise InvalidConfig(f"restarts must be >= 1, got {self.restarts}")
        if self.epochs < 1:
            raise InvalidConfig(f"epochs must be >= 1, got {self.epochs}")
        if not self.sigma > 0:
            raise InvalidConfig(f"sigma must be positive, got {self.sigma}")
        if self.knn_s is not None and self.knn_s < 1:
            raise InvalidConfig(f"knn_s must be >= 1, got {self.knn_s}")
        if self.objective not in OBJECTIVES:
            raise InvalidConfig(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if any(h < 1 for h in self.hidden_dims):
            raise InvalidConfig(f"hidden dims must be >= 1, got {self.hidden_dims}")

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------- optimizer

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0):
    """One bias-corrected Adam step with decoupled weight decay. Returns new arrays."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidInput("params, grads and optimizer state have different lengths")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise InvalidInput(f"param {i}: shape {p.shape} vs grad {g.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        mhat = state.m[i] / c1
        vhat = state.v[i] / c2
        p = p * (1.0 - lr * weight_decay)
        out.append(p - lr * mhat / (np.sqrt(vhat) + state.eps))
    return out


def cosine_lr(lr0: float, t: int, total: int) -> float:
    """Cosine annealing from lr0 (t = 0) to 0 (t = total)."""
    if total <= 0:
        return lr0
    return 0.5 * lr0 * (1.0 + math.cos(math.pi * t / total))


# ---------------------------------------------------------------- logging

LOG_COLUMNS = ("iter", "lap", "orth", "total", "lr")
METRIC_COLUMNS = ("acc", "nmi", "ari")


@dataclass
class TrainLog:
    records: list[dict] = field(default_factory=list)
    epoch_metrics: list[dict] = field(default_factory=list)
    checkpoint: dict | None = None

    def append(self, **rec):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.records])

    def to_csv(self) -> str:
        """One row per optimizer step; metric columns (from the epoch the step ended) when tracked."""
        with_metrics = bool(self.epoch_metrics)
        cols = LOG_COLUMNS + (METRIC_COLUMNS if with_metrics else ())
        by_iter = {m["iter"]: m for m in self.epoch_metrics}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.records:
            row = [str(r["iter"])] + [fmt_float(r[c]) for c in LOG_COLUMNS[1:]]
            if with_metrics:
                m = by_iter.get(r["iter"])
                row += [fmt_float(m[c]) if m else "" for c in METRIC_COLUMNS]
            w.writerow(row)
        return buf.getvalue()

    def save_csv(self, path) -> None:
        if not self.records:
            raise InvalidInput("training log is empty")
        atomic_write_text(path, self.to_csv())


# ---------------------------------------------------------------- training

def batch_graph(Xb, cfg: TrainConfig):
    G = heat_kernel_affinity(Xb, cfg.sigma, self_loops=cfg.self_loops)
    if cfg.knn_s is not None and cfg.knn_s < G.size - 1:
        G = sparsify_knn(G, cfg.knn_s)
    return G


def build_model(d: int, cfg: TrainConfig) -> mlp.MlpModel:
    model = mlp.init([d, *cfg.hidden_dims, cfg.k], seed=cfg.seed, output_scale=cfg.output_scale)
    model.meta.update(objective=cfg.objective, k=cfg.k, sigma=cfg.sigma, s=cfg.knn_s)
    return model


def total_iterations(n: int, cfg: TrainConfig) -> int:
    m = min(cfg.batch_size, n)
    return cfg.epochs * -(-n // m)


def input_transform(X, enabled=True):
    """Per-feature mean and standard deviation (constant features get scale 1)."""
    d = X.shape[1]
    if not enabled:
        return np.zeros(d), np.ones(d)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    return mu, np.where(sd > 0, sd, 1.0)


def restart_seed(seed: int, r: int) -> int:
    """Seed of restart ``r``; restart 0 keeps the configured seed."""
    if r == 0:
        return seed
    return int(np.random.SeedSequence([seed, r]).generate_state(1)[0])


def final_epoch_loss(trainlog: "TrainLog", steps_per_epoch: int) -> float:
    tail = trainlog.column("total")[-steps_per_epoch:]
    return float(tail.mean()) if len(tail) else math.inf


def train(X, cfg: TrainConfig, labels=None, checkpoint_path=None, track_metrics=None):
    """Fit the membership network on ``X``; returns (model, TrainLog).

    With ``cfg.restarts > 1`` the run is repeated from independently seeded
    initializations and the one with the lowest mean total loss over its last
    epoch is kept (no labels involved).

    Every step: draw a batch, build its heat-kernel graph (optionally kNN
    sparsified), run the network, estimate cluster volumes from that output,
    and take an Adam step on the loss with the volumes held fixed.

    The network sees standardized features (when ``cfg.standardize``); the
    transform is folded into the first layer of the returned model, so it
    takes raw features. Graphs are always built from raw features.
    """
    best = None
    for r in range(cfg.restarts):
        run_cfg = cfg.with_(seed=restart_seed(cfg.seed, r), restarts=1)
        model, trainlog = _train_once(X, run_cfg, labels, checkpoint_path, track_metrics)
        steps = BatchSampler(_n_rows(X), cfg.batch_size, seed=0).batches_per_epoch
        score = final_epoch_loss(trainlog, steps)
        log.debug("restart %d: final-epoch loss %.6g", r, score)
        if best is None or score < best[0]:
            best = (score, model, trainlog)
    _, model, trainlog = best
    if checkpoint_path is not None and cfg.restarts > 1:
        atomic_write_text(checkpoint_path, model.to_json())
    return model, trainlog


def _n_rows(X):
    return len(X.points) if isinstance(X, DataMatrix) else len(X)


def _train_once(X, cfg: TrainConfig, labels=None, checkpoint_path=None, track_metrics=None):
    if isinstance(X, DataMatrix):
        if labels is None:
            labels = X.labels
        X = X.points
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise InvalidInput("need at least two training points")
    if labels is not None:
        labels = np.asarray(labels)
    if track_metrics is None:
        track_metrics = labels is not None

    shift, scale = input_transform(X, cfg.standardize)
    Xn = (X - shift) / scale
    model = build_model(X.shape[1], cfg)

    def export():
        return mlp.fold_input_transform(model, shift, scale)

    params = model.params()
    state = AdamState.zeros_like(params)
    sampler = BatchSampler(n, cfg.batch_size, seed=cfg.seed)
    T = cfg.epochs * sampler.batches_per_epoch
    trainlog = TrainLog(checkpoint=export().to_dict())

    step = 0
    for epoch in range(cfg.epochs):
        for idx in sampler.epoch_batches():
            if len(idx) < 2:
                step += 1
                continue
            lr = cosine_lr(cfg.lr0, step, T)
            try:
                G = batch_graph(X[idx], cfg)
                tape = mlp.forward(model, Xn[idx])
                parts, dY, _ = loss_and_grad(cfg.objective, tape.Y, G, cfg.gamma)
                grads = mlp.backward(model, tape, dY)
                new_params = adam_step(params, grads, state, lr, cfg.weight_decay)
                if not all(np.all(np.isfinite(p)) for p in new_params):
                    raise NumericalError("parameters became non-finite")
            except NumericalError as exc:
                exc.checkpoint = trainlog.checkpoint
                raise
            params = new_params
            model.set_params(params)
            trainlog.append(iter=step, lap=parts.lap, orth=parts.orth, total=parts.total, lr=lr)
            step += 1

        current = export()
        trainlog.checkpoint = current.to_dict()
        if checkpoint_path is not None:
            atomic_write_text(checkpoint_path, current.to_json())
        if track_metrics and labels is not None:
            from .metrics import evaluate

            pred, _ = infer(model, Xn)
            scores = evaluate(pred, labels)
            trainlog.epoch_metrics.append({"epoch": epoch, "iter": step - 1, **scores})
        if trainlog.records:
            r = trainlog.records[-1]
            log.debug("epoch %d: lap=%.4g orth=%.4g total=%.4g", epoch, r["lap"], r["orth"], r["total"])
    return export(), trainlog


def infer(model: mlp.MlpModel, X, chunk: int = 65536):
    """Hard labels (row argmax, ties to the lowest index) and soft memberships."""
    if isinstance(X, DataMatrix):
        X = X.points
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.input_dim:
        raise InvalidInput(f"data has {X.shape[1]} columns, model expects {model.input_dim}")
    Y = np.vstack([mlp.forward(model, X[i:i + chunk]).Y for i in range(0, X.shape[0], chunk)])
    return np.argmax(Y, axis=1), Y


def config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["hidden_dims"] = list(cfg.hidden_dims)
    return d

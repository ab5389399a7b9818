"""ReLU MLP with a softmax head and hand-written reverse-mode gradients."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, InvalidInput, NumericalError, ParseError

FORMAT_VERSION = 1
DEFAULT_HIDDEN = (512, 512)


@dataclass
class MlpModel:
    """Layer ``l`` maps ``h @ weights[l] + biases[l]``; weights have shape (fan_in, fan_out)."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_clusters(self) -> int:
        return self.layer_dims[-1]

    def params(self) -> list[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...] (views, not copies)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def set_params(self, params) -> None:
        self.weights = [np.asarray(p, dtype=np.float64) for p in params[0::2]]
        self.biases = [np.asarray(p, dtype=np.float64) for p in params[1::2]]

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_dims),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.seed,
            dict(self.meta),
        )

    # serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "format_version": FORMAT_VERSION,
            "layer_dims": [int(x) for x in self.layer_dims],
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        for key in ("objective", "k", "sigma", "s"):
            d[key] = self.meta.get(key)
        d["k"] = int(self.n_clusters)
        return d

    def to_json(self) -> str:
        # json writes floats with repr(), which round-trips float64 exactly
        return json.dumps(self.to_dict(), indent=None, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"unsupported model format_version {d.get('format_version')!r}")
        dims = [int(x) for x in d["layer_dims"]]
        if len(d["weights"]) != len(dims) - 1 or len(d["biases"]) != len(dims) - 1:
            raise ParseError("layer count does not match layer_dims")
        weights = [np.asarray(W, dtype=np.float64).reshape(dims[i], dims[i + 1])
                   for i, W in enumerate(d["weights"])]
        biases = [np.asarray(b, dtype=np.float64).reshape(dims[i + 1])
                  for i, b in enumerate(d["biases"])]
        meta = {key: d.get(key) for key in ("objective", "k", "sigma", "s")}
        return cls(dims, weights, biases, None, meta)

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid model JSON: {exc}") from None
        return cls.from_dict(d)


DEFAULT_OUTPUT_SCALE = 0.01


def init(layer_dims, seed: int = 0, output_scale: float = DEFAULT_OUTPUT_SCALE) -> MlpModel:
    """He-normal weights (variance 2 / fan_in) and zero biases.

    The output layer is additionally multiplied by ``output_scale`` so the
    initial softmax is close to uniform; at the He scale the random initial
    logits already commit most points to one side of an arbitrary split.
    """
    dims = [int(x) for x in layer_dims]
    if len(dims) < 2:
        raise InvalidConfig(f"need at least input and output dims, got {layer_dims}")
    if any(x < 1 for x in dims):
        raise InvalidConfig(f"layer dims must be >= 1, got {layer_dims}")
    rng = np.random.default_rng(seed)
    if not output_scale > 0:
        raise InvalidConfig(f"output_scale must be positive, got {output_scale}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    weights[-1] *= output_scale
    return MlpModel(dims, weights, biases, seed)


def fold_input_transform(model: MlpModel, shift, scale) -> MlpModel:
    """Model equivalent to ``model`` applied to ``(x - shift) / scale``, taking raw ``x``."""
    shift = np.asarray(shift, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    out = model.copy()
    W0 = model.weights[0] / scale[:, None]
    out.weights[0] = W0
    out.biases[0] = model.biases[0] - shift @ W0
    return out


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


@dataclass
class ForwardTape:
    inputs: np.ndarray
    pre: list[np.ndarray]   # pre-activation of every layer, last one = logits
    acts: list[np.ndarray]  # ReLU outputs of hidden layers
    Y: np.ndarray

    @property
    def logits(self) -> np.ndarray:
        return self.pre[-1]


def forward(model: MlpModel, X) -> ForwardTape:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.input_dim:
        raise InvalidInput(f"input has {X.shape[1]} columns, model expects {model.input_dim}")
    pre, acts = [], []
    h = X
    last = len(model.weights) - 1
    with np.errstate(over="ignore", invalid="ignore"):  # reported below as NumericalError
        for i, (W, b) in enumerate(zip(model.weights, model.biases)):
            z = h @ W + b
            pre.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
                acts.append(h)
    if not np.all(np.isfinite(pre[-1])):
        raise NumericalError("non-finite logits in forward pass")
    return ForwardTape(X, pre, acts, softmax(pre[-1]))


def backward(model: MlpModel, tape: ForwardTape, dY) -> list[np.ndarray]:
    """Gradient of a scalar loss w.r.t. [W0, b0, W1, b1, ...] given dLoss/dY."""
    dY = np.asarray(dY, dtype=np.float64)
    if dY.shape != tape.Y.shape:
        raise InvalidInput(f"dY shape {dY.shape} != output shape {tape.Y.shape}")
    Y = tape.Y
    # softmax Jacobian-vector product
    dz = Y * (dY - (dY * Y).sum(axis=1, keepdims=True))
    grads = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        h = tape.inputs if i == 0 else tape.acts[i - 1]
        grads[2 * i] = h.T @ dz
        grads[2 * i + 1] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ model.weights[i].T
            dz = dh * (tape.pre[i - 1] > 0)
    return grads

"""Numpy classifiers trained from scratch.

Two architectures share one training loop:

* :class:`MlpParams` -- ``input -> hidden (relu) -> classes``, used over
  embeddings.
* :class:`ConvNetParams` -- a 3x3 stem followed by residual blocks (two 3x3
  convs plus a parameter-free shortcut), global average pooling and a linear
  head, used over rasters. When a block widens the channels it also strides
  by 2; its shortcut subsamples and zero-pads the new channels.

Everything is float64 so finite-difference checks are meaningful.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    BadDimension,
    EmptyDataset,
    LabelOutOfRange,
    NonFiniteInput,
    ShapeMismatch,
)

ACTIVATIONS = ("relu", "identity")


# -- parameters --------------------------------------------------------------


@dataclass(eq=False)
class MlpParams:
    W1: np.ndarray  # [hidden x input]
    b1: np.ndarray
    W2: np.ndarray  # [classes x hidden]
    b2: np.ndarray
    activation: str = "relu"
    init_seed: int | None = None

    def __post_init__(self):
        self.W1, self.b1, self.W2, self.b2 = (
            np.asarray(a, dtype=np.float64) for a in (self.W1, self.b1, self.W2, self.b2)
        )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        h, d = self.W1.shape
        c, h2 = self.W2.shape
        if self.b1.shape != (h,) or h2 != h or self.b2.shape != (c,):
            raise ShapeMismatch("inconsistent MLP parameter shapes")

    kind = "mlp"

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (self.W1.shape[1],)

    @property
    def n_classes(self) -> int:
        return self.W2.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "MlpParams":
        return MlpParams(arrays["W1"], arrays["b1"], arrays["W2"], arrays["b2"], self.activation, self.init_seed)

    def architecture(self) -> dict:
        return {
            "kind": "mlp",
            "input_dim": int(self.W1.shape[1]),
            "hidden_dim": int(self.W1.shape[0]),
            "n_classes": int(self.n_classes),
            "activation": self.activation,
        }


@dataclass(frozen=True)
class ConvNetConfig:
    stem_channels: int = 16
    block_channels: tuple[int, ...] = (16, 32, 64)
    resolution: int = 64
    in_channels: int = 3
    n_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "block_channels", tuple(int(c) for c in self.block_channels))
        if len(self.block_channels) < 1:
            raise BadDimension("a conv net needs at least one residual block")
        if min(self.stem_channels, self.resolution, self.in_channels, self.n_classes, *self.block_channels) < 1:
            raise BadDimension("conv net dimensions must be positive")

    def strides(self) -> list[int]:
        out, prev = [], self.stem_channels
        for c in self.block_channels:
            if c < prev:
                raise BadDimension("residual blocks may not narrow the channel count")
            out.append(2 if c > prev else 1)
            prev = c
        return out


CONV_PRESETS = {
    "desk": ConvNetConfig(),
    "resnet18": ConvNetConfig(64, (64, 64, 128, 128, 256, 256, 512, 512), 256),
}


@dataclass(eq=False)
class ConvNetParams:
    config: ConvNetConfig
    params: dict[str, np.ndarray]
    init_seed: int | None = None

    kind = "conv"

    def __post_init__(self):
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in self.params.items()}
        expected = _conv_shapes(self.config)
        if set(expected) != set(self.params):
            raise ShapeMismatch("conv parameter names do not match the configuration")
        for k, shape in expected.items():
            if self.params[k].shape != shape:
                raise ShapeMismatch(f"{k}: shape {self.params[k].shape}, expected {shape}")

    @property
    def input_shape(self) -> tuple[int, ...]:
        r = self.config.resolution
        return (self.config.in_channels, r, r)

    @property
    def n_classes(self) -> int:
        return self.config.n_classes

    def arrays(self) -> dict[str, np.ndarray]:
        return dict(self.params)

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "ConvNetParams":
        return ConvNetParams(self.config, dict(arrays), self.init_seed)

    def architecture(self) -> dict:
        d = asdict(self.config)
        d["block_channels"] = list(d["block_channels"])
        return {"kind": "conv", **d}


def _conv_shapes(cfg: ConvNetConfig) -> dict[str, tuple[int, ...]]:
    shapes = {
        "stem.w": (cfg.stem_channels, cfg.in_channels, 3, 3),
        "stem.b": (cfg.stem_channels,),
    }
    prev = cfg.stem_channels
    for i, c in enumerate(cfg.block_channels):
        shapes[f"block{i}.conv1.w"] = (c, prev, 3, 3)
        shapes[f"block{i}.conv1.b"] = (c,)
        shapes[f"block{i}.conv2.w"] = (c, c, 3, 3)
        shapes[f"block{i}.conv2.b"] = (c,)
        prev = c
    shapes["head.w"] = (cfg.n_classes, prev)
    shapes["head.b"] = (cfg.n_classes,)
    return shapes


def init_mlp(input_dim: int, hidden_dim: int, n_classes: int, seed: int, activation: str = "relu") -> MlpParams:
    """He-normal weights from ``seed``; biases start at exactly zero."""
    for name, v in (("input_dim", input_dim), ("hidden_dim", hidden_dim), ("n_classes", n_classes)):
        if int(v) != v or v < 1:
            raise BadDimension(f"{name} must be a positive integer, got {v}")
    rng = np.random.default_rng(seed)
    W1 = rng.standard_normal((hidden_dim, input_dim)) * np.sqrt(2.0 / input_dim)
    W2 = rng.standard_normal((n_classes, hidden_dim)) * np.sqrt(1.0 / hidden_dim)
    return MlpParams(W1, np.zeros(hidden_dim), W2, np.zeros(n_classes), activation, seed)


def init_convnet(config: ConvNetConfig, seed: int) -> ConvNetParams:
    config.strides()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in _conv_shapes(config).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif name == "head.w":
            params[name] = rng.standard_normal(shape) * np.sqrt(1.0 / shape[1])
        else:
            fan_in = shape[1] * 9
            scale = np.sqrt(2.0 / fan_in)
            # keep the residual branch small so activations stay bounded without normalisation
            if name.endswith("conv2.w"):
                scale *= 0.5
            params[name] = rng.standard_normal(shape) * scale
    return ConvNetParams(config, params, seed)


# -- numerics ----------------------------------------------------------------


def softmax(logits) -> np.ndarray:
    """Max-subtracted softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("softmax of non-finite logits")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def cross_entropy(logits, labels) -> float:
    """Mean negative log-likelihood of integer ``labels``."""
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels))
    return float(-log_softmax(z)[np.arange(len(y)), y].mean())


def _act(a: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(a, 0.0) if activation == "relu" else a


def _act_grad(a: np.ndarray, activation: str) -> np.ndarray:
    return (a > 0).astype(np.float64) if activation == "relu" else np.ones_like(a)


# conv helpers: x is [N, C, H, W], weights [Cout, Cin, 3, 3], padding 1


def _im2col(x: np.ndarray, stride: int) -> tuple[np.ndarray, tuple[int, int]]:
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # [N, C, Ho, Wo, 3, 3]
    n, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * 9)
    return cols, (ho, wo)


def _conv_forward(x, w, b, stride):
    cols, (ho, wo) = _im2col(x, stride)
    out = cols @ w.reshape(w.shape[0], -1).T + b
    out = out.reshape(x.shape[0], ho, wo, w.shape[0]).transpose(0, 3, 1, 2)
    return out, cols


def _conv_backward(dout, cols, x_shape, w, stride):
    n, cout, ho, wo = dout.shape
    dflat = dout.transpose(0, 2, 3, 1).reshape(-1, cout)
    dw = (dflat.T @ cols).reshape(w.shape)
    db = dflat.sum(axis=0)
    dcols = (dflat @ w.reshape(cout, -1)).reshape(n, ho, wo, x_shape[1], 3, 3)
    dxp = np.zeros((n, x_shape[1], x_shape[2] + 2, x_shape[3] + 2))
    for ki in range(3):
        for kj in range(3):
            dxp[:, :, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride] += dcols[
                :, :, :, :, ki, kj
            ].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def _shortcut(x, cout, stride):
    s = x[:, :, ::stride, ::stride]
    if s.shape[1] < cout:
        s = np.pad(s, ((0, 0), (0, cout - s.shape[1]), (0, 0), (0, 0)))
    return s


def _as_batch(params, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    shape = params.input_shape
    if x.shape == shape:
        return x[None], True
    if x.ndim == len(shape) + 1 and x.shape[1:] == shape:
        return x, False
    raise ShapeMismatch(f"input shape {x.shape} does not match model input {shape}")


def _mlp_forward(p: MlpParams, X, cache=False):
    a1 = X @ p.W1.T + p.b1
    h = _act(a1, p.activation)
    z = h @ p.W2.T + p.b2
    return (z, (X, a1, h)) if cache else z


def _mlp_backward(p: MlpParams, dz, cache):
    X, a1, h = cache
    g = {"W2": dz.T @ h, "b2": dz.sum(axis=0)}
    dh = (dz @ p.W2) * _act_grad(a1, p.activation)
    g["W1"] = dh.T @ X
    g["b1"] = dh.sum(axis=0)
    return g


def _conv_net_forward(p: ConvNetParams, X, cache=False):
    P = p.params
    caches = []
    a, cols = _conv_forward(X, P["stem.w"], P["stem.b"], 1)
    h = np.maximum(a, 0.0)
    caches.append(("stem", X.shape, cols, a))
    for i, stride in enumerate(p.config.strides()):
        c = P[f"block{i}.conv1.w"].shape[0]
        a1, cols1 = _conv_forward(h, P[f"block{i}.conv1.w"], P[f"block{i}.conv1.b"], stride)
        h1 = np.maximum(a1, 0.0)
        a2, cols2 = _conv_forward(h1, P[f"block{i}.conv2.w"], P[f"block{i}.conv2.b"], 1)
        pre = a2 + _shortcut(h, c, stride)
        caches.append((f"block{i}", h.shape, stride, cols1, a1, h1.shape, cols2, pre))
        h = np.maximum(pre, 0.0)
    pooled = h.mean(axis=(2, 3))
    z = pooled @ P["head.w"].T + P["head.b"]
    if cache:
        return z, (caches, h.shape, pooled)
    return z


def _conv_net_backward(p: ConvNetParams, dz, cache):
    P = p.params
    caches, hshape, pooled = cache
    g = {"head.w": dz.T @ pooled, "head.b": dz.sum(axis=0)}
    dpooled = dz @ P["head.w"]
    dh = np.broadcast_to(dpooled[:, :, None, None] / (hshape[2] * hshape[3]), hshape).copy()
    for entry in reversed(caches[1:]):
        name, in_shape, stride, cols1, a1, h1_shape, cols2, pre = entry
        dpre = dh * (pre > 0)
        dh1, g[f"{name}.conv2.w"], g[f"{name}.conv2.b"] = _conv_backward(
            dpre, cols2, h1_shape, P[f"{name}.conv2.w"], 1
        )
        da1 = dh1 * (a1 > 0)
        dx, g[f"{name}.conv1.w"], g[f"{name}.conv1.b"] = _conv_backward(
            da1, cols1, in_shape, P[f"{name}.conv1.w"], stride
        )
        cin = in_shape[1]
        dx[:, :, ::stride, ::stride] += dpre[:, :cin]
        dh = dx
    _, x_shape, cols, a = caches[0]
    da = dh * (a > 0)
    _, g["stem.w"], g["stem.b"] = _conv_backward(da, cols, x_shape, P["stem.w"], 1)
    return g


def forward(params, x) -> np.ndarray:
    """Logits for one input (vector or ``C x H x W`` raster) or a batch."""
    X, single = _as_batch(params, x)
    z = _mlp_forward(params, X) if params.kind == "mlp" else _conv_net_forward(params, X)
    return z[0] if single else z


def loss_and_grad(params, X, y) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its gradient for every array."""
    X, _ = _as_batch(params, X)
    y = np.asarray(y, dtype=np.int64)
    if params.kind == "mlp":
        z, cache = _mlp_forward(params, X, cache=True)
    else:
        z, cache = _conv_net_forward(params, X, cache=True)
    n = len(y)
    lp = log_softmax(z)
    loss = float(-lp[np.arange(n), y].mean())
    dz = np.exp(lp)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    if params.kind == "mlp":
        grads = _mlp_backward(params, dz, cache)
    else:
        grads = _conv_net_backward(params, dz, cache)
    return loss, grads


def predict(params, x) -> tuple[int, float]:
    """Argmax class (ties go to the lowest index) and its softmax probability."""
    probs = softmax(forward(params, x))
    if probs.ndim != 1:
        raise ShapeMismatch("predict takes a single input; use predict_proba for batches")
    k = int(np.argmax(probs))
    return k, float(probs[k])


def predict_proba(params, X, batch_size: int = 256) -> np.ndarray:
    X, _ = _as_batch(params, X)
    if len(X) == 0:
        return np.zeros((0, params.n_classes))
    return np.concatenate([softmax(forward(params, X[i : i + batch_size])) for i in range(0, len(X), batch_size)])


# -- gradient verification ---------------------------------------------------


def preactivations(params, X) -> np.ndarray:
    """Every ReLU input for batch ``X``, flattened (empty for identity MLPs)."""
    return _forward_with_preacts(params, X)[1]


def _forward_with_preacts(params, X) -> tuple[np.ndarray, np.ndarray]:
    X, _ = _as_batch(params, X)
    if params.kind == "mlp":
        a = X @ params.W1.T + params.b1
        z = _act(a, params.activation) @ params.W2.T + params.b2
        pre = a.ravel() if params.activation == "relu" else np.zeros(0)
        return z, pre
    z, (caches, _, _) = _conv_net_forward(params, X, cache=True)
    parts = [caches[0][3].ravel()]
    for entry in caches[1:]:
        parts.append(entry[4].ravel())
        parts.append(entry[7].ravel())
    return z, np.concatenate(parts)


@dataclass(frozen=True)
class GradientCheckResult:
    max_rel_error: float
    n_checked: int
    n_skipped: int  # coordinates whose perturbation flipped a ReLU


def gradient_check_detail(
    params,
    X,
    y,
    epsilon: float = 1e-5,
    *,
    max_per_array: int | None = None,
    seed: int = 0,
    floor: float = 1e-7,
    skip_kinks: bool = False,
) -> GradientCheckResult:
    """Compare backprop with central differences coordinate by coordinate.

    Relative error per coordinate is ``|a - n| / max(|a|, |n|, floor)``. By
    default every coordinate is perturbed; ``max_per_array`` samples that many
    coordinates per array instead (seeded), for nets too large to sweep.
    With ``skip_kinks`` a coordinate is left out when either perturbation
    changes the on/off state of some ReLU, since the loss is not
    differentiable across that interval.
    """
    if not 0 < epsilon <= 1e-2:
        raise ValueError("epsilon must lie in (0, 1e-2]")
    X, _ = _as_batch(params, X)
    _, grads = loss_and_grad(params, X, y)
    base_on = preactivations(params, X) > 0
    arrays = {k: v.copy() for k, v in params.arrays().items()}
    rng = np.random.default_rng(seed)
    worst, checked, skipped = 0.0, 0, 0

    def loss_at():
        z, pre = _forward_with_preacts(params.with_arrays(arrays), X)
        return cross_entropy(z, y), np.array_equal(pre > 0, base_on)

    for name, arr in arrays.items():
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_array is not None and flat.size > max_per_array:
            idx = np.sort(rng.choice(flat.size, max_per_array, replace=False))
        analytic = grads[name].reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + epsilon
            lp, same_p = loss_at()
            flat[i] = orig - epsilon
            lm, same_m = loss_at()
            flat[i] = orig
            if skip_kinks and not (same_p and same_m):
                skipped += 1
                continue
            num = (lp - lm) / (2 * epsilon)
            a = analytic[i]
            worst = max(worst, abs(a - num) / max(abs(a), abs(num), floor))
            checked += 1
    return GradientCheckResult(worst, checked, skipped)


def gradient_check(params, X, y, epsilon: float = 1e-5, **kwargs) -> float:
    """Worst relative error between backprop and central differences."""
    return gradient_check_detail(params, X, y, epsilon, **kwargs).max_rel_error


def jitter_batch(X, seed: int, scale: float = 1e-2) -> np.ndarray:
    """Seeded small perturbation that moves inputs off exact ReLU kinks."""
    rng = np.random.default_rng(seed)
    X = np.asarray(X, dtype=np.float64)
    return X + scale * rng.standard_normal(X.shape)


# -- training ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.loss != "cross_entropy":
            raise ValueError("only cross_entropy loss is supported")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    holdout_loss: list[float] = field(default_factory=list)
    holdout_accuracy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_arrays(params, X, y) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) over a labelled set."""
    probs = predict_proba(params, X)
    y = np.asarray(y)
    loss = float(-np.log(np.clip(probs[np.arange(len(y)), y], 1e-300, None)).mean())
    acc = float((probs.argmax(axis=1) == y).mean())
    return loss, acc


def train(params, X, y, config: TrainConfig, holdout=None):
    """Mini-batch SGD with momentum on mean cross-entropy.

    Data order is shuffled each epoch from ``config.seed``; the run is a pure
    function of ``(params, X, y, config)``. ``holdout`` is an optional
    ``(X, y)`` pair evaluated after every epoch. Returns ``(params', history)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyDataset("training set is empty")
    _as_batch(params, X)
    if len(X) != len(y):
        raise ShapeMismatch("features and labels differ in length")
    if y.min() < 0 or y.max() >= params.n_classes:
        raise LabelOutOfRange(f"labels must lie in [0, {params.n_classes - 1}]")
    arrays = {k: v.copy() for k, v in params.arrays().items()}
    velocity = {k: np.zeros_like(v) for k, v in arrays.items()}
    rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    n = len(y)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total_loss, correct = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            current = params.with_arrays(arrays)
            loss, grads = loss_and_grad(current, X[idx], y[idx])
            total_loss += loss * len(idx)
            correct += int((forward(current, X[idx]).argmax(axis=1) == y[idx]).sum())
            for k in arrays:
                velocity[k] = config.momentum * velocity[k] - config.learning_rate * grads[k]
                arrays[k] = arrays[k] + velocity[k]
        history.train_loss.append(total_loss / n)
        history.train_accuracy.append(correct / n)
        if holdout is not None and len(holdout[1]):
            hl, ha = evaluate_arrays(params.with_arrays(arrays), *holdout)
            history.holdout_loss.append(hl)
            history.holdout_accuracy.append(ha)
    return params.with_arrays(arrays), history


# -- persistence helpers -----------------------------------------------------


def params_digest(params) -> str:
    h = hashlib.sha256(json.dumps(params.architecture(), sort_keys=True).encode())
    for name, arr in sorted(params.arrays().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()


def params_to_dict(params) -> dict:
    return {
        "architecture": params.architecture(),
        "init_seed": params.init_seed,
        "arrays": {
            name: {"shape": list(arr.shape), "values": [float(v) for v in arr.reshape(-1)]}
            for name, arr in sorted(params.arrays().items())
        },
    }


def params_from_dict(d: dict):
    arch = dict(d["architecture"])
    arrays = {k: np.array(v["values"], dtype=np.float64).reshape(v["shape"]) for k, v in d["arrays"].items()}
    kind = arch.pop("kind")
    if kind == "mlp":
        return MlpParams(arrays["W1"], arrays["b1"], arrays["W2"], arrays["b2"], arch["activation"], d.get("init_seed"))
    if kind == "conv":
        cfg = ConvNetConfig(
            arch["stem_channels"], tuple(arch["block_channels"]), arch["resolution"], arch["in_channels"], arch["n_classes"]
        )
        return ConvNetParams(cfg, arrays, d.get("init_seed"))
    raise ValueError(f"unknown architecture kind {kind!r}")

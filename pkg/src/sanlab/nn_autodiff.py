"""Minimal reverse-mode network kit: cyclic-conv / dense / pointwise layers,
hinge losses, Adam and SGD updates, far-field slopes of two-layer ReLU nets,
and directory checkpoints of `.sant` tensors.

Layers expose forward(x), backward(cached_input, grad_out) -> (grad_in,
param_grads), and params(). A Model chains layers, validates shapes at
construction, and caches per-layer inputs on forward so backward is exact
reverse mode. All computation is float64; ReLU takes subgradient 0 at 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor_core import (
    DimensionError,
    KernelBank,
    cyclic_conv_batch,
    load_sant,
    save_sant,
)

# signatures are ("image", channels, height, width) or ("vector", width)


def _check_signature(sig) -> tuple:
    if not isinstance(sig, tuple) or not sig:
        raise DimensionError(f"bad signature {sig!r}")
    if sig[0] == "image" and len(sig) == 4 and all(int(d) >= 1 for d in sig[1:]):
        return ("image", int(sig[1]), int(sig[2]), int(sig[3]))
    if sig[0] == "vector" and len(sig) == 2 and int(sig[1]) >= 1:
        return ("vector", int(sig[1]))
    raise DimensionError(f"bad signature {sig!r}")


class ConvCyclic:
    """Stride-1 multi-channel convolution with wrap-around padding."""

    kind = "conv_cyclic"

    def __init__(self, kernels: KernelBank, bias):
        self.kernels = kernels
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.bias.shape != (kernels.out_channels,):
            raise DimensionError(
                f"bias shape {self.bias.shape} != ({kernels.out_channels},)"
            )

    def output_signature(self, sig):
        tag, *dims = _check_signature(sig)
        if tag != "image":
            raise DimensionError("conv layer needs an image input")
        n, h, w = dims
        k = self.kernels
        if k.in_channels != n:
            raise DimensionError(f"conv expects {k.in_channels} channels, got {n}")
        if k.kernel_height > h or k.kernel_width > w:
            raise DimensionError(
                f"kernel {k.kernel_height}x{k.kernel_width} larger than plane {h}x{w}"
            )
        return ("image", k.out_channels, h, w)

    def forward(self, x):
        return cyclic_conv_batch(self.kernels.data, x) + self.bias[None, :, None, None]

    def backward(self, x, gy):
        w = self.kernels.data
        m, n, kh, kw = w.shape
        gw = np.empty_like(w)
        gx = np.zeros_like(x)
        for p in range(kh):
            for q in range(kw):
                xs = np.roll(x, (p, q), axis=(2, 3))
                gw[:, :, p, q] = np.einsum("bihw,bjhw->ij", gy, xs, optimize=True)
                gys = np.roll(gy, (-p, -q), axis=(2, 3))
                gx += np.einsum("ij,bihw->bjhw", w[:, :, p, q], gys, optimize=True)
        gb = gy.sum(axis=(0, 2, 3))
        return gx, [gw, gb]

    def params(self):
        return [self.kernels.data, self.bias]

    def manifest(self):
        return {"kind": self.kind, "params": ["kernels", "bias"]}


class Dense:
    """Affine layer y = x @ W^T + b with W of shape [out, in]."""

    kind = "dense"

    def __init__(self, weights, bias):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise DimensionError("dense weights must be 2-D")
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"bias shape {self.bias.shape} != ({self.weights.shape[0]},)"
            )

    def output_signature(self, sig):
        tag, *dims = _check_signature(sig)
        if tag != "vector" or dims[0] != self.weights.shape[1]:
            raise DimensionError(
                f"dense expects vector({self.weights.shape[1]}), got {sig}"
            )
        return ("vector", self.weights.shape[0])

    def forward(self, x):
        return x @ self.weights.T + self.bias

    def backward(self, x, gy):
        gx = gy @ self.weights
        gw = gy.T @ x
        gb = gy.sum(axis=0)
        return gx, [gw, gb]

    def params(self):
        return [self.weights, self.bias]

    def manifest(self):
        return {"kind": self.kind, "params": ["weights", "bias"]}


class _Pointwise:
    def output_signature(self, sig):
        return _check_signature(sig)

    def params(self):
        return []

    def manifest(self):
        return {"kind": self.kind, "params": []}


class ReLU(_Pointwise):
    kind = "relu"

    def forward(self, x):
        return np.maximum(x, 0.0)

    def backward(self, x, gy):
        return gy * (x > 0), []


class LeakyReLU(_Pointwise):
    kind = "leaky_relu"

    def __init__(self, slope: float = 0.1):
        if not (0.0 < slope < 1.0):
            raise ValueError("slope must be in (0, 1)")
        self.slope = float(slope)

    def forward(self, x):
        return np.where(x > 0, x, self.slope * x)

    def backward(self, x, gy):
        return gy * np.where(x > 0, 1.0, self.slope), []

    def manifest(self):
        return {"kind": self.kind, "params": [], "slope": self.slope}


class Scale(_Pointwise):
    """Fixed output gain, no learnable parameters.

    Stacked small-uniform-init layers shrink activation magnitude at
    every stage, so a generator built from them starts as a near-point
    cloud; a constant gain restores an O(1) initial output spread
    without touching the per-layer weight initialization.
    """

    kind = "scale"

    def __init__(self, factor: float):
        if not np.isfinite(factor) or factor == 0.0:
            raise ValueError("scale factor must be finite and nonzero")
        self.factor = float(factor)

    def forward(self, x):
        return self.factor * x

    def backward(self, x, gy):
        return self.factor * gy, []

    def manifest(self):
        return {"kind": self.kind, "params": [], "factor": self.factor}


class Tanh(_Pointwise):
    kind = "tanh"

    def forward(self, x):
        return np.tanh(x)

    def backward(self, x, gy):
        t = np.tanh(x)
        return gy * (1.0 - t * t), []


class SpatialMean:
    """Global average over the spatial grid: [B, n, H, W] -> [B, n]."""

    kind = "spatial_mean"

    def output_signature(self, sig):
        tag, *dims = _check_signature(sig)
        if tag != "image":
            raise DimensionError("spatial mean needs an image input")
        return ("vector", dims[0])

    def forward(self, x):
        return x.mean(axis=(2, 3))

    def backward(self, x, gy):
        h, w = x.shape[2], x.shape[3]
        gx = np.broadcast_to(gy[:, :, None, None], x.shape) / (h * w)
        return gx, []

    def params(self):
        return []

    def manifest(self):
        return {"kind": self.kind, "params": []}


class Reshape:
    """[B, c*h*w] -> [B, c, h, w]; the latent-to-image adapter."""

    kind = "reshape"

    def __init__(self, channels: int, height: int, width: int):
        if min(channels, height, width) < 1:
            raise DimensionError("reshape dims must be >= 1")
        self.shape = (int(channels), int(height), int(width))

    def output_signature(self, sig):
        tag, *dims = _check_signature(sig)
        c, h, w = self.shape
        if tag != "vector" or dims[0] != c * h * w:
            raise DimensionError(f"reshape expects vector({c * h * w}), got {sig}")
        return ("image", c, h, w)

    def forward(self, x):
        return x.reshape(x.shape[0], *self.shape)

    def backward(self, x, gy):
        return gy.reshape(x.shape[0], -1), []

    def params(self):
        return []

    def manifest(self):
        return {"kind": self.kind, "params": [], "shape": list(self.shape)}


class Model:
    """An ordered layer stack with a fixed input signature."""

    def __init__(self, layers, input_signature):
        self.layers = list(layers)
        self.input_signature = _check_signature(input_signature)
        sigs = [self.input_signature]
        for layer in self.layers:
            sigs.append(layer.output_signature(sigs[-1]))
        # signatures[i] is the input signature of layer i
        self.signatures = sigs

    @property
    def output_signature(self):
        return self.signatures[-1]

    def forward(self, x):
        """Returns (output, cache); cache holds each layer's input."""
        x = np.asarray(x, dtype=np.float64)
        expected = self.input_signature[1:]
        if x.shape[1:] != tuple(expected):
            raise DimensionError(
                f"batch shape {x.shape} does not match signature {self.input_signature}"
            )
        cache = []
        for layer in self.layers:
            cache.append(x)
            x = layer.forward(x)
        return x, cache

    def backward(self, cache, grad_out):
        """Returns (param_grads, grad_in); param_grads aligns with parameters()."""
        if len(cache) != len(self.layers):
            raise DimensionError("cache does not match layer count")
        gy = np.asarray(grad_out, dtype=np.float64)
        per_layer = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            gy, grads = self.layers[i].backward(cache[i], gy)
            per_layer[i] = grads
        flat = [g for grads in per_layer for g in grads]
        return flat, gy

    def parameters(self):
        return [p for layer in self.layers for p in layer.params()]


# ---------------------------------------------------------------------------
# initializers
# ---------------------------------------------------------------------------

def init_conv(in_channels: int, out_channels: int, kh: int, kw: int,
              rng: np.random.Generator) -> ConvCyclic:
    """Uniform(-s, s) kernels with s = 1/sqrt(fan_in), zero bias."""
    s = 1.0 / np.sqrt(in_channels * kh * kw)
    w = rng.uniform(-s, s, size=(out_channels, in_channels, kh, kw))
    return ConvCyclic(KernelBank(w), np.zeros(out_channels))


def init_dense(in_width: int, out_width: int, rng: np.random.Generator) -> Dense:
    s = 1.0 / np.sqrt(in_width)
    return Dense(rng.uniform(-s, s, size=(out_width, in_width)), np.zeros(out_width))


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _scores(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("empty score batch")
    return arr


def hinge_critic_loss(real_scores, fake_scores) -> float:
    """mean(max(0, 1 - real)) + mean(max(0, 1 + fake))."""
    r = _scores(real_scores)
    f = _scores(fake_scores)
    return float(np.maximum(0.0, 1.0 - r).mean() + np.maximum(0.0, 1.0 + f).mean())


def hinge_critic_loss_grad(real_scores, fake_scores):
    """Gradients w.r.t. the score vectors; the hinge kink takes subgradient 0."""
    r = _scores(real_scores)
    f = _scores(fake_scores)
    gr = -(1.0 - r > 0).astype(np.float64) / r.size
    gf = (1.0 + f > 0).astype(np.float64) / f.size
    return gr, gf


def generator_loss(fake_scores) -> float:
    """-mean(fake)."""
    return float(-_scores(fake_scores).mean())


def generator_loss_grad(fake_scores) -> np.ndarray:
    f = _scores(fake_scores)
    return np.full(f.size, -1.0 / f.size)


def mse_loss(pred, target) -> float:
    p = _scores(pred)
    t = _scores(target)
    if p.size != t.size:
        raise DimensionError("pred/target size mismatch")
    d = p - t
    return float((d * d).mean())


def mse_loss_grad(pred, target) -> np.ndarray:
    p = _scores(pred)
    t = _scores(target)
    if p.size != t.size:
        raise DimensionError("pred/target size mismatch")
    return 2.0 * (p - t) / p.size


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Bias-corrected Adam moments for a fixed parameter list."""

    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    eps: float = 1e-8
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must be in [0, 1)")
        if self.lr <= 0 or self.eps <= 0:
            raise ValueError("lr and eps must be > 0")

    @classmethod
    def for_params(cls, params, lr=2e-4, beta1=0.5, beta2=0.9, eps=1e-8):
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(params, grads, state: AdamState) -> None:
    """One in-place Adam update."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("params/grads/state length mismatch")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DimensionError(f"grad shape {g.shape} != param shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def sgd_step(params, grads, lr: float) -> None:
    """Plain gradient descent, for the bare normalize-then-update loop."""
    if len(params) != len(grads):
        raise DimensionError("params/grads length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise DimensionError(f"grad shape {g.shape} != param shape {p.shape}")
        p -= lr * g


# ---------------------------------------------------------------------------
# far-field slopes of Dense(1->n) + ReLU + Dense(n->1)
# ---------------------------------------------------------------------------

def slope_at_infinity(w1, b1, w2) -> tuple[float, float]:
    """(f'(-inf), f'(+inf)) for f(x) = w2 . relu(w1 x + b1) + const.

    Far from the kinks only the sign of each w1 entry decides whether its
    unit is active, so b1 does not enter the slopes; it is accepted to
    mirror the network parameterization.
    """
    w1 = np.asarray(w1, dtype=np.float64).ravel()
    w2 = np.asarray(w2, dtype=np.float64).ravel()
    b1 = np.asarray(b1, dtype=np.float64).ravel()
    if w1.size != w2.size or b1.size != w1.size:
        raise DimensionError("w1, b1, w2 must have the same width")
    neg = w1 < 0
    pos = w1 > 0
    return (
        float(np.sum(w1[neg] * w2[neg])),
        float(np.sum(w1[pos] * w2[pos])),
    )


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_PARAM_ATTRS = {
    "conv_cyclic": ("kernels", "bias"),
    "dense": ("weights", "bias"),
}


def _layer_param_arrays(layer):
    if layer.kind == "conv_cyclic":
        return {"kernels": layer.kernels.data, "bias": layer.bias}
    if layer.kind == "dense":
        return {"weights": layer.weights, "bias": layer.bias}
    return {}


def save_checkpoint(model: Model, path, seed: int, step: int, extra: dict | None = None) -> None:
    """Write one `.sant` per parameter tensor plus a manifest.json."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    layers = []
    for idx, layer in enumerate(model.layers):
        entry = dict(layer.manifest())
        files = {}
        for name, arr in _layer_param_arrays(layer).items():
            fname = f"layer{idx:02d}_{name}.sant"
            save_sant(root / fname, arr)
            files[name] = fname
        if files:
            entry["files"] = files
        layers.append(entry)
    manifest = {
        "input_signature": list(model.input_signature),
        "layers": layers,
        "seed": int(seed),
        "step": int(step),
        "extra": dict(extra) if extra else {},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))


def load_checkpoint(path) -> tuple[Model, dict]:
    """Rebuild a Model (float64 in memory) from a checkpoint directory."""
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    layers = []
    for entry in manifest["layers"]:
        kind = entry["kind"]
        files = entry.get("files", {})
        arrays = {name: load_sant(root / fname).astype(np.float64)
                  for name, fname in files.items()}
        if kind == "conv_cyclic":
            layers.append(ConvCyclic(KernelBank(arrays["kernels"]), arrays["bias"]))
        elif kind == "dense":
            layers.append(Dense(arrays["weights"], arrays["bias"]))
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "leaky_relu":
            layers.append(LeakyReLU(entry["slope"]))
        elif kind == "tanh":
            layers.append(Tanh())
        elif kind == "scale":
            layers.append(Scale(entry["factor"]))
        elif kind == "spatial_mean":
            layers.append(SpatialMean())
        elif kind == "reshape":
            layers.append(Reshape(*entry["shape"]))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    sig = manifest["input_signature"]
    model = Model(layers, tuple(sig))
    return model, manifest

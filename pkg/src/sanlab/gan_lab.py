"""Desk-scale experiment harness: toy datasets, a hinge-loss WGAN training
loop with pluggable critic normalization, 1-D fitting with and without
per-layer norm projection, and the probe/report/bench entry points.

Every run is a pure function of its config: data, latents, inits, and
subset plans all derive from the config seed through named Philox streams,
and metrics CSVs reproduce byte-for-byte. Wall-clock timing is opt-in
(`record_timing`) because it can never reproduce.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nn_autodiff as nn
from .normalizer import NormalizationPolicy, apply_normalization
from .operator_norms import (
    SizeGuardError,
    dense_spectral_norm,
    exact_conv_spectral_norm,
    reshape_spectral_norm,
    san_norm,
)
from .rng import philox
from .tensor_core import KernelBank, _fft2_stack

DATASETS = ("ring8", "textures16", "identity_line", "triangle_wave")

LATENT_DIM = 16
EVAL_SAMPLES = 4096
RING8_RADIUS = 2.0
RING8_STD = 0.02
TEXTURE_SIZE = 16
TEXTURE_CUTOFF = 4
SPARSITY_EPS = 1e-6


# ---------------------------------------------------------------------------
# configs
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    dataset: str = "ring8"
    period: float = 2.0
    amplitude: float = 0.5
    policy: NormalizationPolicy = field(default_factory=NormalizationPolicy)
    n_dis: int = 1
    batch: int = 64
    steps: int = 1000
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    seed: int = 0
    eval_every: int = 100
    norm_order: str = "pre"
    record_timing: bool = False

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if isinstance(self.policy, dict):
            self.policy = NormalizationPolicy.from_dict(self.policy)
        if self.n_dis < 1:
            raise ValueError("n_dis must be >= 1")
        if self.batch < 2:
            raise ValueError("batch must be >= 2")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.norm_order not in ("pre", "post"):
            raise ValueError("norm_order must be 'pre' or 'post'")

    def to_dict(self) -> dict:
        d = {
            "dataset": self.dataset,
            "period": self.period,
            "amplitude": self.amplitude,
            "policy": self.policy.to_dict(),
            "n_dis": self.n_dis,
            "batch": self.batch,
            "steps": self.steps,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "seed": self.seed,
            "eval_every": self.eval_every,
            "norm_order": self.norm_order,
            "record_timing": self.record_timing,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class MetricsRow:
    """One evaluation event. Per-layer entries are keyed by the critic's
    layer index; mode metrics are NaN for datasets without mode structure."""

    step: int
    critic_loss: float
    gen_loss: float
    critic_grad_norm: float
    mode_coverage: float
    hq_fraction: float
    sparsity: dict = field(default_factory=dict)
    san: dict = field(default_factory=dict)
    reshape: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)
    wall_ms: float = float("nan")


@dataclass
class WganResult:
    rows: list
    header: list
    flat_rows: list
    generator: object
    critic: object


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def ring8_centers(radius: float = RING8_RADIUS) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(8) / 8.0
    return np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)


def sample_ring8(rng: np.random.Generator, count: int,
                 radius: float = RING8_RADIUS, std: float = RING8_STD) -> np.ndarray:
    """[count, 2] points: uniform mode choice plus isotropic Gaussian noise."""
    centers = ring8_centers(radius)
    idx = rng.integers(0, 8, size=count)
    return centers[idx] + std * rng.standard_normal((count, 2))


def _texture_mask(size: int, cutoff: int) -> np.ndarray:
    freq = np.minimum(np.arange(size), size - np.arange(size))
    return ((freq[:, None] <= cutoff) & (freq[None, :] <= cutoff)).astype(np.float64)


def sample_textures16(rng: np.random.Generator, count: int,
                      size: int = TEXTURE_SIZE, cutoff: int = TEXTURE_CUTOFF) -> np.ndarray:
    """[count, 1, size, size] band-limited noise images scaled to max |.| = 1."""
    spec = rng.standard_normal((count, size, size)) + 1j * rng.standard_normal(
        (count, size, size)
    )
    spec *= _texture_mask(size, cutoff)
    x = _fft2_stack(spec, inverse=True).real
    peak = np.abs(x).max(axis=(1, 2), keepdims=True)
    x /= np.maximum(peak, 1e-12)
    return x[:, None, :, :]


def identity_line(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).copy()


def triangle_wave(x: np.ndarray, period: float = 2.0, amplitude: float = 0.5) -> np.ndarray:
    """Triangle of the given period/amplitude; slopes are +-4*amplitude/period."""
    if period <= 0 or amplitude <= 0:
        raise ValueError("period and amplitude must be > 0")
    x = np.asarray(x, dtype=np.float64)
    return (2.0 * amplitude / np.pi) * np.arcsin(np.sin(2.0 * np.pi * x / period))


def fit1d_targets(config: ExperimentConfig, x: np.ndarray) -> np.ndarray:
    if config.dataset == "identity_line":
        return identity_line(x)
    if config.dataset == "triangle_wave":
        return triangle_wave(x, config.period, config.amplitude)
    raise ValueError(f"{config.dataset!r} is not a 1-D dataset")


# ---------------------------------------------------------------------------
# mode metrics
# ---------------------------------------------------------------------------

def mode_coverage(samples: np.ndarray, centers: np.ndarray, std: float = RING8_STD,
                  radius_stds: float = 3.0, min_frac: float = 0.01) -> tuple[int, float]:
    """(covered modes, high-quality fraction).

    A mode counts as covered when at least `min_frac` of the samples fall
    within `radius_stds * std` of its center; the hq fraction is the share
    of samples within that distance of any center.
    """
    d2 = ((samples[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= (radius_stds * std) ** 2
    covered = int((within.sum(axis=0) >= min_frac * samples.shape[0]).sum())
    hq = float(within.any(axis=1).mean())
    return covered, hq


# ---------------------------------------------------------------------------
# model factories
# ---------------------------------------------------------------------------

def build_generator(config: ExperimentConfig) -> nn.Model:
    rng = philox(config.seed, 3)
    if config.dataset == "ring8":
        # the gain spreads the initial sample cloud over the ring; without
        # it every latent maps near the origin and training locks onto a
        # single mode
        layers = [
            nn.init_dense(LATENT_DIM, 128, rng), nn.ReLU(),
            nn.init_dense(128, 128, rng), nn.ReLU(),
            nn.init_dense(128, 2, rng), nn.Scale(16.0),
        ]
        return nn.Model(layers, ("vector", LATENT_DIM))
    if config.dataset == "textures16":
        s = TEXTURE_SIZE
        layers = [
            nn.init_dense(LATENT_DIM, 256, rng), nn.ReLU(),
            nn.init_dense(256, s * s, rng),
            nn.Reshape(1, s, s), nn.Tanh(),
        ]
        return nn.Model(layers, ("vector", LATENT_DIM))
    raise ValueError(f"no generator for dataset {config.dataset!r}")


def build_critic(config: ExperimentConfig) -> nn.Model:
    rng = philox(config.seed, 4)
    if config.dataset == "ring8":
        # an MLP written as 1x1 conv banks on 1x1 planes so the Fourier-peak
        # norm (here max |entry|) governs every weight layer
        layers = [
            nn.init_conv(2, 128, 1, 1, rng), nn.LeakyReLU(0.1),
            nn.init_conv(128, 128, 1, 1, rng), nn.LeakyReLU(0.1),
            nn.init_conv(128, 1, 1, 1, rng),
        ]
        return nn.Model(layers, ("image", 2, 1, 1))
    if config.dataset == "textures16":
        s = TEXTURE_SIZE
        layers = [
            nn.init_conv(1, 8, 3, 3, rng), nn.ReLU(),
            nn.init_conv(8, 16, 3, 3, rng), nn.ReLU(),
            nn.init_conv(16, 16, 3, 3, rng), nn.ReLU(),
            nn.init_conv(16, 16, 3, 3, rng), nn.ReLU(),
            nn.SpatialMean(),
            nn.init_dense(16, 32, rng), nn.ReLU(),
            nn.init_dense(32, 1, rng),
        ]
        return nn.Model(layers, ("image", 1, s, s))
    raise ValueError(f"no critic for dataset {config.dataset!r}")


def _sample_real(config: ExperimentConfig, rng: np.random.Generator, count: int) -> np.ndarray:
    if config.dataset == "ring8":
        return sample_ring8(rng, count)
    return sample_textures16(rng, count)


def _to_critic_input(config: ExperimentConfig, batch: np.ndarray) -> np.ndarray:
    if config.dataset == "ring8":
        return batch.reshape(batch.shape[0], 2, 1, 1)
    return batch


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".10g")
    return str(v)


def rows_to_csv(header: list[str], rows: list[dict]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(row[h]) for h in header))
    return "\n".join(lines) + "\n"


def write_csv(path, header: list[str], rows: list[dict]) -> str:
    text = rows_to_csv(header, rows)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# WGAN training
# ---------------------------------------------------------------------------

def _conv_indices(model: nn.Model) -> list[int]:
    return [i for i, layer in enumerate(model.layers) if isinstance(layer, nn.ConvCyclic)]


def metrics_header(critic: nn.Model, record_timing: bool) -> list[str]:
    header = ["step", "critic_loss", "gen_loss", "critic_grad_norm",
              "mode_coverage", "hq_fraction"]
    conv = _conv_indices(critic)
    header += [f"sparsity_l{i}" for i in conv]
    header += [f"san_l{i}" for i in conv]
    header += [f"reshape_l{i}" for i in conv]
    header += [f"exact_l{i}" for i in conv]
    if record_timing:
        header.append("wall_ms")
    return header


def _row_to_flat(row: MetricsRow, critic: nn.Model, record_timing: bool) -> dict:
    flat = {
        "step": row.step,
        "critic_loss": row.critic_loss,
        "gen_loss": row.gen_loss,
        "critic_grad_norm": row.critic_grad_norm,
        "mode_coverage": row.mode_coverage,
        "hq_fraction": row.hq_fraction,
    }
    for i in _conv_indices(critic):
        flat[f"sparsity_l{i}"] = row.sparsity.get(i, float("nan"))
        flat[f"san_l{i}"] = row.san.get(i, float("nan"))
        flat[f"reshape_l{i}"] = row.reshape.get(i, float("nan"))
        flat[f"exact_l{i}"] = row.exact.get(i, float("nan"))
    if record_timing:
        flat["wall_ms"] = row.wall_ms
    return flat


def _critic_layer_norms(critic: nn.Model) -> tuple[dict, dict, dict]:
    sans, reshapes, exacts = {}, {}, {}
    for i in _conv_indices(critic):
        layer = critic.layers[i]
        sig = critic.signatures[i]
        h, w = sig[2], sig[3]
        sans[i] = san_norm(layer.kernels, h, w).value
        reshapes[i] = reshape_spectral_norm(layer.kernels).value
        try:
            exacts[i] = exact_conv_spectral_norm(layer.kernels, h, w).value
        except SizeGuardError:
            exacts[i] = float("nan")
    return sans, reshapes, exacts


def _input_sparsity(critic: nn.Model, cache: list) -> dict:
    out = {}
    for i in _conv_indices(critic):
        x = cache[i]  # [B, n, H, W]
        norms = np.sqrt((x * x).sum(axis=(2, 3)))
        out[i] = float((norms <= SPARSITY_EPS).mean())
    return out


def _grad_norm_mean(grads: list[np.ndarray]) -> float:
    return float(np.mean([np.linalg.norm(g) for g in grads]))


def _critic_update(config, critic, gen, d_state, data_rng, latent_rng):
    real = _to_critic_input(config, _sample_real(config, data_rng, config.batch))
    z = latent_rng.standard_normal((config.batch, LATENT_DIM))
    fake, _ = gen.forward(z)
    fake_in = _to_critic_input(config, fake) if fake.ndim == 2 else fake
    s_real, cache_r = critic.forward(real)
    s_fake, cache_f = critic.forward(fake_in)
    loss = nn.hinge_critic_loss(s_real, s_fake)
    gr, gf = nn.hinge_critic_loss_grad(s_real, s_fake)
    grads_r, _ = critic.backward(cache_r, gr.reshape(s_real.shape))
    grads_f, _ = critic.backward(cache_f, gf.reshape(s_fake.shape))
    grads = [a + b for a, b in zip(grads_r, grads_f)]
    nn.adam_step(critic.parameters(), grads, d_state)
    return loss, grads


def _generator_update(config, critic, gen, g_state, latent_rng):
    z = latent_rng.standard_normal((config.batch, LATENT_DIM))
    fake, cache_g = gen.forward(z)
    fake_in = _to_critic_input(config, fake) if fake.ndim == 2 else fake
    s_fake, cache_c = critic.forward(fake_in)
    loss = nn.generator_loss(s_fake)
    gs = nn.generator_loss_grad(s_fake)
    _, d_fake = critic.backward(cache_c, gs.reshape(s_fake.shape))
    if fake.ndim == 2:
        d_fake = d_fake.reshape(fake.shape)
    g_grads, _ = gen.backward(cache_g, d_fake)
    nn.adam_step(gen.parameters(), g_grads, g_state)
    return loss


def run_wgan(config: ExperimentConfig, out_dir=None, post_norm_hook=None) -> WganResult:
    """Alternating hinge-loss training with the configured critic
    normalization. With out_dir set, also writes metrics.csv and
    generator/ + critic/ checkpoints.
    """
    if config.dataset not in ("ring8", "textures16"):
        raise ValueError("run_wgan needs a 2-D sample dataset (ring8 or textures16)")
    data_rng = philox(config.seed, 1)
    latent_rng = philox(config.seed, 2)
    eval_latent_rng = philox(config.seed, 5)
    eval_data_rng = philox(config.seed, 6)
    gen = build_generator(config)
    critic = build_critic(config)
    g_state = nn.AdamState.for_params(gen.parameters(), lr=config.lr,
                                      beta1=config.beta1, beta2=config.beta2)
    d_state = nn.AdamState.for_params(critic.parameters(), lr=config.lr,
                                      beta1=config.beta1, beta2=config.beta2)
    centers = ring8_centers()
    rows: list[MetricsRow] = []
    critic_step = 0
    last_critic_loss = float("nan")
    last_gen_loss = float("nan")
    last_grads = None
    last_wall_ms = float("nan")
    for gstep in range(1, config.steps + 1):
        for _ in range(config.n_dis):
            critic_step += 1
            t0 = time.perf_counter() if config.record_timing else 0.0
            if config.norm_order == "pre":
                events = apply_normalization(critic, config.policy, critic_step,
                                             seed=config.seed)
                if events and post_norm_hook is not None:
                    post_norm_hook(critic, events, critic_step)
            last_critic_loss, last_grads = _critic_update(
                config, critic, gen, d_state, data_rng, latent_rng
            )
            if config.norm_order == "post":
                events = apply_normalization(critic, config.policy, critic_step,
                                             seed=config.seed)
                if events and post_norm_hook is not None:
                    post_norm_hook(critic, events, critic_step)
            if config.record_timing:
                last_wall_ms = (time.perf_counter() - t0) * 1e3
        last_gen_loss = _generator_update(config, critic, gen, g_state, latent_rng)
        if gstep % config.eval_every == 0 or gstep == config.steps:
            z = eval_latent_rng.standard_normal((EVAL_SAMPLES, LATENT_DIM))
            samples, _ = gen.forward(z)
            if config.dataset == "ring8":
                covered, hq = mode_coverage(samples, centers)
                coverage = float(covered)
            else:
                coverage, hq = float("nan"), float("nan")
            eval_real = _to_critic_input(
                config, _sample_real(config, eval_data_rng, 256)
            )
            _, cache = critic.forward(eval_real)
            sans, reshapes, exacts = _critic_layer_norms(critic)
            rows.append(MetricsRow(
                step=gstep,
                critic_loss=last_critic_loss,
                gen_loss=last_gen_loss,
                critic_grad_norm=_grad_norm_mean(last_grads),
                mode_coverage=coverage,
                hq_fraction=hq,
                sparsity=_input_sparsity(critic, cache),
                san=sans,
                reshape=reshapes,
                exact=exacts,
                wall_ms=last_wall_ms,
            ))
    header = metrics_header(critic, config.record_timing)
    flat_rows = [_row_to_flat(r, critic, config.record_timing) for r in rows]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "metrics.csv", header, flat_rows)
        extra = {"dataset": config.dataset, "config": config.to_dict()}
        nn.save_checkpoint(gen, out / "generator", config.seed, config.steps, extra)
        nn.save_checkpoint(critic, out / "critic", config.seed, config.steps, extra)
    return WganResult(rows, header, flat_rows, gen, critic)


# ---------------------------------------------------------------------------
# 1-D fitting
# ---------------------------------------------------------------------------

def _project_unit_norm(model: nn.Model) -> None:
    for layer in model.layers:
        if isinstance(layer, nn.Dense):
            sigma = dense_spectral_norm(layer.weights)
            if sigma > 1.0:
                layer.weights /= sigma


def run_fit1d(config: ExperimentConfig, hidden: int = 100, half_width: float = 2.0,
              out_dir=None):
    """Fit a Dense(1->hidden)+ReLU+Dense(hidden->1) net to a 1-D target,
    once unconstrained and once with per-step projection of each weight
    matrix onto the unit spectral ball. Returns (rows, header, flat_rows)."""
    if config.dataset not in ("identity_line", "triangle_wave"):
        raise ValueError("run_fit1d needs a 1-D dataset")
    x = np.linspace(-half_width, half_width, config.batch)[:, None]
    y = fit1d_targets(config, x[:, 0])[:, None]

    def fresh_model():
        rng = philox(config.seed, 10)
        layers = [nn.init_dense(1, hidden, rng), nn.ReLU(),
                  nn.init_dense(hidden, 1, rng)]
        return nn.Model(layers, ("vector", 1))

    arms = {"vanilla": fresh_model(), "projected": fresh_model()}
    states = {
        name: nn.AdamState.for_params(m.parameters(), lr=config.lr,
                                      beta1=config.beta1, beta2=config.beta2)
        for name, m in arms.items()
    }
    mse = {name: float("nan") for name in arms}
    rows = []
    for step in range(1, config.steps + 1):
        for name, model in arms.items():
            pred, cache = model.forward(x)
            mse[name] = nn.mse_loss(pred, y)
            g = nn.mse_loss_grad(pred, y).reshape(pred.shape)
            grads, _ = model.backward(cache, g)
            nn.adam_step(model.parameters(), grads, states[name])
            if name == "projected":
                _project_unit_norm(model)
        if step % config.eval_every == 0 or step == config.steps:
            rows.append({"step": step, "mse_vanilla": mse["vanilla"],
                         "mse_projected": mse["projected"]})
    header = ["step", "mse_vanilla", "mse_projected"]
    if out_dir is not None:
        write_csv(Path(out_dir) / "fit1d.csv", header, rows)
    return rows, header, arms


# ---------------------------------------------------------------------------
# probes and reports
# ---------------------------------------------------------------------------

def sparsity_probe(checkpoint_path, layer_index: int, batch: int,
                   eps: float = SPARSITY_EPS, seed: int = 0, bins: int = 32):
    """Histogram of per-(sample, channel) input norms at one conv layer of a
    checkpointed critic, plus the fraction <= eps. Returns (rows, header,
    fraction)."""
    model, manifest = nn.load_checkpoint(checkpoint_path)
    if not (0 <= layer_index < len(model.layers)):
        raise ValueError(f"layer index {layer_index} out of range")
    if not isinstance(model.layers[layer_index], nn.ConvCyclic):
        raise ValueError(f"layer {layer_index} has no multi-channel input")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    dataset = manifest.get("extra", {}).get("dataset")
    if dataset not in ("ring8", "textures16"):
        raise ValueError(f"checkpoint carries no sampleable dataset ({dataset!r})")
    cfg = ExperimentConfig(dataset=dataset, seed=seed)
    data = _to_critic_input(cfg, _sample_real(cfg, philox(seed, 7), batch))
    _, cache = model.forward(data)
    x = cache[layer_index]
    norms = np.sqrt((x * x).sum(axis=(2, 3))).ravel()
    fraction = float((norms <= eps).mean())
    counts, edges = np.histogram(norms, bins=bins)
    rows = [
        {"bin_left": float(edges[i]), "bin_right": float(edges[i + 1]),
         "count": int(counts[i]), "frac_le_eps": fraction}
        for i in range(len(counts))
    ]
    header = ["bin_left", "bin_right", "count", "frac_le_eps"]
    return rows, header, fraction


def singvals_report(checkpoint_path):
    """Per-conv-layer exact/reshape/san norms of a checkpointed model.
    Returns (rows, header)."""
    model, _ = nn.load_checkpoint(checkpoint_path)
    rows = []
    for i in _conv_indices(model):
        layer = model.layers[i]
        sig = model.signatures[i]
        h, w = sig[2], sig[3]
        try:
            exact = exact_conv_spectral_norm(layer.kernels, h, w).value
        except SizeGuardError:
            exact = float("nan")
        resh = reshape_spectral_norm(layer.kernels).value
        san = san_norm(layer.kernels, h, w).value
        ratio = exact / resh if resh > 0 and not math.isnan(exact) else float("nan")
        rows.append({"layer": i, "height": h, "width": w, "exact": exact,
                     "reshape": resh, "san": san, "exact_over_reshape": ratio})
    header = ["layer", "height", "width", "exact", "reshape", "san",
              "exact_over_reshape"]
    return rows, header


def bench_update(config: ExperimentConfig, methods, reps: int = 31):
    """Median wall time of one critic update per normalization method, on
    identical shapes and seeds. Returns (rows, header)."""
    if reps < 10:
        raise ValueError("reps must be >= 10")
    rows = []
    for method in methods:
        cfg = replace(config, policy=replace(config.policy, method=method))
        gen = build_generator(cfg)
        critic = build_critic(cfg)
        d_state = nn.AdamState.for_params(critic.parameters(), lr=cfg.lr,
                                          beta1=cfg.beta1, beta2=cfg.beta2)
        data_rng = philox(cfg.seed, 1)
        latent_rng = philox(cfg.seed, 2)
        times = []
        for step in range(1, reps + 1):
            t0 = time.perf_counter()
            apply_normalization(critic, cfg.policy, step, seed=cfg.seed)
            _critic_update(cfg, critic, gen, d_state, data_rng, latent_rng)
            times.append((time.perf_counter() - t0) * 1e3)
        rows.append({"method": method, "reps": reps,
                     "median_ms": float(np.median(times))})
    header = ["method", "reps", "median_ms"]
    return rows, header


# ---------------------------------------------------------------------------
# ablation grids
# ---------------------------------------------------------------------------

def hyperparameter_settings(base: ExperimentConfig) -> dict[str, ExperimentConfig]:
    """The six named optimizer settings varying lr, beta1=beta of the first
    moment, and critic steps per generator step."""
    table = {
        "A": (5e-4, 0.5, 0.9, 1),
        "B": (2e-4, 0.5, 0.9, 1),
        "C": (2e-4, 0.0, 0.9, 1),
        "D": (5e-4, 0.0, 0.9, 1),
        "E": (2e-4, 0.5, 0.9, 2),
        "F": (5e-4, 0.0, 0.9, 2),
    }
    return {
        name: replace(base, lr=lr, beta1=b1, beta2=b2, n_dis=nd)
        for name, (lr, b1, b2, nd) in table.items()
    }


def multiplier_grid(base: ExperimentConfig,
                    values=(0.5, 1.0, 1.1, 1.5)) -> dict[str, ExperimentConfig]:
    return {
        f"mult_{v:g}": replace(base, policy=replace(base.policy, multiplier=v))
        for v in values
    }


def run_ablation_grid(configs) -> tuple[list[dict], list[str]]:
    """Run each named config and tabulate its final metrics row."""
    if isinstance(configs, dict):
        named = list(configs.items())
    else:
        named = [(f"run{i:02d}", c) for i, c in enumerate(configs)]
    if not named:
        raise ValueError("empty grid")
    datasets = {c.dataset for _, c in named}
    if len(datasets) != 1:
        raise ValueError(f"grid mixes datasets {sorted(datasets)}")
    rows = []
    for name, cfg in named:
        final = run_wgan(cfg).rows[-1]
        rows.append({
            "setting": name, "lr": cfg.lr, "beta1": cfg.beta1, "beta2": cfg.beta2,
            "n_dis": cfg.n_dis, "multiplier": cfg.policy.multiplier,
            "steps": cfg.steps, "seed": cfg.seed,
            "critic_loss": final.critic_loss, "gen_loss": final.gen_loss,
            "critic_grad_norm": final.critic_grad_norm,
            "mode_coverage": final.mode_coverage, "hq_fraction": final.hq_fraction,
        })
    header = ["setting", "lr", "beta1", "beta2", "n_dis", "multiplier", "steps",
              "seed", "critic_loss", "gen_loss", "critic_grad_norm",
              "mode_coverage", "hq_fraction"]
    return rows, header

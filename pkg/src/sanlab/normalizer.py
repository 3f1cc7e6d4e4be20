"""Normalization policy engine: per-layer norm constants and in-place weight
rescaling W <- W * multiplier / (g * sigma).

Which sigma a layer gets depends on the layer kind and the policy method:
conv layers use the Fourier-peak, subset, reshape, or exact route; dense
layers always use their top singular value; parameter-free layers count as
constant 1. Biases are never touched. weight_clip replaces rescaling by
entry clamping. With `every = k`, normalization fires at steps k, 2k, ...,
so exactly floor(T / k) events occur in T steps (steps are 1-based).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn_autodiff as nn
from .compensation import compensation_factor, sample_filter_subset
from .operator_norms import (
    dense_spectral_norm,
    exact_conv_spectral_norm,
    filter_fourier_maxima,
    reshape_spectral_norm,
    san_norm,
)
from .rng import philox

logger = logging.getLogger(__name__)

POLICY_METHODS = ("none", "weight_clip", "reshape_sn", "exact_sn", "san", "san_subset")


@dataclass
class NormalizationPolicy:
    method: str = "san"
    every: int = 1
    rate: float = 1.0
    compensation: float | str = "auto"
    multiplier: float = 1.0
    clip: float = 0.01
    eps_sigma: float = 1e-12

    def __post_init__(self):
        if self.method not in POLICY_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if int(self.every) < 1:
            raise ValueError("every must be >= 1")
        self.every = int(self.every)
        if not (0.0 < self.rate <= 1.0):
            raise ValueError("rate must be in (0, 1]")
        if self.multiplier <= 0:
            raise ValueError("multiplier must be > 0")
        if self.clip <= 0:
            raise ValueError("clip must be > 0")
        if self.eps_sigma < 0:
            raise ValueError("eps_sigma must be >= 0")
        if self.compensation != "auto":
            self.compensation = float(self.compensation)
            if self.compensation <= 0:
                raise ValueError("compensation must be > 0 or 'auto'")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "every": self.every,
            "rate": self.rate,
            "compensation": self.compensation,
            "multiplier": self.multiplier,
            "clip": self.clip,
            "eps_sigma": self.eps_sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationPolicy":
        return cls(**d)


@dataclass
class LayerNormEvent:
    """Record of one layer's treatment during a normalization event."""

    layer_index: int
    kind: str
    sigma: float
    compensation: float
    scale: float
    skipped: bool = False
    note: str = ""


def layer_norm_constant(layer, policy: NormalizationPolicy, signal_hw: tuple[int, int],
                        seed: int = 0, step: int = 0, layer_index: int = 0) -> float:
    """Sigma for one layer under the policy; activation-like layers return 1."""
    h, w = signal_hw
    if isinstance(layer, nn.ConvCyclic):
        bank = layer.kernels
        if policy.method == "san":
            return san_norm(bank, h, w).value
        if policy.method == "san_subset":
            # fresh, reproducible plan per (event, layer)
            plan = sample_filter_subset(
                bank.out_channels, bank.in_channels, policy.rate,
                seed=int(philox(seed, step, layer_index).integers(0, 2**63 - 1)),
            )
            return float(filter_fourier_maxima(bank, h, w)[plan.indices].max())
        if policy.method == "reshape_sn":
            return reshape_spectral_norm(bank).value
        if policy.method == "exact_sn":
            return exact_conv_spectral_norm(bank, h, w).value
    elif isinstance(layer, nn.Dense):
        if policy.method in ("san", "san_subset", "reshape_sn", "exact_sn"):
            return dense_spectral_norm(layer.weights)
    elif not layer.params():
        return 1.0
    raise ValueError(
        f"no norm constant for layer kind {getattr(layer, 'kind', '?')!r} "
        f"under method {policy.method!r}"
    )


def _layer_compensation(layer, policy: NormalizationPolicy) -> float:
    if policy.method != "san_subset" or not isinstance(layer, nn.ConvCyclic):
        return 1.0
    if policy.compensation == "auto":
        total = layer.kernels.out_channels * layer.kernels.in_channels
        return compensation_factor(total, policy.rate)
    return float(policy.compensation)


def apply_normalization(model: nn.Model, policy: NormalizationPolicy, step: int,
                        seed: int = 0) -> list[LayerNormEvent]:
    """Normalize the model's weight layers in place if `step` is due.

    Returns the per-layer event records (empty when nothing fired). Layers
    whose sigma is <= eps_sigma are skipped with a warning rather than
    divided by noise. Subset plans are drawn fresh per event and layer.
    """
    if step < 1:
        raise ValueError("step must be >= 1")
    if policy.method == "none" or step % policy.every != 0:
        return []
    events: list[LayerNormEvent] = []
    for idx, layer in enumerate(model.layers):
        if not layer.params():
            continue
        if policy.method == "weight_clip":
            w = layer.params()[0]  # weights only; biases stay untouched
            np.clip(w, -policy.clip, policy.clip, out=w)
            events.append(LayerNormEvent(idx, layer.kind, float("nan"), 1.0, 1.0,
                                         note=f"clipped to [-{policy.clip}, {policy.clip}]"))
            continue
        sig = model.signatures[idx]
        hw = (sig[2], sig[3]) if sig[0] == "image" else (1, 1)
        sigma = layer_norm_constant(layer, policy, hw, seed=seed, step=step,
                                    layer_index=idx)
        g = _layer_compensation(layer, policy)
        if sigma <= policy.eps_sigma:
            logger.warning(
                "layer %d (%s): sigma %.3e <= eps_sigma %.3e, skipped",
                idx, layer.kind, sigma, policy.eps_sigma,
            )
            events.append(LayerNormEvent(idx, layer.kind, sigma, g, 1.0,
                                         skipped=True, note="sigma below eps_sigma"))
            continue
        scale = policy.multiplier / (g * sigma)
        layer.params()[0] *= scale
        events.append(LayerNormEvent(idx, layer.kind, sigma, g, scale))
    return events

"""Operator norms of cyclic convolution layers.

Three routes with different cost/tightness trade-offs:

* `san_norm`: largest peak Fourier magnitude over the bank's filters. This is
  the exact supremum of the output sup-channel norm over inputs that are
  nonzero in a single channel with unit channel norm, and a lower bound on
  the full operator norm.
* `exact_conv_spectral_norm`: the true operator norm, max over frequency bins
  of the top singular value of the per-bin channel-mixing matrix.
* `reshape_spectral_norm`: top singular value of the flattened
  [m, n*kh*kw] kernel matrix; cheap, plane-independent, and a systematic
  underestimate of the exact norm in practice.

Top singular values are computed by power iteration with deterministic
seeded starts; dense LAPACK factorizations are reserved for the oracle
module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compensation import SubsetPlan, compensation_factor
from .rng import philox
from .tensor_core import DimensionError, KernelBank, _fft2_stack, pad_bank

METHODS = ("san", "san_subset", "exact", "reshape", "oracle_san", "oracle_exact")

# cap on H*W*m*n complex cells assembled on the exact path
EXACT_CELL_GUARD = 10_000_000

_POWER_SEED = 0x5EED


class SizeGuardError(ValueError):
    """A dense construction would exceed its size guard."""


@dataclass
class NormEstimate:
    """A norm value plus how it was obtained.

    argmax holds (i, j, u, v): filter row/column and frequency bin of the
    attained maximum. Methods whose maximum is not filter-specific store
    i = j = -1; methods with no frequency structure store None.
    """

    value: float
    method: str
    signal_height: int
    signal_width: int
    subset_rate: float = 1.0
    compensation: float = 1.0
    argmax: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.value >= 0.0):
            raise ValueError("norm value must be >= 0")
        if not (0.0 < self.subset_rate <= 1.0):
            raise ValueError("subset_rate must be in (0, 1]")
        if self.method == "san" and self.subset_rate == 1.0 and self.compensation != 1.0:
            raise ValueError("full-bank san estimates take no compensation")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "signal_height": self.signal_height,
            "signal_width": self.signal_width,
            "subset_rate": self.subset_rate,
            "compensation": self.compensation,
            "argmax": None if self.argmax is None else list(self.argmax),
        }


# ---------------------------------------------------------------------------
# Fourier-peak route
# ---------------------------------------------------------------------------

def filter_fourier_maxima(bank: KernelBank, height: int, width: int) -> np.ndarray:
    """Peak DFT magnitude of every filter, flattened row-major to [m*n]."""
    planes = pad_bank(bank.data, height, width)
    mags = np.abs(_fft2_stack(planes))
    return mags.reshape(bank.out_channels * bank.in_channels, -1).max(axis=1)


def kernel_fourier_max(kernel, height: int, width: int) -> float:
    """Peak magnitude of the kernel's DFT zero-padded to height x width."""
    planes = pad_bank(np.asarray(kernel, dtype=np.float64)[None, None], height, width)
    return float(np.abs(_fft2_stack(planes)).max())


def san_norm(bank: KernelBank, height: int, width: int) -> NormEstimate:
    """Sparsity-aware norm: max over filters of the peak Fourier magnitude.

    Ties break to the lexicographically first (i, j, u, v).
    """
    planes = pad_bank(bank.data, height, width)
    mags = np.abs(_fft2_stack(planes))
    flat = int(np.argmax(mags))  # first occurrence in C order == lexicographic
    i, j, u, v = np.unravel_index(flat, mags.shape)
    return NormEstimate(
        value=float(mags[i, j, u, v]),
        method="san",
        signal_height=height,
        signal_width=width,
        argmax=(int(i), int(j), int(u), int(v)),
    )


def san_subset_norm(
    bank: KernelBank,
    height: int,
    width: int,
    plan: SubsetPlan,
    compensation: float | str = "auto",
) -> NormEstimate:
    """Compensated subset estimate: g * max over sampled filters of the Fourier peak.

    The pre-compensation estimate is value / compensation.
    """
    m, n = bank.out_channels, bank.in_channels
    if plan.total != m * n:
        raise DimensionError(
            f"subset plan covers {plan.total} filters, bank has {m * n}"
        )
    g = (
        compensation_factor(plan.total, plan.rate)
        if compensation == "auto"
        else float(compensation)
    )
    if g <= 0:
        raise ValueError("compensation must be > 0")
    planes = pad_bank(bank.data.reshape(m * n, *bank.data.shape[2:]), height, width)
    mags = np.abs(_fft2_stack(planes[plan.indices]))
    flat = int(np.argmax(mags))
    k, u, v = np.unravel_index(flat, mags.shape)
    i, j = divmod(int(plan.indices[k]), n)
    return NormEstimate(
        value=g * float(mags[k, u, v]),
        method="san_subset",
        signal_height=height,
        signal_width=width,
        subset_rate=plan.rate,
        compensation=g,
        argmax=(i, j, int(u), int(v)),
    )


# ---------------------------------------------------------------------------
# power iteration
# ---------------------------------------------------------------------------

def _real_top_sv(matrix: np.ndarray, iters: int, tol: float, seed: int) -> float:
    """Top singular value of a real matrix by power iteration on the Gram matrix."""
    m = np.asarray(matrix, dtype=np.float64)
    rng = philox(seed)
    v = rng.standard_normal(m.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        u = m @ v
        new_sigma = float(np.linalg.norm(u))
        w = m.T @ u
        wn = float(np.linalg.norm(w))
        if wn == 0.0:
            return new_sigma
        v = w / wn
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1e-300):
            return new_sigma
        sigma = new_sigma
    return sigma


def _batched_complex_top_sv(
    mats: np.ndarray, iters: int, tol: float, seed: int
) -> np.ndarray:
    """Top singular value of each matrix in a [K, m, n] complex stack.

    Power iteration on A^H A, one seeded complex start shared across bins,
    stopping when every bin's value has settled to `tol` relative.
    """
    k, _, n = mats.shape
    rng = philox(seed)
    v = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    # one A^H A per bin up front; each iteration is then a single matmul
    grams = np.matmul(mats.conj().transpose(0, 2, 1), mats)
    sigma = np.zeros(k)
    for _ in range(iters):
        w = np.matmul(grams, v[..., None])[..., 0]
        # |A^H A v| -> top eigenvalue of the Gram, i.e. sigma^2
        new_sigma = np.sqrt(np.linalg.norm(w, axis=1))
        wn = np.linalg.norm(w, axis=1, keepdims=True)
        v = np.where(wn > 0, w / np.where(wn == 0, 1.0, wn), v)
        if np.all(np.abs(new_sigma - sigma) <= tol * np.maximum(new_sigma, 1e-300)):
            sigma = new_sigma
            break
        sigma = new_sigma
    return sigma


def exact_conv_spectral_norm(
    bank: KernelBank,
    height: int,
    width: int,
    max_cells: int = EXACT_CELL_GUARD,
) -> NormEstimate:
    """True operator norm of the cyclic convolution on height x width planes.

    The convolution block-diagonalizes over frequency bins; per bin the
    channel-mixing matrix A(u, v)[i, j] is the filter DFT coefficient, and
    the operator norm is the max over bins of its top singular value.
    """
    m, n = bank.out_channels, bank.in_channels
    cells = m * n * height * width
    if cells > max_cells:
        raise SizeGuardError(
            f"exact path would assemble {cells} cells (> {max_cells}); "
            "use the reshape or subset route instead"
        )
    spectra = _fft2_stack(pad_bank(bank.data, height, width))  # [m, n, H, W]
    mats = spectra.transpose(2, 3, 0, 1).reshape(height * width, m, n)
    sigma = _batched_complex_top_sv(mats, iters=200, tol=1e-10, seed=_POWER_SEED)
    flat = int(np.argmax(sigma))
    u, v = divmod(flat, width)
    return NormEstimate(
        value=float(sigma[flat]),
        method="exact",
        signal_height=height,
        signal_width=width,
        argmax=(-1, -1, int(u), int(v)),
    )


def reshape_spectral_norm(bank: KernelBank) -> NormEstimate:
    """Top singular value of the kernel bank flattened to [m, n*kh*kw].

    Plane-independent; signal dims are recorded as 0.
    """
    m = bank.out_channels
    flat = bank.data.reshape(m, -1)
    value = _real_top_sv(flat, iters=100, tol=1e-10, seed=_POWER_SEED)
    return NormEstimate(value=value, method="reshape", signal_height=0, signal_width=0)


def dense_spectral_norm(matrix, iters: int = 200, tol: float = 1e-10,
                        seed: int = _POWER_SEED) -> float:
    """Top singular value of a dense weight matrix by power iteration."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or min(m.shape) < 1:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    return _real_top_sv(m, iters=iters, tol=tol, seed=seed)

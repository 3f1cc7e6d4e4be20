"""Dense tensor plumbing: multi-channel signals, kernel banks, a 2-D FFT
with zero padding, cyclic convolution, channel norms, and the `.sant`
tensor container.

All in-memory arithmetic runs at 64-bit. The `.sant` file format stores a
one-line JSON header followed by a raw little-endian float32 payload; it is
the interchange precision, not the compute precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DimensionError(ValueError):
    """A shape or size precondition was violated."""


def _as_plane(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise DimensionError(f"expected a 2-D plane, got shape {np.shape(a)}")
    return arr


@dataclass
class MultiChannelSignal:
    """An n-channel height x width feature map, stored as one [n, H, W] array."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise DimensionError(
                f"signal data must be [channels, H, W] with all dims >= 1, got {self.data.shape}"
            )

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def channel(self, i: int) -> np.ndarray:
        return self.data[i]


@dataclass
class KernelBank:
    """out_channels x in_channels small convolution kernels, one [m, n, kh, kw] array."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 4 or min(self.data.shape) < 1:
            raise DimensionError(
                f"kernel bank must be [m, n, kh, kw] with all dims >= 1, got {self.data.shape}"
            )

    @property
    def out_channels(self) -> int:
        return self.data.shape[0]

    @property
    def in_channels(self) -> int:
        return self.data.shape[1]

    @property
    def kernel_height(self) -> int:
        return self.data.shape[2]

    @property
    def kernel_width(self) -> int:
        return self.data.shape[3]

    def filter(self, i: int, j: int) -> np.ndarray:
        return self.data[i, j]


@dataclass
class ComplexSpectrum:
    """Real/imaginary parts of a 2-D frequency grid."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        self.re = np.asarray(self.re, dtype=np.float64)
        self.im = np.asarray(self.im, dtype=np.float64)
        if self.re.shape != self.im.shape or self.re.ndim != 2:
            raise DimensionError(
                f"re/im must be 2-D and same shape, got {self.re.shape} vs {self.im.shape}"
            )

    @property
    def height(self) -> int:
        return self.re.shape[0]

    @property
    def width(self) -> int:
        return self.re.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.re, self.im)

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


# ---------------------------------------------------------------------------
# discrete Fourier transforms
# ---------------------------------------------------------------------------

def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev = (rev << 1) | ((idx >> b) & 1)
    return rev


def _fft1d_pow2(a: np.ndarray, inverse: bool) -> np.ndarray:
    """Iterative radix-2 transform along the last axis (length a power of two)."""
    n = a.shape[-1]
    out = np.ascontiguousarray(a[..., _bit_reversal(n)], dtype=np.complex128)
    sign = 1.0 if inverse else -1.0
    span = 2
    while span <= n:
        half = span // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / span)
        view = out.reshape(out.shape[:-1] + (n // span, span))
        even = view[..., :half].copy()
        odd = view[..., half:] * tw
        view[..., :half] = even + odd
        view[..., half:] = even - odd
        span *= 2
    return out


def _dft2_direct(a: np.ndarray, inverse: bool) -> np.ndarray:
    """Direct-evaluation DFT of a 2-D complex plane; O((HW)^2) work, 64-bit."""
    h, w = a.shape
    sign = 2j if inverse else -2j
    row_tw = np.exp(sign * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    col_tw = np.exp(sign * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    out = row_tw @ np.asarray(a, dtype=np.complex128) @ col_tw
    if inverse:
        out /= h * w
    return out


def _fft2_stack(planes: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Transform a [..., H, W] stack. Radix-2 when both dims are powers of two,
    direct evaluation otherwise."""
    h, w = planes.shape[-2:]
    arr = np.asarray(planes, dtype=np.complex128)
    if _is_pow2(h) and _is_pow2(w):
        out = _fft1d_pow2(arr, inverse)
        out = np.swapaxes(_fft1d_pow2(np.swapaxes(out, -1, -2), inverse), -1, -2)
        if inverse:
            out /= h * w
        return out
    flat = arr.reshape(-1, h, w)
    out = np.stack([_dft2_direct(p, inverse) for p in flat])
    return out.reshape(arr.shape)


def _pad_plane(plane: np.ndarray, height: int, width: int) -> np.ndarray:
    if plane.shape[0] > height or plane.shape[1] > width:
        raise DimensionError(
            f"plane {plane.shape} does not fit target {height}x{width}"
        )
    out = np.zeros((height, width), dtype=plane.dtype)
    out[: plane.shape[0], : plane.shape[1]] = plane
    return out


def pad_bank(data: np.ndarray, height: int, width: int) -> np.ndarray:
    """Zero-pad the trailing two axes of a kernel stack to height x width."""
    kh, kw = data.shape[-2:]
    if kh > height or kw > width:
        raise DimensionError(f"kernel {kh}x{kw} does not fit plane {height}x{width}")
    out = np.zeros(data.shape[:-2] + (height, width), dtype=np.float64)
    out[..., :kh, :kw] = data
    return out


def fft2(plane, height: int, width: int) -> ComplexSpectrum:
    """Unnormalized 2-D DFT of `plane` zero-padded to height x width.

    Uses the radix-2 fast path when both target dims are powers of two and
    falls back to the direct double-sum transform otherwise.
    """
    if height < 1 or width < 1:
        raise DimensionError("target dims must be >= 1")
    padded = _pad_plane(_as_plane(plane), height, width)
    out = _fft2_stack(padded)
    return ComplexSpectrum(out.real, out.imag)


def ifft2(spectrum: ComplexSpectrum) -> np.ndarray:
    """Inverse of fft2 (1/(HW)-scaled); returns a complex [H, W] plane."""
    return _fft2_stack(spectrum.to_complex(), inverse=True)


def naive_dft2(plane, height: int, width: int) -> ComplexSpectrum:
    """Direct double-sum DFT of the zero-padded plane; correctness reference for fft2."""
    if height < 1 or width < 1:
        raise DimensionError("target dims must be >= 1")
    padded = _pad_plane(_as_plane(plane), height, width)
    out = _dft2_direct(padded, inverse=False)
    return ComplexSpectrum(out.real, out.imag)


# ---------------------------------------------------------------------------
# cyclic convolution
# ---------------------------------------------------------------------------

def cyclic_conv2(x, kernel) -> np.ndarray:
    """Single-plane convolution with wrap-around padding.

    y[r, c] = sum_{p, q} kernel[p, q] * x[(r - p) mod H, (c - q) mod W]
    """
    xp = _as_plane(x)
    wp = _as_plane(kernel)
    if wp.shape[0] > xp.shape[0] or wp.shape[1] > xp.shape[1]:
        raise DimensionError(f"kernel {wp.shape} larger than plane {xp.shape}")
    y = np.zeros_like(xp)
    for p in range(wp.shape[0]):
        for q in range(wp.shape[1]):
            y += wp[p, q] * np.roll(xp, (p, q), axis=(0, 1))
    return y


def cyclic_conv_batch(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Batched multi-channel cyclic convolution.

    weights: [m, n, kh, kw]; x: [B, n, H, W] -> [B, m, H, W].
    """
    m, n, kh, kw = weights.shape
    if x.ndim != 4 or x.shape[1] != n:
        raise DimensionError(f"input {x.shape} does not match bank with {n} in-channels")
    if kh > x.shape[2] or kw > x.shape[3]:
        raise DimensionError(f"kernel {kh}x{kw} larger than plane {x.shape[2:]}")
    if kh == 1 and kw == 1:
        return np.einsum("ij,bjhw->bihw", weights[:, :, 0, 0], x, optimize=True)
    y = np.zeros((x.shape[0], m, x.shape[2], x.shape[3]), dtype=np.float64)
    for p in range(kh):
        for q in range(kw):
            y += np.einsum(
                "ij,bjhw->bihw", weights[:, :, p, q], np.roll(x, (p, q), axis=(2, 3)),
                optimize=True,
            )
    return y


def mimo_conv(bank: KernelBank, signal: MultiChannelSignal) -> MultiChannelSignal:
    """Multi-in multi-out cyclic convolution: y_i = sum_j w_ij * x_j."""
    if bank.in_channels != signal.channels:
        raise DimensionError(
            f"bank expects {bank.in_channels} channels, signal has {signal.channels}"
        )
    y = cyclic_conv_batch(bank.data, signal.data[None])[0]
    return MultiChannelSignal(y)


# ---------------------------------------------------------------------------
# channel norms
# ---------------------------------------------------------------------------

def channel_norms(signal: MultiChannelSignal) -> np.ndarray:
    """Euclidean norm of each channel plane."""
    flat = signal.data.reshape(signal.channels, -1)
    return np.sqrt(np.einsum("ij,ij->i", flat, flat))


def channel_sup_norm(signal: MultiChannelSignal) -> float:
    """Largest per-channel Euclidean norm."""
    return float(channel_norms(signal).max())


def channel_support_count(signal: MultiChannelSignal, eps: float = 0.0) -> int:
    """Number of channels with norm strictly above eps."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return int((channel_norms(signal) > eps).sum())


# ---------------------------------------------------------------------------
# .sant container
# ---------------------------------------------------------------------------

def save_sant(path, array) -> None:
    """Write `array` as one JSON header line plus a little-endian f32 payload."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = {"shape": list(arr.shape), "dtype": "f32", "order": "row-major"}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("ascii") + b"\n")
        fh.write(arr.tobytes(order="C"))


def load_sant(path) -> np.ndarray:
    """Read a `.sant` file; rejects bad headers and payload-length mismatches."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ValueError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: bad header: {exc}") from exc
    if header.get("dtype") != "f32" or header.get("order") != "row-major":
        raise ValueError(f"{path}: unsupported dtype/order in header {header}")
    shape = header.get("shape")
    if (
        not isinstance(shape, list)
        or not shape
        or not all(isinstance(d, int) and d >= 1 for d in shape)
    ):
        raise ValueError(f"{path}: bad shape {shape!r}")
    payload = raw[nl + 1:]
    expected = 4 * int(np.prod(shape))
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload length mismatch: expected {expected} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)

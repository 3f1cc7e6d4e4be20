"""Dense matrix oracles for the operator-norm routes.

Everything here materializes the convolution as an explicit matrix and asks
LAPACK for the top singular value. That is intentionally a different route
from the production code (Fourier peaks, per-bin power iteration), so the
two can cross-check each other. Constructions are size-guarded; these are
references for small problems, not tools.
"""

from __future__ import annotations

import numpy as np

from .operator_norms import SizeGuardError
from .tensor_core import DimensionError, KernelBank, _as_plane, pad_bank

# cap on entries of any dense matrix assembled here
ENTRY_GUARD = 1_000_000


def build_circulant_matrix(kernel, height: int, width: int) -> np.ndarray:
    """(H*W) x (H*W) matrix acting on row-major flattened planes exactly like
    cyclic convolution with `kernel`."""
    if height < 1 or width < 1:
        raise DimensionError("target dims must be >= 1")
    entries = (height * width) ** 2
    if entries > ENTRY_GUARD:
        raise SizeGuardError(
            f"circulant would hold {entries} entries (> {ENTRY_GUARD})"
        )
    wp = pad_bank(_as_plane(kernel)[None, None], height, width)[0, 0]
    row_diff = (np.arange(height)[:, None] - np.arange(height)[None, :]) % height
    col_diff = (np.arange(width)[:, None] - np.arange(width)[None, :]) % width
    mat = wp[row_diff[:, None, :, None], col_diff[None, :, None, :]]
    return mat.reshape(height * width, height * width)


def build_block_operator(bank: KernelBank, height: int, width: int) -> np.ndarray:
    """(m*H*W) x (n*H*W) block matrix of per-filter circulant blocks."""
    m, n = bank.out_channels, bank.in_channels
    hw = height * width
    entries = m * hw * n * hw
    if entries > ENTRY_GUARD:
        raise SizeGuardError(
            f"block operator would hold {entries} entries (> {ENTRY_GUARD})"
        )
    out = np.zeros((m * hw, n * hw))
    for i in range(m):
        for j in range(n):
            out[i * hw:(i + 1) * hw, j * hw:(j + 1) * hw] = build_circulant_matrix(
                bank.filter(i, j), height, width
            )
    return out


def top_singular_value(matrix: np.ndarray) -> float:
    """LAPACK top singular value; the dense reference."""
    return float(np.linalg.svd(np.asarray(matrix, dtype=np.float64),
                               compute_uv=False)[0])


def oracle_san_norm(bank: KernelBank, height: int, width: int) -> float:
    """Max over filters of the top singular value of the filter's circulant."""
    best = 0.0
    for i in range(bank.out_channels):
        for j in range(bank.in_channels):
            best = max(
                best,
                top_singular_value(build_circulant_matrix(bank.filter(i, j), height, width)),
            )
    return best


def oracle_exact_norm(bank: KernelBank, height: int, width: int) -> float:
    """Top singular value of the explicit block operator."""
    return top_singular_value(build_block_operator(bank, height, width))

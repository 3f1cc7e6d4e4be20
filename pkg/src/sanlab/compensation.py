"""Compensation factor for subset-sampled norm estimates.

Peak Fourier magnitudes of the filters behave like iid draws whose maximum
grows with the number of filters looked at; the expected maximum of k unit
exponentials is the harmonic number H_k. Estimating the bank maximum from a
rate-r subset therefore underestimates it by roughly
H_total / H_round(total*r), which is the factor applied here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import philox


def harmonic_expected_max(k: int) -> float:
    """Expected maximum of k iid unit exponentials: the harmonic number H_k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.fsum(1.0 / i for i in range(1, k + 1))


def subset_size(total: int, rate: float) -> int:
    """round(total * rate) with round-half-to-even; must be >= 1."""
    if total < 1:
        raise ValueError("total must be >= 1")
    if not (0.0 < rate <= 1.0):
        raise ValueError("rate must be in (0, 1]")
    k = round(total * rate)
    if k < 1:
        raise ValueError(f"subset of {total} filters at rate {rate} is empty")
    return k


def compensation_factor(total: int, rate: float) -> float:
    """H_total / H_k with k = round(total * rate); equals 1 when rate == 1."""
    k = subset_size(total, rate)
    return harmonic_expected_max(total) / harmonic_expected_max(k)


def mc_expected_max(k: int, trials: int, seed: int = 0) -> float:
    """Monte Carlo estimate of E[max of k unit exponentials]; reference for
    harmonic_expected_max."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = philox(seed)
    chunk = max(1, int(20_000_000 // k))
    total = 0.0
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        total += float(rng.exponential(size=(t, k)).max(axis=1).sum())
        done += t
    return total / trials


@dataclass
class SubsetPlan:
    """A reproducible choice of filter indices out of a bank's m*n filters."""

    total: int
    rate: float
    indices: np.ndarray
    seed: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)
        k = subset_size(self.total, self.rate)
        if self.indices.ndim != 1 or len(self.indices) != k:
            raise ValueError(
                f"plan must hold {k} indices for total={self.total}, rate={self.rate}"
            )
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValueError("plan indices must be distinct")
        if not np.all(np.diff(self.indices) > 0):
            raise ValueError("plan indices must be sorted ascending")
        if self.indices.min() < 0 or self.indices.max() >= self.total:
            raise ValueError("plan indices out of range")


def sample_filter_subset(m: int, n: int, rate: float, seed: int) -> SubsetPlan:
    """Uniform without-replacement subset of the m*n filter slots."""
    if m < 1 or n < 1:
        raise ValueError("bank dims must be >= 1")
    total = m * n
    k = subset_size(total, rate)
    rng = philox(seed)
    indices = np.sort(rng.choice(total, size=k, replace=False))
    return SubsetPlan(total=total, rate=rate, indices=indices, seed=seed)

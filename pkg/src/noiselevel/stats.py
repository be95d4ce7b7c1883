"""Empirical CDFs, histogram binning and the two-sample Kolmogorov-Smirnov test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = ["EcdfSummary", "KsResult", "ecdf", "histogram", "kolmogorov_q", "ks_two_sample"]


def _samples(values: ArrayLike, what: str = "samples") -> NDArray[np.float64]:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{what} must be nonempty")
    if np.isnan(arr).any():
        raise ValueError(f"{what} contain NaN")
    return arr


@dataclass(frozen=True)
class EcdfSummary:
    """Right-continuous step function ``F(x) = #{samples <= x} / N``."""

    sorted_samples: NDArray[np.float64]

    def __len__(self) -> int:
        return self.sorted_samples.size

    def __call__(self, x: ArrayLike) -> float | NDArray[np.float64]:
        idx = np.searchsorted(self.sorted_samples, x, side="right")
        out = idx / self.sorted_samples.size
        return float(out) if np.ndim(out) == 0 else out


def ecdf(samples: ArrayLike) -> EcdfSummary:
    s = np.sort(_samples(samples))
    s.setflags(write=False)
    return EcdfSummary(s)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n1: int
    n2: int


def kolmogorov_q(lam: float, term_tol: float = 1e-12, max_terms: int = 100_000) -> float:
    """Survival function ``Q(lam) = 2 sum_{j>=1} (-1)**(j-1) exp(-2 j**2 lam**2)``.

    The series stops once a term drops below ``term_tol``. For ``lam < 1`` the
    alternating series converges slowly and loses monotonicity to rounding,
    so the equivalent theta-function form
    ``1 - sqrt(2 pi) / lam * sum_{j>=1} exp(-(2j-1)**2 pi**2 / (8 lam**2))``
    is summed instead.
    """
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        a = -math.pi**2 / (8.0 * lam * lam)
        total = 0.0
        for j in range(1, max_terms + 1):
            term = math.exp(a * (2 * j - 1) ** 2)
            total += term
            if term < term_tol * 1e-4:
                break
        return min(max(1.0 - math.sqrt(2.0 * math.pi) / lam * total, 0.0), 1.0)
    a = -2.0 * lam * lam
    total, sign = 0.0, 1.0
    for j in range(1, max_terms + 1):
        term = math.exp(a * j * j)
        total += sign * term
        if term < term_tol:
            break
        sign = -sign
    return min(max(2.0 * total, 0.0), 1.0)


def ks_two_sample(a: ArrayLike, b: ArrayLike) -> KsResult:
    """Two-sample KS statistic with the asymptotic p-value.

    ``D`` is the largest gap between the two ECDFs, evaluated at every sample
    point. With ``ne = n1 n2 / (n1 + n2)`` the p-value is
    ``Q((sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D)``.
    """
    x = np.sort(_samples(a, "first sample"))
    y = np.sort(_samples(b, "second sample"))
    n1, n2 = x.size, y.size
    grid = np.concatenate([x, y])
    cdf1 = np.searchsorted(x, grid, side="right") / n1
    cdf2 = np.searchsorted(y, grid, side="right") / n2
    d = float(np.max(np.abs(cdf1 - cdf2)))
    ne = n1 * n2 / (n1 + n2)
    root = math.sqrt(ne)
    p = kolmogorov_q((root + 0.12 + 0.11 / root) * d)
    return KsResult(d, p, n1, n2)


def histogram(samples: ArrayLike, bin_count: int) -> list[tuple[float, int]]:
    """Equal-width bins over ``[min, max]`` as ``(center, count)`` pairs.

    When all samples are equal the bins span a unit interval centred on the
    common value, so the whole mass lands in one bin.
    """
    arr = _samples(samples)
    if int(bin_count) != bin_count or bin_count < 1:
        raise ValueError("bin_count must be a positive integer")
    counts, edges = np.histogram(arr, bins=int(bin_count))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return [(float(c), int(k)) for c, k in zip(centers, counts)]

"""Differencing tables and noise-level estimation from function values.

The estimator follows Hamming's difference-table technique as popularised by
ECNoise: the k-th column of forward differences of iid noise has variance
``eps_f**2 / gamma(k)``, so each column yields an estimate of the noise level.
A pair of heuristics decides which order (if any) to trust.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "DifferenceTable",
    "HeuristicOptions",
    "NoiseEstimate",
    "OrderEstimate",
    "PointSet",
    "Status",
    "TooFewPointsError",
    "build_table",
    "estimate_at_order",
    "estimate_noise",
    "gamma",
    "optimal_fd_interval",
]


class TooFewPointsError(ValueError):
    """Raised when a value or point sequence is too short for the request."""


class Status(str, enum.Enum):
    OK = "Ok"
    SPREAD_TOO_LARGE = "SpreadTooLarge"
    NO_AGREEMENT = "NoAgreement"
    TOO_FEW_POINTS = "TooFewPoints"


@dataclass(frozen=True)
class DifferenceTable:
    """Triangular table of forward differences.

    ``columns[k - 1]`` holds the k-th order differences
    ``Delta^k f(y^j)`` for ``j = 0 .. N - 1 - k``.
    """

    values: NDArray[np.float64]
    columns: tuple[NDArray[np.float64], ...]

    @property
    def max_order(self) -> int:
        return len(self.columns)

    def column(self, k: int) -> NDArray[np.float64]:
        if k == 0:
            return self.values
        if not 1 <= k <= self.max_order:
            raise ValueError(f"order {k} outside 0..{self.max_order}")
        return self.columns[k - 1]


class OrderEstimate(NamedTuple):
    order: int
    estimate: float
    sign_change: bool


@dataclass(frozen=True)
class HeuristicOptions:
    """Thresholds for accepting or declining an estimate.

    Attributes:
        spread_factor: decline when ``max f - min f`` exceeds this fraction of
            ``max(|max f|, |min f|)``.
        agreement_factor: three consecutive per-order estimates must lie
            within this multiplicative factor of each other.
    """

    spread_factor: float = 0.1
    agreement_factor: float = 4.0


@dataclass(frozen=True)
class NoiseEstimate:
    per_order: tuple[OrderEstimate, ...]
    status: Status
    selected_order: int | None = None
    value: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is Status.OK

    def to_dict(self) -> dict:
        return {
            "per_order": [
                {"order": e.order, "estimate": e.estimate, "sign_change": e.sign_change}
                for e in self.per_order
            ],
            "selected_order": self.selected_order,
            "value": self.value,
            "status": self.status.value,
        }


@dataclass(frozen=True)
class PointSet:
    """Ordered sample points ``y^0 .. y^{N-1}``; ``y^0`` is the base point."""

    points: NDArray[np.float64] = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array of shape (N, n)")
        if pts.shape[0] < 2:
            raise TooFewPointsError("a point set needs at least 2 points")
        if pts.shape[1] < 1:
            raise ValueError("points must have dimension >= 1")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def base(self) -> NDArray[np.float64]:
        return self.points[0]

    @cached_property
    def h_consecutive(self) -> float:
        """Largest Euclidean gap between consecutive points."""
        return float(np.max(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    @cached_property
    def h_radius(self) -> float:
        """Largest infinity-norm distance from the base point."""
        return float(np.max(np.abs(self.points[1:] - self.points[0])))

    def translated(self) -> NDArray[np.float64]:
        return self.points - self.points[0]


def build_table(values: ArrayLike) -> DifferenceTable:
    """Build the full forward-difference table of ``values``.

    Raises:
        TooFewPointsError: if fewer than two values are given.
    """
    vals = np.array(values, dtype=float).ravel()
    if vals.size < 2:
        raise TooFewPointsError("a difference table needs at least 2 values")
    vals.setflags(write=False)
    columns = []
    col = vals
    for _ in range(vals.size - 1):
        col = col[1:] - col[:-1]
        col.setflags(write=False)
        columns.append(col)
    return DifferenceTable(values=vals, columns=tuple(columns))


def gamma(k: int) -> float:
    """Return ``(k!)**2 / (2k)!`` via the ratio recurrence (no factorial overflow)."""
    if int(k) != k or k < 1:
        raise ValueError(f"gamma(k) requires an integer k >= 1, got {k!r}")
    g = 1.0
    for j in range(1, int(k) + 1):
        g *= j / (2.0 * (2 * j - 1))
    return g


def estimate_at_order(table: DifferenceTable, k: int) -> float:
    """Noise-level estimate from the k-th column: ``sqrt(gamma(k) * mean(col**2))``."""
    if not 1 <= k <= table.max_order:
        raise ValueError(f"order {k} outside 1..{table.max_order}")
    col = table.column(k)
    return float(np.sqrt(gamma(k) * np.mean(col * col)))


def _has_sign_change(col: NDArray[np.float64]) -> bool:
    return bool(col.min() < 0.0 < col.max())


def estimate_noise(
    values: ArrayLike, options: HeuristicOptions | None = None
) -> NoiseEstimate:
    """Estimate the noise level of ``values`` sampled along a point sequence.

    All per-order estimates are always reported. The estimate is declined
    (``value == 0``) when the spread of ``values`` is too large relative to
    their magnitude, or when no order ``k`` in ``1..N-3`` has a sign change in
    its column and agrees with orders ``k+1`` and ``k+2`` within
    ``options.agreement_factor``.
    """
    options = options or HeuristicOptions()
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size < 4:
        raise TooFewPointsError(f"need at least 4 values, got {vals.size}")

    table = build_table(vals)
    per_order = tuple(
        OrderEstimate(k, estimate_at_order(table, k), _has_sign_change(table.column(k)))
        for k in range(1, table.max_order + 1)
    )

    fmin, fmax = float(vals.min()), float(vals.max())
    if fmax - fmin > options.spread_factor * max(abs(fmax), abs(fmin)):
        return NoiseEstimate(per_order, Status.SPREAD_TOO_LARGE)

    levels = np.array([e.estimate for e in per_order])
    for k in range(1, vals.size - 2):
        window = levels[k - 1 : k + 2]
        if window.max() <= options.agreement_factor * window.min() and per_order[k - 1].sign_change:
            return NoiseEstimate(per_order, Status.OK, selected_order=k, value=float(levels[k - 1]))
    return NoiseEstimate(per_order, Status.NO_AGREEMENT)


def optimal_fd_interval(eps_f: float, mu: float) -> float:
    """Forward-difference interval ``8**(1/4) * sqrt(eps_f / mu)`` for a noisy function.

    ``mu`` is a rough magnitude of the second directional derivative.
    """
    if not (eps_f > 0 and mu > 0):
        raise ValueError("eps_f and mu must both be positive")
    return 8.0**0.25 * float(np.sqrt(eps_f / mu))

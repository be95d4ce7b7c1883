"""Polynomial curves through point sets on the integer nodes ``t = 0, 1, ..., m``.

Every coordinate of a point set ``y^0 .. y^m`` is interpolated by its unique
degree-``m`` polynomial, written in Newton form. Computations are carried out
in coordinates translated so that ``y^0`` sits at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize_scalar

from .diff_engine import PointSet

__all__ = [
    "DerivativeBound",
    "NewtonCurve",
    "derivative_bound",
    "divided_differences",
    "eval_curve",
    "lagrange_basis",
    "lagrange_derivative_max",
    "newton_curve",
]


def divided_differences(samples: ArrayLike) -> NDArray[np.float64]:
    """Leading divided differences ``[g0], [g0, g1], ..., [g0, ..., gm]``.

    Nodes are the integers ``0..m``. A 2-d input of shape ``(m + 1, n)`` is
    processed column by column and returns shape ``(m + 1, n)``.
    """
    tri = np.array(samples, dtype=float)
    if tri.shape[0] < 1:
        raise ValueError("divided differences need at least one sample")
    out = np.empty_like(tri)
    out[0] = tri[0]
    for k in range(1, tri.shape[0]):
        tri = (tri[1:] - tri[:-1]) / k
        out[k] = tri[0]
    return out


@dataclass(frozen=True)
class NewtonCurve:
    """Newton-form interpolating curve.

    ``coeffs[i, k]`` is the k-th divided difference of coordinate ``i``;
    ``coeffs[:, 0]`` equals the base point.
    """

    coeffs: NDArray[np.float64]

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def order(self) -> int:
        return self.coeffs.shape[1] - 1

    def __call__(self, t: float) -> NDArray[np.float64]:
        return eval_curve(self, t)

    def derivative(self, t: ArrayLike, k: int) -> NDArray[np.float64]:
        """k-th ``t``-derivative of every coordinate at the times ``t``, shape ``(n, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((self.dim, t.size))
        for j in range(k, self.order + 1):
            omega = Polynomial.fromroots(np.arange(j)).deriv(k)
            out += np.outer(self.coeffs[:, j], omega(t))
        return out


def newton_curve(points: PointSet | ArrayLike) -> NewtonCurve:
    """Newton-form interpolant through ``points`` at ``t = 0..m``."""
    if not isinstance(points, PointSet):
        points = PointSet(points)
    coeffs = divided_differences(points.translated()).T
    coeffs[:, 0] = points.base
    coeffs.setflags(write=False)
    return NewtonCurve(coeffs)


def eval_curve(curve: NewtonCurve, t: float) -> NDArray[np.float64]:
    """Evaluate the curve at ``t`` by nested multiplication with ``(t - l)``."""
    c = curve.coeffs
    if curve.order == 0:
        return c[:, 0].copy()
    acc = c[:, -1].copy()
    for ell in range(curve.order - 1, 0, -1):
        acc = c[:, ell] + (t - ell) * acc
    return c[:, 0] + t * acc


@lru_cache(maxsize=None)
def lagrange_basis(m: int) -> tuple[Polynomial, ...]:
    """Lagrange basis polynomials ``L_0 .. L_m`` on the nodes ``0..m``."""
    nodes = np.arange(m + 1, dtype=float)
    basis = []
    for j in range(m + 1):
        others = np.delete(nodes, j)
        basis.append(Polynomial.fromroots(others) / np.prod(j - others))
    return tuple(basis)


def _max_abs_on_interval(poly: Polynomial, m: int, grid_resolution: int) -> float:
    t = np.linspace(0.0, float(m), grid_resolution + 1)
    vals = np.abs(poly(t))
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
    if hi > lo:
        res = minimize_scalar(
            lambda s: -abs(poly(s)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
        )
        best = max(best, -float(res.fun))
    return best


def lagrange_derivative_max(m: int, k: int, grid_resolution: int = 1000) -> float:
    """``max_j max_{t in [0, m]} |L_j^{(k)}(t)|`` for the unit-spaced basis.

    The maximum is found on a uniform grid and polished locally around the
    best grid point. It depends on ``m`` and ``k`` only.
    """
    if m < 1 or not 0 <= k <= m:
        raise ValueError(f"need m >= 1 and 0 <= k <= m, got m={m}, k={k}")
    if grid_resolution < 100:
        raise ValueError("grid_resolution must be at least 100")
    return max(_max_abs_on_interval(L.deriv(k), m, grid_resolution) for L in lagrange_basis(m))


@lru_cache(maxsize=None)
def _lagrange_derivative_sums(m: int, grid_resolution: int) -> tuple[float, ...]:
    return tuple(
        sum(_max_abs_on_interval(L.deriv(k), m, grid_resolution) for L in lagrange_basis(m))
        for k in range(1, m + 1)
    )


@dataclass(frozen=True)
class DerivativeBound:
    """Bounds ``per_order[k - 1] >= max_{i, t} |p_i^{(k)}(t)|`` for ``k = 1..m``."""

    per_order: tuple[float, ...]
    h_radius: float


def derivative_bound(points: PointSet | ArrayLike, grid_resolution: int = 2000) -> DerivativeBound:
    """Bound the curve's ``t``-derivatives through the infinity-norm radius of ``points``.

    With ``y^0`` translated to the origin, ``p_i(t) = sum_j y^j_i L_j(t)`` and
    ``|y^j_i| <= h_radius``, so ``h_radius * sum_j max_t |L_j^{(k)}|`` bounds
    ``|p_i^{(k)}|``.
    """
    if not isinstance(points, PointSet):
        points = PointSet(points)
    m = len(points) - 1
    sums = _lagrange_derivative_sums(m, grid_resolution)
    h = points.h_radius
    # pad covers the residual error of grid-plus-polish maxima
    return DerivativeBound(tuple(h * s * (1 + 1e-6) for s in sums), h)

"""Two-phase dense tableau simplex for tiny bounded linear programs.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub`` and
``lower <= x <= upper`` (``lower`` finite, ``upper`` may be ``inf``).
Bland's rule is used throughout, so degenerate problems cannot cycle.
Callers are expected to pass data scaled to order one.

The kernel is compiled with numba because the selection search solves many
thousands of these programs per instance.
"""

from __future__ import annotations

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2, 3


class LinearProgramError(RuntimeError):
    pass


@numba.njit(cache=True)
def _pivot(T, z, basis, row, col):
    ncol = T.shape[1]
    piv = T[row, col]
    for k in range(ncol):
        T[row, k] /= piv
    for r in range(T.shape[0]):
        if r != row:
            f = T[r, col]
            if f != 0.0:
                for k in range(ncol):
                    T[r, k] -= f * T[row, k]
    f = z[col]
    if f != 0.0:
        for k in range(ncol):
            z[k] -= f * T[row, k]
    basis[row] = col


@numba.njit(cache=True)
def _iterate(T, z, basis, ncols, tol, max_iter):
    p = T.shape[0]
    last = T.shape[1] - 1
    for _ in range(max_iter):
        col = -1
        for k in range(ncols):
            if z[k] < -tol:
                col = k
                break
        if col < 0:
            return OPTIMAL
        best = np.inf
        for r in range(p):
            if T[r, col] > tol:
                ratio = T[r, last] / T[r, col]
                if ratio < best:
                    best = ratio
        if best == np.inf:
            return UNBOUNDED
        slack = tol * max(1.0, abs(best))
        row = -1
        for r in range(p):
            if T[r, col] > tol and T[r, last] / T[r, col] <= best + slack:
                if row < 0 or basis[r] < basis[row]:
                    row = r
        _pivot(T, z, basis, row, col)
    return ITERATION_LIMIT


@numba.njit(cache=True)
def _solve(c, A, b, lower, upper, tol, max_iter):
    n = c.size
    m_ub = A.shape[0]
    n_fin = 0
    for i in range(n):
        if np.isfinite(upper[i]):
            n_fin += 1
    p = m_ub + n_fin
    rhs = np.empty(p)
    A2 = np.zeros((p, n))
    for r in range(m_ub):
        s = b[r]
        for i in range(n):
            A2[r, i] = A[r, i]
            s -= A[r, i] * lower[i]
        rhs[r] = s
    r = m_ub
    for i in range(n):
        if np.isfinite(upper[i]):
            A2[r, i] = 1.0
            rhs[r] = upper[i] - lower[i]
            r += 1

    k = 0
    for r in range(p):
        if rhs[r] < 0:
            k += 1
    ncols = n + p + k
    T = np.zeros((p, ncols + 1))
    basis = np.empty(p, dtype=np.int64)
    a = 0
    rhs_scale = 1.0
    for r in range(p):
        sign = -1.0 if rhs[r] < 0 else 1.0
        for i in range(n):
            T[r, i] = sign * A2[r, i]
        T[r, n + r] = sign
        T[r, ncols] = sign * rhs[r]
        rhs_scale = max(rhs_scale, abs(rhs[r]))
        if sign < 0:
            T[r, n + p + a] = 1.0
            basis[r] = n + p + a
            a += 1
        else:
            basis[r] = n + r

    if k > 0:
        z = np.zeros(ncols + 1)
        for j in range(n + p, ncols):
            z[j] = 1.0
        for r in range(p):
            if basis[r] >= n + p:
                for j in range(ncols + 1):
                    z[j] -= T[r, j]
        status = _iterate(T, z, basis, ncols, tol, max_iter)
        if status != OPTIMAL:
            return np.zeros(n), status
        if -z[ncols] > tol * rhs_scale:
            return np.zeros(n), INFEASIBLE
        # drive artificial columns out of the basis, dropping redundant rows
        keep = np.ones(p, dtype=np.bool_)
        for r in range(p):
            if basis[r] >= n + p:
                col = -1
                for j in range(n + p):
                    if abs(T[r, j]) > tol:
                        col = j
                        break
                if col >= 0:
                    _pivot(T, z, basis, r, col)
                else:
                    keep[r] = False
        rows = np.flatnonzero(keep)
        T2 = np.empty((rows.size, n + p + 1))
        for ri in range(rows.size):
            for j in range(n + p):
                T2[ri, j] = T[rows[ri], j]
            T2[ri, n + p] = T[rows[ri], ncols]
        T = T2
        basis = basis[rows].copy()
        ncols = n + p

    z = np.zeros(ncols + 1)
    for j in range(n):
        z[j] = c[j]
    for r in range(T.shape[0]):
        if basis[r] < n:
            cb = c[basis[r]]
            if cb != 0.0:
                for j in range(ncols + 1):
                    z[j] -= cb * T[r, j]
    status = _iterate(T, z, basis, ncols, tol, max_iter)
    x = lower.copy()
    for r in range(T.shape[0]):
        if basis[r] < n:
            x[basis[r]] += T[r, ncols]
    return x, status


def solve_lp(
    c: ArrayLike,
    A_ub: ArrayLike,
    b_ub: ArrayLike,
    lower: ArrayLike,
    upper: ArrayLike,
    tol: float = 1e-10,
    max_iter: int = 5000,
) -> tuple[NDArray[np.float64], float]:
    """Return ``(x, c @ x)`` at an optimal vertex.

    Raises:
        LinearProgramError: if the problem is infeasible or unbounded.
    """
    c = np.ascontiguousarray(c, dtype=float).ravel()
    A = np.ascontiguousarray(np.atleast_2d(np.asarray(A_ub, dtype=float)))
    b = np.ascontiguousarray(b_ub, dtype=float).ravel()
    lower = np.ascontiguousarray(lower, dtype=float).ravel()
    upper = np.ascontiguousarray(upper, dtype=float).ravel()
    if not np.all(np.isfinite(lower)):
        raise ValueError("lower bounds must be finite")
    x, status = _solve(c, A, b, lower, upper, float(tol), int(max_iter))
    if status == INFEASIBLE:
        raise LinearProgramError("linear program is infeasible")
    if status == UNBOUNDED:
        raise LinearProgramError("linear program is unbounded")
    if status == ITERATION_LIMIT:
        raise LinearProgramError("simplex iteration limit reached")
    return x, float(c @ x)


@numba.njit(cache=True)
def minmax_coords(A, B, lo, hi, cutoff):
    """Per-coordinate min-max fit ``min_u max_j |A[j] @ u + B[j, i]|``.

    ``u`` ranges over the box ``lo[:, i] <= u <= hi[:, i]`` for coordinate
    ``i``. Returns ``(U, value, lp_value)``: ``U`` has shape ``(F, n)``,
    ``value`` is the objective recomputed at the clipped solution (an upper
    bound) and ``lp_value`` the largest simplex optimum over coordinates,
    lowered by a margin that covers the solver tolerance (a lower bound). Both are ``inf`` when the
    simplex fails or ``lp_value`` exceeds ``cutoff``; coordinates after the
    cutoff is crossed are skipped.
    """
    m, F = A.shape
    n = B.shape[1]
    U = np.zeros((F, n))
    scale = 0.0
    for f in range(F):
        for i in range(n):
            scale = max(scale, abs(lo[f, i]), abs(hi[f, i]))
    for j in range(m):
        for i in range(n):
            scale = max(scale, abs(B[j, i]))
    if scale == 0.0:
        return U, 0.0, 0.0
    c = np.zeros(F + 1)
    c[F] = 1.0
    G = np.zeros((2 * m, F + 1))
    for j in range(m):
        for f in range(F):
            G[j, f] = A[j, f]
            G[m + j, f] = -A[j, f]
        G[j, F] = -1.0
        G[m + j, F] = -1.0
    rhs = np.empty(2 * m)
    lower = np.empty(F + 1)
    upper = np.empty(F + 1)
    lower[F] = 0.0
    upper[F] = np.inf
    worst = 0.0
    lp_worst = 0.0
    for i in range(n):
        for j in range(m):
            rhs[j] = -B[j, i] / scale
            rhs[m + j] = B[j, i] / scale
        for f in range(F):
            lower[f] = lo[f, i] / scale
            upper[f] = hi[f, i] / scale
        x, status = _solve(c, G, rhs, lower, upper, 1e-10, 5000)
        if status != OPTIMAL:
            return U, np.inf, np.inf
        lp_worst = max(lp_worst, (x[F] - 1e-9) * scale)
        if lp_worst > cutoff:
            return U, np.inf, np.inf
        for f in range(F):
            U[f, i] = min(max(x[f] * scale, lo[f, i]), hi[f, i])
        for j in range(m):
            s = B[j, i]
            for f in range(F):
                s += A[j, f] * U[f, i]
            worst = max(worst, abs(s))
    return U, worst, lp_worst


@numba.njit(cache=True)
def slot_intervals(A, a, B, lo, hi, xlo, xhi, t):
    """Per-coordinate range of ``x`` keeping ``max_j |A[j] @ u + a[j] x + B[j, i]| <= t``.

    ``u`` ranges over the box ``lo[:, i] <= u <= hi[:, i]`` and ``x`` over
    ``[xlo[i], xhi[i]]``. Because coordinates do not interact, the returned
    intervals ``[L[i], U[i]]`` describe the feasible ``x`` exactly (up to a
    small outward margin). An empty range has ``L[i] > U[i]``.
    """
    m, F = A.shape
    n = B.shape[1]
    L = np.empty(n)
    U = np.empty(n)
    scale = t
    for i in range(n):
        scale = max(scale, abs(xlo[i]), abs(xhi[i]))
        for f in range(F):
            scale = max(scale, abs(lo[f, i]), abs(hi[f, i]))
        for j in range(m):
            scale = max(scale, abs(B[j, i]))
    if scale == 0.0:
        scale = 1.0
    teff = t / scale * (1 + 1e-9) + 1e-9
    G = np.zeros((2 * m, F + 1))
    for j in range(m):
        for f in range(F):
            G[j, f] = A[j, f]
            G[m + j, f] = -A[j, f]
        G[j, F] = a[j]
        G[m + j, F] = -a[j]
    rhs = np.empty(2 * m)
    lower = np.empty(F + 1)
    upper = np.empty(F + 1)
    c = np.zeros(F + 1)
    for i in range(n):
        for j in range(m):
            rhs[j] = teff - B[j, i] / scale
            rhs[m + j] = teff + B[j, i] / scale
        for f in range(F):
            lower[f] = lo[f, i] / scale
            upper[f] = hi[f, i] / scale
        lower[F] = xlo[i] / scale
        upper[F] = xhi[i] / scale
        c[F] = 1.0
        x, status = _solve(c, G, rhs, lower, upper, 1e-10, 5000)
        if status == INFEASIBLE:
            L[:] = np.inf
            U[:] = -np.inf
            return L, U
        if status != OPTIMAL:
            L[i] = xlo[i]
            U[i] = xhi[i]
            continue
        L[i] = (x[F] - 1e-8) * scale
        c[F] = -1.0
        x, status = _solve(c, G, rhs, lower, upper, 1e-10, 5000)
        U[i] = (x[F] + 1e-8) * scale if status == OPTIMAL else xhi[i]
    return L, U

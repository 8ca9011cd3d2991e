"""Periodic (cyclic) tridiagonal solves.

Matrix convention for size N, arrays sub, diag, sup of shape (..., N):

    M[i, i]   = diag[i]
    M[i, i-1] = sub[i]   (i >= 1)        M[0, N-1] = sub[0]   (corner)
    M[i, i+1] = sup[i]   (i <= N-2)      M[N-1, 0] = sup[N-1] (corner)

For N >= 3 the corners are removed with a rank-one Sherman-Morrison
correction and the remaining tridiagonal system is solved by the Thomas
algorithm, O(N) per right-hand side.  For N < 3 the corner entries collide
with the off-diagonals (indices mod N), so the matrix is assembled densely
with colliding entries summed.

Everything is batched: leading axes of the coefficient arrays and the
right-hand side broadcast against each other, and the O(N) loop runs over
the last axis only.  Coefficients are expected real (the use case is
diagonally dominant Crank-Nicolson matrices); right-hand sides may be
complex.  No pivoting is performed, so diagonal dominance is assumed.
"""

from __future__ import annotations

import numpy as np


def _dense_cyclic(sub, diag, sup):
    n = diag.shape[-1]
    batch = np.broadcast_shapes(sub.shape[:-1], diag.shape[:-1], sup.shape[:-1])
    m = np.zeros(batch + (n, n))
    sub = np.broadcast_to(sub, batch + (n,))
    sup = np.broadcast_to(sup, batch + (n,))
    m[..., np.arange(n), np.arange(n)] = diag
    for i in range(n):
        m[..., i, (i - 1) % n] += sub[..., i]
        m[..., i, (i + 1) % n] += sup[..., i]
    return m


class CyclicTridiagonal:
    """Factorized cyclic tridiagonal matrix for repeated solves."""

    def __init__(self, sub, diag, sup):
        sub = np.asarray(sub, dtype=np.float64)
        diag = np.asarray(diag, dtype=np.float64)
        sup = np.asarray(sup, dtype=np.float64)
        if sub.shape[-1] != diag.shape[-1] or sup.shape[-1] != diag.shape[-1]:
            raise ValueError("sub, diag, sup must share their last-axis length")
        self.n = diag.shape[-1]
        self.batch = np.broadcast_shapes(sub.shape[:-1], diag.shape[:-1], sup.shape[:-1])

        if self.n < 3:
            self._dense = _dense_cyclic(sub, diag, sup)
            return
        self._dense = None

        n = self.n
        gamma = -diag[..., 0]
        b_mod = np.broadcast_to(diag, self.batch + (n,)).copy()
        b_mod[..., 0] = diag[..., 0] - gamma
        b_mod[..., n - 1] = diag[..., n - 1] - sup[..., n - 1] * sub[..., 0] / gamma

        self._sub = np.broadcast_to(sub, self.batch + (n,))
        cp = np.empty_like(b_mod)
        inv = np.empty_like(b_mod)
        inv[..., 0] = 1.0 / b_mod[..., 0]
        cp[..., 0] = sup[..., 0] * inv[..., 0]
        for i in range(1, n):
            denom = b_mod[..., i] - self._sub[..., i] * cp[..., i - 1]
            inv[..., i] = 1.0 / denom
            if i < n - 1:
                cp[..., i] = sup[..., i] * inv[..., i]
        self._cp = cp
        self._inv = inv

        u = np.zeros(self.batch + (n,))
        u[..., 0] = gamma
        u[..., n - 1] = sup[..., n - 1]
        self._v_last = sub[..., 0] / gamma  # v = e_0 + (sub[0]/gamma) e_{n-1}
        z = self._thomas(u)
        self._z = z
        self._denom_sm = 1.0 + z[..., 0] + self._v_last * z[..., n - 1]

    def _thomas(self, d):
        n = self.n
        out_shape = np.broadcast_shapes(self.batch, d.shape[:-1]) + (n,)
        dp = np.empty(out_shape, dtype=np.result_type(d.dtype, np.float64))
        dp[..., 0] = d[..., 0] * self._inv[..., 0]
        for i in range(1, n):
            dp[..., i] = (d[..., i] - self._sub[..., i] * dp[..., i - 1]) * self._inv[..., i]
        for i in range(n - 2, -1, -1):
            dp[..., i] -= self._cp[..., i] * dp[..., i + 1]
        return dp

    def solve(self, rhs):
        rhs = np.asarray(rhs)
        if rhs.shape[-1] != self.n:
            raise ValueError(f"rhs last axis {rhs.shape[-1]} != system size {self.n}")
        if self._dense is not None:
            return np.linalg.solve(self._dense, rhs[..., None])[..., 0]
        y = self._thomas(rhs)
        scale = (y[..., 0] + self._v_last * y[..., self.n - 1]) / self._denom_sm
        return y - self._z * scale[..., None]


def solve_cyclic(sub, diag, sup, rhs):
    """One-shot cyclic tridiagonal solve; see module docstring for layout."""
    return CyclicTridiagonal(sub, diag, sup).solve(rhs)

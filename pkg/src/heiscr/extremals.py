"""Normal extremals of the right CC structure and of the penalized metrics.

Hamiltonian ``H = 1/2 sum((p_x + y p_z)^2 + p_y^2) + p_z^2 / (2L)`` (the last
term absent in the CC case).  Equations of motion::

    x' = p_x + y p_z,  y' = p_y,  z' = y.x' + p_z / L,
    p_y' = -(p_x + y p_z) p_z,  p_x' = p_z' = 0.

Integration is classical RK4 on a fixed grid together with the variational
equations, giving the endpoint and its exact (discrete) derivative with
respect to the initial covector.
"""

from __future__ import annotations

import numpy as np
from numba import njit

DEFAULT_STEPS = 4000


@njit(cache=True)
def _field(s, T, n, invL, ds, dT):
    y = s[n : 2 * n]
    px = s[2 * n + 1 : 3 * n + 1]
    py = s[3 * n + 1 : 4 * n + 1]
    pz = s[4 * n + 1]
    m = T.shape[1]
    zdot = pz * invL
    for i in range(n):
        ux = px[i] + y[i] * pz
        ds[i] = ux
        ds[n + i] = py[i]
        zdot += y[i] * ux
        ds[2 * n + 1 + i] = 0.0
        ds[3 * n + 1 + i] = -ux * pz
    ds[2 * n] = zdot
    ds[4 * n + 1] = 0.0
    for c in range(m):
        dpz = T[4 * n + 1, c]
        dz = dpz * invL
        for i in range(n):
            dy = T[n + i, c]
            dux = T[2 * n + 1 + i, c] + dy * pz + y[i] * dpz
            dT[i, c] = dux
            dT[n + i, c] = T[3 * n + 1 + i, c]
            dz += dy * (px[i] + y[i] * pz) + y[i] * dux
            dT[2 * n + 1 + i, c] = 0.0
            dT[3 * n + 1 + i, c] = -(dux * pz + (px[i] + y[i] * pz) * dpz)
        dT[2 * n, c] = dz
        dT[4 * n + 1, c] = 0.0


@njit(cache=True)
def _axpy(out, base, h, k):
    for i in range(base.size):
        out.flat[i] = base.flat[i] + h * k.flat[i]


@njit(cache=True)
def integrate(p0, covector, invL, steps):
    """Time-1 endpoint and ``d(endpoint)/d(covector)``."""
    N = p0.shape[0]
    n = (N - 1) // 2
    S = 2 * N
    s = np.empty(S)
    s[:N] = p0
    s[N:] = covector
    T = np.zeros((S, N))
    for c in range(N):
        T[N + c, c] = 1.0
    h = 1.0 / steps
    k1, k2, k3, k4, st = np.empty(S), np.empty(S), np.empty(S), np.empty(S), np.empty(S)
    K1, K2, K3, K4, Tt = np.empty((S, N)), np.empty((S, N)), np.empty((S, N)), np.empty((S, N)), np.empty((S, N))
    for _ in range(steps):
        _field(s, T, n, invL, k1, K1)
        _axpy(st, s, 0.5 * h, k1)
        _axpy(Tt, T, 0.5 * h, K1)
        _field(st, Tt, n, invL, k2, K2)
        _axpy(st, s, 0.5 * h, k2)
        _axpy(Tt, T, 0.5 * h, K2)
        _field(st, Tt, n, invL, k3, K3)
        _axpy(st, s, h, k3)
        _axpy(Tt, T, h, K3)
        _field(st, Tt, n, invL, k4, K4)
        for i in range(S):
            s[i] += (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
            for c in range(N):
                T[i, c] += (h / 6.0) * (K1[i, c] + 2 * K2[i, c] + 2 * K3[i, c] + K4[i, c])
    return s[:N].copy(), T[:N].copy()


def endpoint(p0, covector, L: float | None = None, steps: int = DEFAULT_STEPS):
    invL = 0.0 if L is None else 1.0 / float(L)
    return integrate(np.asarray(p0, dtype=float), np.asarray(covector, dtype=float), invL, steps)

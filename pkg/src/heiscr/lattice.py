"""Shortest paths on the Heisenberg lattice ``{(i h, j h, k h^2 / 2)}``.

Moves are left multiplications ``v -> g . v`` by short horizontal segments
``g = (alpha h, beta h, alpha.beta h^2 / 2)`` (the lift of the straight chord
from the identity), optionally plus pure vertical moves ``(0, 0, delta h^2/2)``.
Each move is an exact curve in the group, so every graph path is an actual
curve whose length is the sum of the edge weights.
"""

from __future__ import annotations

import heapq
import math
from functools import lru_cache

import numpy as np
from numba import njit, types
from numba.typed import Dict

MAX_EXPANSIONS = 50_000_000


@lru_cache(maxsize=None)
def planar_stencil(radius: int = 3) -> np.ndarray:
    """Primitive integer directions ``(a, b)`` with ``max(|a|, |b|) <= radius``."""
    out = []
    for a in range(-radius, radius + 1):
        for b in range(-radius, radius + 1):
            if (a or b) and math.gcd(a, b) == 1:
                out.append((a, b))
    out.sort(key=lambda v: math.atan2(v[1], v[0]))
    return np.array(out, dtype=np.int64)


def max_angle_gap(stencil: np.ndarray) -> float:
    ang = np.sort(np.arctan2(stencil[:, 1], stencil[:, 0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    return float(gaps.max())


@lru_cache(maxsize=None)
def horizontal_moves(n: int, radius: int = 3) -> np.ndarray:
    """Rows ``(alpha_1..alpha_n, beta_1..beta_n)`` of horizontal steps."""
    planar = planar_stencil(radius)
    rows = set()
    for blk in range(n):
        for a, b in planar:
            r = [0] * (2 * n)
            r[blk] = int(a)
            r[n + blk] = int(b)
            rows.add(tuple(r))
    if n > 1:
        for r in np.ndindex(*(3,) * (2 * n)):
            v = tuple(int(c) - 1 for c in r)
            if any(v) and math.gcd(*v) == 1:
                rows.add(v)
    return np.array(sorted(rows), dtype=np.int64)


@njit(cache=True)
def _encode(idx, offs, strides):
    key = 0
    for t in range(idx.shape[0]):
        key += (idx[t] + offs[t]) * strides[t]
    return key


@njit(cache=True)
def _decode(key, offs, radix, out):
    for t in range(out.shape[0] - 1, -1, -1):
        out[t] = key % radix[t] - offs[t]
        key //= radix[t]


@njit(cache=True)
def _heuristic(idx, target, n, h, zunit, sqrtL, mode):
    # lower bound on the remaining length from idx to target
    chord2 = 0.0
    dx_dy = 0.0
    vy_dx = 0.0
    for b in range(n):
        dx = (target[b] - idx[b]) * h
        dy = (target[n + b] - idx[n + b]) * h
        chord2 += dx * dx + dy * dy
        dx_dy += dx * dy
        vy_dx += idx[n + b] * h * dx
    dz = (target[2 * n] - idx[2 * n]) * zunit - vy_dx
    area = abs(dz - 0.5 * dx_dy)
    chord = math.sqrt(chord2)
    iso = math.sqrt(2.0 * math.pi * area)
    if mode == 1:
        iso = min(iso, sqrtL * area)
    return max(chord, iso)


@njit(cache=True)
def astar(start, target, moves, move_dk, move_cost, n, h, zunit, sqrtL, mode, offs, radix, strides, p, box, max_expansions):
    """A* over the lattice; returns ``(distance, expansions)`` (distance -1 if unreachable)."""
    N = 2 * n + 1
    M = moves.shape[0]
    gscore = Dict.empty(key_type=types.int64, value_type=types.float64)
    skey = _encode(start, offs, strides)
    tkey = _encode(target, offs, strides)
    gscore[skey] = 0.0
    heap = [(_heuristic(start, target, n, h, zunit, sqrtL, mode), 0.0, skey)]
    cur = np.empty(N, dtype=np.int64)
    nxt = np.empty(N, dtype=np.int64)
    expansions = 0
    while len(heap) > 0:
        f, g, key = heapq.heappop(heap)
        if key == tkey:
            return g, expansions
        if g > gscore[key] + 1e-12:
            continue
        expansions += 1
        if expansions > max_expansions:
            return -2.0, expansions
        _decode(key, offs, radix, cur)
        for m in range(M):
            dk = move_dk[m]
            for b in range(n):
                dk += 2 * moves[m, b] * cur[n + b]
            ok = True
            vy_px = 0.0
            for t in range(2 * n):
                nxt[t] = cur[t] + moves[m, t]
                c = nxt[t] * h + p[t]
                if c > box or c < -box:
                    ok = False
            if not ok:
                continue
            nxt[2 * n] = cur[2 * n] + dk
            for b in range(n):
                vy_px += nxt[b] * h * p[n + b]
            zc = nxt[2 * n] * zunit + p[2 * n] + vy_px
            if zc > box or zc < -box:
                continue
            nk = _encode(nxt, offs, strides)
            ng = g + move_cost[m]
            if nk in gscore and gscore[nk] <= ng + 1e-15:
                continue
            gscore[nk] = ng
            heapq.heappush(heap, (ng + _heuristic(nxt, target, n, h, zunit, sqrtL, mode), ng, nk))
    return -1.0, expansions


def build_moves(n: int, h: float, L: float | None, zsteps_max: int, radius: int = 3):
    """Move table ``(moves, dk_const, cost)``; vertical moves only when ``L`` is given."""
    hm = horizontal_moves(n, radius)
    dk = np.sum(hm[:, :n] * hm[:, n:], axis=1).astype(np.int64)
    cost = h * np.sqrt(np.sum(hm.astype(float) ** 2, axis=1))
    if L is None:
        return hm, dk, cost
    vm, vdk, vcost = [], [], []
    step = 1
    while step <= zsteps_max:
        for s in (step, -step):
            vm.append([0] * (2 * n))
            vdk.append(s)
            vcost.append(math.sqrt(L) * abs(s) * h * h / 2)
        step *= 2
    return (
        np.vstack([hm, np.array(vm, dtype=np.int64)]),
        np.concatenate([dk, np.array(vdk, dtype=np.int64)]),
        np.concatenate([cost, np.array(vcost)]),
    )

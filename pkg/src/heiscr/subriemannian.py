"""Carnot-Caratheodory geometry of the right contact distribution.

The horizontal frame is ``V_i = d/dx_i + y_i d/dz`` and ``U_i = d/dy_i``, and
the transverse metric makes it orthonormal.  Penalized metrics are
``g_L = g_T + L eta0 x eta0`` with ``eta0 = dz - y.dx``.

Two independent distance estimators are provided:

* :func:`dist_graph` runs A* on a Heisenberg lattice whose edges are exact
  horizontal (and, for ``g_L``, vertical) curves, so it returns an upper bound
  up to snapping the target to the lattice;
* :func:`dist_shooting` solves the normal Hamiltonian two-point problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root

from . import extremals, lattice
from .heisenberg import horizontal_frame, inv, mul
from .tensor import dim_to_n

DEFAULT_BOX = 2.0
DEFAULT_RESOLUTION = 64
SQRT_4PI = 2.0 * math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class HorizontalPath:
    """Piecewise-constant controls on a uniform grid of ``[0, 1]`` and the lifted vertices."""

    controls: np.ndarray
    p0: np.ndarray
    points: np.ndarray

    @property
    def n(self) -> int:
        return (self.points.shape[1] - 1) // 2

    @property
    def dt(self) -> float:
        return 1.0 / max(len(self.controls), 1)

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    def horizontal_residual(self) -> float:
        """Max ``|dz - sum y_mid dx|`` over segments (zero for an exact lift)."""
        P = self.points
        if len(P) < 2:
            return 0.0
        n = self.n
        dx = np.diff(P[:, :n], axis=0)
        ymid = 0.5 * (P[1:, n : 2 * n] + P[:-1, n : 2 * n])
        dz = np.diff(P[:, 2 * n])
        return float(np.max(np.abs(dz - np.sum(ymid * dx, axis=1))))

    @classmethod
    def from_points(cls, points) -> "HorizontalPath":
        P = np.asarray(points, dtype=float)
        n = dim_to_n(P.shape[1])
        K = len(P) - 1
        controls = np.diff(P[:, : 2 * n], axis=0) * K if K else np.zeros((0, 2 * n))
        return cls(controls, P[0].copy(), P)


def lift(controls, p0) -> HorizontalPath:
    """Integrate ``x' = u_x, y' = u_y, z' = y.u_x`` exactly for piecewise-constant controls."""
    p0 = np.asarray(p0, dtype=float)
    n = dim_to_n(len(p0))
    u = np.asarray(controls, dtype=float).reshape(-1, 2 * n)
    if not np.all(np.isfinite(u)):
        raise ValueError("controls must be finite")
    K = len(u)
    dt = 1.0 / max(K, 1)
    P = np.empty((K + 1, 2 * n + 1))
    P[0] = p0
    for k in range(K):
        x, y, z = P[k, :n], P[k, n : 2 * n], P[k, 2 * n]
        ux, uy = u[k, :n], u[k, n:]
        ymid = y + 0.5 * uy * dt
        P[k + 1, :n] = x + ux * dt
        P[k + 1, n : 2 * n] = y + uy * dt
        P[k + 1, 2 * n] = z + dt * np.dot(ux, ymid)
    return HorizontalPath(u, p0, P)


def cc_length(path: HorizontalPath, tol: float = 1e-9) -> float:
    """Transverse length ``sum |u_k| dt`` of a horizontal path."""
    r = path.horizontal_residual()
    scale = max(1.0, float(np.max(np.abs(path.points))))
    if r > tol * scale:
        raise ValueError(f"path is not horizontal (residual {r:.3e})")
    if len(path.controls) == 0:
        return 0.0
    seg = np.diff(path.points[:, : 2 * path.n], axis=0)
    return float(np.sum(np.linalg.norm(seg, axis=1)))


# ---------------------------------------------------------------------------
# graph oracle


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    method: str
    lower: float
    upper: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.lower <= self.value <= self.upper:
            raise ValueError(f"inconsistent bracket: {self.lower} <= {self.value} <= {self.upper}")


def _check_mode(mode):
    """``'cc'`` or ``('riemannian', L)`` -> (name, L)."""
    if mode == "cc":
        return "cc", None
    if isinstance(mode, tuple) and len(mode) == 2 and mode[0] == "riemannian":
        L = float(mode[1])
        if not L > 0:
            raise ValueError("penalty L must be positive")
        return "riemannian", L
    raise ValueError(f"unknown mode {mode!r}; use 'cc' or ('riemannian', L)")


def in_box(p, box: float = DEFAULT_BOX) -> bool:
    return bool(np.all(np.abs(np.asarray(p, dtype=float)) <= box))


def graph_error_model(n: int, h: float, value: float) -> tuple[float, float]:
    """``(lower, upper)`` bracket around a lattice estimate.

    The stencil's largest angular gap ``theta`` bounds the polygonal norm
    overshoot by ``1 / cos(theta / 2)``; snapping the target moves it by at
    most ``sqrt(n/2) h`` horizontally plus a vertical residual of ``h^2/4``
    (cost at most ``sqrt(pi) h``); an extra ``2 h`` covers the lattice
    constraint near the endpoints.
    """
    theta = lattice.max_angle_gap(lattice.planar_stencil())
    rel = 1.0 / math.cos(theta / 2) - 1.0
    snap = math.sqrt(n / 2.0) * h + math.sqrt(math.pi) * h
    lower = max(0.0, value / (1.0 + rel) - snap - 2 * h)
    return lower, value + snap


def dist_graph(p, q, resolution: int = DEFAULT_RESOLUTION, mode="cc", *, box: float = DEFAULT_BOX, max_expansions: int = lattice.MAX_EXPANSIONS) -> DistanceEstimate:
    """Lattice shortest-path estimate of ``d(p, q)`` (``mode='cc'`` or ``('riemannian', L)``)."""
    name, L = _check_mode(mode)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = dim_to_n(len(p))
    if len(q) != len(p):
        raise ValueError("dimension mismatch")
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    if not (in_box(p, box) and in_box(q, box)):
        raise ValueError(f"points must lie in the box [-{box}, {box}]^{2 * n + 1}")
    h = 2.0 * box / resolution
    zunit = h * h / 2.0
    w = np.asarray(mul(q, inv(p)), dtype=float)
    target = np.empty(2 * n + 1, dtype=np.int64)
    target[: 2 * n] = np.rint(w[: 2 * n] / h)
    # snap z after the horizontal snap so the residual stays in the centre
    target[2 * n] = int(np.rint(w[2 * n] / zunit))
    N = 2 * n + 1
    hoff = int(math.ceil(2 * box / h)) + 4
    zoff = int(math.ceil((2 * box + 2 * box * box * n) / zunit)) + 4
    offs = np.array([hoff] * (2 * n) + [zoff], dtype=np.int64)
    radix = 2 * offs + 1
    strides = np.ones(N, dtype=np.int64)
    for t in range(N - 2, -1, -1):
        strides[t] = strides[t + 1] * radix[t + 1]
    if float(strides[0]) * float(radix[0]) > 2**62:
        raise ValueError("lattice too large for the key encoding; reduce resolution or box")
    moves, dk, cost = lattice.build_moves(n, h, L, zsteps_max=zoff)
    start = np.zeros(N, dtype=np.int64)
    if np.all(target == 0):
        d, exp = 0.0, 0
    else:
        d, exp = lattice.astar(
            start, target, moves, dk, cost, n, h, zunit,
            math.sqrt(L) if L else 0.0, 1 if L else 0,
            offs, radix, strides, p, box * (1 + 1e-12), max_expansions,
        )
    if d == -2.0:
        raise RuntimeError("graph search exceeded its expansion budget")
    if d < 0:
        raise RuntimeError("lattice graph is disconnected between the points at this resolution")
    lower, upper = graph_error_model(n, h, d)
    meta = {"resolution": resolution, "h": h, "expansions": int(exp), "mode": name, "L": L, "box": box}
    return DistanceEstimate(float(d), "graph", lower, upper, meta)


# ---------------------------------------------------------------------------
# shooting


def geodesic_endpoint(p0, covector, L: float | None = None, *, steps: int = extremals.DEFAULT_STEPS) -> np.ndarray:
    """Time-1 endpoint of the normal extremal with initial covector ``(px, py, pz)``."""
    return extremals.endpoint(p0, covector, L, steps)[0]


def geodesic_endpoint_ivp(p0, covector, L: float | None = None, *, rtol: float = 1e-12, atol: float = 1e-13) -> np.ndarray:
    """Same endpoint through an adaptive integrator (independent cross-check)."""
    p0 = np.asarray(p0, dtype=float)
    n = dim_to_n(len(p0))
    invL = 0.0 if L is None else 1.0 / L

    def rhs(_, s):
        y = s[n : 2 * n]
        px, py, pz = s[2 * n + 1 : 3 * n + 1], s[3 * n + 1 : 4 * n + 1], s[4 * n + 1]
        ux = px + y * pz
        return np.concatenate([ux, py, [np.dot(y, ux) + pz * invL], np.zeros(n), -ux * pz, [0.0]])

    s0 = np.concatenate([p0, np.asarray(covector, dtype=float)])
    sol = solve_ivp(rhs, (0.0, 1.0), s0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[: 2 * n + 1, -1]


def covector_length(p0, covector, L: float | None = None) -> float:
    """``sqrt(2 H)`` (constant along the extremal; equals the length for unit time)."""
    p0 = np.asarray(p0, dtype=float)
    n = dim_to_n(len(p0))
    c = np.asarray(covector, dtype=float)
    y = p0[n : 2 * n]
    px, py, pz = c[:n], c[n : 2 * n], c[2 * n]
    e = np.sum((px + y * pz) ** 2) + np.sum(py**2)
    if L is not None:
        e += pz * pz / L
    return float(math.sqrt(e))


def _seeds(p, q, n: int, L: float | None) -> list[np.ndarray]:
    """Deterministic initial covectors around the chord and a few winding numbers."""
    w = np.asarray(mul(q, inv(p)), dtype=float)
    d = w[: 2 * n]
    y0 = np.asarray(p, dtype=float)[n : 2 * n]
    seeds = []
    for pz in (0.0, 2 * np.pi, -2 * np.pi, np.pi, -np.pi, 4 * np.pi, -4 * np.pi):
        chord = np.linalg.norm(d)
        if chord > 1e-12:
            dirs = [d]
        else:
            dirs = []
        scale = max(chord, math.sqrt(2 * math.pi * abs(w[2 * n])) if pz else chord, 1e-3)
        for k in range(4):
            ang = k * np.pi / 2 + 0.3
            v = np.zeros(2 * n)
            v[0], v[n] = math.cos(ang), math.sin(ang)
            dirs.append(v * scale)
        for v in dirs:
            u = np.asarray(v, dtype=float)
            px = u[:n] - y0 * pz
            seeds.append(np.concatenate([px, u[n:], [pz]]))
    if L is not None:
        seeds.append(np.concatenate([np.zeros(2 * n), [L * w[2 * n]]]))
    return seeds


def dist_shooting(p, q, metric="cc", *, tol: float = 1e-10, seeds: Sequence | None = None) -> DistanceEstimate:
    """Shortest normal extremal from ``p`` to ``q`` found by shooting over seeded covectors."""
    name, L = _check_mode(metric)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = dim_to_n(len(p))
    if np.allclose(p, q, atol=1e-15):
        return DistanceEstimate(0.0, "shooting", 0.0, 0.0, {"mode": name, "L": L})

    def F(c):
        end, jac = extremals.endpoint(p, c, L)
        if not np.all(np.isfinite(end)):
            return np.full(2 * n + 1, 1e6), np.eye(2 * n + 1)
        return end - q, jac

    best, best_c, tried = None, None, 0
    for c0 in seeds if seeds is not None else _seeds(p, q, n, L):
        tried += 1
        for method in ("hybr", "lm"):
            sol = root(F, c0, jac=True, method=method)
            res = float(np.max(np.abs(F(sol.x)[0])))
            if res < tol:
                length = covector_length(p, sol.x, L)
                if best is None or length < best - 1e-12:
                    best, best_c = length, sol.x
                break
        # CC extremals are minimizing up to the first conjugate time, |p_z| = 2 pi
        if L is None and best is not None and abs(best_c[-1]) <= 2 * math.pi * (1 + 1e-9):
            break
    if best is None:
        raise RuntimeError("shooting did not converge from any seed; use the graph estimate")
    meta = {"mode": name, "L": L, "covector": [float(v) for v in best_c], "seeds": tried}
    return DistanceEstimate(best, "shooting", best, best, meta)


# ---------------------------------------------------------------------------
# tables and checks


@dataclass(frozen=True)
class ConvergenceRow:
    L: float
    d_L: float
    gap: float
    lower: float
    upper: float


@dataclass(frozen=True)
class ConvergenceTable:
    d_cc: DistanceEstimate
    rows: tuple
    monotone: bool
    bounded: bool

    def final_relative_gap(self) -> float:
        return self.rows[-1].gap / self.d_cc.value if self.d_cc.value else 0.0


def convergence_table(p, q, L_schedule: Sequence[float], resolution: int = 32, *, box: float = DEFAULT_BOX) -> ConvergenceTable:
    """Graph estimates of ``d_{g_L}`` along an increasing schedule, with the gap to ``d_cc``."""
    Ls = [float(L) for L in L_schedule]
    if not Ls or any(b <= a for a, b in zip(Ls, Ls[1:])) or Ls[0] <= 0:
        raise ValueError("L schedule must be positive and strictly increasing")
    dcc = dist_graph(p, q, resolution, "cc", box=box)
    rows = []
    for L in Ls:
        e = dist_graph(p, q, resolution, ("riemannian", L), box=box)
        rows.append(ConvergenceRow(L, e.value, dcc.value - e.value, e.lower, e.upper))
    monotone = all(b.d_L >= a.d_L - 1e-12 for a, b in zip(rows, rows[1:]))
    bounded = all(r.d_L <= dcc.value + 1e-12 for r in rows)
    return ConvergenceTable(dcc, tuple(rows), monotone, bounded)


@dataclass(frozen=True)
class HomogeneityResult:
    lam: float
    ratio: float
    base: DistanceEstimate
    scaled: DistanceEstimate


def homogeneity_check(lam: float, p, q, resolution: int = DEFAULT_RESOLUTION, *, box: float = DEFAULT_BOX) -> HomogeneityResult:
    """``d_cc(delta_lam p, delta_lam q) / d_cc(p, q)`` on lattices with the same spacing."""
    from .heisenberg import dilation

    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    if lam == 1:
        base = dist_graph(p, q, resolution, box=box)
        return HomogeneityResult(1.0, 1.0, base, base)
    base = dist_graph(p, q, resolution, box=box)
    big = max(lam * lam, 1.0)
    scaled_box = box * big
    scaled_res = int(round(resolution * big))
    sp = np.asarray(dilation(lam, np.asarray(p, dtype=float)), dtype=float)
    sq = np.asarray(dilation(lam, np.asarray(q, dtype=float)), dtype=float)
    scaled = dist_graph(sp, sq, scaled_res, box=scaled_box)
    ratio = scaled.value / base.value if base.value else float("nan")
    return HomogeneityResult(float(lam), ratio, base, scaled)


def bracket_rank(p, n: int | None = None, *, include_brackets: bool = True, tol: float = 1e-10) -> int:
    """Rank of ``{V_i, U_i}`` (plus ``[V_i, U_j]`` when requested) at ``p``."""
    p = np.asarray(p, dtype=float)
    n = dim_to_n(len(p)) if n is None else n
    frame = horizontal_frame("right", n)
    vecs = [F.values(p) for F in frame]
    if include_brackets:
        V, U = frame[:n], frame[n:]
        for i in range(n):
            for j in range(n):
                vecs.append(V[i].bracket(U[j]).values(p))
    return int(np.linalg.matrix_rank(np.array(vecs), tol=tol))

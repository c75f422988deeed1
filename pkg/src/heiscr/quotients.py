"""Lattices in the Heisenberg group and their compact quotients.

Two families are supported:

* the uniform lattice of elements whose coordinates are all divisible by ``k``;
* ``Gamma_l`` for ``l = (l_1 | l_2 | ... | l_n)``: ``x in Z^n``, ``y_i in l_i Z``, ``z in Z``.

Deck transformations act on the right, ``p -> p . gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .heisenberg import SasakiStructure, inv, mul, pullback_residual, right_translation_map, standard_structure
from .sasaki_cone import deform, sample_ball


@dataclass(frozen=True)
class LatticeSpec:
    n: int
    k: int | None = None
    l: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if (self.k is None) == (self.l is None):
            raise ValueError("give exactly one of k or l")
        if self.k is not None:
            if int(self.k) != self.k or self.k < 1:
                raise ValueError(f"k must be a positive integer, got {self.k}")
            object.__setattr__(self, "k", int(self.k))
        else:
            l = tuple(int(v) for v in self.l)
            if len(l) != self.n:
                raise ValueError(f"l must have {self.n} entries")
            if any(v < 1 for v in l):
                raise ValueError("l entries must be positive")
            for a, b in zip(l, l[1:]):
                if b % a:
                    raise ValueError(f"divisibility chain violated: {a} does not divide {b}")
            object.__setattr__(self, "l", l)

    @property
    def steps(self) -> tuple:
        """Coordinate periods ``(x_1..x_n, y_1..y_n, z)`` of the fundamental box."""
        if self.k is not None:
            return (self.k,) * (2 * self.n + 1)
        return (1,) * self.n + self.l + (1,)

    def contains(self, g) -> bool:
        return all(Fraction(c) % s == 0 for c, s in zip(g, self.steps))

    def describe(self) -> str:
        return f"k={self.k}" if self.k is not None else "l=" + ",".join(map(str, self.l))


def generators(spec: LatticeSpec) -> list[np.ndarray]:
    """Standard generators: one per coordinate direction, scaled by the period."""
    N = 2 * spec.n + 1
    out = []
    for j, s in enumerate(spec.steps):
        g = [Fraction(0)] * N
        g[j] = Fraction(s)
        out.append(np.array(g, dtype=object))
    return out


@dataclass(frozen=True)
class DeckReduction:
    representative: np.ndarray
    deck: np.ndarray


def _floor_mult(v, s):
    if isinstance(v, Fraction):
        return Fraction(math.floor(v / s)) * s
    return math.floor(v / s) * s


def reduce_point(p, spec: LatticeSpec) -> DeckReduction:
    """Write ``p = rep . gamma`` with ``rep`` in the half-open fundamental box."""
    exact = all(isinstance(v, (int, Fraction)) for v in p)
    vals = [Fraction(v) for v in p] if exact else [float(v) for v in p]
    n = spec.n
    if len(vals) != 2 * n + 1:
        raise ValueError("point dimension does not match the lattice")
    st = spec.steps
    a = [_floor_mult(vals[i], st[i]) for i in range(n)]
    b = [_floor_mult(vals[n + i], st[n + i]) for i in range(n)]
    rx = [vals[i] - a[i] for i in range(n)]
    ry = [vals[n + i] - b[i] for i in range(n)]
    zrest = vals[2 * n] - sum(rx[i] * b[i] for i in range(n))
    c = _floor_mult(zrest, st[2 * n])
    rz = zrest - c
    dtype = object if exact else float
    rep = np.array(rx + ry + [rz], dtype=dtype)
    deck = np.array(a + b + [c], dtype=dtype)
    return DeckReduction(rep, deck)


def invariance_residual(a, spec: LatticeSpec, samples: int = 20, *, seed: int = 0, model: str = "right") -> float:
    """Max pullback residual of the structure under right translation by each generator and its inverse."""
    a = tuple(np.atleast_1d(a).astype(float))
    if len(a) != spec.n:
        raise ValueError("weights and lattice dimension differ")
    if model == "right":
        S: SasakiStructure = deform(a)
    else:
        if any(a):
            raise ValueError("only a = 0 is defined for the left and intermediate models")
        S = standard_structure(model, spec.n)
    pts = sample_ball(spec.n, samples, seed, axis_points=1)
    worst = 0.0
    for g in generators(spec):
        for h in (g, inv(g)):
            F = right_translation_map(list(h), spec.n)
            for p in pts:
                worst = max(worst, pullback_residual(S, S, F, p))
    return worst


# ---------------------------------------------------------------------------
# homology


def smith_normal_form(M) -> list[int]:
    """Invariant factors (nonzero diagonal entries) of an integer matrix."""
    A = [[int(v) for v in row] for row in M]
    if not A or not A[0]:
        return []
    rows, cols = len(A), len(A[0])
    diag = []
    t = 0
    while t < min(rows, cols):
        piv = None
        for i in range(t, rows):
            for j in range(t, cols):
                if A[i][j] and (piv is None or abs(A[i][j]) < abs(A[piv[0]][piv[1]])):
                    piv = (i, j)
        if piv is None:
            break
        i, j = piv
        A[t], A[i] = A[i], A[t]
        for row in A:
            row[t], row[j] = row[j], row[t]
        while True:
            changed = False
            for i in range(t + 1, rows):
                q = A[i][t] // A[t][t]
                if q:
                    A[i] = [x - q * y for x, y in zip(A[i], A[t])]
                if A[i][t]:
                    A[t], A[i] = A[i], A[t]
                    changed = True
            for j in range(t + 1, cols):
                q = A[t][j] // A[t][t]
                if q:
                    for row in A:
                        row[j] -= q * row[t]
                if A[t][j]:
                    for row in A:
                        row[t], row[j] = row[j], row[t]
                    changed = True
            if not changed:
                # the pivot must divide the remaining block
                bad = next(((i, j) for i in range(t + 1, rows) for j in range(t + 1, cols) if A[i][j] % A[t][t]), None)
                if bad is None:
                    break
                A[t] = [x + y for x, y in zip(A[t], A[bad[0]])]
        diag.append(abs(A[t][t]))
        t += 1
    return diag


def commutator(g, h):
    return mul(mul(g, h), mul(inv(g), inv(h)))


def relation_matrix(spec: LatticeSpec) -> np.ndarray:
    """Rows: exponent vectors of the commutator words ``[g_i, g_j]`` in the generators."""
    gens = generators(spec)
    m = len(gens)
    zstep = spec.steps[-1]
    rows = []
    for i in range(m):
        for j in range(i + 1, m):
            c = commutator(gens[i], gens[j])
            if any(v != 0 for v in c[:-1]):
                raise ArithmeticError("commutator is not central")
            e = Fraction(c[-1]) / zstep
            if e.denominator != 1:
                raise ArithmeticError("commutator is not a power of the central generator")
            row = [0] * m
            row[-1] = int(e)
            rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(-1, m)


@dataclass(frozen=True)
class AbelianGroup:
    free_rank: int
    torsion: tuple

    def __str__(self):
        parts = [f"Z^{self.free_rank}"] if self.free_rank else []
        parts += [f"Z_{t}" for t in self.torsion]
        return " + ".join(parts) if parts else "0"


def homology(spec: LatticeSpec) -> AbelianGroup:
    """First homology ``H_1 = Gamma^ab`` of the nilmanifold."""
    R = relation_matrix(spec)
    m = 2 * spec.n + 1
    d = smith_normal_form(R)
    torsion = tuple(v for v in d if v > 1)
    return AbelianGroup(m - len(d), torsion)


def projected_lattice(spec: LatticeSpec) -> np.ndarray:
    """Basis (rows) of the image of ``Gamma`` under ``(x, y, z) -> (x, y)``."""
    return np.diag(np.array(spec.steps[:-1], dtype=np.int64))


def covolume(spec: LatticeSpec) -> int:
    return int(round(abs(np.linalg.det(projected_lattice(spec)))))


def random_word(spec: LatticeSpec, length: int, rng: np.random.Generator) -> np.ndarray:
    gens = generators(spec)
    g = np.array([Fraction(0)] * (2 * spec.n + 1), dtype=object)
    for _ in range(length):
        h = gens[int(rng.integers(len(gens)))]
        if rng.integers(2):
            h = inv(h)
        g = mul(g, h)
    return g

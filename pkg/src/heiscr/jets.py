"""Second-order jets (value, gradient, Hessian) and fast batch evaluation.

``Jet2`` carries array-valued jets: ``val`` has shape ``S``, ``grad`` shape
``S + (N,)`` and ``hess`` shape ``S + (N, N)``.  Arithmetic follows the
truncated Taylor product rules, so with ``Fraction`` object arrays the results
are exact.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .poly import Frac, Poly


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet2:
    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variables(cls, point: Sequence) -> list["Jet2"]:
        """Seed jets for the coordinate functions at ``point``."""
        n = len(point)
        exact = all(isinstance(x, (int, Fraction)) for x in point)
        dtype = object if exact else float
        out = []
        for i, x in enumerate(point):
            g = np.zeros(n, dtype=dtype)
            h = np.zeros((n, n), dtype=dtype)
            if exact:
                g[:] = Fraction(0)
                h[:] = Fraction(0)
                g[i] = Fraction(1)
                out.append(cls(Fraction(x), g, h))
            else:
                g[i] = 1.0
                out.append(cls(float(x), g, h))
        return out

    @classmethod
    def constant(cls, c, n: int) -> "Jet2":
        return cls(c, np.zeros(n), np.zeros((n, n)))

    @property
    def nvars(self) -> int:
        return self.grad.shape[-1]

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        z = self.grad * 0
        return Jet2(other + self.val * 0, z, self.hess * 0)

    def __add__(self, other):
        o = self._lift(other)
        return Jet2(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.val * other, self.grad * other, self.hess * other)
        a, b = self, other
        av, bv = np.asarray(a.val), np.asarray(b.val)
        val = a.val * b.val
        grad = av[..., None] * b.grad + bv[..., None] * a.grad
        hess = (
            av[..., None, None] * b.hess
            + bv[..., None, None] * a.hess
            + _outer(a.grad, b.grad)
            + _outer(b.grad, a.grad)
        )
        return Jet2(val, grad, hess)

    __rmul__ = __mul__

    def compose(self, f0, f1, f2) -> "Jet2":
        """Chain rule for an elementwise scalar function with derivatives f1, f2."""
        f1 = np.asarray(f1)
        f2 = np.asarray(f2)
        grad = f1[..., None] * self.grad
        hess = f1[..., None, None] * self.hess + f2[..., None, None] * _outer(self.grad, self.grad)
        return Jet2(f0, grad, hess)

    def reciprocal(self) -> "Jet2":
        v = self.val
        return self.compose(1 / v, -1 / v**2, 2 / v**3)

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            return self * other.reciprocal()
        return self * (Fraction(1, other) if isinstance(other, int) else 1 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k):
        if isinstance(k, int) and k >= 0:
            out = self._lift(1)
            for _ in range(k):
                out = out * self
            return out
        v = self.val
        return self.compose(v**k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2))

    def sqrt(self) -> "Jet2":
        s = np.sqrt(self.val)
        return self.compose(s, 0.5 / s, -0.25 / s**3)

    def exp(self) -> "Jet2":
        e = np.exp(self.val)
        return self.compose(e, e, e)

    def sin(self) -> "Jet2":
        return self.compose(np.sin(self.val), np.cos(self.val), -np.sin(self.val))

    def cos(self) -> "Jet2":
        return self.compose(np.cos(self.val), -np.sin(self.val), -np.cos(self.val))

    def __getitem__(self, idx):
        return Jet2(np.asarray(self.val)[idx], self.grad[idx], self.hess[idx])

    @classmethod
    def stack(cls, jets: Sequence["Jet2"]) -> "Jet2":
        return cls(
            np.array([j.val for j in jets]),
            np.stack([j.grad for j in jets]),
            np.stack([j.hess for j in jets]),
        )

    def __repr__(self):
        return f"Jet2(val={self.val!r})"


class PolyBatch:
    """A list of polynomials compiled into one exponent table for float evaluation."""

    def __init__(self, polys: Sequence[Poly]):
        if not polys:
            raise ValueError("empty polynomial batch")
        self.nvars = polys[0].nvars
        self.count = len(polys)
        exps, coefs, owner = [], [], []
        for k, p in enumerate(polys):
            for m, c in p.terms.items():
                exps.append(m)
                coefs.append(float(c))
                owner.append(k)
        self.exps = np.array(exps, dtype=np.int64).reshape(-1, self.nvars)
        self.coefs = np.array(coefs, dtype=float)
        self.owner = np.array(owner, dtype=np.int64)
        self.maxdeg = int(self.exps.max()) if len(self.exps) else 0

    def _sum(self, w):
        # w has shape (T, ...) ; reduce by owner into (count, ...)
        out = np.zeros((self.count,) + w.shape[1:])
        np.add.at(out, self.owner, w)
        return out

    def values(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        if not len(self.exps):
            return np.zeros(self.count)
        mono = np.prod(p[None, :] ** self.exps, axis=1)
        return np.bincount(self.owner, weights=self.coefs * mono, minlength=self.count)

    def jets(self, point) -> Jet2:
        p = np.asarray(point, dtype=float)
        N, T = self.nvars, len(self.exps)
        if T == 0:
            z = np.zeros(self.count)
            return Jet2(z, np.zeros((self.count, N)), np.zeros((self.count, N, N)))
        E = self.exps
        P = p[None, :] ** E
        D1 = np.where(E > 0, E * p[None, :] ** np.maximum(E - 1, 0), 0.0)
        D2 = np.where(E > 1, E * (E - 1) * p[None, :] ** np.maximum(E - 2, 0), 0.0)
        c = self.coefs
        val = np.bincount(self.owner, weights=c * np.prod(P, axis=1), minlength=self.count)
        grad_t = np.empty((T, N))
        hess_t = np.empty((T, N, N))
        for i in range(N):
            Q = P.copy()
            Q[:, i] = D1[:, i]
            grad_t[:, i] = np.prod(Q, axis=1)
            Q2 = P.copy()
            Q2[:, i] = D2[:, i]
            hess_t[:, i, i] = np.prod(Q2, axis=1)
            for j in range(i + 1, N):
                Q3 = Q.copy()
                Q3[:, j] = D1[:, j]
                v = np.prod(Q3, axis=1)
                hess_t[:, i, j] = v
                hess_t[:, j, i] = v
        grad = self._sum(c[:, None] * grad_t)
        hess = self._sum(c[:, None, None] * hess_t)
        return Jet2(val, grad, hess)


class FracBatch:
    """Float jets of a list of :class:`Frac` fields sharing one denominator base."""

    def __init__(self, fracs: Sequence[Frac]):
        fracs = list(fracs)
        self.shape = (len(fracs),)
        self.nums = PolyBatch([f.num for f in fracs])
        self.powers = np.array([f.power for f in fracs], dtype=float)
        bases = {f.base for f in fracs if f.power}
        if len(bases) > 1:
            raise ValueError("FracBatch needs a single denominator base")
        self.base = PolyBatch([bases.pop()]) if bases else None

    def values(self, point) -> np.ndarray:
        v = self.nums.values(point)
        if self.base is None:
            return v
        b = self.base.values(point)[0]
        return v / b**self.powers

    def jets(self, point) -> Jet2:
        num = self.nums.jets(point)
        if self.base is None:
            return num
        b = self.base.jets(point)
        k = self.powers
        bv, g, H = b.val[0], b.grad[0], b.hess[0]
        f1 = -k * bv ** (-k - 1)
        f2 = k * (k + 1) * bv ** (-k - 2)
        inv = Jet2(
            bv**-k,
            f1[:, None] * g[None, :],
            f1[:, None, None] * H[None] + f2[:, None, None] * np.outer(g, g)[None],
        )
        return num * inv


def frac_jets_exact(f: Frac, point) -> Jet2:
    """Exact jet of a single Frac at a rational point, through Jet2 arithmetic."""
    xs = Jet2.variables(point)
    num = _poly_on_jets(f.num, xs)
    if f.power == 0:
        return num
    return num / (_poly_on_jets(f.base, xs) ** f.power)


def _poly_on_jets(p: Poly, xs: Sequence[Jet2]) -> Jet2:
    total = xs[0] * 0
    for m, c in p.terms.items():
        term = xs[0] * 0 + c
        for x, e in zip(xs, m):
            for _ in range(e):
                term = term * x
        total = total + term
    return total


def poly_on_jets(p: Poly, xs: Sequence[Jet2]) -> Jet2:
    """Evaluate ``p`` through Jet2 arithmetic (slow path; used as an exact oracle)."""
    return _poly_on_jets(p, xs)

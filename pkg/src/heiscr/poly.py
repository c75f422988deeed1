"""Sparse multivariate polynomials with exact rational coefficients.

Variables are indexed ``0 .. nvars-1``.  On the Heisenberg group the order is
``(x_1..x_n, y_1..y_n, z)``.  A :class:`Frac` is ``num / base**power`` with a
single polynomial base; this is enough for every rational field in the package
(all denominators are powers of ``1 + sum a_i (x_i^2 + y_i^2)``).
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, float):
        # decimal literals such as 0.7 are meant as 7/10, not the binary float
        return Fraction(repr(c))
    if isinstance(c, np.integer):
        return Fraction(int(c))
    if isinstance(c, np.floating):
        return Fraction(repr(float(c)))
    raise TypeError(f"cannot use {type(c).__name__} as a polynomial coefficient")


class Poly:
    """Immutable sparse polynomial; zero coefficients are never stored."""

    __slots__ = ("nvars", "terms", "_hash", "_compiled")

    def __init__(self, nvars: int, terms: Mapping[Monomial, object] | None = None):
        self.nvars = int(nvars)
        clean = {}
        if terms:
            for mono, c in terms.items():
                if len(mono) != self.nvars:
                    raise ValueError("monomial length does not match nvars")
                c = _as_fraction(c)
                if c != 0:
                    clean[tuple(int(e) for e in mono)] = c
        self.terms = clean
        self._hash = None
        self._compiled = None

    # construction -------------------------------------------------------
    @classmethod
    def const(cls, c, nvars: int) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars)

    @classmethod
    def var(cls, i: int, nvars: int) -> "Poly":
        mono = [0] * nvars
        mono[i] = 1
        return cls(nvars, {tuple(mono): 1})

    @classmethod
    def _raw(cls, nvars: int, terms: dict) -> "Poly":
        p = cls.__new__(cls)
        p.nvars = nvars
        p.terms = terms
        p._hash = None
        p._compiled = None
        return p

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError(f"dimension mismatch: {self.nvars} vs {other.nvars} variables")
            return other
        return Poly.const(other, self.nvars)

    def __add__(self, other):
        if isinstance(other, Frac):
            return NotImplemented
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Poly._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, Frac):
            return NotImplemented
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, Frac):
            return NotImplemented
        if not isinstance(other, Poly):
            c = _as_fraction(other)
            if c == 0:
                return Poly.zero(self.nvars)
            return Poly._raw(self.nvars, {m: v * c for m, v in self.terms.items()})
        other = self._coerce(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                s = out.get(m, 0) + c1 * c2
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return Poly._raw(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.nvars == other.nvars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Poly.const(other, self.nvars)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self.terms.items())))
        return self._hash

    # calculus -----------------------------------------------------------
    def diff(self, i: int) -> "Poly":
        out = {}
        for m, c in self.terms.items():
            e = m[i]
            if e:
                mm = list(m)
                mm[i] = e - 1
                out[tuple(mm)] = c * e
        return Poly._raw(self.nvars, out)

    def compose(self, subs: Sequence["Poly"]) -> "Poly":
        """Substitute ``subs[i]`` for variable ``i``."""
        if len(subs) != self.nvars:
            raise ValueError("need one substitute per variable")
        target = subs[0].nvars if subs else 0
        result = Poly.zero(target)
        cache: dict = {}
        for m, c in self.terms.items():
            term = Poly.const(c, target)
            for i, e in enumerate(m):
                if e:
                    key = (i, e)
                    if key not in cache:
                        cache[key] = subs[i] ** e
                    term = term * cache[key]
            result = result + term
        return result

    # inspection ---------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def __call__(self, point: Sequence):
        """Evaluate exactly (Fraction/int input) or in floating point."""
        total = 0
        for m, c in self.terms.items():
            v = c if _exact(point) else float(c)
            for x, e in zip(point, m):
                if e:
                    v = v * x**e
            total = total + v
        return total

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"v{i}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(m) if e)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def _exact(point) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in point)


class Frac:
    """Rational field ``num / base**power`` over a fixed polynomial base."""

    __slots__ = ("num", "base", "power")

    def __init__(self, num: Poly, base: Poly | None = None, power: int = 0):
        self.num = num
        if base is None or power == 0:
            base, power = Poly.const(1, num.nvars), 0
        self.base = base
        self.power = int(power)

    @classmethod
    def lift(cls, value, nvars: int) -> "Frac":
        if isinstance(value, Frac):
            return value
        if isinstance(value, Poly):
            return cls(value)
        return cls(Poly.const(value, nvars))

    @property
    def nvars(self) -> int:
        return self.num.nvars

    def _align(self, other: "Frac"):
        if self.power == 0:
            return Frac(self.num * other.base**other.power, other.base, other.power), other
        if other.power == 0:
            return self, Frac(other.num * self.base**self.power, self.base, self.power)
        if self.base != other.base:
            raise ValueError("Frac arithmetic needs a shared denominator base")
        if self.power < other.power:
            return Frac(self.num * self.base ** (other.power - self.power), self.base, other.power), other
        if self.power > other.power:
            return self, Frac(other.num * self.base ** (self.power - other.power), self.base, self.power)
        return self, other

    def __add__(self, other):
        other = Frac.lift(other, self.nvars)
        a, b = self._align(other)
        return Frac(a.num + b.num, a.base, a.power)

    __radd__ = __add__

    def __neg__(self):
        return Frac(-self.num, self.base, self.power)

    def __sub__(self, other):
        return self + (-Frac.lift(other, self.nvars))

    def __rsub__(self, other):
        return Frac.lift(other, self.nvars) - self

    def __mul__(self, other):
        other = Frac.lift(other, self.nvars)
        if self.power and other.power and self.base != other.base:
            raise ValueError("Frac arithmetic needs a shared denominator base")
        base = self.base if self.power else other.base
        return Frac(self.num * other.num, base, self.power + other.power)

    __rmul__ = __mul__

    def diff(self, i: int) -> "Frac":
        if self.power == 0:
            return Frac(self.num.diff(i))
        # d(N/B^k) = (B dN - k N dB) / B^(k+1)
        top = self.base * self.num.diff(i) - self.num * self.base.diff(i) * self.power
        return Frac(top, self.base, self.power + 1)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __call__(self, point):
        den = self.base(point) ** self.power if self.power else 1
        return self.num(point) / den

    def __repr__(self):
        if self.power == 0:
            return repr(self.num)
        return f"({self.num}) / ({self.base})^{self.power}"


def coordinate_polys(nvars: int) -> list[Poly]:
    return [Poly.var(i, nvars) for i in range(nvars)]


def lift_all(values: Iterable, nvars: int) -> list[Frac]:
    return [Frac.lift(v, nvars) for v in values]

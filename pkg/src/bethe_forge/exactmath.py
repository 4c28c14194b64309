"""Exact scalar types: rationals, polynomials in u, Laurent jets, nilpotent jets.

Everything here is an immutable value type.  Rationals are ``gmpy2.mpq``;
the other types accept any coefficient ring supporting ``+``, ``-``, ``*``
and comparison with ``0`` (rationals, :class:`PolyU`, :class:`LaurentJet`).
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from math import comb
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpq

from .errors import ExactDivisionFailed, InsufficientPrecision, NonvanishingPole

Rat = type(mpq())

__all__ = [
    "Rat",
    "rat",
    "rat_str",
    "PolyU",
    "poly_mul",
    "LaurentJet",
    "laurent_limit",
    "NilJet",
    "niljet_mul",
    "TruncSeries",
    "det_laplace",
    "perm_sign",
]


def rat(x) -> Rat:
    """Coerce ints, ``Fraction``, ``mpq`` and ``"p/q"`` strings to ``mpq``.

    Floats are rejected: a float here almost always means an inexact value
    leaked into the exact layer.
    """
    if isinstance(x, Rat):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, int):
        return mpq(x)
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, str):
        s = x.strip()
        if not s:
            raise ValueError("empty rational literal")
        return mpq(Fraction(s).numerator, Fraction(s).denominator)
    if type(x).__name__ == "mpz":
        return mpq(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def rat_str(q) -> str:
    """Canonical ``p/q`` text, or ``p`` for integers."""
    q = rat(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def perm_sign(p: Sequence[int]) -> int:
    """Signature of a permutation given in one-line notation."""
    seen = [False] * len(p)
    sign = 1
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def det_laplace(m: Sequence[Sequence], zero, one=None):
    """Determinant by cofactor expansion along the first row.

    Works over any commutative ring; ``zero`` seeds the accumulator.
    """
    n = len(m)
    if n == 0:
        return one if one is not None else zero + 1
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = zero
    for j in range(n):
        entry = m[0][j]
        if _is_zero(entry):
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = entry * det_laplace(minor, zero, one)
        total = total + term if j % 2 == 0 else total - term
    return total


def _is_zero(x) -> bool:
    try:
        return x == 0
    except TypeError:
        return False


# ---------------------------------------------------------------------------
# Polynomials in the spectral parameter


class PolyU:
    """Univariate polynomial in ``u`` with exact rational coefficients.

    Coefficients are stored lowest degree first with trailing zeros trimmed,
    so the zero polynomial has an empty coefficient tuple and degree -1.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable = ()):
        c = [rat(a) for a in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.c = tuple(c)

    @classmethod
    def _raw(cls, c: list) -> "PolyU":
        while c and c[-1] == 0:
            c.pop()
        p = object.__new__(cls)
        p.c = tuple(c)
        return p

    @classmethod
    def const(cls, a) -> "PolyU":
        return cls((a,))

    @classmethod
    def var(cls) -> "PolyU":
        return cls((0, 1))

    @classmethod
    def linear(cls, a, b) -> "PolyU":
        """``a + b*u``."""
        return cls((a, b))

    @classmethod
    def from_roots(cls, roots: Iterable, lead=1) -> "PolyU":
        p = cls.const(lead)
        for r in roots:
            p = p * cls((-rat(r), 1))
        return p

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def is_zero(self) -> bool:
        return not self.c

    def coeff(self, d: int) -> Rat:
        return self.c[d] if 0 <= d < len(self.c) else mpq(0)

    def lead(self) -> Rat:
        return self.c[-1] if self.c else mpq(0)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, PolyU):
            try:
                other = PolyU.const(other)
            except TypeError:
                return NotImplemented
        a, b = self.c, other.c
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, v in enumerate(b):
            out[i] = out[i] + v
        return PolyU._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return PolyU._raw([-v for v in self.c])

    def __sub__(self, other):
        if not isinstance(other, PolyU):
            try:
                other = PolyU.const(other)
            except TypeError:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PolyU):
            a, b = self.c, other.c
            if not a or not b:
                return PolyU._raw([])
            out = [mpq(0)] * (len(a) + len(b) - 1)
            for i, x in enumerate(a):
                if x == 0:
                    continue
                for j, y in enumerate(b):
                    out[i + j] += x * y
            return PolyU._raw(out)
        try:
            s = rat(other)
        except TypeError:
            return NotImplemented
        if s == 0:
            return PolyU._raw([])
        return PolyU._raw([v * s for v in self.c])

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power of a polynomial")
        out = PolyU.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, PolyU):
            return self.c == other.c
        try:
            return self.c == PolyU.const(other).c
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(self.c)

    def __bool__(self):
        return bool(self.c)

    # evaluation and transforms -------------------------------------------

    def __call__(self, x):
        """Horner evaluation; works for rational, float or complex ``x``."""
        acc = 0
        for v in reversed(self.c):
            acc = acc * x + v
        if isinstance(acc, int):
            return mpq(acc)
        return acc

    def shift(self, s) -> "PolyU":
        """Return ``p(u + s)``."""
        s = rat(s)
        if s == 0 or len(self.c) <= 1:
            return self
        n = len(self.c)
        out = [mpq(0)] * n
        for d, v in enumerate(self.c):
            if v == 0:
                continue
            pw = mpq(1)
            for k in range(d, -1, -1):
                out[k] += v * comb(d, k) * pw
                pw *= s
        return PolyU._raw(out)

    def derivative(self) -> "PolyU":
        return PolyU._raw([v * i for i, v in enumerate(self.c)][1:])

    def divmod(self, other: "PolyU"):
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.c)
        dq = other.degree
        lead = other.c[-1]
        if len(rem) - 1 < dq:
            return PolyU(), self
        quo = [mpq(0)] * (len(rem) - dq)
        for k in range(len(rem) - 1 - dq, -1, -1):
            q = rem[k + dq] / lead
            quo[k] = q
            if q != 0:
                for i, v in enumerate(other.c):
                    rem[k + i] -= q * v
        return PolyU._raw(quo), PolyU._raw(rem[:dq])

    def exact_div(self, other: "PolyU") -> "PolyU":
        q, r = self.divmod(other)
        if not r.is_zero():
            raise ExactDivisionFailed(f"({self}) is not divisible by ({other})")
        return q

    def to_floats(self) -> list:
        return [float(v) for v in self.c]

    def __str__(self):
        if not self.c:
            return "0"
        parts = []
        for d, v in enumerate(self.c):
            if v == 0:
                continue
            if d == 0:
                parts.append(rat_str(v))
            elif d == 1:
                parts.append(f"{rat_str(v)}*u")
            else:
                parts.append(f"{rat_str(v)}*u^{d}")
        return " + ".join(parts)

    def __repr__(self):
        return f"PolyU({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> "PolyU":
        """Inverse of ``str``: parse ``"c0 + c1*u + c2*u^2"``."""
        text = text.strip()
        if text == "0":
            return cls()
        coeffs: dict = {}
        for part in text.split(" + "):
            part = part.strip()
            if "*u" in part:
                num, _, pw = part.partition("*u")
                d = int(pw[1:]) if pw.startswith("^") else 1
            else:
                num, d = part, 0
            coeffs[d] = coeffs.get(d, mpq(0)) + rat(num)
        top = max(coeffs) if coeffs else -1
        return cls([coeffs.get(d, 0) for d in range(top + 1)])


def poly_mul(p: PolyU, q: PolyU) -> PolyU:
    """Exact product of two polynomials in ``u``."""
    return p * q


# ---------------------------------------------------------------------------
# Laurent jets in a single small parameter


class LaurentJet:
    """Truncated Laurent series ``sum_k c_k eps^k + O(eps^prec)``.

    ``prec`` is the first order that is *not* known; ``None`` marks an exact
    (finite) expansion.  Products track precision from the valuations of
    the factors, so a result is never claimed beyond what its inputs
    determine.  Coefficients may be rationals or any ring element that
    multiplies with rationals (e.g. :class:`PolyU`).
    """

    __slots__ = ("coeffs", "prec")

    def __init__(self, coeffs: Mapping[int, object] | None = None, prec: int | None = None,
                 window: tuple[int, int] | None = None):
        if window is not None:
            lo, hi = window
            if prec is not None and prec != hi + 1:
                raise ValueError("give either window or prec, not both")
            prec = hi + 1
            for k in (coeffs or {}):
                if not lo <= k <= hi:
                    raise ValueError(f"order {k} outside window {window}")
        self.coeffs = {k: v for k, v in (coeffs or {}).items()
                       if not _is_zero(v) and (prec is None or k < prec)}
        self.prec = prec

    @classmethod
    def const(cls, c, prec: int | None = None) -> "LaurentJet":
        return cls({0: c}, prec)

    @classmethod
    def monomial(cls, c, k: int, prec: int | None = None) -> "LaurentJet":
        return cls({k: c}, prec)

    @property
    def window(self) -> tuple[int, int | None]:
        lo = min(self.coeffs) if self.coeffs else (self.prec if self.prec is not None else 0)
        return (lo, None if self.prec is None else self.prec - 1)

    def valuation(self):
        if self.coeffs:
            return min(self.coeffs)
        return self.prec if self.prec is not None else float("inf")

    def __getitem__(self, k: int):
        if self.prec is not None and k >= self.prec:
            raise InsufficientPrecision(f"order {k} is beyond the known precision {self.prec}")
        return self.coeffs.get(k, 0)

    def _coerce(self, other):
        if isinstance(other, LaurentJet):
            return other
        return LaurentJet({0: other})

    def __add__(self, other):
        other = self._coerce(other)
        prec = _min_prec(self.prec, other.prec)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return LaurentJet(out, prec)

    __radd__ = __add__

    def __neg__(self):
        return LaurentJet({k: -v for k, v in self.coeffs.items()}, self.prec)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, LaurentJet):
            if isinstance(other, (NilJet, TruncSeries)):
                return NotImplemented
            return LaurentJet({k: v * other for k, v in self.coeffs.items()}, self.prec)
        va, vb = self.valuation(), other.valuation()
        cands = []
        if self.prec is not None:
            cands.append(self.prec + vb)
        if other.prec is not None:
            cands.append(other.prec + va)
        prec = None
        if cands:
            m = min(cands)
            prec = int(m) if m != float("inf") else None
        out: dict = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                k = i + j
                if prec is not None and k >= prec:
                    continue
                p = a * b
                out[k] = out[k] + p if k in out else p
        return LaurentJet(out, prec)

    def __rmul__(self, other):
        return LaurentJet({k: other * v for k, v in self.coeffs.items()}, self.prec)

    def inverse(self, rel_prec: int | None = None) -> "LaurentJet":
        """Multiplicative inverse; the leading coefficient must be a unit rational."""
        if not self.coeffs:
            raise ZeroDivisionError("inverse of a jet with no known nonzero term")
        v = min(self.coeffs)
        if self.prec is not None:
            r = self.prec - v
        elif len(self.coeffs) == 1:
            return LaurentJet({-v: _unit_inverse(self.coeffs[v])})
        elif rel_prec is not None:
            r = rel_prec
        else:
            raise InsufficientPrecision("inverting an exact jet needs rel_prec")
        inv0 = _unit_inverse(self.coeffs[v])
        rel = [self.coeffs.get(v + k, 0) for k in range(r)]
        b = [mpq(0)] * r
        b[0] = inv0
        for n in range(1, r):
            acc = 0
            for k in range(1, n + 1):
                if not _is_zero(rel[k]):
                    acc = acc + rel[k] * b[n - k]
            b[n] = -acc * inv0
        return LaurentJet({k - v: c for k, c in enumerate(b)}, r - v)

    def __truediv__(self, other):
        if isinstance(other, LaurentJet):
            return self * other.inverse()
        return self * (1 / rat(other))

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = LaurentJet({0: mpq(1)})
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, LaurentJet):
            return self.prec == other.prec and self.coeffs == other.coeffs
        try:
            return self.prec is None and self.coeffs == ({0: other} if not _is_zero(other) else {})
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash((self.prec, tuple(sorted(self.coeffs.items(), key=lambda kv: kv[0]))))

    def __repr__(self):
        body = ", ".join(f"{k}: {v}" for k, v in sorted(self.coeffs.items()))
        return f"LaurentJet({{{body}}}, prec={self.prec})"


def _unit_inverse(a):
    # leading coefficients are rationals, or jets in a further variable
    if isinstance(a, LaurentJet):
        return a.inverse()
    return 1 / rat(a)


def _jet_vanishes(v) -> bool:
    """True for exact zeros and for nested jets with no known nonzero coefficient."""
    if isinstance(v, LaurentJet):
        return all(_jet_vanishes(c) for c in v.coeffs.values())
    return _is_zero(v)


def _min_prec(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def laurent_limit(j: LaurentJet):
    """Value of the jet at ``eps -> 0``.

    Coefficients may themselves be jets in further variables (nested limits).
    Raises :class:`NonvanishingPole` if a negative order survives and
    :class:`InsufficientPrecision` if order 0 was not computed.
    """
    bad = sorted(k for k, v in j.coeffs.items() if k < 0 and not _jet_vanishes(v))
    if bad:
        raise NonvanishingPole(f"nonzero coefficient at order {bad[0]}")
    if j.prec is not None and j.prec <= 0:
        raise InsufficientPrecision(f"order 0 unknown (precision {j.prec})")
    return j.coeffs.get(0, mpq(0))


# ---------------------------------------------------------------------------
# Nilpotent multi-level jets (graded)


class NilJet:
    """Element of the ring generated by matrix perturbations ``phi^(l)_{ab}``.

    There is one perturbation matrix per level ``l`` in ``0..levels-1``; each
    level may occur at most once in a monomial (first-order nilpotency per
    level).  A generator ``phi^(l)_{ab}`` has parity ``p_a + p_b`` and odd
    generators anticommute, so the ring is supercommutative.  Monomials are
    stored in increasing level order, grouped by the bitmask of levels they
    use: ``terms[mask][pairs] = coefficient`` with ``pairs`` the ``(a, b)``
    index pairs in level order.
    """

    __slots__ = ("terms", "grading")

    _merge_cache: dict = {}

    def __init__(self, terms: Mapping[int, Mapping[tuple, object]] | None = None,
                 grading: tuple = ()):
        clean = {}
        for mask, d in (terms or {}).items():
            sub = {k: v for k, v in d.items() if not _is_zero(v)}
            if sub:
                clean[mask] = sub
        self.terms = clean
        self.grading = tuple(grading)

    @classmethod
    def scalar(cls, c, grading: tuple = ()) -> "NilJet":
        return cls({0: {(): c}}, grading)

    @classmethod
    def generator(cls, level: int, a: int, b: int, grading: tuple = (), coeff=None) -> "NilJet":
        return cls({1 << level: {((a, b),): mpq(1) if coeff is None else coeff}}, grading)

    @classmethod
    def from_terms(cls, items: Mapping[tuple, object], grading: tuple = ()) -> "NilJet":
        """Build from ``{((level, a, b), ...): coeff}`` with arbitrary level order."""
        out = cls({}, grading)
        for key, c in items.items():
            mono = cls.scalar(c, grading)
            for (lvl, a, b) in key:
                mono = mono * cls.generator(lvl, a, b, grading)
            out = out + mono
        return out

    def _odd(self, pair) -> int:
        if not self.grading:
            return 0
        return (self.grading[pair[0]] + self.grading[pair[1]]) & 1

    def body(self):
        return self.terms.get(0, {}).get((), 0)

    def coefficient(self, key: Sequence[tuple]) -> object:
        """Coefficient of the monomial given as ``((level, a, b), ...)`` in level order."""
        mask = 0
        pairs = []
        for lvl, a, b in sorted(key):
            mask |= 1 << lvl
            pairs.append((a, b))
        return self.terms.get(mask, {}).get(tuple(pairs), 0)

    def items(self):
        for mask, d in self.terms.items():
            for pairs, c in d.items():
                yield mask, pairs, c

    def _lift(self, other) -> "NilJet":
        if isinstance(other, NilJet):
            return other
        return NilJet.scalar(other, self.grading)

    def __add__(self, other):
        other = self._lift(other)
        out = {m: dict(d) for m, d in self.terms.items()}
        for mask, d in other.terms.items():
            tgt = out.setdefault(mask, {})
            for k, v in d.items():
                tgt[k] = tgt[k] + v if k in tgt else v
        return NilJet(out, self.grading or other.grading)

    __radd__ = __add__

    def __neg__(self):
        return NilJet({m: {k: -v for k, v in d.items()} for m, d in self.terms.items()}, self.grading)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    @staticmethod
    def _merge_plan(m1: int, m2: int):
        key = (m1, m2)
        plan = NilJet._merge_cache.get(key)
        if plan is None:
            lv1 = [l for l in range(m1.bit_length()) if m1 >> l & 1]
            lv2 = [l for l in range(m2.bit_length()) if m2 >> l & 1]
            merged = sorted([(l, 0, i) for i, l in enumerate(lv1)] + [(l, 1, i) for i, l in enumerate(lv2)])
            order = [(src, i) for _, src, i in merged]
            crossings = [(i, j) for i, l1 in enumerate(lv1) for j, l2 in enumerate(lv2) if l1 > l2]
            plan = (order, crossings)
            NilJet._merge_cache[key] = plan
        return plan

    def __mul__(self, other):
        if not isinstance(other, NilJet):
            if isinstance(other, TruncSeries):
                return NotImplemented
            return NilJet({m: {k: v * other for k, v in d.items()} for m, d in self.terms.items()},
                          self.grading)
        grading = self.grading or other.grading
        graded = any(grading)
        out: dict = {}
        for m1, d1 in self.terms.items():
            for m2, d2 in other.terms.items():
                if m1 & m2:
                    continue
                order, crossings = NilJet._merge_plan(m1, m2)
                tgt = out.setdefault(m1 | m2, {})
                for p1, c1 in d1.items():
                    for p2, c2 in d2.items():
                        sign = 1
                        if graded and crossings:
                            flips = 0
                            for i, j in crossings:
                                a, b = p1[i], p2[j]
                                flips += ((grading[a[0]] + grading[a[1]]) & 1) * ((grading[b[0]] + grading[b[1]]) & 1)
                            if flips & 1:
                                sign = -1
                        pairs = tuple(p1[i] if src == 0 else p2[i] for src, i in order)
                        c = c1 * c2
                        if sign < 0:
                            c = -c
                        tgt[pairs] = tgt[pairs] + c if pairs in tgt else c
        return NilJet(out, grading)

    def __rmul__(self, other):
        return NilJet({m: {k: other * v for k, v in d.items()} for m, d in self.terms.items()},
                      self.grading)

    def is_even(self) -> bool:
        for mask, pairs, _ in self.items():
            if sum(self._odd(p) for p in pairs) & 1:
                return False
        return True

    def inverse(self, max_order: int | None = None) -> "NilJet":
        """Inverse of a jet whose body is a unit, via the terminating Neumann series."""
        b = self.body()
        if _is_zero(b):
            raise ZeroDivisionError("NilJet body is not invertible")
        binv = 1 / b if not isinstance(b, LaurentJet) else b.inverse()
        nil = NilJet({m: d for m, d in self.terms.items() if m}, self.grading) * binv
        depth = max((bin(m).count("1") for m in nil.terms), default=0)
        if depth == 0:
            return NilJet.scalar(binv, self.grading)
        levels = max(m.bit_length() for m in nil.terms)
        if max_order is None:
            max_order = levels
        out = NilJet.scalar(1, self.grading)
        power = NilJet.scalar(1, self.grading)
        for _ in range(max_order):
            power = power * (-nil)
            if not power.terms:
                break
            out = out + power
        return out * binv

    def __eq__(self, other):
        other = self._lift(other)
        diff = self - other
        return not diff.terms

    def __hash__(self):
        return hash(tuple(sorted((m, tuple(sorted(d.items(), key=lambda kv: kv[0]))) for m, d in self.terms.items())))

    def __repr__(self):
        n = sum(len(d) for d in self.terms.values())
        return f"NilJet(<{n} terms>)"


def niljet_mul(a: NilJet, b: NilJet) -> NilJet:
    """Product in the nilpotent jet ring; repeated levels vanish."""
    return a * b


# ---------------------------------------------------------------------------
# Multivariate truncated power series with polynomial-in-u coefficients


class TruncSeries:
    """Series in formal variables ``z_1..z_r`` truncated per variable.

    Coefficients are :class:`PolyU`.  ``caps[i]`` is the highest kept power
    of ``z_i``; anything beyond is discarded, which is exact for all
    coefficients inside the box because products only raise degrees.
    """

    __slots__ = ("terms", "caps")

    def __init__(self, terms: Mapping[tuple, PolyU] | None = None, caps: tuple = ()):
        self.caps = tuple(caps)
        self.terms = {k: v for k, v in (terms or {}).items()
                      if not v.is_zero() and all(e <= c for e, c in zip(k, self.caps))}

    @classmethod
    def const(cls, p, caps: tuple) -> "TruncSeries":
        if not isinstance(p, PolyU):
            p = PolyU.const(p)
        return cls({(0,) * len(caps): p}, caps)

    @classmethod
    def geometric(cls, var: int, ratio, start: int, scale, caps: tuple) -> "TruncSeries":
        """``scale * sum_{n >= start} (ratio * z_var)^n``."""
        ratio, scale = rat(ratio), rat(scale)
        out = {}
        zero = [0] * len(caps)
        pw = ratio ** start if start else mpq(1)
        for n in range(start, caps[var] + 1):
            key = list(zero)
            key[var] = n
            out[tuple(key)] = PolyU.const(scale * pw)
            pw *= ratio
        return cls(out, caps)

    @classmethod
    def from_factors(cls, var: int, numer: Sequence, denom: Sequence, caps: tuple) -> "TruncSeries":
        """``prod(1 - a z) / prod(1 - b z)`` in variable ``var``."""
        d = caps[var]
        coef = [mpq(0)] * (d + 1)
        coef[0] = mpq(1)
        for b in denom:
            b = rat(b)
            for n in range(1, d + 1):
                coef[n] += b * coef[n - 1]
        for a in numer:
            a = rat(a)
            for n in range(d, 0, -1):
                coef[n] -= a * coef[n - 1]
        out = {}
        for n, c in enumerate(coef):
            key = [0] * len(caps)
            key[var] = n
            out[tuple(key)] = PolyU.const(c)
        return cls(out, caps)

    def coefficient(self, exps: tuple) -> PolyU:
        return self.terms.get(tuple(exps), PolyU())

    def __add__(self, other):
        if not isinstance(other, TruncSeries):
            other = TruncSeries.const(other, self.caps)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return TruncSeries(out, self.caps)

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries({k: -v for k, v in self.terms.items()}, self.caps)

    def __sub__(self, other):
        if not isinstance(other, TruncSeries):
            other = TruncSeries.const(other, self.caps)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, TruncSeries):
            if not isinstance(other, PolyU):
                other = PolyU.const(other)
            return TruncSeries({k: v * other for k, v in self.terms.items()}, self.caps)
        caps = self.caps
        out: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                if any(e > c for e, c in zip(k, caps)):
                    continue
                p = v1 * v2
                out[k] = out[k] + p if k in out else p
        return TruncSeries(out, caps)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            other = TruncSeries.const(other, self.caps)
        return self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __repr__(self):
        return f"TruncSeries({len(self.terms)} terms, caps={self.caps})"


def all_permutations(n: int):
    """All permutations of ``range(n)`` in lexicographic order."""
    return list(permutations(range(n)))

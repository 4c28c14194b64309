"""Operators on the graded quantum space ``(C^(K|M))^N``.

Basis vectors are tuples ``(k_1, ..., k_N)`` of 0-based spin directions,
ordered lexicographically.  The public helpers that talk about index sets
and basis labels use 1-based labels, matching ``|e_{k_1..k_N}>``.

Every operator built by the package commutes with the weight (the multiset
of spin directions), so :class:`TensorOperator` stores one polynomial
matrix block per weight sector instead of the full dense matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np
from gmpy2 import mpq

from .errors import BadSite, ConfigError, DimMismatch, ExactDivisionFailed
from .exactmath import PolyU, Rat, rat, rat_str


# ---------------------------------------------------------------------------
# Twist and index-set labels


@dataclass(frozen=True)
class Twist:
    """Diagonal twist ``g = diag(x_1..x_K, y_1..y_M)`` plus inhomogeneities.

    Directions ``0..K-1`` are even (bosonic) and ``K..K+M-1`` odd (fermionic).
    """

    K: int
    M: int
    xi: tuple
    theta: tuple

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(rat(v) for v in self.xi))
        object.__setattr__(self, "theta", tuple(rat(v) for v in self.theta))
        if self.K < 1 or self.M < 0:
            raise ConfigError("need K >= 1 and M >= 0")
        if len(self.xi) != self.K + self.M:
            raise ConfigError(f"expected {self.K + self.M} eigenvalues, got {len(self.xi)}")
        if len(self.theta) < 1:
            raise ConfigError("need at least one site")
        if any(v == 0 for v in self.xi):
            raise ConfigError("eigenvalues must be nonzero")
        if len(set(self.xi)) != len(self.xi):
            raise ConfigError("eigenvalues must be pairwise distinct")

    @classmethod
    def make(cls, x: Sequence, theta: Sequence, y: Sequence = ()) -> "Twist":
        return cls(len(x), len(y), tuple(x) + tuple(y), tuple(theta))

    @property
    def N(self) -> int:
        return len(self.theta)

    @property
    def n(self) -> int:
        """Local dimension ``K + M``."""
        return self.K + self.M

    @property
    def grading(self) -> tuple:
        return (0,) * self.K + (1,) * self.M

    @property
    def x(self) -> tuple:
        return self.xi[: self.K]

    @property
    def y(self) -> tuple:
        return self.xi[self.K:]

    def parity(self, j: int) -> int:
        """Grading of the 1-based index ``j``."""
        return 0 if j <= self.K else 1

    def xi_of(self, j: int) -> Rat:
        """Eigenvalue attached to the 1-based index ``j``."""
        return self.xi[j - 1]

    def full_set(self) -> tuple:
        return tuple(range(1, self.n + 1))

    def with_theta(self, theta: Sequence) -> "Twist":
        return Twist(self.K, self.M, self.xi, tuple(theta))

    def to_json(self) -> dict:
        return {"K": self.K, "M": self.M, "xi": [rat_str(v) for v in self.xi],
                "theta": [rat_str(v) for v in self.theta]}


def index_set(js: Iterable[int]) -> tuple:
    """Normalize an index set to a sorted duplicate-free tuple of 1-based labels."""
    out = tuple(sorted(set(int(j) for j in js)))
    if len(out) != len(tuple(js)) if isinstance(js, (list, tuple)) else False:
        raise ValueError("index set has duplicates")
    return out


def complement(I: Iterable[int], tw: Twist) -> tuple:
    I = set(I)
    return tuple(j for j in tw.full_set() if j not in I)


def subset_label(I: Sequence[int]) -> str:
    """Subscript text for an index set, e.g. ``(1, 2)`` -> ``"12"``; ``"∅"`` if empty."""
    if not I:
        return "∅"
    if all(j < 10 for j in I):
        return "".join(str(j) for j in I)
    return ",".join(str(j) for j in I)


def subset_mask(I: Iterable[int]) -> int:
    m = 0
    for j in I:
        m |= 1 << (j - 1)
    return m


@dataclass(frozen=True)
class NestingPath:
    """Maximal chain ``I_n ⊃ ... ⊃ I_0 = ∅`` stored as the order indices are added.

    ``order[k-1]`` is the index ``j_k`` with ``I_k = I_{k-1} ∪ {j_k}``.
    """

    order: tuple

    def __post_init__(self):
        if len(set(self.order)) != len(self.order):
            raise ValueError("nesting path repeats an index")

    @classmethod
    def parse(cls, text: str, tw: Twist | None = None) -> "NestingPath":
        """Accept ``"12>1>"`` (chain of subsets, top first) or ``"2,12"``-style chains."""
        text = text.strip()
        if ">" in text:
            chunks = text.split(">")
            sets = [tuple(sorted(int(c) for c in chunk.strip())) for chunk in chunks]
        else:
            sets = [tuple(sorted(int(c) for c in chunk.strip())) for chunk in text.split(",")]
            sets = sorted(sets, key=len, reverse=True)
            sets.append(())
        sets = [s for s in sets]
        if sets[-1] != ():
            sets.append(())
        chain = list(reversed(sets))
        order = []
        for a, b in zip(chain, chain[1:]):
            extra = set(b) - set(a)
            if len(b) != len(a) + 1 or len(extra) != 1 or not set(a) <= set(b):
                raise ValueError(f"not a covering chain: {text!r}")
            order.append(extra.pop())
        path = cls(tuple(order))
        if tw is not None and sorted(path.order) != list(tw.full_set()):
            raise ValueError("nesting path must end at the full index set")
        return path

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "NestingPath":
        return cls(tuple(order))

    def subsets(self) -> list:
        """``[I_0, I_1, ..., I_n]`` with ``I_0 = ()``."""
        out = [()]
        for j in self.order:
            out.append(tuple(sorted(out[-1] + (j,))))
        return out

    def __str__(self):
        return ">".join(subset_label(s) if s else "" for s in reversed(self.subsets()))


# ---------------------------------------------------------------------------
# Weight sectors


@lru_cache(maxsize=None)
def sector_layout(q: int, N: int):
    """Sectors of ``(C^q)^N``: ``{counts: [basis tuples in lex order]}`` (0-based labels)."""
    sectors: dict = {}
    for t in product(range(q), repeat=N):
        key = tuple(t.count(a) for a in range(q))
        sectors.setdefault(key, []).append(t)
    return {k: tuple(v) for k, v in sectors.items()}


@lru_cache(maxsize=None)
def _sector_positions(q: int, N: int):
    pos = {}
    for key, basis in sector_layout(q, N).items():
        for i, t in enumerate(basis):
            pos[t] = (key, i)
    return pos


def lex_index(t: Sequence[int], q: int) -> int:
    idx = 0
    for a in t:
        idx = idx * q + a
    return idx


def lex_tuple(i: int, q: int, N: int) -> tuple:
    out = []
    for _ in range(N):
        out.append(i % q)
        i //= q
    return tuple(reversed(out))


def weight_sectors(q: int, N: int) -> list:
    """Partition of the basis into weight sectors, using 1-based labels."""
    lay = sector_layout(q, N)
    out = []
    for key in sorted(lay, key=lambda k: lay[k][0]):
        out.append([tuple(a + 1 for a in t) for t in lay[key]])
    return out


def koszul_sign(labels: Sequence[int], grading: Sequence[int], perm: Sequence[int]) -> int:
    """Sign of reordering graded vectors ``labels`` into ``labels[perm[0]], labels[perm[1]], ...``.

    Each pair of odd vectors whose relative order is inverted contributes ``-1``.
    """
    if not any(grading):
        return 1
    sign = 1
    n = len(perm)
    for i in range(n):
        if not grading[labels[perm[i]]]:
            continue
        for j in range(i + 1, n):
            if perm[i] > perm[j] and grading[labels[perm[j]]]:
                sign = -sign
    return sign


# ---------------------------------------------------------------------------
# Polynomial matrices


def _zeros(n: int) -> np.ndarray:
    a = np.empty((n, n), dtype=object)
    a.fill(mpq(0))
    return a


def _is_zero_array(a: np.ndarray) -> bool:
    return all(v == 0 for v in a.flat)


class PolyMat:
    """Square matrix polynomial ``sum_d C_d u^d`` with exact rational ``C_d``."""

    __slots__ = ("cs", "n")

    def __init__(self, cs: Sequence[np.ndarray], n: int):
        cs = list(cs)
        while cs and _is_zero_array(cs[-1]):
            cs.pop()
        self.cs = tuple(cs)
        self.n = n

    @classmethod
    def zeros(cls, n: int) -> "PolyMat":
        return cls((), n)

    @classmethod
    def identity(cls, n: int, scale=1) -> "PolyMat":
        c = _zeros(n)
        for i in range(n):
            c[i, i] = rat(scale)
        return cls((c,), n)

    @classmethod
    def from_polys(cls, rows: Sequence[Sequence[PolyU]]) -> "PolyMat":
        n = len(rows)
        deg = max((p.degree for r in rows for p in r), default=-1)
        cs = [_zeros(n) for _ in range(deg + 1)]
        for i, r in enumerate(rows):
            for j, p in enumerate(r):
                for d, v in enumerate(p.c):
                    cs[d][i, j] = v
        return cls(cs, n)

    @classmethod
    def from_scalar_poly(cls, p: PolyU, n: int) -> "PolyMat":
        cs = []
        for v in p.c:
            c = _zeros(n)
            for i in range(n):
                c[i, i] = v
            cs.append(c)
        return cls(cs, n)

    @property
    def degree(self) -> int:
        return len(self.cs) - 1

    def is_zero(self) -> bool:
        return not self.cs

    def entry(self, i: int, j: int) -> PolyU:
        return PolyU([c[i, j] for c in self.cs])

    def to_polys(self) -> list:
        return [[self.entry(i, j) for j in range(self.n)] for i in range(self.n)]

    def __add__(self, other: "PolyMat") -> "PolyMat":
        a, b = self.cs, other.cs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for d, c in enumerate(b):
            out[d] = out[d] + c
        return PolyMat(out, self.n)

    def __neg__(self) -> "PolyMat":
        return PolyMat([-c for c in self.cs], self.n)

    def __sub__(self, other: "PolyMat") -> "PolyMat":
        return self + (-other)

    def matmul(self, other: "PolyMat") -> "PolyMat":
        if not self.cs or not other.cs:
            return PolyMat.zeros(self.n)
        out = [None] * (len(self.cs) + len(other.cs) - 1)
        for i, a in enumerate(self.cs):
            for j, b in enumerate(other.cs):
                p = a.dot(b)
                out[i + j] = p if out[i + j] is None else out[i + j] + p
        return PolyMat(out, self.n)

    def scale(self, s) -> "PolyMat":
        if isinstance(s, PolyU):
            if s.is_zero() or not self.cs:
                return PolyMat.zeros(self.n)
            out = [None] * (len(self.cs) + len(s.c) - 1)
            for i, c in enumerate(self.cs):
                for j, v in enumerate(s.c):
                    if v == 0:
                        continue
                    p = c * v
                    out[i + j] = p if out[i + j] is None else out[i + j] + p
            return PolyMat([o if o is not None else _zeros(self.n) for o in out], self.n)
        s = rat(s)
        return PolyMat([c * s for c in self.cs], self.n)

    def shift(self, s) -> "PolyMat":
        s = rat(s)
        if s == 0 or len(self.cs) <= 1:
            return self
        from math import comb
        out = [_zeros(self.n) for _ in self.cs]
        for d, c in enumerate(self.cs):
            pw = mpq(1)
            for k in range(d, -1, -1):
                out[k] = out[k] + c * (comb(d, k) * pw)
                pw *= s
        return PolyMat(out, self.n)

    def evaluate(self, x) -> np.ndarray:
        """Value at ``u = x`` (object array for rational ``x``, float/complex otherwise)."""
        if isinstance(x, (float, complex)):
            acc = np.zeros((self.n, self.n), dtype=complex if isinstance(x, complex) else float)
            for c in reversed(self.cs):
                acc = acc * x + c.astype(float)
            return acc
        x = rat(x)
        acc = _zeros(self.n)
        for c in reversed(self.cs):
            acc = acc * x + c
        return acc

    def float_coeffs(self) -> list:
        return [c.astype(float) for c in self.cs]

    def __eq__(self, other):
        if not isinstance(other, PolyMat):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None


# ---------------------------------------------------------------------------
# Exact small-matrix helpers


def rat_inverse(a: np.ndarray) -> np.ndarray | None:
    """Exact inverse by Gauss-Jordan elimination; ``None`` if singular."""
    n = a.shape[0]
    m = [[rat(a[i, j]) for j in range(n)] + [mpq(1) if i == j else mpq(0) for j in range(n)]
         for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [v - f * w for v, w in zip(m[r], m[col])]
    out = _zeros(n)
    for i in range(n):
        for j in range(n):
            out[i, j] = m[i][n + j]
    return out


def interpolate(xs: Sequence, ys: Sequence) -> list:
    """Coefficients (lowest first) of the interpolating polynomial, by Newton differences."""
    n = len(xs)
    coef = list(ys)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    poly = [mpq(0)] * n
    for k in range(n - 1, -1, -1):
        # poly = poly * (u - xs[k]) + coef[k]
        nxt = [mpq(0)] * n
        for d in range(n - 1):
            nxt[d + 1] += poly[d]
            nxt[d] -= poly[d] * xs[k]
        nxt[0] += coef[k]
        poly = nxt
    return poly


# ---------------------------------------------------------------------------
# Tensor operators


class TensorOperator:
    """Weight-conserving operator on ``(C^q)^N`` with entries polynomial in ``u``.

    ``blocks`` maps a sector key (counts of each direction) to a
    :class:`PolyMat` over that sector's lexicographically ordered basis.
    """

    __slots__ = ("q", "N", "blocks")

    def __init__(self, q: int, N: int, blocks: dict):
        self.q = q
        self.N = N
        lay = sector_layout(q, N)
        self.blocks = {k: blocks.get(k, PolyMat.zeros(len(lay[k]))) for k in lay}

    # construction -----------------------------------------------------------

    @classmethod
    def zero(cls, q: int, N: int) -> "TensorOperator":
        return cls(q, N, {})

    @classmethod
    def identity(cls, q: int, N: int, scale=1) -> "TensorOperator":
        lay = sector_layout(q, N)
        return cls(q, N, {k: PolyMat.identity(len(b), scale) for k, b in lay.items()})

    @classmethod
    def scalar(cls, p: PolyU, q: int, N: int) -> "TensorOperator":
        lay = sector_layout(q, N)
        return cls(q, N, {k: PolyMat.from_scalar_poly(p, len(b)) for k, b in lay.items()})

    @classmethod
    def from_function(cls, q: int, N: int, f: Callable[[tuple, tuple], PolyU]) -> "TensorOperator":
        """Build from ``f(row, col)`` on 0-based basis tuples; only in-sector pairs are queried."""
        blocks = {}
        for key, basis in sector_layout(q, N).items():
            blocks[key] = PolyMat.from_polys([[f(r, c) for c in basis] for r in basis])
        return cls(q, N, blocks)

    @classmethod
    def from_entries(cls, q: int, N: int, entries: dict) -> "TensorOperator":
        """Build from ``{(row_tuple, col_tuple): PolyU}`` (0-based tuples)."""
        pos = _sector_positions(q, N)
        lay = sector_layout(q, N)
        rows: dict = {}
        for (r, c), p in entries.items():
            kr, i = pos[r]
            kc, j = pos[c]
            if kr != kc:
                if p.is_zero():
                    continue
                raise ValueError(f"entry {r}->{c} leaves its weight sector")
            rows.setdefault(kr, {})[(i, j)] = p
        blocks = {}
        for key, d in rows.items():
            n = len(lay[key])
            polys = [[d.get((i, j), PolyU()) for j in range(n)] for i in range(n)]
            blocks[key] = PolyMat.from_polys(polys)
        return cls(q, N, blocks)

    @classmethod
    def from_dense(cls, q: int, N: int, dense: Sequence[Sequence[PolyU]]) -> "TensorOperator":
        """Build from a dense lexicographic matrix; raises if it mixes weight sectors."""
        dim = q ** N
        if len(dense) != dim or any(len(r) != dim for r in dense):
            raise DimMismatch(f"expected a {dim}x{dim} matrix")
        entries = {}
        for i in range(dim):
            for j in range(dim):
                p = dense[i][j]
                if not isinstance(p, PolyU):
                    p = PolyU.const(p)
                if not p.is_zero():
                    entries[(lex_tuple(i, q, N), lex_tuple(j, q, N))] = p
        return cls.from_entries(q, N, entries)

    # access -----------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.q ** self.N

    def entry(self, row, col) -> PolyU:
        if isinstance(row, int):
            row = lex_tuple(row, self.q, self.N)
        if isinstance(col, int):
            col = lex_tuple(col, self.q, self.N)
        pos = _sector_positions(self.q, self.N)
        kr, i = pos[tuple(row)]
        kc, j = pos[tuple(col)]
        if kr != kc:
            return PolyU()
        return self.blocks[kr].entry(i, j)

    def to_dense(self) -> list:
        dim = self.dim
        out = [[PolyU() for _ in range(dim)] for _ in range(dim)]
        lay = sector_layout(self.q, self.N)
        for key, blk in self.blocks.items():
            basis = lay[key]
            idx = [lex_index(t, self.q) for t in basis]
            for i, gi in enumerate(idx):
                for j, gj in enumerate(idx):
                    out[gi][gj] = blk.entry(i, j)
        return out

    def nonzero_entries(self):
        """Yield ``(row_index, col_index, PolyU)`` in lexicographic order."""
        lay = sector_layout(self.q, self.N)
        items = []
        for key, blk in self.blocks.items():
            if blk.is_zero():
                continue
            basis = lay[key]
            for i, r in enumerate(basis):
                for j, c in enumerate(basis):
                    p = blk.entry(i, j)
                    if not p.is_zero():
                        items.append((lex_index(r, self.q), lex_index(c, self.q), p))
        items.sort(key=lambda t: (t[0], t[1]))
        return items

    @property
    def degree(self) -> int:
        return max((b.degree for b in self.blocks.values()), default=-1)

    def is_zero(self) -> bool:
        return all(b.is_zero() for b in self.blocks.values())

    def is_diagonal(self) -> bool:
        for blk in self.blocks.values():
            for c in blk.cs:
                n = c.shape[0]
                if any(c[i, j] != 0 for i in range(n) for j in range(n) if i != j):
                    return False
        return True

    def diagonal(self) -> dict:
        """``{basis tuple: PolyU}`` of diagonal entries (0-based tuples)."""
        lay = sector_layout(self.q, self.N)
        out = {}
        for key, blk in self.blocks.items():
            for i, t in enumerate(lay[key]):
                out[t] = blk.entry(i, i)
        return out

    # algebra ----------------------------------------------------------------

    def _check(self, other: "TensorOperator"):
        if not isinstance(other, TensorOperator):
            raise TypeError("expected a TensorOperator")
        if (self.q, self.N) != (other.q, other.N):
            raise DimMismatch(f"({self.q},{self.N}) vs ({other.q},{other.N})")

    def __add__(self, other):
        self._check(other)
        return TensorOperator(self.q, self.N, {k: b + other.blocks[k] for k, b in self.blocks.items()})

    def __sub__(self, other):
        self._check(other)
        return TensorOperator(self.q, self.N, {k: b - other.blocks[k] for k, b in self.blocks.items()})

    def __neg__(self):
        return TensorOperator(self.q, self.N, {k: -b for k, b in self.blocks.items()})

    def __mul__(self, other):
        if isinstance(other, TensorOperator):
            self._check(other)
            return TensorOperator(self.q, self.N,
                                  {k: b.matmul(other.blocks[k]) for k, b in self.blocks.items()})
        return TensorOperator(self.q, self.N, {k: b.scale(other) for k, b in self.blocks.items()})

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return self.__mul__(other)

    def shift(self, s) -> "TensorOperator":
        """The operator with ``u`` replaced by ``u + s``."""
        return TensorOperator(self.q, self.N, {k: b.shift(s) for k, b in self.blocks.items()})

    def __call__(self, s) -> "TensorOperator":
        return self.shift(s)

    def __eq__(self, other):
        if not isinstance(other, TensorOperator):
            return NotImplemented
        return (self.q, self.N) == (other.q, other.N) and (self - other).is_zero()

    __hash__ = None

    def evaluate_dense(self, x) -> np.ndarray:
        """Dense numeric matrix at ``u = x`` (float for float ``x``)."""
        dim = self.dim
        isfloat = isinstance(x, (float, complex))
        out = np.zeros((dim, dim), dtype=float) if isfloat else _zeros(dim)
        lay = sector_layout(self.q, self.N)
        for key, blk in self.blocks.items():
            idx = [lex_index(t, self.q) for t in lay[key]]
            val = blk.evaluate(x)
            out[np.ix_(idx, idx)] = val
        return out

    # reporting --------------------------------------------------------------

    def max_residual_poly(self) -> str:
        """Text of the highest-degree nonzero entry (``"0"`` when the operator vanishes)."""
        best = None
        for _, _, p in self.nonzero_entries():
            if best is None or p.degree > best.degree:
                best = p
        return "0" if best is None else str(best)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "basis": "lex",
            "entries": [[r, c, str(p)] for r, c, p in self.nonzero_entries()],
        }

    @classmethod
    def from_json(cls, data: dict, q: int, N: int) -> "TensorOperator":
        if data.get("dim") != q ** N:
            raise DimMismatch("dimension does not match (q, N)")
        entries = {}
        for r, c, text in data["entries"]:
            entries[(lex_tuple(r, q, N), lex_tuple(c, q, N))] = PolyU.parse(text)
        return cls.from_entries(q, N, entries)

    def __repr__(self):
        return f"TensorOperator(q={self.q}, N={self.N}, degree={self.degree})"


def op_mul(a: TensorOperator, b: TensorOperator) -> TensorOperator:
    return a * b


def op_comm(a: TensorOperator, b: TensorOperator) -> TensorOperator:
    """Commutator ``a·b - b·a``."""
    return a * b - b * a


def op_divide(num: TensorOperator, den: TensorOperator) -> TensorOperator:
    """Exact quotient ``X`` with ``X · den == num`` (entries polynomial in ``u``).

    Each sector block is solved at sample points, interpolated, and the
    product is re-checked exactly; a non-polynomial quotient raises
    :class:`ExactDivisionFailed`.
    """
    num._check(den)
    lay = sector_layout(num.q, num.N)
    blocks = {}
    for key, nb in num.blocks.items():
        db = den.blocks[key]
        n = len(lay[key])
        if nb.is_zero():
            blocks[key] = PolyMat.zeros(n)
            continue
        if db.is_zero():
            raise ExactDivisionFailed("division by an operator that vanishes on a sector")
        bound = nb.degree + max(n - 1, 0) * db.degree + 1
        xs, vals = [], []
        k = 0
        while len(xs) < bound + 1:
            x = mpq(3 * k + 1, 3)
            k += 1
            inv = rat_inverse(db.evaluate(x))
            if inv is None:
                if k > 10 * (bound + 5):
                    raise ExactDivisionFailed("divisor is singular at every sample point")
                continue
            xs.append(x)
            vals.append(nb.evaluate(x).dot(inv))
        cs = [_zeros(n) for _ in range(len(xs))]
        for i in range(n):
            for j in range(n):
                coef = interpolate(xs, [v[i, j] for v in vals])
                for d, c in enumerate(coef):
                    cs[d][i, j] = c
        quo = PolyMat(cs, n)
        if not (quo.matmul(db) - nb).is_zero():
            raise ExactDivisionFailed(f"sector {key}: quotient is not polynomial")
        blocks[key] = quo
    return TensorOperator(num.q, num.N, blocks)


def perm_op(i: int, j: int, q: int, N: int, grading: Sequence[int] = (), graded: bool = True) -> TensorOperator:
    """Permutation of tensor factors ``i`` and ``j`` (1-based sites).

    With ``graded`` the exchange of two odd vectors picks up a ``-1``, so
    ``P|a,b> = (-1)^{p_a p_b} |b,a>`` and ``P² = 1``.
    """
    if not (1 <= i <= N and 1 <= j <= N) or i == j:
        raise BadSite(f"sites must be distinct and in 1..{N}, got {i}, {j}")
    if i > j:
        i, j = j, i
    grading = tuple(grading) if graded and grading else (0,) * q
    perm = list(range(N))
    perm[i - 1], perm[j - 1] = perm[j - 1], perm[i - 1]

    entries = {}
    for col in product(range(q), repeat=N):
        row = tuple(col[p] for p in perm)
        entries[(row, col)] = PolyU.const(koszul_sign(col, grading, perm))
    return TensorOperator.from_entries(q, N, entries)


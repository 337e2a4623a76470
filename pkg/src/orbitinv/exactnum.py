"""Exact arithmetic over Q, Q[t] and the complex algebraic numbers.

An :class:`AlgNum` is either a rational number or an element of a number
field ``Q(theta)`` embedded in C by a designated root ``theta`` of an
irreducible polynomial.  Arithmetic between elements of the same field is
polynomial arithmetic modulo the defining polynomial, so zero tests are
exact and cheap.  Arithmetic between different fields falls back to the
composed-polynomial construction (characteristic polynomial of a Kronecker
sum or product of companion matrices), factorisation over Q, and certified
selection of the right root.

Numerical enclosures use Arb ball arithmetic.  Balls are only ever used to
*separate* quantities that are already known to differ, or to select one of
finitely many isolated roots; every equality is decided algebraically.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence, Union

from flint import acb, arb, ctx, fmpq, fmpq_mat, fmpq_poly, fmpz_poly

__all__ = [
    "AlgNum",
    "Box",
    "ExactArithmeticError",
    "InvalidInput",
    "NumberField",
    "Rat",
    "RatPoly",
    "alg_arith",
    "alg_equals",
    "as_alg",
    "closed_field",
    "common_closed_field",
    "compositum",
    "declare_field",
    "factor_irreducible",
    "isolate_roots",
    "modulus_cmp_one",
    "parse_rat",
    "poly_coeffs",
    "rat_str",
    "ratpoly",
    "root_of_unity_order",
    "sqrt_pos",
]

Rat = Fraction
RatPoly = fmpq_poly

MAX_PREC = 1 << 16
BASE_PREC = 64


class InvalidInput(ValueError):
    """Input violates an operation's precondition."""


class ExactArithmeticError(ArithmeticError):
    """Exact arithmetic failure such as division by zero."""


# --------------------------------------------------------------------------
# rationals and univariate polynomials


def parse_rat(value) -> Fraction:
    """Parse ``"p/q"``, ``"p"``, int or Fraction into a reduced Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidInput(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, fmpq):
        return Fraction(int(value.p), int(value.q))
    if isinstance(value, str):
        text = value.strip()
        num, _, den = text.partition("/")
        try:
            p, q = int(num), int(den) if den else 1
        except ValueError as exc:
            raise InvalidInput(f"malformed rational {value!r}") from exc
        if q == 0:
            raise InvalidInput(f"zero denominator in {value!r}")
        return Fraction(p, q)
    raise InvalidInput(f"not a rational: {value!r}")


def rat_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _fq(q: Fraction) -> fmpq:
    return fmpq(q.numerator, q.denominator)


def _fr(q: fmpq) -> Fraction:
    return Fraction(int(q.p), int(q.q))


def ratpoly(coeffs: Iterable) -> fmpq_poly:
    """Build a polynomial from coefficients listed lowest degree first."""
    return fmpq_poly([_fq(parse_rat(c)) for c in coeffs])


def poly_coeffs(p: fmpq_poly) -> list[Fraction]:
    return [_fr(c) for c in p.coeffs()]


def _monic(p: fmpq_poly) -> fmpq_poly:
    return p / p.leading_coefficient()


def _key(p: fmpq_poly) -> tuple:
    return tuple((int(c.p), int(c.q)) for c in p.coeffs())


def factor_irreducible(p: fmpq_poly) -> list[tuple[fmpq_poly, int]]:
    """Monic irreducible factors of ``p`` with multiplicities, canonically sorted."""
    if p.is_zero():
        raise InvalidInput("cannot factor the zero polynomial")
    _, facs = p.factor()
    out = [(_monic(f), int(m)) for f, m in facs]
    out.sort(key=lambda fm: (fm[0].degree(), _key(fm[0])))
    return out


# --------------------------------------------------------------------------
# balls and boxes


@contextmanager
def _precision(prec: int):
    old = ctx.prec
    ctx.prec = prec
    try:
        yield
    finally:
        ctx.prec = old


def _arb_bounds(x: arb) -> tuple[Fraction, Fraction]:
    man, exp = x.mid().man_exp()
    rman, rexp = x.rad().man_exp()
    mid = Fraction(int(man)) * (Fraction(2) ** int(exp))
    rad = Fraction(int(rman)) * (Fraction(2) ** int(rexp))
    return mid - rad, mid + rad


@dataclass(frozen=True)
class Box:
    """Axis-aligned rational rectangle in the complex plane."""

    re_lo: Fraction
    re_hi: Fraction
    im_lo: Fraction
    im_hi: Fraction

    def __post_init__(self):
        if self.re_lo > self.re_hi or self.im_lo > self.im_hi:
            raise InvalidInput("box corners out of order")

    @classmethod
    def from_ball(cls, z: acb) -> "Box":
        re_lo, re_hi = _arb_bounds(z.real)
        if z.imag.is_exact() and z.imag.is_zero():
            return cls(re_lo, re_hi, Fraction(0), Fraction(0))
        im_lo, im_hi = _arb_bounds(z.imag)
        return cls(re_lo, re_hi, im_lo, im_hi)

    @property
    def is_real(self) -> bool:
        return self.im_lo == 0 and self.im_hi == 0

    def midpoint(self) -> tuple[Fraction, Fraction]:
        return (self.re_lo + self.re_hi) / 2, (self.im_lo + self.im_hi) / 2

    def contains_ball(self, z: acb) -> bool:
        b = Box.from_ball(z)
        return (self.re_lo <= b.re_lo and b.re_hi <= self.re_hi
                and self.im_lo <= b.im_lo and b.im_hi <= self.im_hi)

    def disjoint_ball(self, z: acb) -> bool:
        b = Box.from_ball(z)
        return (b.re_hi < self.re_lo or b.re_lo > self.re_hi
                or b.im_hi < self.im_lo or b.im_lo > self.im_hi)

    def disjoint(self, other: "Box") -> bool:
        return (other.re_hi < self.re_lo or other.re_lo > self.re_hi
                or other.im_hi < self.im_lo or other.im_lo > self.im_hi)

    def to_json(self) -> list[str]:
        return [rat_str(v) for v in (self.re_lo, self.re_hi, self.im_lo, self.im_hi)]

    @classmethod
    def from_json(cls, data: Sequence[str]) -> "Box":
        if len(data) != 4:
            raise InvalidInput("box needs four corners")
        return cls(*(parse_rat(v) for v in data))


def _ball_of_rat(q: Fraction) -> acb:
    return acb(arb(_fq(q)))


def _horner(coeffs: Sequence[fmpq], z: acb) -> acb:
    acc = acb(0)
    for c in reversed(coeffs):
        acc = acc * z + arb(c)
    return acc


def _disjoint(a: acb, b: acb) -> bool:
    return not a.overlaps(b)


# --------------------------------------------------------------------------
# isolated roots


class _Root:
    """A root of a monic irreducible polynomial, refinable to any precision."""

    __slots__ = ("poly", "index", "box", "_ball", "_prec", "is_real", "field", "__weakref__")

    def __init__(self, poly: fmpq_poly, index: int, ball: acb, prec: int):
        self.poly = poly
        self.index = index
        self._ball = ball
        self._prec = prec
        self.box = Box.from_ball(ball)
        self.is_real = self.box.is_real
        self.field = None

    def ball(self, prec: int) -> acb:
        while self._prec < prec:
            target = self._prec * 2
            while True:
                cands = [r for r in _raw_roots(self.poly, target) if r.overlaps(self._ball)]
                if len(cands) == 1:
                    self._ball = cands[0]
                    self._prec = target
                    break
                target *= 2
                if target > MAX_PREC:
                    raise ExactArithmeticError("root refinement did not converge")
        return self._ball


def _raw_roots(poly: fmpq_poly, prec: int) -> list[acb]:
    numer = fmpz_poly([int(c) for c in (poly * poly.denom()).coeffs()]) if poly.denom() != 1 else poly.numer()
    with _precision(prec):
        roots = [r for r, _ in numer.complex_roots()]
    return roots


_ROOTS: dict[tuple, list[_Root]] = {}


def canonical_roots(poly: fmpq_poly) -> list[_Root]:
    """All roots of a monic irreducible polynomial in a canonical order."""
    key = _key(poly)
    cached = _ROOTS.get(key)
    if cached is not None:
        return cached
    prec = BASE_PREC
    while True:
        balls = _raw_roots(poly, prec)
        boxes = [Box.from_ball(b) for b in balls]
        if all(boxes[i].disjoint(boxes[j]) for i in range(len(boxes)) for j in range(i)):
            break
        prec *= 2
    order = sorted(range(len(balls)), key=lambda i: (boxes[i].midpoint()[0], boxes[i].midpoint()[1]))
    roots = [_Root(poly, k, balls[i], prec) for k, i in enumerate(order)]
    coarse = [_coarsen(boxes[i], [boxes[j] for j in order if j != i]) for i in order]
    for r, b in zip(roots, coarse):
        r.box = b
    _ROOTS[key] = roots
    return roots


def _coarsen(box: Box, others: list[Box]) -> Box:
    """Round ``box`` outward to the coarsest dyadic grid keeping it isolating."""
    bits = 2
    while True:
        scale = 1 << bits
        lo = lambda v: Fraction(math.floor(v * scale), scale)
        hi = lambda v: Fraction(math.ceil(v * scale), scale)
        cand = Box(lo(box.re_lo), hi(box.re_hi),
                   *( (Fraction(0), Fraction(0)) if box.is_real else (lo(box.im_lo), hi(box.im_hi)) ))
        if all(cand.disjoint(o) for o in others):
            return cand
        bits *= 2


def isolate_roots(p: fmpq_poly) -> list[tuple[Box, int]]:
    """Pairwise-disjoint isolating boxes for the distinct roots of ``p``.

    Multiplicities sum to ``deg p``; real roots get degenerate imaginary sides.
    """
    if p.is_zero():
        raise InvalidInput("cannot isolate roots of the zero polynomial")
    out: list[tuple[Box, int]] = []
    pieces: list[tuple[_Root, int]] = []
    for f, m in factor_irreducible(p):
        for r in canonical_roots(f):
            pieces.append((r, m))
    prec = BASE_PREC
    while True:
        boxes = [Box.from_ball(r.ball(prec)) for r, _ in pieces]
        if all(boxes[i].disjoint(boxes[j]) for i in range(len(boxes)) for j in range(i)):
            break
        prec *= 2
    out = [(b, m) for b, (_, m) in zip(boxes, pieces)]
    out.sort(key=lambda bm: (bm[0].midpoint()[0], bm[0].midpoint()[1]))
    return out


# --------------------------------------------------------------------------
# number fields


class NumberField:
    """``Q(theta)`` for a designated root ``theta`` of an irreducible polynomial.

    ``conj_expr`` (when known) expresses ``conj(theta)`` as a polynomial in
    ``theta``; the field is then closed under complex conjugation.
    """

    __slots__ = ("root", "poly", "degree", "conj_expr", "i_expr", "_conj_field", "_gen")

    def __init__(self, root: _Root):
        self.root = root
        self.poly = root.poly
        self.degree = root.poly.degree()
        self.conj_expr = fmpq_poly([0, 1]) if root.is_real else None
        self.i_expr = None
        self._conj_field = None
        self._gen = None

    @staticmethod
    def of(root: _Root) -> "NumberField":
        if root.field is None:
            root.field = NumberField(root)
        return root.field

    def gen(self) -> "AlgNum":
        if self._gen is None:
            self._gen = AlgNum._elem(self, fmpq_poly([0, 1]))
        return self._gen

    def conjugate_field(self) -> "NumberField":
        if self._conj_field is None:
            roots = canonical_roots(self.poly)
            prec = BASE_PREC
            while True:
                hits = [r for r in roots if r.ball(prec).overlaps(self.root.ball(prec).conjugate())]
                if len(hits) == 1:
                    break
                prec *= 2
            self._conj_field = NumberField.of(hits[0])
        return self._conj_field

    def reduce(self, expr: fmpq_poly) -> fmpq_poly:
        if expr.degree() >= self.degree:
            return expr % self.poly
        return expr

    def __repr__(self):
        return f"NumberField({self.poly}, root #{self.root.index})"


# --------------------------------------------------------------------------
# algebraic numbers


Number = Union["AlgNum", Fraction, int]


class AlgNum:
    """Exact complex algebraic number.  Immutable; caches are value-neutral."""

    __slots__ = ("_q", "_field", "_expr", "_minpoly", "_mroot", "_hash")

    def __init__(self, value: Number = 0):
        if isinstance(value, AlgNum):
            for s in AlgNum.__slots__:
                object.__setattr__(self, s, getattr(value, s))
            return
        self._q = parse_rat(value)
        self._field = None
        self._expr = None
        self._minpoly = None
        self._mroot = None
        self._hash = None

    # ---- constructors

    @classmethod
    def _elem(cls, field: NumberField, expr: fmpq_poly) -> "AlgNum":
        expr = field.reduce(expr)
        if expr.degree() <= 0:
            return cls(_fr(expr.coeffs()[0]) if expr.degree() == 0 else 0)
        obj = cls.__new__(cls)
        obj._q = None
        obj._field = field
        obj._expr = expr
        obj._minpoly = None
        obj._mroot = None
        obj._hash = None
        return obj

    @classmethod
    def _from_root(cls, root: _Root) -> "AlgNum":
        if root.poly.degree() == 1:
            return cls(_fr(-root.poly.coeffs()[0]))
        obj = cls._elem(NumberField.of(root), fmpq_poly([0, 1]))
        obj._minpoly = root.poly
        obj._mroot = root
        return obj

    @classmethod
    def root_in_box(cls, poly: fmpq_poly, box: Box) -> "AlgNum":
        """The unique root of ``poly`` inside ``box`` (``poly`` need not be monic)."""
        if poly.is_zero():
            raise InvalidInput("zero polynomial")
        found: list[_Root] = []
        for f, _ in factor_irreducible(poly):
            for r in canonical_roots(f):
                prec = BASE_PREC
                while True:
                    b = r.ball(prec)
                    if box.contains_ball(b):
                        found.append(r)
                        break
                    if box.disjoint_ball(b):
                        break
                    prec *= 2
                    if prec > MAX_PREC:
                        raise InvalidInput("root lies on the box boundary")
        if len(found) != 1:
            raise InvalidInput(f"box contains {len(found)} roots, expected exactly one")
        return cls._from_root(found[0])

    @classmethod
    def roots_of(cls, poly: fmpq_poly) -> list["AlgNum"]:
        """Distinct roots of ``poly`` in canonical order of their irreducible factors."""
        out = []
        for f, _ in factor_irreducible(poly):
            out.extend(cls._from_root(r) for r in canonical_roots(f))
        return out

    @classmethod
    def i(cls) -> "AlgNum":
        return _I()

    # ---- inspection

    @property
    def is_rational(self) -> bool:
        return self._q is not None

    @property
    def rational(self) -> Fraction:
        if self._q is None:
            raise InvalidInput("not a rational number")
        return self._q

    @property
    def field(self) -> NumberField | None:
        return self._field

    @property
    def expr(self) -> fmpq_poly | None:
        return self._expr

    def is_zero(self) -> bool:
        return self._q is not None and self._q == 0

    @property
    def minpoly(self) -> fmpq_poly:
        if self._minpoly is None:
            self._compute_minpoly()
        return self._minpoly

    @property
    def root(self) -> _Root:
        if self._q is not None:
            return canonical_roots(self.minpoly)[0]
        if self._mroot is None:
            self._compute_minpoly()
        return self._mroot

    @property
    def degree(self) -> int:
        return 1 if self._q is not None else self.minpoly.degree()

    def _compute_minpoly(self):
        if self._q is not None:
            self._minpoly = fmpq_poly([_fq(-self._q), 1])
            return
        field, expr = self._field, self._expr
        n = field.degree
        cols = []
        cur = expr
        for _ in range(n):
            cols.append(cur)
            cur = field.reduce(cur * fmpq_poly([0, 1]))
        entries = []
        for i in range(n):
            for j in range(n):
                cs = cols[j].coeffs()
                entries.append(cs[i] if i < len(cs) else fmpq(0))
        charpoly = fmpq_mat(n, n, entries).charpoly()
        facs = factor_irreducible(charpoly)
        assert len(facs) == 1, "characteristic polynomial of a field element is a power of its minimal polynomial"
        f = facs[0][0]
        self._minpoly = f
        self._mroot = _select_root([f], lambda prec: self.ball(prec))

    def ball(self, prec: int = BASE_PREC) -> acb:
        """Certified enclosure of the value, computed with working precision ``prec``."""
        if self._q is not None:
            with _precision(prec):
                return _ball_of_rat(self._q)
        if self._mroot is not None and self._expr.degree() == 1 and self._expr.coeffs() == [0, 1]:
            return self._mroot.ball(prec)
        theta = self._field.root.ball(prec)
        with _precision(prec + 16):
            return _horner(self._expr.coeffs(), theta)

    def box(self) -> Box:
        """Canonical isolating box (deterministic for a given value)."""
        if self._q is not None:
            return Box(self._q, self._q, Fraction(0), Fraction(0))
        return self.root.box

    def __float__(self):
        if not self.is_real():
            raise TypeError("complex algebraic number")
        return float(self.ball(BASE_PREC).real.mid())

    def __complex__(self):
        b = self.ball(BASE_PREC)
        return complex(float(b.real.mid()), float(b.imag.mid()))

    # ---- field coercion

    def _coerce(self, other) -> "AlgNum":
        if isinstance(other, AlgNum):
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return AlgNum(other)
        return NotImplemented

    def _in(self, field: NumberField) -> fmpq_poly:
        if self._q is not None:
            return fmpq_poly([_fq(self._q)])
        assert self._field is field
        return self._expr

    # ---- arithmetic

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self._q is not None and other._q is not None:
            return AlgNum(self._q + other._q)
        field = _common_field(self, other)
        if field is not None:
            return AlgNum._elem(field, self._in(field) + other._in(field))
        return _generic("add", self, other)

    __radd__ = __add__

    def __neg__(self):
        if self._q is not None:
            return AlgNum(-self._q)
        return AlgNum._elem(self._field, -self._expr)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self._q is not None and other._q is not None:
            return AlgNum(self._q * other._q)
        field = _common_field(self, other)
        if field is not None:
            return AlgNum._elem(field, self._in(field) * other._in(field))
        return _generic("mul", self, other)

    __rmul__ = __mul__

    def inv(self) -> "AlgNum":
        if self.is_zero():
            raise ExactArithmeticError("division by zero")
        if self._q is not None:
            return AlgNum(1 / self._q)
        g, s, _ = self._expr.xgcd(self._field.poly)
        # g is a nonzero constant because the defining polynomial is irreducible
        return AlgNum._elem(self._field, s / g.coeffs()[0])

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inv()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inv()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inv() ** (-n)
        if self._q is not None:
            return AlgNum(self._q ** n)
        result = fmpq_poly([1])
        base = self._expr
        field = self._field
        while n:
            if n & 1:
                result = field.reduce(result * base)
            n >>= 1
            if n:
                base = field.reduce(base * base)
        return AlgNum._elem(field, result)

    def conj(self) -> "AlgNum":
        if self._q is not None:
            return self
        field = self._field
        if field.conj_expr is not None:
            return AlgNum._elem(field, _compose_mod(self._expr, field.conj_expr, field))
        return AlgNum._elem(field.conjugate_field(), self._expr)

    def re(self) -> "AlgNum":
        if self._q is not None:
            return self
        return (self + self.conj()) * Fraction(1, 2)

    def im(self) -> "AlgNum":
        return self.parts()[1]

    def parts(self) -> tuple["AlgNum", "AlgNum"]:
        """``(re, im)`` with a single conjugation."""
        if self._q is not None:
            return self, AlgNum(0)
        c = self.conj()
        return (self + c) * Fraction(1, 2), self._im_from(self - c)

    def _im_from(self, diff: "AlgNum") -> "AlgNum":
        if diff.is_zero():
            return AlgNum(0)
        field = self._field
        if field.conj_expr is not None and field.i_expr is not None:
            return diff * AlgNum._elem(field, field.i_expr) * Fraction(-1, 2)
        return diff * _I() * Fraction(-1, 2)

    def abs2(self) -> "AlgNum":
        """``|a|^2`` as a real algebraic number."""
        return self * self.conj()

    def is_real(self) -> bool:
        if self._q is not None:
            return True
        if self._field.conj_expr is not None:
            return self.conj() == self
        return self.root.is_real

    # ---- comparisons

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self._q is not None and other._q is not None:
            return self._q == other._q
        if self._q is not None or other._q is not None:
            return False
        if self._field is other._field:
            return self._expr == other._expr
        if self.minpoly != other.minpoly:
            return False
        return self.root is other.root

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._q) if self._q is not None else hash(_key(self.minpoly))
        return self._hash

    def sign(self) -> int:
        """Sign of a real algebraic number."""
        if self._q is not None:
            return (self._q > 0) - (self._q < 0)
        if not self.is_real():
            raise InvalidInput("sign of a non-real number")
        prec = BASE_PREC
        while prec <= MAX_PREC:
            re = self.ball(prec).real
            if re > 0:
                return 1
            if re < 0:
                return -1
            prec *= 2
        raise ExactArithmeticError("sign refinement did not converge")

    def cmp(self, other) -> int:
        """Exact comparison of real algebraic numbers: -1, 0 or 1."""
        other = self._coerce(other)
        if self._q is not None and other._q is not None:
            return (self._q > other._q) - (self._q < other._q)
        for prec in (BASE_PREC, 4 * BASE_PREC):
            a, b = self.ball(prec).real, other.ball(prec).real
            if a > b:
                return 1
            if a < b:
                return -1
        return (self - other).sign()

    def __lt__(self, other):
        return self.cmp(other) < 0

    def __le__(self, other):
        return self.cmp(other) <= 0

    def __gt__(self, other):
        return self.cmp(other) > 0

    def __ge__(self, other):
        return self.cmp(other) >= 0

    # ---- presentation

    def __repr__(self):
        if self._q is not None:
            return f"AlgNum({self._q})"
        z = complex(self)
        return f"AlgNum(~{z:.6g}, minpoly={self.minpoly})"

    def to_json(self):
        if self._q is not None:
            return str(self._q)
        return {"minpoly": [str(c) for c in poly_coeffs(self.minpoly)], "box": self.box().to_json()}

    @classmethod
    def from_json(cls, data) -> "AlgNum":
        if isinstance(data, (str, int)):
            return cls(parse_rat(data))
        if not isinstance(data, dict) or "minpoly" not in data or "box" not in data:
            raise InvalidInput(f"malformed algebraic number {data!r}")
        return cls.root_in_box(ratpoly(data["minpoly"]), Box.from_json(data["box"]))

    def sort_key(self) -> tuple:
        """Canonical order: degree, minimal polynomial, realness, box midpoint."""
        if self._q is not None:
            return (1, (), 0, self._q, Fraction(0))
        mid = self.box().midpoint()
        return (self.degree, _key(self.minpoly), 0 if self.root.is_real else 1, mid[0], mid[1])


def as_alg(value) -> AlgNum:
    if isinstance(value, AlgNum):
        return value
    return AlgNum(parse_rat(value))


def _common_field(a: AlgNum, b: AlgNum) -> NumberField | None:
    if a._q is not None:
        return b._field
    if b._q is not None or a._field is b._field:
        return a._field
    return None


def _compose_mod(expr: fmpq_poly, inner: fmpq_poly, field: NumberField) -> fmpq_poly:
    acc = fmpq_poly([0])
    for c in reversed(expr.coeffs()):
        acc = field.reduce(acc * inner + fmpq_poly([c]))
    return acc


@lru_cache(maxsize=None)
def _I() -> AlgNum:
    roots = canonical_roots(fmpq_poly([1, 0, 1]))
    root = [r for r in roots if r.box.im_lo > 0][0]
    field = NumberField.of(root)
    field.conj_expr = fmpq_poly([0, -1])
    field.i_expr = fmpq_poly([0, 1])
    return AlgNum._from_root(root)


def _companion(p: fmpq_poly) -> list[list[fmpq]]:
    n = p.degree()
    cs = p.coeffs()
    m = [[fmpq(0)] * n for _ in range(n)]
    for i in range(1, n):
        m[i][i - 1] = fmpq(1)
    for i in range(n):
        m[i][n - 1] = -cs[i]
    return m


def _kron(a, b):
    n, m = len(a), len(b)
    out = [[fmpq(0)] * (n * m) for _ in range(n * m)]
    for i in range(n):
        for j in range(n):
            aij = a[i][j]
            if aij == 0:
                continue
            for k in range(m):
                for l in range(m):
                    if b[k][l] != 0:
                        out[i * m + k][j * m + l] = aij * b[k][l]
    return out


def _eye(n):
    return [[fmpq(1) if i == j else fmpq(0) for j in range(n)] for i in range(n)]


def _charpoly(rows) -> fmpq_poly:
    n = len(rows)
    return fmpq_mat(n, n, [c for row in rows for c in row]).charpoly()


def _select_root(polys: Sequence[fmpq_poly], enclosure) -> _Root:
    cands = [r for f in polys for r in canonical_roots(f)]
    prec = BASE_PREC
    while prec <= MAX_PREC:
        ball = enclosure(prec)
        hits = [r for r in cands if r.ball(prec).overlaps(ball)]
        if len(hits) == 1:
            return hits[0]
        if not hits:
            raise ExactArithmeticError("no candidate root matches the enclosure")
        cands = hits
        prec *= 2
    raise ExactArithmeticError("root selection did not converge")


def _generic(op: str, a: AlgNum, b: AlgNum) -> AlgNum:
    ca, cb = _companion(a.minpoly), _companion(b.minpoly)
    if op == "add":
        left = _kron(ca, _eye(len(cb)))
        right = _kron(_eye(len(ca)), cb)
        mat = [[x + y for x, y in zip(r1, r2)] for r1, r2 in zip(left, right)]
        enclose = lambda prec: a.ball(prec) + b.ball(prec)
    else:
        mat = _kron(ca, cb)
        enclose = lambda prec: a.ball(prec) * b.ball(prec)
    facs = [f for f, _ in factor_irreducible(_charpoly(mat))]
    return AlgNum._from_root(_select_root(facs, enclose))


def sqrt_pos(r: AlgNum) -> AlgNum:
    """Positive square root of a positive real algebraic number."""
    if r.sign() <= 0:
        raise InvalidInput("sqrt_pos needs a positive argument")
    if r.is_rational:
        q = r.rational
        n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
        if n * n == q.numerator and d * d == q.denominator:
            return AlgNum(Fraction(n, d))
    f = r.minpoly
    cs = f.coeffs()
    sq = [fmpq(0)] * (2 * len(cs) - 1)
    for k, c in enumerate(cs):
        sq[2 * k] = c
    sq = fmpq_poly(sq)
    facs = [g for g, _ in factor_irreducible(sq)]

    def enclose(prec):
        with _precision(prec + 16):
            return acb(r.ball(prec).real.sqrt())

    return AlgNum._from_root(_select_root(facs, enclose))


# --------------------------------------------------------------------------
# conjugation-closed fields


def _poly_over_field_gcd(f: list[AlgNum], g: list[AlgNum]) -> list[AlgNum]:
    def strip(p):
        while p and p[-1].is_zero():
            p = p[:-1]
        return p

    f, g = strip(f), strip(g)
    while g:
        # f mod g
        lead_inv = g[-1].inv()
        r = list(f)
        while len(r) >= len(g):
            c = r[-1] * lead_inv
            shift = len(r) - len(g)
            for k in range(len(g)):
                r[shift + k] = r[shift + k] - c * g[k]
            r = strip(r[:-1] if r[-1].is_zero() else r)
            if r and len(r) >= len(g) and r[-1].is_zero():
                r = strip(r)
        f, g = g, r
    inv = f[-1].inv()
    return [c * inv for c in f]


def compositum(a: AlgNum, b: AlgNum) -> tuple[NumberField, AlgNum, AlgNum]:
    """Field ``Q(a, b)`` from a primitive element ``a + k b``, with ``a`` and ``b`` inside it."""
    fa, fb = a.minpoly, b.minpoly
    ca, cb = _companion(fa), _companion(fb)
    left = _kron(ca, _eye(len(cb)))
    right = _kron(_eye(len(ca)), cb)
    k = 1
    while True:
        P = _charpoly([[x + k * y for x, y in zip(r1, r2)] for r1, r2 in zip(left, right)])
        # squarefree => all a_i + k b_j distinct => a + k b is primitive
        if P.gcd(P.derivative()).degree() == 0:
            break
        k += 1
    facs = [g for g, _ in factor_irreducible(P)]
    root = _select_root(facs, lambda prec: a.ball(prec) + k * b.ball(prec))
    field = NumberField.of(root)
    if root.poly.degree() == 1:
        raise InvalidInput("compositum of rationals")
    theta = field.gen()
    # b is the unique common root of fb(y) and fa(theta - k y)
    g = [AlgNum(0)]
    power = [AlgNum(1)]
    for c in fa.coeffs():
        g = _padd(g, [t * _fr(c) for t in power])
        power = _pmul(power, [theta, AlgNum(-k)])
    common = _poly_over_field_gcd([AlgNum(_fr(c)) for c in fb.coeffs()], g)
    if len(common) != 2:
        raise ExactArithmeticError("primitive element construction failed")
    b_in = -common[0]
    a_in = theta - b_in * k
    return field, a_in, b_in


def declare_field(poly: fmpq_poly, box: Box, conj_expr: fmpq_poly | None = None,
                  i_expr: fmpq_poly | None = None) -> NumberField:
    """Rebuild a field from its generator's minimal polynomial and isolating box.

    Claimed expressions for ``conj(theta)`` and ``i`` are checked exactly:
    each must be a root of the right polynomial inside the field, and must
    sit in the isolating box of the intended root.
    """
    facs = factor_irreducible(poly)
    if poly.degree() < 2 or len(facs) != 1 or facs[0][1] != 1 or poly.leading_coefficient() != 1:
        raise InvalidInput("field polynomial must be monic, irreducible and of degree >= 2")
    gen = AlgNum.root_in_box(poly, box)
    field = gen.field
    if conj_expr is not None:
        conj_expr = field.reduce(conj_expr)
        if field.conj_expr is None:
            target = field.conjugate_field().root
            _check_root_expr(field, conj_expr, field.poly, target.box)
            field.conj_expr = conj_expr
        elif field.conj_expr != conj_expr:
            raise InvalidInput("conjugation expression disagrees with the field")
    if i_expr is not None:
        i_expr = field.reduce(i_expr)
        if field.i_expr is None:
            _check_root_expr(field, i_expr, fmpq_poly([1, 0, 1]), _I().root.box)
            field.i_expr = i_expr
        elif field.i_expr != i_expr:
            raise InvalidInput("expression for i disagrees with the field")
    return field


def _check_root_expr(field: NumberField, expr: fmpq_poly, poly: fmpq_poly, box: Box) -> None:
    # expr(theta) is a root of poly (exact) lying in an isolating box of one root
    if not _compose_mod(poly, expr, field).is_zero():
        raise InvalidInput("claimed field expression is not a root of its polynomial")
    value = AlgNum._elem(field, expr)
    prec = BASE_PREC
    while prec <= MAX_PREC:
        ball = value.ball(prec)
        if box.contains_ball(ball):
            return
        if box.disjoint_ball(ball):
            break
        prec *= 2
    raise InvalidInput("claimed field expression denotes a different root")


_CLOSED: dict[int, tuple[NumberField, AlgNum]] = {}


def closed_field(alpha: AlgNum) -> tuple[NumberField, AlgNum]:
    """A field containing ``alpha`` that is closed under complex conjugation.

    For real ``alpha`` this is ``Q(alpha)``.  Otherwise it is
    ``Q(alpha, conj alpha, i)``, so real and imaginary parts of every element
    stay inside the field.
    """
    if alpha.is_rational:
        raise InvalidInput("rational numbers need no field")
    root = alpha.root
    cached = _CLOSED.get(id(root))
    if cached is not None:
        return cached
    if root.is_real:
        result = (NumberField.of(root), AlgNum._from_root(root))
        _CLOSED[id(root)] = result
        return result
    alpha = AlgNum._from_root(root)
    f1, a1, abar1 = compositum(alpha, alpha.conj())
    # generator of f1 is a1 + k*abar1, so its conjugate is abar1 + k*a1
    k1 = _recover_k(f1, a1, abar1)
    f1.conj_expr = (abar1 + a1 * k1)._in(f1)
    gen1 = f1.gen()
    f2, g2, i2 = compositum(gen1, _I())
    k2 = _recover_k(f2, g2, i2)
    conj_gen1 = AlgNum._elem(f2, _compose_mod(f1.conj_expr, g2._in(f2), f2))
    f2.conj_expr = (conj_gen1 - i2 * k2)._in(f2)
    f2.i_expr = i2._in(f2)
    a2 = AlgNum._elem(f2, _compose_mod(a1._in(f1), g2._in(f2), f2))
    result = (f2, a2)
    _CLOSED[id(root)] = result
    return result


def _recover_k(field: NumberField, a_in: AlgNum, b_in: AlgNum) -> int:
    # generator == a + k b for the k chosen in compositum(); recover it exactly
    theta = field.gen()
    diff = theta - a_in
    k = (diff / b_in)
    if not k.is_rational:
        raise ExactArithmeticError("unexpected primitive element")
    return int(k.rational)


def _padd(p, q):
    n = max(len(p), len(q))
    return [(p[i] if i < len(p) else AlgNum(0)) + (q[i] if i < len(q) else AlgNum(0)) for i in range(n)]


def _pmul(p, q):
    out = [AlgNum(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] = out[i + j] + a * b
    return out


# --------------------------------------------------------------------------
# spec-facing operations


def alg_arith(op: str, a: AlgNum, b: AlgNum | None = None) -> AlgNum:
    a = as_alg(a)
    if op in ("add", "sub", "mul", "div") and b is None:
        raise InvalidInput(f"{op} needs two operands")
    if b is not None:
        b = as_alg(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    if op == "inv":
        return a.inv()
    if op == "conj":
        return a.conj()
    raise InvalidInput(f"unknown operation {op!r}")


def alg_equals(a: AlgNum, b: AlgNum) -> bool:
    return as_alg(a) == as_alg(b)


def modulus_cmp_one(a: AlgNum) -> int:
    """-1, 0 or 1 as ``|a|`` is less than, equal to or greater than 1."""
    a = as_alg(a)
    if a.is_zero():
        raise InvalidInput("modulus comparison of zero")
    return a.abs2().cmp(1)


def _totient(n: int) -> int:
    result, m, p = n, n, 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            result -= result // p
        p += 1
    if m > 1:
        result -= result // m
    return result


def root_of_unity_order(a: AlgNum) -> int | None:
    """Least ``n >= 1`` with ``a**n == 1``, or None if ``a`` is not a root of unity."""
    a = as_alg(a)
    if a.is_zero() or modulus_cmp_one(a) != 0:
        raise InvalidInput("root_of_unity_order needs |a| = 1")
    deg = a.degree
    # phi(n) >= sqrt(n/2), so phi(n) = deg forces n <= 2 deg^2
    for n in range(1, 2 * deg * deg + 3):
        if _totient(n) != deg:
            continue
        if (a ** n) == 1:
            return n
    return None


def common_closed_field(values: Sequence[AlgNum], max_degree: int = 32):
    """One conjugation-closed field holding every irrational entry of ``values``.

    Returns ``(field, images)`` with ``images[i] == values[i]``; rational
    entries are passed through.  ``field`` is None when all values are
    rational, and the function returns None when the field would exceed
    ``max_degree`` (judged up front from degree products, so that hopeless
    cases give up cheaply).
    """
    values = [as_alg(v) for v in values]
    irr = [v for v in values if not v.is_rational]
    if not irr:
        return None, values
    gen = AlgNum._from_root(irr[0].root)
    reps: list[tuple[AlgNum, fmpq_poly]] = [(gen, fmpq_poly([0, 1]))]
    for v in irr[1:]:
        if any(v == r for r, _ in reps):
            continue
        if gen.degree * v.degree > max_degree:
            return None
        new_field, g_in, v_in = compositum(gen, v)
        if new_field.degree > max_degree:
            return None
        inner = g_in._in(new_field)
        reps = [(r, _compose_mod(e, inner, new_field)) for r, e in reps]
        reps.append((v, v_in._in(new_field)))
        gen = new_field.gen()
    if not gen.is_real() and gen.degree ** 2 > max_degree:
        return None
    closed, gen_in = closed_field(gen)
    if closed.degree > max_degree:
        return None
    inner = gen_in._in(closed)
    table = [(r, AlgNum._elem(closed, _compose_mod(e, inner, closed))) for r, e in reps]
    images = []
    for v in values:
        if v.is_rational:
            images.append(v)
            continue
        img = next(im for r, im in table if r == v)
        images.append(img)
    return closed, images

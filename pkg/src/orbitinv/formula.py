"""Quantifier-free semialgebraic formulas over real coordinates u1..u2d.

Complex coordinate ``z_i`` (0-based ``i``) is represented by the real
variables ``u_{2i+1} = Re z_i`` and ``u_{2i+2} = Im z_i`` (1-based names).
Polynomials are sparse, with algebraic coefficients, kept in graded-lex
order so that printing is canonical.

Text grammar (s-expressions)::

    formula := "(formula" D [fields] node ")"
    fields  := "(fields" ("(field" K "(" c0 .. cn ")" box ["(conj" e0 .. ")"] ["(i" e0 .. ")"] ")")* ")"
    node    := "(and" node* ")" | "(or" node* ")" | "(not" node ")"
             | "(" rel poly poly ")"                  rel in >= > = !=
             | "(points" ["(coords" i+ ")"] "(or" ("(and" eq* ")")* "))"
    eq      := "(= u" k const ")"
    poly    := const | var | "(+" poly+ ")" | "(*" poly+ ")" | "(^" var n ")"
    const   := p | p/q | "(in" K e0 .. em ")" | "(alg (" c0 .. cn ")" box ")"
    box     := "(box" relo rehi imlo imhi ")"

A field ``K`` is generated by the root of the monic ``c0 + .. + cn t^n`` in
its box; ``(in K e0 .. em)`` is ``e0 + e1 t + ..`` in that generator.  The
optional ``conj`` and ``i`` entries express complex conjugation and the
imaginary unit in the same generator; they are checked when parsed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .exactnum import (
    AlgNum,
    Box,
    InvalidInput,
    NumberField,
    as_alg,
    common_closed_field,
    declare_field,
    parse_rat,
    poly_coeffs,
    ratpoly,
)

ZERO = AlgNum(0)
ONE = AlgNum(1)

Exp = tuple[int, ...]


def _grlex(exp: Exp):
    return (sum(exp), exp)


class Poly:
    """Sparse multivariate polynomial with AlgNum coefficients."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        items = terms.items() if isinstance(terms, dict) else (terms or ())
        acc: dict[Exp, AlgNum] = {}
        for e, c in items:
            c = as_alg(c)
            if c.is_zero():
                continue
            if e in acc:
                s = acc[e] + c
                if s.is_zero():
                    del acc[e]
                else:
                    acc[e] = s
            else:
                acc[e] = c
        self.terms: tuple[tuple[Exp, AlgNum], ...] = tuple(
            sorted(acc.items(), key=lambda t: _grlex(t[0]), reverse=True))

    @classmethod
    def const(cls, nvars: int, c) -> "Poly":
        return cls(nvars, {(0,) * nvars: as_alg(c)})

    @classmethod
    def var(cls, nvars: int, i: int) -> "Poly":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): ONE})

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(sum(e) == 0 for e, _ in self.terms)

    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def variables(self) -> set[int]:
        return {i for e, _ in self.terms for i, k in enumerate(e) if k}

    def coefficients(self) -> list[AlgNum]:
        return [c for _, c in self.terms]

    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise InvalidInput("polynomials over different variable sets")
            return other
        return Poly.const(self.nvars, other)

    def __add__(self, other):
        other = self._lift(other)
        return Poly(self.nvars, list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, [(e, -c) for e, c in self.terms])

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = as_alg(other)
            if c.is_zero():
                return Poly(self.nvars)
            return Poly(self.nvars, [(e, a * c) for e, a in self.terms])
        other = self._lift(other)
        acc = []
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                acc.append((tuple(a + b for a, b in zip(e1, e2)), c1 * c2))
        return Poly(self.nvars, acc)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = Poly.const(self.nvars, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, tuple(e for e, _ in self.terms)))

    def __repr__(self):
        return f"Poly({poly_to_text(self)})"

    def eval(self, values: Sequence[AlgNum]) -> AlgNum:
        if len(values) != self.nvars:
            raise InvalidInput("wrong number of values for polynomial")
        powers: dict[tuple[int, int], AlgNum] = {}

        def pw(i, k):
            key = (i, k)
            if key not in powers:
                powers[key] = values[i] ** k
            return powers[key]

        acc = ZERO
        for e, c in self.terms:
            t = c
            for i, k in enumerate(e):
                if k:
                    if values[i].is_zero():
                        t = ZERO
                        break
                    t = t * pw(i, k)
            if not t.is_zero():
                acc = acc + t
        return acc

    def compose(self, subs: Sequence["Poly"]) -> "Poly":
        """Substitute ``subs[i]`` for variable ``i``."""
        if len(subs) != self.nvars:
            raise InvalidInput("wrong number of substitutions")
        nv = subs[0].nvars if subs else 0
        cache: dict[tuple[int, int], Poly] = {}

        def pw(i, k):
            if (i, k) not in cache:
                cache[(i, k)] = subs[i] ** k
            return cache[(i, k)]

        acc: list = []
        for e, c in self.terms:
            t = Poly.const(nv, c)
            for i, k in enumerate(e):
                if k:
                    t = t * pw(i, k)
            acc.extend(t.terms)
        return Poly(nv, acc)

    def remap(self, nvars: int, positions: Sequence[int]) -> "Poly":
        """Rename variable ``i`` to ``positions[i]`` in a space of ``nvars``."""
        out = []
        for e, c in self.terms:
            ne = [0] * nvars
            for i, k in enumerate(e):
                if k:
                    ne[positions[i]] += k
            out.append((tuple(ne), c))
        return Poly(nvars, out)


@dataclass(frozen=True)
class CPoly:
    """A complex-valued polynomial given by its real and imaginary parts."""

    re: Poly
    im: Poly

    @classmethod
    def coord(cls, d: int, i: int) -> "CPoly":
        return cls(Poly.var(2 * d, 2 * i), Poly.var(2 * d, 2 * i + 1))

    @classmethod
    def const(cls, d: int, c) -> "CPoly":
        c = as_alg(c)
        return cls(Poly.const(2 * d, c.re()), Poly.const(2 * d, c.im()))

    def __add__(self, other: "CPoly") -> "CPoly":
        return CPoly(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "CPoly") -> "CPoly":
        return CPoly(self.re - other.re, self.im - other.im)

    def __mul__(self, other: "CPoly") -> "CPoly":
        return CPoly(self.re * other.re - self.im * other.im, self.re * other.im + self.im * other.re)

    def scale(self, c) -> "CPoly":
        c = as_alg(c)
        a, b = c.re(), c.im()
        return CPoly(self.re * a - self.im * b, self.re * b + self.im * a)

    def conj(self) -> "CPoly":
        return CPoly(self.re, -self.im)

    def __pow__(self, n: int) -> "CPoly":
        nv = self.re.nvars
        out = CPoly(Poly.const(nv, 1), Poly(nv))
        for _ in range(n):
            out = out * self
        return out

    def abs2(self) -> Poly:
        return self.re * self.re + self.im * self.im


def scalar_product(u: CPoly, v: CPoly) -> Poly:
    """``Re(u * conj(v))``."""
    return u.re * v.re + u.im * v.im


def linear_form(d: int, row: Sequence[AlgNum]) -> CPoly:
    """``sum_j row[j] z_j`` as a complex polynomial."""
    acc = CPoly(Poly(2 * d), Poly(2 * d))
    for j, c in enumerate(row):
        c = as_alg(c)
        if not c.is_zero():
            acc = acc + CPoly.coord(d, j).scale(c)
    return acc


# --------------------------------------------------------------------------
# formula nodes

RELATIONS = (">=", ">", "=", "!=")


@dataclass(frozen=True)
class Atom:
    """``poly rel 0``."""

    poly: Poly
    rel: str

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise InvalidInput(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class PointSet:
    """Finite set of exact points; with ``coords`` only those coordinates are pinned."""

    points: tuple[tuple[AlgNum, ...], ...]
    coords: tuple[int, ...] | None = None


Node = Union[Atom, And, Or, Not, PointSet]
TRUE = And(())
FALSE = Or(())


@dataclass(frozen=True)
class SemialgFormula:
    d: int
    root: Node

    def __str__(self):
        return serialize(self)


def atom(lhs: Poly, rel: str, rhs=0) -> Atom:
    return Atom(lhs - rhs if not (isinstance(rhs, int) and rhs == 0) else lhs, rel)


def conj(*args) -> Node:
    flat = []
    for a in args:
        if isinstance(a, And):
            flat.extend(a.args)
        else:
            flat.append(a)
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*args) -> Node:
    flat = []
    for a in args:
        if isinstance(a, Or):
            flat.extend(a.args)
        else:
            flat.append(a)
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def zero_coords(d: int, coords: Iterable[int]) -> Node:
    """``z_i = 0`` for each listed coordinate, as linear real equations."""
    atoms = []
    for i in coords:
        atoms.append(Atom(Poly.var(2 * d, 2 * i), "="))
        atoms.append(Atom(Poly.var(2 * d, 2 * i + 1), "="))
    return conj(*atoms) if atoms else TRUE


def point_set(points: Iterable[Sequence], coords=None) -> PointSet:
    return PointSet(tuple(tuple(as_alg(v) for v in p) for p in points),
                    None if coords is None else tuple(coords))


# --------------------------------------------------------------------------
# evaluation


def real_coords(z: Sequence[AlgNum]) -> list[AlgNum]:
    out = []
    for v in z:
        out.extend(as_alg(v).parts())
    return out


def _eval(node: Node, z, u) -> bool:
    if isinstance(node, Atom):
        v = node.poly.eval(u)
        if node.rel == "=":
            return v.is_zero()
        if node.rel == "!=":
            return not v.is_zero()
        s = v.sign()
        return s >= 0 if node.rel == ">=" else s > 0
    if isinstance(node, And):
        return all(_eval(a, z, u) for a in node.args)
    if isinstance(node, Or):
        return any(_eval(a, z, u) for a in node.args)
    if isinstance(node, Not):
        return not _eval(node.arg, z, u)
    if isinstance(node, PointSet):
        idx = range(len(z)) if node.coords is None else node.coords
        return any(all(z[i] == p[i] for i in idx) for p in node.points)
    raise InvalidInput(f"unknown node {node!r}")


def eval_at(f: SemialgFormula, z: Sequence) -> bool:
    """Exact membership ``z in f``."""
    if len(z) != f.d:
        raise InvalidInput(f"point has dimension {len(z)}, formula has {f.d}")
    z = [as_alg(v) for v in z]
    return _eval(f.root, z, real_coords(z))


# --------------------------------------------------------------------------
# transformations


def map_atoms(node: Node, fn, point_fn=None) -> Node:
    if isinstance(node, Atom):
        return fn(node)
    if isinstance(node, And):
        return And(tuple(map_atoms(a, fn, point_fn) for a in node.args))
    if isinstance(node, Or):
        return Or(tuple(map_atoms(a, fn, point_fn) for a in node.args))
    if isinstance(node, Not):
        return Not(map_atoms(node.arg, fn, point_fn))
    if isinstance(node, PointSet):
        return point_fn(node) if point_fn else node
    raise InvalidInput(f"unknown node {node!r}")


def unify_constants(f: SemialgFormula) -> SemialgFormula:
    """Move every algebraic constant of ``f`` into one shared number field.

    Parsed constants each live in the field of their own minimal polynomial;
    evaluating sums across such fields is slow, so a shared field pays off.
    The formula is returned unchanged when that field would be too large.
    """
    atoms = atoms_of(f.root)
    sets = point_sets_of(f.root)
    consts = {c for a in atoms for _, c in a.poly.terms if not c.is_rational}
    consts |= {v for ps in sets for p in ps.points for v in p if not v.is_rational}
    if not consts:
        return f
    order = sorted(consts, key=lambda c: c.sort_key())
    shared = common_closed_field(order)
    if shared is None:
        return f
    table = dict(zip(order, shared[1]))
    move = lambda c: table.get(c, c)

    def on_atom(a: Atom) -> Atom:
        return Atom(Poly(a.poly.nvars, [(e, move(c)) for e, c in a.poly.terms]), a.rel)

    def on_points(ps: PointSet) -> PointSet:
        return PointSet(tuple(tuple(move(v) for v in p) for p in ps.points), ps.coords)

    return SemialgFormula(f.d, map_atoms(f.root, on_atom, on_points))


def has_points(node: Node) -> bool:
    if isinstance(node, PointSet):
        return bool(node.points)
    if isinstance(node, (And, Or)):
        return any(has_points(a) for a in node.args)
    if isinstance(node, Not):
        return has_points(node.arg)
    return False


def substitute_linear(f: SemialgFormula, M, Minv=None, preimage=None) -> SemialgFormula:
    """The formula ``{z : M z in f}``.

    ``preimage`` optionally returns a known solution of ``M z = p`` (or
    None); this skips ``Minv p``, whose entries may mix number fields.
    """
    from .linalg import as_matrix, inverse, mat_vec

    d = f.d
    M = as_matrix(M)
    if len(M) != d or any(len(r) != d for r in M):
        raise InvalidInput("substitution matrix has the wrong shape")
    forms = [linear_form(d, row) for row in M]
    subs = []
    for cp in forms:
        subs.extend([cp.re, cp.im])
    if Minv is None and has_points(f.root):
        try:
            Minv = inverse(M)
        except InvalidInput as exc:
            raise InvalidInput("point sets need an invertible substitution") from exc

    def on_atom(a: Atom) -> Atom:
        return Atom(a.poly.compose(subs), a.rel)

    def on_points(ps: PointSet) -> Node:
        if ps.coords is None:
            pts = []
            for p in ps.points:
                q = preimage(p) if preimage else None
                pts.append(tuple(q) if q is not None else mat_vec(Minv, p))
            return PointSet(tuple(pts), None)
        alts = []
        for p in ps.points:
            eqs = []
            for i in ps.coords:
                diff = forms[i] - CPoly.const(d, p[i])
                eqs += [Atom(diff.re, "="), Atom(diff.im, "=")]
            alts.append(conj(*eqs) if eqs else TRUE)
        return disj(*alts) if alts else FALSE

    return SemialgFormula(d, map_atoms(f.root, on_atom, on_points))


def embed(f: SemialgFormula, d: int, positions: Sequence[int], free_points: bool) -> SemialgFormula:
    """Move coordinate ``i`` of ``f`` to ``positions[i]`` inside dimension ``d``.

    Other coordinates are left unconstrained by atoms.  Point sets either pin
    only the moved coordinates (``free_points``) or become full points padded
    with zeros.
    """
    real_pos = []
    for p in positions:
        real_pos += [2 * p, 2 * p + 1]

    def on_atom(a: Atom) -> Atom:
        return Atom(a.poly.remap(2 * d, real_pos), a.rel)

    def on_points(ps: PointSet) -> PointSet:
        pts = []
        for p in ps.points:
            full = [ZERO] * d
            for i, v in enumerate(p):
                full[positions[i]] = v
            pts.append(tuple(full))
        old = range(f.d) if ps.coords is None else ps.coords
        if free_points or ps.coords is not None:
            coords = tuple(sorted(positions[i] for i in old))
        else:
            coords = None
        return PointSet(tuple(pts), coords)

    return SemialgFormula(d, map_atoms(f.root, on_atom, on_points))


def real_restriction(f: SemialgFormula) -> SemialgFormula:
    """Restriction to real points: every imaginary variable set to zero."""
    nv = 2 * f.d
    subs = [Poly.var(nv, k) if k % 2 == 0 else Poly(nv) for k in range(nv)]

    def on_points(ps: PointSet) -> PointSet:
        idx = range(f.d) if ps.coords is None else ps.coords
        keep = tuple(p for p in ps.points if all(p[i].is_real() for i in idx))
        return PointSet(keep, ps.coords)

    return SemialgFormula(f.d, simplify(map_atoms(f.root, lambda a: Atom(a.poly.compose(subs), a.rel), on_points)))


def simplify(node: Node) -> Node:
    """Fold constant atoms and empty point sets, drop repeated conjuncts and disjuncts."""
    if isinstance(node, Atom):
        if node.poly.is_const():
            return TRUE if _eval(node, (), [ZERO] * node.poly.nvars) else FALSE
        return node
    if isinstance(node, PointSet):
        return node if node.points else FALSE
    if isinstance(node, Not):
        inner = simplify(node.arg)
        if inner in (TRUE, FALSE):
            return FALSE if inner == TRUE else TRUE
        return Not(inner)
    unit, zero, cls = (TRUE, FALSE, And) if isinstance(node, And) else (FALSE, TRUE, Or)
    kept: list = []
    for a in node.args:
        a = simplify(a)
        if a == zero:
            return zero
        parts = a.args if isinstance(a, cls) else (a,)
        kept.extend(p for p in parts if p != unit and p not in kept)
    if len(kept) == 1:
        return kept[0]
    return cls(tuple(kept))


def is_closed(f: SemialgFormula | Node) -> bool:
    """Conservative syntactic closedness: only >=, =, And, Or and point sets."""
    node = f.root if isinstance(f, SemialgFormula) else f
    if isinstance(node, Atom):
        return node.rel in (">=", "=")
    if isinstance(node, (And, Or)):
        return all(is_closed(a) for a in node.args)
    if isinstance(node, PointSet):
        return True
    return False


def atoms_of(node: Node) -> list[Atom]:
    if isinstance(node, Atom):
        return [node]
    if isinstance(node, (And, Or)):
        return [a for arg in node.args for a in atoms_of(arg)]
    if isinstance(node, Not):
        return atoms_of(node.arg)
    return []


def point_sets_of(node: Node) -> list[PointSet]:
    if isinstance(node, PointSet):
        return [node]
    if isinstance(node, (And, Or)):
        return [p for arg in node.args for p in point_sets_of(arg)]
    if isinstance(node, Not):
        return point_sets_of(node.arg)
    return []


# --------------------------------------------------------------------------
# text form


class _FieldNames:
    """Names K1, K2, ... for the number fields met while printing, in order of first use."""

    def __init__(self):
        self.fields: list[NumberField] = []

    def name(self, field: NumberField) -> str:
        for k, f in enumerate(self.fields):
            if f is field:
                return f"K{k + 1}"
        self.fields.append(field)
        return f"K{len(self.fields)}"

    def header(self) -> str:
        out = []
        for k, f in enumerate(self.fields):
            parts = [f"(field K{k + 1} ({_coeff_text(f.poly)}) (box {_box_text(f.root.box)})"]
            if f.conj_expr is not None and not f.root.is_real:
                parts.append(f" (conj {_coeff_text(f.conj_expr)})")
            if f.i_expr is not None:
                parts.append(f" (i {_coeff_text(f.i_expr)})")
            out.append("".join(parts) + ")")
        return "(fields " + " ".join(out) + ")"


def _coeff_text(p) -> str:
    return " ".join(_qtext(q) for q in poly_coeffs(p)) or "0"


def _box_text(box: Box) -> str:
    return " ".join(_qtext(parse_rat(v)) for v in box.to_json())


def const_to_text(c: AlgNum, names: _FieldNames | None = None) -> str:
    """Rationals print as ``p/q``; with ``names``, irrationals as ``(in K c0 .. cn)``."""
    if c.is_rational:
        q = c.rational
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    if names is not None:
        return f"(in {names.name(c.field)} {_coeff_text(c.expr)})"
    cs = " ".join(_qtext(q) for q in poly_coeffs(c.minpoly))
    box = " ".join(_qtext(parse_rat(s)) for s in c.box().to_json())
    return f"(alg ({cs}) (box {box}))"


def _qtext(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _mono_text(e: Exp) -> list[str]:
    out = []
    for i, k in enumerate(e):
        if k == 1:
            out.append(f"u{i + 1}")
        elif k > 1:
            out.append(f"(^ u{i + 1} {k})")
    return out


def poly_to_text(p: Poly, names: _FieldNames | None = None) -> str:
    if p.is_zero():
        return "0"
    terms = []
    for e, c in p.terms:
        mono = _mono_text(e)
        if not mono:
            terms.append(const_to_text(c, names))
        elif c == ONE and len(mono) == 1:
            terms.append(mono[0])
        elif c == ONE:
            terms.append(f"(* {' '.join(mono)})")
        else:
            terms.append(f"(* {const_to_text(c, names)} {' '.join(mono)})")
    return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"


def _node_text(node: Node, d: int, names: _FieldNames | None = None) -> str:
    if isinstance(node, Atom):
        return f"({node.rel} {poly_to_text(node.poly, names)} 0)"
    if isinstance(node, And):
        return "(and" + "".join(" " + _node_text(a, d, names) for a in node.args) + ")"
    if isinstance(node, Or):
        return "(or" + "".join(" " + _node_text(a, d, names) for a in node.args) + ")"
    if isinstance(node, Not):
        return f"(not {_node_text(node.arg, d, names)})"
    if isinstance(node, PointSet):
        idx = list(range(d)) if node.coords is None else list(node.coords)
        head = "(points" if node.coords is None else "(points (coords " + " ".join(str(i + 1) for i in idx) + ")"
        alts = []
        for p in node.points:
            eqs = []
            for i in idx:
                re, im = p[i].parts()
                eqs.append(f"(= u{2 * i + 1} {const_to_text(re, names)})")
                eqs.append(f"(= u{2 * i + 2} {const_to_text(im, names)})")
            alts.append("(and " + " ".join(eqs) + ")")
        return head + " (or" + "".join(" " + a for a in alts) + "))"
    raise InvalidInput(f"unknown node {node!r}")


def serialize(f: SemialgFormula) -> str:
    """Canonical text; irrational constants refer to fields declared up front."""
    names = _FieldNames()
    body = _node_text(f.root, f.d, names)
    if not names.fields:
        return f"(formula {f.d} {body})"
    return f"(formula {f.d} {names.header()} {body})"


class FormulaParseError(InvalidInput):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise FormulaParseError("unexpected character", pos)
        start = m.start(m.lastindex)
        out.append((m.group(m.lastindex), start))
        pos = m.end()
    return out


def _read(tokens, i):
    if i >= len(tokens):
        raise FormulaParseError("unexpected end of input", tokens[-1][1] if tokens else 0)
    tok, pos = tokens[i]
    if tok == "(":
        items = []
        i += 1
        while True:
            if i >= len(tokens):
                raise FormulaParseError("missing ')'", pos)
            if tokens[i][0] == ")":
                return (items, pos), i + 1
            item, i = _read(tokens, i)
            items.append(item)
    if tok == ")":
        raise FormulaParseError("unexpected ')'", pos)
    return (tok, pos), i + 1


_VAR = re.compile(r"u([1-9][0-9]*)$")


class _Parser:
    def __init__(self, d: int):
        self.d = d
        self.nv = 2 * d
        self.fields: dict[str, NumberField] = {}
        self.loose_constants = False

    def declare(self, sx) -> None:
        val, pos = sx
        if not isinstance(val, list) or not val or val[0][0] != "fields":
            raise FormulaParseError("expected (fields ...)", pos)
        for item, ipos in val[1:]:
            if not isinstance(item, list) or len(item) < 4 or item[0][0] != "field":
                raise FormulaParseError("expected (field K (c0 .. cn) (box ..) ...)", ipos)
            name = item[1][0]
            if not isinstance(name, str) or name in self.fields:
                raise FormulaParseError("field names must be distinct symbols", ipos)
            try:
                poly = ratpoly(self.rationals(item[2]))
                box = self.box(item[3])
                extra = {}
                for part, ppos in item[4:]:
                    if not isinstance(part, list) or not part or part[0][0] not in ("conj", "i"):
                        raise FormulaParseError("expected (conj ..) or (i ..)", ppos)
                    extra[part[0][0]] = ratpoly(parse_rat(t) for t, _ in part[1:])
                self.fields[name] = declare_field(poly, box, extra.get("conj"), extra.get("i"))
            except FormulaParseError:
                raise
            except (InvalidInput, TypeError, ValueError) as exc:
                raise FormulaParseError(f"bad field {name}: {exc}", ipos) from None

    @staticmethod
    def rationals(sx) -> list:
        val, pos = sx
        if not isinstance(val, list) or any(not isinstance(t, str) for t, _ in val):
            raise FormulaParseError("expected a list of rationals", pos)
        return [parse_rat(t) for t, _ in val]

    @staticmethod
    def box(sx) -> Box:
        val, pos = sx
        if not isinstance(val, list) or len(val) != 5 or val[0][0] != "box":
            raise FormulaParseError("malformed box", pos)
        return Box.from_json([t for t, _ in val[1:]])

    def const(self, sx) -> AlgNum:
        val, pos = sx
        if isinstance(val, str):
            try:
                return AlgNum(parse_rat(val))
            except InvalidInput:
                raise FormulaParseError(f"bad constant {val!r}", pos) from None
        if val and val[0][0] == "in":
            if len(val) < 3 or val[1][0] not in self.fields:
                raise FormulaParseError("constant refers to an undeclared field", pos)
            field = self.fields[val[1][0]]
            try:
                return AlgNum._elem(field, ratpoly(parse_rat(t) for t, _ in val[2:]))
            except (InvalidInput, TypeError) as exc:
                raise FormulaParseError(f"bad field element: {exc}", pos) from None
        if len(val) == 3 and val[0][0] == "alg":
            self.loose_constants = True
            try:
                cs = self.rationals(val[1])
                box = self.box(val[2])
                return AlgNum.root_in_box(ratpoly(cs), box)
            except (InvalidInput, TypeError, ValueError) as exc:
                if isinstance(exc, FormulaParseError):
                    raise
                raise FormulaParseError(f"bad algebraic constant: {exc}", pos) from None
        raise FormulaParseError("expected a constant", pos)

    def var_index(self, sx) -> int | None:
        val, pos = sx
        if isinstance(val, str):
            m = _VAR.match(val)
            if m:
                k = int(m.group(1))
                if k > self.nv:
                    raise FormulaParseError(f"variable {val} out of range", pos)
                return k - 1
        return None

    def poly(self, sx) -> Poly:
        val, pos = sx
        k = self.var_index(sx)
        if k is not None:
            return Poly.var(self.nv, k)
        if isinstance(val, str):
            return Poly.const(self.nv, self.const(sx))
        if not val:
            raise FormulaParseError("empty expression", pos)
        head = val[0][0]
        if head in ("alg", "in"):
            return Poly.const(self.nv, self.const(sx))
        if head == "+":
            out = Poly(self.nv)
            for a in val[1:]:
                out = out + self.poly(a)
            return out
        if head == "*":
            out = Poly.const(self.nv, 1)
            for a in val[1:]:
                out = out * self.poly(a)
            return out
        if head == "^":
            if len(val) != 3 or not isinstance(val[2][0], str) or not val[2][0].isdigit():
                raise FormulaParseError("malformed power", pos)
            return self.poly(val[1]) ** int(val[2][0])
        raise FormulaParseError(f"unknown operator {head!r}", pos)

    def node(self, sx) -> Node:
        val, pos = sx
        if isinstance(val, str) or not val:
            raise FormulaParseError("expected a formula", pos)
        head = val[0][0]
        if head == "and":
            return And(tuple(self.node(a) for a in val[1:]))
        if head == "or":
            return Or(tuple(self.node(a) for a in val[1:]))
        if head == "not":
            if len(val) != 2:
                raise FormulaParseError("not takes one argument", pos)
            return Not(self.node(val[1]))
        if head in RELATIONS:
            if len(val) != 3:
                raise FormulaParseError("relation takes two arguments", pos)
            return Atom(self.poly(val[1]) - self.poly(val[2]), head)
        if head == "points":
            return self.points(val, pos)
        raise FormulaParseError(f"unknown connective {head!r}", pos)

    def points(self, val, pos) -> PointSet:
        rest = val[1:]
        coords = None
        if rest and isinstance(rest[0][0], list) and rest[0][0] and rest[0][0][0][0] == "coords":
            coords = tuple(int(t) - 1 for t, _ in rest[0][0][1:])
            rest = rest[1:]
        if len(rest) != 1 or not isinstance(rest[0][0], list) or rest[0][0][0][0] != "or":
            raise FormulaParseError("point set needs one (or ...) body", pos)
        pts = []
        for alt, apos in rest[0][0][1:]:
            if not isinstance(alt, list) or not alt or alt[0][0] != "and":
                raise FormulaParseError("point must be an (and ...) of equations", apos)
            re_im: dict[int, AlgNum] = {}
            for eq, epos in alt[1:]:
                if not isinstance(eq, list) or len(eq) != 3 or eq[0][0] != "=":
                    raise FormulaParseError("expected (= uK c)", epos)
                k = self.var_index(eq[1])
                if k is None:
                    raise FormulaParseError("expected a variable", epos)
                re_im[k] = self.const(eq[2])
            p = [ZERO] * self.d
            idx = range(self.d) if coords is None else coords
            for i in idx:
                if 2 * i not in re_im or 2 * i + 1 not in re_im:
                    raise FormulaParseError(f"point misses coordinate {i + 1}", apos)
                r, im = re_im[2 * i], re_im[2 * i + 1]
                p[i] = r if im.is_zero() else r + im * _unit_for(r, im)
            pts.append(tuple(p))
        return PointSet(tuple(pts), coords)


def _unit_for(*values: AlgNum) -> AlgNum:
    """``i`` inside the field of ``values`` when that field provides it."""
    for v in values:
        if not v.is_rational and v.field.i_expr is not None:
            return AlgNum._elem(v.field, v.field.i_expr)
    return AlgNum.i()


def parse(text: str) -> SemialgFormula:
    tokens = _tokenize(text)
    if not tokens:
        raise FormulaParseError("empty input", 0)
    sx, nxt = _read(tokens, 0)
    if nxt != len(tokens):
        raise FormulaParseError("trailing input", tokens[nxt][1])
    val, pos = sx
    if not isinstance(val, list) or len(val) not in (3, 4) or val[0][0] != "formula":
        raise FormulaParseError("expected (formula D ...)", pos)
    try:
        d = int(val[1][0])
    except (TypeError, ValueError):
        raise FormulaParseError("dimension must be an integer", val[1][1]) from None
    if d <= 0:
        raise FormulaParseError("dimension must be positive", val[1][1])
    parser = _Parser(d)
    if len(val) == 4:
        parser.declare(val[2])
    f = SemialgFormula(d, parser.node(val[-1]))
    return unify_constants(f) if parser.loose_constants else f


# --------------------------------------------------------------------------
# SMT-LIB2


class _Smt:
    def __init__(self):
        self.consts: dict[tuple, str] = {}
        self.decls: list[str] = []

    def num(self, c: AlgNum) -> str:
        if c.is_rational:
            return _smt_rat(c.rational)
        if not c.is_real():
            raise InvalidInput("SMT-LIB2 output needs real coefficients")
        key = (tuple(poly_coeffs(c.minpoly)), tuple(c.box().to_json()))
        if key not in self.consts:
            name = f"c{len(self.consts) + 1}"
            self.consts[key] = name
            cs = poly_coeffs(c.minpoly)
            terms = []
            for k, q in enumerate(cs):
                if q == 0:
                    continue
                mono = " ".join([name] * k)
                if k == 0:
                    terms.append(_smt_rat(q))
                elif k == 1:
                    terms.append(f"(* {_smt_rat(q)} {name})")
                else:
                    terms.append(f"(* {_smt_rat(q)} {mono})")
            lo, hi = c.box().re_lo, c.box().re_hi
            self.decls.append(f"(declare-fun {name} () Real)")
            self.decls.append(f"(assert (= (+ {' '.join(terms)}) 0))")
            self.decls.append(f"(assert (and (<= {_smt_rat(lo)} {name}) (<= {name} {_smt_rat(hi)})))")
        return self.consts[key]

    def poly(self, p: Poly) -> str:
        if p.is_zero():
            return "0"
        terms = []
        for e, c in p.terms:
            factors = [self.num(c)] if c != ONE or sum(e) == 0 else []
            for i, k in enumerate(e):
                factors += [f"u{i + 1}"] * k
            terms.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
        return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"

    def node(self, node: Node, d: int) -> str:
        if isinstance(node, Atom):
            p = self.poly(node.poly)
            return {">=": f"(>= {p} 0)", ">": f"(> {p} 0)", "=": f"(= {p} 0)",
                    "!=": f"(not (= {p} 0))"}[node.rel]
        if isinstance(node, And):
            return "true" if not node.args else "(and " + " ".join(self.node(a, d) for a in node.args) + ")"
        if isinstance(node, Or):
            return "false" if not node.args else "(or " + " ".join(self.node(a, d) for a in node.args) + ")"
        if isinstance(node, Not):
            return f"(not {self.node(node.arg, d)})"
        if isinstance(node, PointSet):
            idx = range(d) if node.coords is None else node.coords
            alts = []
            for p in node.points:
                eqs = []
                for i in idx:
                    eqs.append(f"(= u{2 * i + 1} {self.num(p[i].re())})")
                    eqs.append(f"(= u{2 * i + 2} {self.num(p[i].im())})")
                alts.append("(and " + " ".join(eqs) + ")" if eqs else "true")
            return "false" if not alts else "(or " + " ".join(alts) + ")"
        raise InvalidInput(f"unknown node {node!r}")


def _smt_rat(q: Fraction) -> str:
    q = Fraction(q)
    mag = abs(q)
    s = str(mag.numerator) if mag.denominator == 1 else f"(/ {mag.numerator} {mag.denominator})"
    return f"(- {s})" if q < 0 else s


def to_smt2(f: SemialgFormula, extra: Sequence[tuple[str, SemialgFormula]] = ()) -> str:
    """QF_NRA script defining ``inv`` (and any named extra formulas) over u1..u2d.

    Algebraic coefficients become fresh constants pinned by their minimal
    polynomial and an isolating interval.
    """
    smt = _Smt()
    bodies = [("inv", smt.node(f.root, f.d))]
    for name, g in extra:
        bodies.append((name, smt.node(g.root, g.d)))
    lines = ["(set-logic QF_NRA)"]
    lines += [f"(declare-fun u{k} () Real)" for k in range(1, 2 * f.d + 1)]
    lines += smt.decls
    lines += [f"(define-fun {name} () Bool {body})" for name, body in bodies]
    return "\n".join(lines) + "\n"


def stability_smt2(f: SemialgFormula, A) -> str:
    """Obligation script: ``inv(u)`` and not ``inv(A u)``; unsat means stable."""
    image = substitute_linear(f, A)
    text = to_smt2(f, extra=[("inv_image", image)])
    return text + "(assert inv)\n(assert (not inv_image))\n(check-sat)\n"

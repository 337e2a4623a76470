from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitinv.exactnum import AlgNum, sqrt_pos
from orbitinv.formula import (
    Atom,
    CPoly,
    FormulaParseError,
    Poly,
    SemialgFormula,
    conj,
    disj,
    eval_at,
    is_closed,
    parse,
    point_set,
    real_restriction,
    serialize,
    substitute_linear,
    to_smt2,
    zero_coords,
)
from orbitinv.linalg import mat_vec

I = AlgNum.i()
small = st.fractions(min_value=-4, max_value=4, max_denominator=4)
RELS = (">=", ">", "=", "!=")


def ball(d, i, r2, rel=">="):
    return Atom(CPoly.coord(d, i).abs2() - r2, rel)


DOUBLING = SemialgFormula(1, disj(point_set([(1,), (2,)]), ball(1, 0, 16)))


def test_known_text_form():
    assert serialize(DOUBLING) == (
        "(formula 1 (or (points (or (and (= u1 1) (= u2 0)) (and (= u1 2) (= u2 0))))"
        " (>= (+ (^ u1 2) (^ u2 2) -16) 0)))")


def test_irrational_constants_use_declared_fields():
    f = SemialgFormula(1, ball(1, 0, sqrt_pos(AlgNum(2))))
    text = serialize(f)
    assert text.startswith("(formula 1 (fields (field K1 (-2 0 1) (box ")
    assert "(in K1 0 -1)" in text
    assert serialize(parse(text)) == text


def test_legacy_alg_constants_still_parse():
    text = "(formula 1 (>= (+ (^ u1 2) (^ u2 2) (* -1 (alg (-2 0 1) (box 5/4 3/2 0 0)))) 0))"
    f = parse(text)
    assert eval_at(f, [Fraction(6, 5)]) and not eval_at(f, [Fraction(1)])


def test_complex_points_round_trip():
    f = SemialgFormula(1, point_set([(I,), ((AlgNum(4) + 3 * I) / 5,)]))
    g = parse(serialize(f))
    assert eval_at(g, [I]) and eval_at(g, [(AlgNum(4) + 3 * I) / 5])
    assert not eval_at(g, [AlgNum(1)])


def test_eval_unit_circle():
    circle = SemialgFormula(2, Atom(Poly.var(4, 0) ** 2 + Poly.var(4, 2) ** 2 - 1, "="))
    assert eval_at(circle, [Fraction(3, 5), Fraction(4, 5)])
    assert not eval_at(circle, [1, 1])


def test_closedness():
    assert is_closed(DOUBLING)
    assert not is_closed(SemialgFormula(1, ball(1, 0, 0, "!=")))
    assert not is_closed(SemialgFormula(1, ball(1, 0, 1, ">")))


def test_substitution_scales_atoms_and_points():
    g = substitute_linear(DOUBLING, [[2]])
    assert eval_at(g, [Fraction(1, 2)]) and eval_at(g, [2]) and not eval_at(g, [Fraction(3, 2)])


def test_smt2_declares_every_variable():
    text = to_smt2(SemialgFormula(2, conj(ball(2, 0, 1), zero_coords(2, [1]))))
    assert text.startswith("(set-logic QF_NRA)")
    assert all(f"(declare-fun u{k} () Real)" in text for k in range(1, 5))


@pytest.mark.parametrize("text,msg", [
    ("(formula 1 (>= u3 0))", "out of range"),
    ("(formula 1 (>= u1 0)", "missing"),
    ("(formula x (>= u1 0))", "integer"),
    ("(formula 1 (foo u1 0))", "unknown connective"),
    ("(formula 1 (>= (in K9 1 2) 0))", "undeclared field"),
    ("(formula 1 (fields (field K1 (-4 0 1) (box 1 3 0 0))) (>= u1 0))", "bad field"),
])
def test_parse_errors_are_located(text, msg):
    with pytest.raises(FormulaParseError, match=msg) as info:
        parse(text)
    assert "offset" in str(info.value)


@st.composite
def formulas(draw, d=2, depth=2):
    nv = 2 * d
    if depth == 0 or draw(st.booleans()):
        kind = draw(st.sampled_from(["atom", "ball", "points"]))
        if kind == "points":
            pts = draw(st.lists(st.tuples(*[small] * d), min_size=1, max_size=3))
            return point_set([tuple(AlgNum(a) for a in p) for p in pts])
        if kind == "ball":
            return ball(d, draw(st.integers(0, d - 1)), draw(small) ** 2, draw(st.sampled_from(RELS)))
        p = Poly.const(nv, draw(small))
        for _ in range(draw(st.integers(1, 3))):
            v = Poly.var(nv, draw(st.integers(0, nv - 1)))
            p = p + v * draw(small) * (v if draw(st.booleans()) else Poly.const(nv, 1))
        return Atom(p, draw(st.sampled_from(RELS)))
    parts = draw(st.lists(formulas(d, depth - 1), min_size=1, max_size=3))
    return conj(*parts) if draw(st.booleans()) else disj(*parts)


points2 = st.lists(st.tuples(small, small), min_size=2, max_size=2).map(
    lambda zs: [AlgNum(a) + AlgNum(b) * I for a, b in zs])


@settings(max_examples=80, deadline=None)
@given(formulas())
def test_text_round_trip(node):
    f = SemialgFormula(2, node)
    text = serialize(f)
    assert serialize(parse(text)) == text


@settings(max_examples=60, deadline=None)
@given(formulas(), points2, st.sampled_from([[[1, 1], [0, 1]], [[2, 0], [1, -1]], [[0, -1], [1, 0]]]))
def test_substitution_commutes_with_evaluation(node, z, M):
    f = SemialgFormula(2, node)
    assert eval_at(substitute_linear(f, M), z) == eval_at(f, mat_vec(M, z))


@settings(max_examples=60, deadline=None)
@given(formulas(), st.tuples(small, small))
def test_real_restriction_agrees_on_real_points(node, z):
    f = SemialgFormula(2, node)
    assert eval_at(real_restriction(f), list(z)) == eval_at(f, list(z))

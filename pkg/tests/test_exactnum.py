from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitinv.exactnum import (
    AlgNum,
    Box,
    InvalidInput,
    closed_field,
    common_closed_field,
    compositum,
    declare_field,
    factor_irreducible,
    isolate_roots,
    modulus_cmp_one,
    parse_rat,
    poly_coeffs,
    ratpoly,
    root_of_unity_order,
    sqrt_pos,
)

I = AlgNum.i()
LAM = (AlgNum(4) + 3 * I) / 5  # rotation eigenvalue with irrational angle

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=12)


@pytest.mark.parametrize("text,want", [("3/6", Fraction(1, 2)), (" -4/8 ", Fraction(-1, 2)), ("7", Fraction(7)), (5, Fraction(5))])
def test_parse_rat_accepts(text, want):
    assert parse_rat(text) == want


@pytest.mark.parametrize("text,msg", [("1/0", "zero denominator"), ("x", "malformed"), ("", "malformed"), ("1.5", "malformed")])
def test_parse_rat_rejects(text, msg):
    with pytest.raises(InvalidInput, match=msg):
        parse_rat(text)


def test_rotation_eigenvalue_basics():
    assert LAM.minpoly == ratpoly([1, Fraction(-8, 5), 1])
    assert LAM.abs2() == 1
    assert LAM.re() == Fraction(4, 5) and LAM.im() == Fraction(3, 5)
    assert LAM.inv() == LAM.conj()
    assert LAM ** 2 == (AlgNum(7) + 24 * I) / 25


@pytest.mark.parametrize("value,order", [(I, 4), (AlgNum(-1), 2), (AlgNum(1), 1), (LAM, None)])
def test_root_of_unity_order(value, order):
    assert root_of_unity_order(value) == order


def test_root_of_unity_order_needs_unit_modulus():
    with pytest.raises(InvalidInput):
        root_of_unity_order(AlgNum(2))


def test_modulus_comparison():
    assert modulus_cmp_one((AlgNum(16) + 12 * I) / 25) == -1
    assert modulus_cmp_one(AlgNum(2)) == 1
    assert modulus_cmp_one(LAM) == 0


def test_sqrt_pos_and_ordering():
    r2 = sqrt_pos(AlgNum(2))
    assert r2 * r2 == 2 and r2.sign() == 1
    assert AlgNum(Fraction(141, 100)) < r2 < AlgNum(Fraction(142, 100))


def test_isolated_roots_are_disjoint_and_real():
    boxes = isolate_roots(ratpoly([-2, 0, 1]))
    assert len(boxes) == 2
    assert all(b.is_real and m == 1 for b, m in boxes)
    assert boxes[0][0].disjoint(boxes[1][0])


def test_factorization_of_x4_minus_1():
    facs = factor_irreducible(ratpoly([-1, 0, 0, 0, 1]))
    assert sorted(p.degree() for p, _ in facs) == [1, 1, 2]


def test_compositum_holds_both_square_roots():
    field, a, b = compositum(sqrt_pos(AlgNum(2)), sqrt_pos(AlgNum(3)))
    assert field.degree == 4
    assert a * a == 2 and b * b == 3
    assert (a * b) ** 2 == 6


def test_closed_field_contains_conjugate():
    field, alpha = closed_field(LAM)
    assert alpha == LAM
    assert (alpha.conj() * alpha) == 1
    assert field.conj_expr is not None


def test_common_closed_field_gives_up_when_too_large():
    vals = [sqrt_pos(AlgNum(p)) for p in (2, 3, 5, 7, 11, 13)]
    assert common_closed_field(vals, max_degree=8) is None


def test_json_round_trip_and_sort_key():
    assert AlgNum.from_json(LAM.to_json()) == LAM
    assert LAM.sort_key() != LAM.conj().sort_key()
    assert AlgNum.from_json("5/10") == Fraction(1, 2)


def test_declare_field_rebuilds_and_checks():
    field, alpha = closed_field(LAM)
    again = declare_field(field.poly, field.root.box, field.conj_expr, field.i_expr)
    assert again is field
    with pytest.raises(InvalidInput):
        declare_field(ratpoly([-1, 0, 1]), Box(Fraction(1), Fraction(1), Fraction(0), Fraction(0)))


def test_declare_field_rejects_false_imaginary_unit():
    r3 = sqrt_pos(AlgNum(3))
    with pytest.raises(InvalidInput):
        declare_field(r3.field.poly, r3.root.box, i_expr=ratpoly([0, 1]))


@settings(max_examples=60, deadline=None)
@given(rationals, rationals, rationals, rationals)
def test_gaussian_field_axioms(a, b, c, d):
    u = AlgNum(a) + AlgNum(b) * I
    v = AlgNum(c) + AlgNum(d) * I
    assert u + v == v + u
    assert u * v == v * u
    assert (u * v).conj() == u.conj() * v.conj()
    assert (u * v).abs2() == u.abs2() * v.abs2()
    if not v.is_zero():
        assert (u / v) * v == u
    re, im = u.parts()
    assert re == a and im == b


@settings(max_examples=40, deadline=None)
@given(st.lists(rationals, min_size=2, max_size=4))
def test_rational_poly_round_trip(coeffs):
    p = ratpoly(coeffs)
    assert ratpoly(poly_coeffs(p)) == p


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60))
def test_sqrt_squares_back(n):
    r = sqrt_pos(AlgNum(n))
    assert r * r == n
    assert r.sign() == 1

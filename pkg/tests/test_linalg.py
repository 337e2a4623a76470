from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitinv.exactnum import AlgNum, InvalidInput, ratpoly
from orbitinv.linalg import (
    OrbitInstance,
    char_poly,
    conjugate_instance,
    identity,
    inverse,
    jordan_decompose,
    jordan_matrix,
    mat_mul,
    mat_pow,
    mat_vec,
    nullspace,
    rank,
)

ROT = [[Fraction(4, 5), Fraction(-3, 5)], [Fraction(3, 5), Fraction(4, 5)]]
DOUBLE_ROT = [[4, -3, 4, -3], [3, 4, 3, 4], [0, 0, 4, -3], [0, 0, 3, 4]]

small = st.fractions(min_value=-3, max_value=3, max_denominator=5)


def square(d):
    return st.lists(st.lists(small, min_size=d, max_size=d), min_size=d, max_size=d)


def check_jordan(inst):
    dec, jinst = jordan_decompose(inst)
    assert mat_mul(mat_mul(dec.Q, inst.A), dec.Qinv) == jordan_matrix(dec.blocks)
    assert mat_mul(dec.Q, dec.Qinv) == identity(inst.d)
    assert jinst.x == mat_vec(dec.Q, inst.x)
    assert jinst.y == mat_vec(dec.Q, inst.y)
    return dec, jinst


def test_small_helpers():
    assert inverse([[2, 0], [0, 1]]) == ((Fraction(1, 2), 0), (0, 1))
    assert rank([[1, 2], [2, 4]]) == 1
    assert nullspace([[1, 2], [2, 4]]) == [(AlgNum(-2), AlgNum(1))]
    assert mat_pow(ROT, 2) == ((Fraction(7, 25), Fraction(-24, 25)), (Fraction(24, 25), Fraction(7, 25)))
    with pytest.raises(InvalidInput, match="singular"):
        inverse([[1, 2], [2, 4]])


def test_char_poly_of_rotation():
    assert char_poly(OrbitInstance.make(ROT, [1, 0], [1, 0]).A) == ratpoly([1, Fraction(-8, 5), 1])


def test_rotation_diagonalizes_to_conjugate_pair():
    dec, _ = check_jordan(OrbitInstance.make(ROT, [1, 0], [2, 0]))
    eigs = [b.eigenvalue for b in dec.blocks]
    assert [b.size for b in dec.blocks] == [1, 1]
    assert eigs[0] == eigs[1].conj()
    assert eigs[0].abs2() == 1


@pytest.mark.parametrize("scale,modulus2", [(Fraction(1, 5), 1), (Fraction(4, 25), Fraction(16, 25))])
def test_double_rotation_has_two_size_two_blocks(scale, modulus2):
    A = [[v * scale for v in row] for row in DOUBLE_ROT]
    dec, _ = check_jordan(OrbitInstance.make(A, [1, 0, 1, 0], [3, 0, 0, 1]))
    assert [b.size for b in dec.blocks] == [2, 2]
    assert all(b.eigenvalue.abs2() == modulus2 for b in dec.blocks)


def test_shear_is_one_block():
    dec, jinst = check_jordan(OrbitInstance.make([[1, 1], [0, 1]], [0, 1], [-1, 0]))
    assert len(dec.blocks) == 1 and dec.blocks[0].size == 2
    assert jinst.orbit(3)[2] == jinst.power_x(2)


def test_conjugate_instance_doubles_coordinate():
    inst = OrbitInstance.make([[3, 0], [0, 3]], [1, 1], [0, 1])
    out = conjugate_instance(inst, [[2, 0], [0, 1]])
    assert out.A == inst.A
    assert out.x == (2, 1) and out.y == (0, 1)
    with pytest.raises(InvalidInput):
        conjugate_instance(inst, [[1, 1], [1, 1]])


@pytest.mark.parametrize("data,msg", [
    ({"A": [["1", "2/x"], ["0", "1"]], "x": ["1", "0"], "y": ["0", "1"]}, r"A\[0\]\[1\]: malformed rational"),
    ({"A": [["1"]], "x": "1", "y": ["1"]}, "x: expected a list"),
    ({"A": [["1", "0"]], "x": ["1", "0"], "y": ["0", "1"]}, "square"),
    ({"A": [["1"]], "x": ["1"]}, "y"),
])
def test_instance_json_diagnostics(data, msg):
    with pytest.raises(InvalidInput, match=msg):
        OrbitInstance.from_json(data)


def test_instance_json_round_trip():
    inst = OrbitInstance.make(ROT, [1, 0], [Fraction(1, 3), 2])
    assert OrbitInstance.from_json(inst.to_json()) == inst


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3).flatmap(lambda d: st.tuples(square(d), st.lists(small, min_size=d, max_size=d))))
def test_jordan_form_is_exact(data):
    A, x = data
    check_jordan(OrbitInstance.make(A, x, x))


@settings(max_examples=25, deadline=None)
@given(square(2), st.lists(st.fractions(-5, 5, max_denominator=4), min_size=2, max_size=2))
def test_conjugation_round_trip(A, qdiag):
    inst = OrbitInstance.make(A, [1, 2], [0, 1])
    Q = [[1 if qdiag[0] == 0 else qdiag[0], 1], [0, 1 if qdiag[1] == 0 else qdiag[1]]]
    there = conjugate_instance(inst, Q)
    back = conjugate_instance(there, inverse(Q))
    assert back == inst

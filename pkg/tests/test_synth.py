from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from orbitinv.exactnum import AlgNum, InvalidInput
from orbitinv.formula import eval_at, serialize
from orbitinv.linalg import JordanBlockDesc, JordanInstance, OrbitInstance, mat_vec
from orbitinv.spectral import relation_lattice
from orbitinv.synth import (
    SynthConfig,
    Template,
    build_from_template,
    decide_reachability,
    orbit_prefix,
    synth_contracting,
    synth_diag_closure,
    synth_divergent,
    synth_nondiag,
    synthesize,
)

I = AlgNum.i()
LAM = (AlgNum(4) + 3 * I) / 5
ROT = [[Fraction(4, 5), Fraction(-3, 5)], [Fraction(3, 5), Fraction(4, 5)]]
FAST = SynthConfig(samples=100)


def jordan(blocks, x, y):
    descs, start = [], 0
    for eig, size in blocks:
        descs.append(JordanBlockDesc(AlgNum(eig) if not isinstance(eig, AlgNum) else eig, size, start))
        start += size
    return JordanInstance(tuple(descs), tuple(map(AlgNum, x)), tuple(map(AlgNum, y)))


def test_orbit_prefix():
    assert orbit_prefix(OrbitInstance.make([[2]], [1], [1]), 0) == []
    assert orbit_prefix(OrbitInstance.make([[2]], [1], [1]), 3) == [(1,), (2,), (4,)]
    assert orbit_prefix(OrbitInstance.make(ROT, [1, 0], [1, 0]), 2) == [(1, 0), (Fraction(4, 5), Fraction(3, 5))]


def test_divergent_doubling():
    f, params, c = synth_divergent(jordan([(2, 1)], [1], [3]), 0)
    assert params.n0 == 2 and c == 16
    assert serialize(f) == ("(formula 1 (or (points (or (and (= u1 1) (= u2 0)) (and (= u1 2) (= u2 0))))"
                            " (>= (+ (^ u1 2) (^ u2 2) -16) 0)))")


def test_divergent_picks_the_growing_block():
    f, params, c = synth_divergent(jordan([(3, 1), (Fraction(1, 2), 1)], [1, 1], [2, 0]), 0)
    assert (params.n0, c) == (1, 9)
    assert eval_at(f, [1, 1]) and eval_at(f, [3, 5]) and not eval_at(f, [2, 0])


def test_contracting_halving():
    f, params, bounds = synth_contracting(jordan([(Fraction(1, 2), 1)], [1], [Fraction(1, 3)]), 0)
    assert params.n0 == 3 and bounds == [Fraction(1, 36)]
    assert all(eval_at(f, [v]) for v in (1, Fraction(1, 2), Fraction(1, 4), Fraction(1, 6)))
    assert not eval_at(f, [Fraction(1, 3)])


def test_nondiag_threshold():
    _, params, c = synth_nondiag(jordan([(LAM, 2)], [1, 1], [3, 1]), 0)
    assert params.n0 == 3 and c == Fraction(74, 5)
    f, params, c = synth_nondiag(jordan([(LAM, 2)], [1, 1], [0, 1]), 0)
    assert params.n0 == 0 and c == 1
    assert serialize(f) == ("(formula 2 (and (>= (+ (^ u1 2) (^ u2 2) -1) 0)"
                            " (>= (+ (* 4/5 u1 u3) (* 3/5 u1 u4) (* -3/5 u2 u3) (* 4/5 u2 u4)) 0)))")


def test_finite_orbit_closure():
    f, _ = synth_diag_closure(jordan([(I, 1)], [1], [2]), relation_lattice([I], 64))
    assert all(eval_at(f, [v]) for v in (1, I, -1, -I))
    assert not eval_at(f, [2]) and not eval_at(f, [(AlgNum(3) + 4 * I) / 5])


def test_closure_witness_when_target_is_on_the_circle():
    pair = [LAM, LAM.conj()]
    out = synth_diag_closure(jordan([(LAM, 1), (LAM.conj(), 1)], [Fraction(1, 2)] * 2, [I / 2, -I / 2]),
                             relation_lattice(pair, 16))
    assert out.witness.mu == (I, -I)


@pytest.mark.parametrize("A,x,y,kind,n", [
    ([[0, -1], [1, 0]], [1, 0], [0, 1], "Reachable", 1),
    ([[2]], [1], [3], "Unreachable", None),
    (ROT, [1, 0], [0, 1], "Indeterminate", None),
    (ROT, [1, 0], [2, 0], "UnreachableRelativeToClosure", None),
    ([[0, 1], [0, 0]], [0, 1], [1, 0], "Reachable", 1),
])
def test_decide_reachability(A, x, y, kind, n):
    res = decide_reachability(OrbitInstance.make(A, x, y), search_bound=2000)
    assert res.kind == kind and res.n == n


def test_synthesize_example1_far_point():
    cert = synthesize(OrbitInstance.make(ROT, [1, 0], [2, 0]), FAST)
    assert cert.verdict == "INVARIANT_FOUND" and cert.case_tag.kind == "ModOneDiagonal"
    assert cert.template.basis == ((1, 1),)
    assert cert.diagnostics["verified"]


def test_synthesize_example1_circle_point():
    cert = synthesize(OrbitInstance.make(ROT, [1, 0], [0, 1]), FAST)
    assert cert.verdict == "NO_INVARIANT"
    assert {m.abs2() for m in cert.witness.mu} == {AlgNum(1)}


def test_template_round_trip():
    t = Template("nondiag", 0, 2, 3, (AlgNum(Fraction(74, 5)),), wedge=False)
    assert Template.from_json(t.to_json()) == t
    with pytest.raises(InvalidInput):
        build_from_template(jordan([(2, 1)], [1], [3]), Template("early"))


def test_irrational_input_is_rejected():
    inst = OrbitInstance.make([[I]], [1], [2])
    with pytest.raises(InvalidInput):
        synthesize(inst, FAST)


moduli = st.sampled_from([2, -3, Fraction(3, 2), Fraction(1, 2), Fraction(-2, 3)])
nonzero = st.sampled_from([1, -2, Fraction(1, 3), Fraction(5, 2)])


@settings(max_examples=30, deadline=None)
@given(moduli, nonzero, nonzero)
def test_n0_is_least(lam, x, y):
    red = jordan([(lam, 1)], [x], [y])
    assume(all(p[0] != y for p in red.orbit(60)))
    if abs(lam) > 1:
        _, params, c = synth_divergent(red, 0)
        assert red.power_x(params.n0)[0].abs2() > AlgNum(y).abs2()
        if params.n0:
            assert red.power_x(params.n0 - 1)[0].abs2() <= AlgNum(y).abs2()
    else:
        _, params, bounds = synth_contracting(red, 0)
        assert red.power_x(params.n0)[0].abs2() <= bounds[0]
        if params.n0:
            assert red.power_x(params.n0 - 1)[0].abs2() > bounds[0]


entries = st.fractions(min_value=-3, max_value=3, max_denominator=3)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.lists(entries, min_size=2, max_size=2), min_size=2, max_size=2),
       st.lists(entries, min_size=2, max_size=2), st.lists(entries, min_size=2, max_size=2))
def test_certificates_contain_the_orbit(A, x, y):
    inst = OrbitInstance.make(A, x, y)
    cert = synthesize(inst, FAST)
    if cert.verdict != "INVARIANT_FOUND":
        return
    z = inst.x
    for _ in range(40):
        assert eval_at(cert.formula, z)
        assert z != inst.y
        z = mat_vec(inst.A, z)
    assert not eval_at(cert.formula, inst.y)

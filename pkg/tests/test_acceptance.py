"""End-to-end acceptance checks; a summary line per criterion is printed after the run."""

import json
import os
import random
import subprocess
import sys
import time
from fractions import Fraction

import pytest

from conftest import FIXTURE_DIR, fixture_names, load_fixture, retemplate
from orbitinv.exactnum import AlgNum
from orbitinv.formula import (
    Atom,
    CPoly,
    Poly,
    SemialgFormula,
    atoms_of,
    conj,
    disj,
    eval_at,
    parse,
    point_set,
    scalar_product,
)
from orbitinv.instances import RandomSpec, random_instance, rotation_family
from orbitinv.linalg import jordan_decompose, mat_vec
from orbitinv.reduce import normalize
from orbitinv.spectral import lattice_contains, hnf_basis, relation_lattice, verify_relation
from orbitinv.synth import SynthConfig, build_from_template, decide_reachability, synthesize
from orbitinv.verify import PASS, VerifyConfig, verify_certificate, verify_invariant

I = AlgNum.i()
LAM = (AlgNum(4) + 3 * I) / 5


def criterion(n, title):
    return pytest.mark.criterion(n, title)


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def pythagorean(t):
    t = Fraction(t)
    return ((1 - t * t) / (1 + t * t), 2 * t / (1 + t * t))


# --------------------------------------------------------------------------
# 1. the rotation with irrational angle


@criterion(1, "rotation example: circle invariant, torus witness, under 1 s each")
def test_rotation_far_target_gives_the_unit_circle():
    cert, secs = timed(synthesize, load_fixture("example1_far"))
    assert cert.verdict == "INVARIANT_FOUND"
    assert secs < 1.0
    real = parse(cert.to_json()["formula_real"])
    on = [pythagorean(t) for t in (0, 1, Fraction(1, 2), Fraction(2, 3), -3, Fraction(-1, 4), 5, Fraction(3, 7))]
    off = [(0, 0), (2, 0), (1, 1), (Fraction(1, 2), Fraction(1, 2)), (Fraction(3, 5), Fraction(-3, 5)),
           (-2, 1), (Fraction(7, 5), 0), (0, Fraction(-9, 10))]
    for u1, u2 in on + off:
        assert eval_at(real, [u1, u2]) == (u1 * u1 + u2 * u2 == 1)


@criterion(1, "rotation example: circle invariant, torus witness, under 1 s each")
def test_rotation_circle_target_has_no_invariant():
    inst = load_fixture("example1_circle")
    cert, secs = timed(synthesize, inst)
    assert cert.verdict == "NO_INVARIANT"
    assert secs < 1.0
    mu = cert.witness.mu
    assert set(mu) == {I, -I}
    assert all(m.abs2() == 1 for m in mu)
    assert all(verify_relation(mu, v) for v in cert.lattice.basis)
    assert verify_certificate(inst, cert.to_json()).ok


# --------------------------------------------------------------------------
# 2. contracting example


@criterion(2, "contracting example: synthesized tube verifies, N_eps verifies, under 5 s")
def test_contracting_example_synthesizes():
    inst = load_fixture("example2")
    cert, secs = timed(synthesize, inst)
    assert secs < 5.0
    assert cert.verdict == "INVARIANT_FOUND" and cert.case_tag.kind == "HasModulusLessOne"
    report = verify_certificate(inst, cert.to_json())
    assert report.ok
    assert report.stability_symbolic["telescoping"] == PASS


@criterion(2, "contracting example: synthesized tube verifies, N_eps verifies, under 5 s")
def test_hand_written_neighbourhood_is_invariant():
    inst = load_fixture("example2")
    eps2 = Fraction(1)  # eps = 1 is below |y| = sqrt(10)
    nv = 2 * inst.d
    re = [Poly.var(nv, 2 * i) for i in range(inst.d)]
    tube = conj(Atom(Poly.const(nv, eps2) - re[0] ** 2 - re[1] ** 2, ">="),
                Atom(Poly.const(nv, eps2 / 16) - re[2] ** 2 - re[3] ** 2, ">="))
    region = SemialgFormula(inst.d, tube)
    outside, z = [], inst.x
    while not eval_at(region, z):
        outside.append(z)
        z = mat_vec(inst.A, z)
    f = SemialgFormula(inst.d, disj(point_set(outside), tube))
    report, secs = timed(verify_invariant, inst, f, VerifyConfig(samples=1000))
    assert secs < 5.0
    assert report.ok, report.failures()
    assert report.stability_symbolic["tube_telescoping"] == PASS
    passes, total = report.stability_sampled
    assert passes == total >= 1000


# --------------------------------------------------------------------------
# 3. non-diagonal example


@criterion(3, "non-diagonal example: wedge invariant with exact expansion identities, under 5 s")
def test_wedge_example():
    inst = load_fixture("example3")
    cert, secs = timed(synthesize, inst)
    assert secs < 5.0
    assert cert.verdict == "INVARIANT_FOUND" and cert.template.kind == "nondiag"
    t = cert.template
    red = normalize(jordan_decompose(inst)[1]).instance
    b = red.blocks[t.block]
    p, q = b.start + t.k - 2, b.start + t.k - 1
    f_red = build_from_template(red, t)
    atoms = atoms_of(f_red.root)
    norm = Atom(CPoly.coord(red.d, p).abs2() - t.constants[0], ">=")
    wedge = Atom(scalar_product(CPoly.coord(red.d, p).scale(b.eigenvalue), CPoly.coord(red.d, q)), ">=")
    assert norm in atoms and wedge in atoms
    report = verify_certificate(inst, cert.to_json())
    assert report.ok
    assert report.stability_symbolic["expansion_norm"] == PASS
    assert report.stability_symbolic["expansion_wedge"] == PASS


# --------------------------------------------------------------------------
# 4. relation lattices


@criterion(4, "relation lattice: conjugate pair stable across bounds, (i, i) lattice")
@pytest.mark.parametrize("bound", [4, 16, 64])
def test_conjugate_pair_lattice(bound):
    basis = relation_lattice([LAM, LAM.conj()], bound).basis
    target = ((1, 1),)
    assert all(lattice_contains(basis, v) for v in target)
    assert all(lattice_contains(target, v) for v in basis)


@criterion(4, "relation lattice: conjugate pair stable across bounds, (i, i) lattice")
def test_repeated_i_lattice():
    basis = relation_lattice([I, I], 64).basis
    target = hnf_basis([(4, 0), (1, -1)], 2)
    assert all(lattice_contains(basis, v) for v in target)
    assert all(lattice_contains(target, v) for v in basis)


# --------------------------------------------------------------------------
# 5. quarter turn


@criterion(5, "quarter turn: reachable in one step, otherwise the 4-point orbit")
def test_quarter_turn_reachable():
    inst = load_fixture("rot90_reach")
    assert decide_reachability(inst).n == 1
    cert = synthesize(inst)
    assert cert.verdict == "REACHABLE" and cert.n == 1


@criterion(5, "quarter turn: reachable in one step, otherwise the 4-point orbit")
def test_quarter_turn_closure_is_the_orbit():
    cert = synthesize(load_fixture("rot90_off"))
    assert cert.verdict == "INVARIANT_FOUND"
    orbit = {(1, 0), (0, 1), (-1, 0), (0, -1)}
    grid = [Fraction(k, 2) for k in range(-2, 3)]
    probes = {(a, b) for a in grid for b in grid} | orbit
    for a, b in probes:
        assert eval_at(cert.formula, [a, b]) == ((a, b) in orbit)


# --------------------------------------------------------------------------
# 6. randomized instances

RANDOM_COUNT = 200
RANDOM_SEED = 2024
RANDOM_SAMPLES = 200


def _random_corpus():
    rng = random.Random(RANDOM_SEED)
    out = []
    while len(out) < RANDOM_COUNT:
        inst = random_instance(rng, RandomSpec())
        if decide_reachability(inst).kind != "Reachable":
            out.append(inst)
    return out


@criterion(6, "200 random instances: certificates verify, orbit stays inside and misses y")
def test_random_instances():
    bad = []
    for k, inst in enumerate(_random_corpus()):
        cert = synthesize(inst, SynthConfig(samples=RANDOM_SAMPLES))
        data = cert.to_json()
        if cert.formula is None:
            report = verify_certificate(inst, data, VerifyConfig(samples=RANDOM_SAMPLES))
        else:
            report = verify_invariant(inst, cert.formula, VerifyConfig(samples=RANDOM_SAMPLES), certificate=data)
        problems = report.failures()
        if cert.formula is not None:
            z = inst.x
            for _ in range(200):
                if z == inst.y or not eval_at(cert.formula, z):
                    problems.append("orbit")
                    break
                z = mat_vec(inst.A, z)
        if problems:
            bad.append((k, inst.to_json(), problems))
    assert not bad, bad[:3]


# --------------------------------------------------------------------------
# 7. mutations


@pytest.fixture(scope="module")
def certs():
    return {name: synthesize(load_fixture(name), SynthConfig(samples=200)).to_json()
            for name in ("doubling", "example2", "example3", "shear", "rotation_pair", "example1_far")}


def _failures(name, cert):
    return verify_certificate(load_fixture(name), cert, VerifyConfig(samples=200)).failures()


@criterion(7, "mutations: n0-1, tube constant x1.01, wedge dropped, closure relation dropped")
@pytest.mark.parametrize("name", ["doubling", "example2", "example3"])
def test_threshold_decrement_is_caught(certs, name):
    cert = certs[name]
    assert _failures(name, retemplate(cert, n0=cert["template"]["n0"] - 1))


@criterion(7, "mutations: n0-1, tube constant x1.01, wedge dropped, closure relation dropped")
def test_tube_constant_increase_is_caught(certs):
    cert = certs["example2"]
    consts = [AlgNum.from_json(c) for c in cert["template"]["constants"]]
    for k in range(len(consts)):
        bumped = tuple(c * Fraction(101, 100) if j == k else c for j, c in enumerate(consts))
        assert _failures("example2", retemplate(cert, constants=bumped))


@criterion(7, "mutations: n0-1, tube constant x1.01, wedge dropped, closure relation dropped")
@pytest.mark.parametrize("name", ["example3", "shear"])
def test_wedge_removal_is_caught(certs, name):
    assert _failures(name, retemplate(certs[name], wedge=False))


@criterion(7, "mutations: n0-1, tube constant x1.01, wedge dropped, closure relation dropped")
@pytest.mark.parametrize("name", ["rotation_pair", "example1_far"])
def test_closure_relation_removal_is_caught(certs, name):
    basis = [tuple(v) for v in certs[name]["template"]["basis"]]
    for k in range(len(basis)):
        fewer = tuple(v for j, v in enumerate(basis) if j != k)
        assert _failures(name, retemplate(certs[name], basis=fewer))


# --------------------------------------------------------------------------
# 8. determinism


def _batch(out_dir, hash_seed):
    env = {**os.environ, "PYTHONHASHSEED": str(hash_seed)}
    subprocess.run([sys.executable, "-m", "orbitinv", "synth", "--batch", str(FIXTURE_DIR), "-o", str(out_dir),
                    "--seed", "11", "--samples", "200", "--jobs", "1"], env=env, check=True, capture_output=True)
    return {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}


@criterion(8, "determinism: identical seeds give byte-identical certificates")
def test_certificates_are_byte_identical(tmp_path):
    first = _batch(tmp_path / "a", 1)
    second = _batch(tmp_path / "b", 2)
    assert sorted(first) == sorted(f"{n}.synth.json" for n in fixture_names())
    assert first == second
    for blob in first.values():
        data = json.loads(blob)
        assert data["schema_version"] == 1 and "instance" in data


# --------------------------------------------------------------------------
# 9. certificate size (informational)

SIZE_R2_TARGET = 0.99


@criterion(9, "size monitor (informational): formula bytes on the rotation family fit a cubic")
def test_formula_size_trend(record_property):
    import numpy as np

    dims = list(range(2, 11))
    sizes = [synthesize(rotation_family(d), SynthConfig(samples=50)).diagnostics["formula_bytes"] for d in dims]
    best = 0.0
    for deg in (1, 2, 3):
        coeffs = np.polyfit(dims, sizes, deg)
        resid = np.asarray(sizes) - np.polyval(coeffs, dims)
        total = float(np.sum((np.asarray(sizes) - np.mean(sizes)) ** 2))
        best = max(best, 1.0 - float(np.sum(resid ** 2)) / total)
    record_property("sizes", sizes)
    record_property("r2", round(best, 4))
    assert sizes == sorted(sizes)  # monotone growth in the dimension
    if best < SIZE_R2_TARGET:
        # non-gating: report the miss without failing the suite
        pytest.xfail(f"best fit of degree <= 3 has R^2 = {best:.4f} < {SIZE_R2_TARGET}; sizes {sizes}")

"""Independent checking of invariants and certificates.

Exact checks: x in P, y not in P, orbit prefix in P, and images of the
listed points stay in P.  Stability is settled by the identities from the
case constructions, instantiated exactly in Jordan coordinates; random
sampling acts as a safety net.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from flint import fmpz_mat

from .exactnum import AlgNum, InvalidInput, as_alg, sqrt_pos
from .formula import (
    And,
    Atom,
    CPoly,
    Or,
    Poly,
    PointSet,
    SemialgFormula,
    atoms_of,
    eval_at,
    linear_form,
    parse,
    point_sets_of,
    scalar_product,
    serialize,
)
from .linalg import (
    JordanInstance,
    OrbitInstance,
    char_poly,
    jordan_decompose,
    jordan_matrix,
    mat_vec,
)
from .reduce import EarlyInvariant, Reduced, lift_invariant, normalize
from .spectral import RelationLattice, classify, relation_lattice, verify_relation

PASS, FAIL, NA = "pass", "fail", "not-applicable"


@dataclass(frozen=True)
class VerifyConfig:
    samples: int = 1000
    seed: int = 0
    orbit_iterations: int = 200
    exponent_bound: int = 64


@dataclass
class VerifyReport:
    verdict: str = "INVARIANT_FOUND"
    x_in: bool | None = None
    y_out: bool | None = None
    prefix_in: bool | None = None
    stability_symbolic: dict = field(default_factory=dict)
    stability_sampled: tuple[int, int] = (0, 0)
    orbit_check: tuple[int, bool, bool] = (0, True, True)
    seed: int = 0
    notes: list = field(default_factory=list)

    def failures(self) -> list[str]:
        out = []
        for name in ("x_in", "y_out", "prefix_in"):
            if getattr(self, name) is False:
                out.append(name)
        out += [f"symbolic:{k}" for k, v in self.stability_symbolic.items() if v == FAIL]
        passes, total = self.stability_sampled
        if passes != total:
            out.append(f"sampled:{total - passes}/{total}")
        _, all_in, never = self.orbit_check
        if not all_in:
            out.append("orbit_in")
        if not never:
            out.append("orbit_hits_y")
        return out

    @property
    def ok(self) -> bool:
        return not self.failures()

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict, "ok": self.ok, "x_in": self.x_in, "y_out": self.y_out,
            "prefix_in": self.prefix_in, "stability_symbolic": dict(sorted(self.stability_symbolic.items())),
            "stability_sampled": list(self.stability_sampled), "orbit_check": list(self.orbit_check),
            "seed": self.seed, "failures": self.failures(), "notes": list(self.notes)}


def _flag(b: bool) -> str:
    return PASS if b else FAIL


# --------------------------------------------------------------------------
# sampling


def _rand_rat(rng: random.Random, scale: float) -> Fraction:
    den = rng.choice((1, 2, 3, 4, 5, 7, 8, 10, 16))
    top = max(1, int(scale * den))
    return Fraction(rng.randint(-top, top), den)


def _complex(re: Fraction, im: Fraction, unit: AlgNum | None) -> AlgNum:
    if im == 0 or unit is None:
        return AlgNum(re)
    return AlgNum(re) + unit * im


def _conjuncts(node) -> list:
    if isinstance(node, And):
        return [a for arg in node.args for a in _conjuncts(arg)]
    return [node]


def _single_linear(poly: Poly):
    """``(var, value)`` when ``poly = a u_var + b``; else None."""
    vs = poly.variables()
    if len(vs) != 1 or poly.degree() != 1:
        return None
    (v,) = vs
    a = b = AlgNum(0)
    for e, c in poly.terms:
        if sum(e) == 1:
            a = c
        else:
            b = c
    return v, -b / a


def _squares(poly: Poly):
    """``(vars, a, b)`` when ``poly = a * sum_{v in vars} u_v^2 + b``."""
    sq, const = {}, AlgNum(0)
    for e, c in poly.terms:
        if sum(e) == 0:
            const = c
        elif sum(e) == 2 and max(e) == 2:
            sq[e.index(2)] = c
        else:
            return None
    coeffs = list(sq.values())
    if not coeffs or any(c != coeffs[0] for c in coeffs) or not coeffs[0].is_real():
        return None
    return tuple(sorted(sq)), coeffs[0], const


def _circle(poly: Poly):
    """``(i, j, r2)`` when ``poly = a (u_i^2 + u_j^2) + b`` with a positive radius."""
    sq = _squares(poly)
    if sq is None or len(sq[0]) != 2:
        return None
    (i, j), a, b = sq
    r2 = -b / a
    if not r2.is_real() or r2.sign() <= 0:
        return None
    return i, j, r2


def _ball(poly: Poly):
    """``(vars, r2)`` when ``poly >= 0`` says ``sum_{v in vars} u_v^2 <= r2``."""
    sq = _squares(poly)
    if sq is None or sq[1].sign() >= 0:
        return None
    vs, a, b = sq
    r2 = b / (-a)
    if not r2.is_real() or r2.sign() < 0:
        return None
    return vs, r2


def _in_ball(rng: random.Random, k: int, r2: AlgNum) -> list[Fraction]:
    """Rational point in the k-ball of squared radius ``r2``, often near its boundary."""
    r = float(r2) ** 0.5
    direction = [rng.gauss(0, 1) for _ in range(k)]
    norm = sum(v * v for v in direction) ** 0.5 or 1.0
    if rng.random() < 0.5:
        rho = r * (1 - 10 ** (-rng.uniform(1, 6)))
    else:
        rho = r * rng.random() ** (1 / k)
    return [Fraction(rho * v / norm).limit_denominator(10 ** 9) for v in direction]


def _scale_of(node) -> float:
    consts = [abs(complex(c)) for a in atoms_of(node) for e, c in a.poly.terms if sum(e) == 0]
    return 1.0 + 2.0 * (max(consts) ** 0.5 if consts else 1.0)


def _pick_branch(node, rng):
    while isinstance(node, Or) and node.args:
        node = rng.choice(node.args)
    return node


def _candidate(region, d: int, rng: random.Random, unit, real_only: bool):
    nv = 2 * d
    scale = _scale_of(region)
    u: list = [None] * nv
    for a in _conjuncts(region):
        if isinstance(a, Atom) and a.rel == "=":
            lin = _single_linear(a.poly)
            if lin is not None and u[lin[0]] is None:
                u[lin[0]] = lin[1]
                continue
            circ = _circle(a.poly)
            if circ is not None and u[circ[0]] is None and u[circ[1]] is None:
                i, j, r2 = circ
                rho = sqrt_pos(r2)
                t = _rand_rat(rng, 3)
                den = 1 + t * t
                u[i] = rho * ((1 - t * t) / den)
                u[j] = rho * (2 * t / den)
        elif isinstance(a, Atom) and a.rel == ">=":
            ball = _ball(a.poly)
            if ball is not None and all(u[v] is None for v in ball[0]):
                for v, val in zip(ball[0], _in_ball(rng, len(ball[0]), ball[1])):
                    u[v] = AlgNum(val)
    real_point = real_only or rng.random() < 0.5
    for k in range(nv):
        if u[k] is None:
            u[k] = AlgNum(0) if (k % 2 and real_point) else AlgNum(_rand_rat(rng, scale))
    z = []
    for i in range(d):
        re, im = u[2 * i], u[2 * i + 1]
        if im.is_zero():
            z.append(re)
        elif unit is None:
            return None
        else:
            z.append(re + unit * im)
    return z


def sample_points(f: SemialgFormula, seed: int, count: int, unit: AlgNum | None = "default",
                  real_only: bool = False, max_tries: int | None = None) -> list[tuple]:
    """Deterministic points of ``f``: every full point-set member plus region samples.

    Region candidates are random rationals in a box scaled from the atoms'
    constants; single-variable linear equations and two-variable circles
    are solved exactly (circles by the rational parametrization).
    """
    if unit == "default":
        unit = AlgNum.i()
    rng = random.Random(seed)
    pts: list[tuple] = []
    seen = set()
    for ps in point_sets_of(f.root):
        if ps.coords is None:
            for p in ps.points:
                key = serialize(SemialgFormula(f.d, PointSet((p,))))
                if key not in seen:
                    seen.add(key)
                    pts.append(tuple(p))
    root = f.root
    if isinstance(root, PointSet) or (isinstance(root, Or) and all(isinstance(a, PointSet) for a in root.args)):
        return pts
    target = len(pts) + count
    tries = 0
    limit = max_tries if max_tries is not None else 30 * max(count, 1)
    while len(pts) < target and tries < limit:
        tries += 1
        branch = _pick_branch(root, rng)
        if isinstance(branch, PointSet):
            continue
        z = _candidate(branch, f.d, rng, unit, real_only)
        if z is not None and eval_at(f, z):
            pts.append(tuple(z))
    return pts


# --------------------------------------------------------------------------
# raw formulas


def _real_matrix(A) -> list[list[AlgNum]]:
    """Real 2d x 2d matrix of ``z -> A z`` on (Re z_1, Im z_1, ...)."""
    d = len(A)
    R = [[AlgNum(0)] * (2 * d) for _ in range(2 * d)]
    for i in range(d):
        for j in range(d):
            a = as_alg(A[i][j])
            re, im = a.re(), a.im()
            R[2 * i][2 * j] = re
            R[2 * i][2 * j + 1] = -im
            R[2 * i + 1][2 * j] = im
            R[2 * i + 1][2 * j + 1] = re
    return R


def detect_tube(f: SemialgFormula):
    """Groups ``(vars, r2)`` when the non-point part is ``AND sum_{v in G} u_v^2 <= r2``."""
    root = f.root
    parts = root.args if isinstance(root, Or) else (root,)
    regions = [p for p in parts if not isinstance(p, PointSet)]
    if len(regions) != 1:
        return None
    groups = []
    for a in _conjuncts(regions[0]):
        ball = _ball(a.poly) if isinstance(a, Atom) and a.rel == ">=" else None
        if ball is None:
            return None
        groups.append(ball)
    used = [v for g, _ in groups for v in g]
    if len(used) != len(set(used)):
        return None
    return groups


def _spectral_norm(M: list[list[AlgNum]]) -> AlgNum | None:
    if all(v.is_zero() for row in M for v in row):
        return AlgNum(0)
    if not all(v.is_rational for row in M for v in row):
        return None
    rows, cols = len(M), len(M[0])
    MtM = [[sum((M[k][i] * M[k][j] for k in range(rows)), AlgNum(0)) for j in range(cols)] for i in range(cols)]
    roots = [r for r in AlgNum.roots_of(char_poly(MtM)) if r.is_real()]
    top = max(roots, key=lambda r: float(r))
    for r in roots:
        if r > top:
            top = r
    return sqrt_pos(top) if top.sign() > 0 else AlgNum(0)


def tube_obligation(A, groups) -> str:
    """``sum_h ||A_gh|| b_h <= b_g`` for every group, with no leakage from free variables."""
    R = _real_matrix(A)
    nv = len(R)
    constrained = {v for g, _ in groups for v in g}
    free = [v for v in range(nv) if v not in constrained]
    radii = [sqrt_pos(r2) if r2.sign() > 0 else AlgNum(0) for _, r2 in groups]
    for g, _ in groups:
        if any(not R[i][j].is_zero() for i in g for j in free):
            return FAIL
    for (g, _), bg in zip(groups, radii):
        total = AlgNum(0)
        for (h, _), bh in zip(groups, radii):
            norm = _spectral_norm([[R[i][j] for j in h] for i in g])
            if norm is None:
                return NA
            total = total + norm * bh
        if total > bg:
            return FAIL
    return PASS


def _orbit(instance: OrbitInstance, n: int):
    z = tuple(instance.x)
    for _ in range(n):
        yield z
        z = mat_vec(instance.A, z)


def _exact_checks(instance: OrbitInstance, f: SemialgFormula, config: VerifyConfig, report: VerifyReport):
    report.x_in = eval_at(f, instance.x)
    report.y_out = not eval_at(f, instance.y)
    points = [p for ps in point_sets_of(f.root) if ps.coords is None for p in ps.points]
    report.prefix_in = all(eval_at(f, p) for p in _orbit(instance, max(len(points), 1)))
    if points:
        report.stability_symbolic["points_map_into_set"] = _flag(
            all(eval_at(f, mat_vec(instance.A, p)) for p in points))
    all_in, never = True, True
    y = tuple(instance.y)
    for z in _orbit(instance, config.orbit_iterations):
        if z == y:
            never = False
        if all_in and not eval_at(f, z):
            all_in = False
    report.orbit_check = (config.orbit_iterations, all_in, never)


def _sampled(instance_matrix, f: SemialgFormula, pts) -> tuple[int, int]:
    passes = sum(1 for z in pts if eval_at(f, mat_vec(instance_matrix, z)))
    return passes, len(pts)


def verify_invariant(instance: OrbitInstance, f: SemialgFormula, config: VerifyConfig | None = None,
                     certificate: dict | None = None) -> VerifyReport:
    """Check ``x in f``, ``y not in f`` and ``A f within f``.

    With a ``certificate`` carrying a template, stability is settled by the
    template's obligations in Jordan coordinates; otherwise the formula is
    inspected for tube and modulus shapes and sampled directly.
    """
    config = config or VerifyConfig()
    if f.d != instance.d:
        raise InvalidInput("formula and instance dimensions differ")
    report = VerifyReport(seed=config.seed)
    _exact_checks(instance, f, config, report)
    if certificate is not None and "template" in certificate:
        _template_checks(instance, certificate, f, config, report)
    else:
        _raw_stability(instance, f, config, report)
    return report


def _raw_stability(instance: OrbitInstance, f: SemialgFormula, config: VerifyConfig, report: VerifyReport):
    sym = report.stability_symbolic
    groups = detect_tube(f)
    sym["tube_telescoping"] = tube_obligation(instance.A, groups) if groups else NA
    shape = detect_modulus_bound(f)
    sym["modulus_lower_bound"] = modulus_bound_obligation(instance.A, *shape) if shape else NA
    pts = sample_points(f, config.seed, config.samples)
    report.stability_sampled = _sampled(instance.A, f, pts)
    if len(pts) < config.samples:
        report.notes.append(f"sampler produced {len(pts)} of {config.samples} points")


def detect_modulus_bound(f: SemialgFormula):
    """``(coord, c, zeros)`` when the non-point part is ``|z_coord|^2 >= c`` plus zero coordinates."""
    root = f.root
    parts = root.args if isinstance(root, Or) else (root,)
    regions = [p for p in parts if not isinstance(p, PointSet)]
    if len(regions) != 1:
        return None
    bound, zeros = None, set()
    for a in _conjuncts(regions[0]):
        if not isinstance(a, Atom):
            return None
        if a.rel == "=":
            lin = _single_linear(a.poly)
            if lin is None or not lin[1].is_zero():
                return None
            zeros.add(lin[0] // 2)
            continue
        if a.rel != ">=" or bound is not None:
            return None
        for coord in range(f.d):
            c = -a.poly.eval([AlgNum(0)] * (2 * f.d))
            if a.poly == CPoly.coord(f.d, coord).abs2() - c:
                bound = (coord, c)
                break
        else:
            return None
    if bound is None or bound[1].sign() < 0:
        return None
    return bound[0], bound[1], tuple(sorted(zeros))


def modulus_bound_obligation(A, coord: int, c: AlgNum, zeros) -> str:
    """Row ``coord`` of ``A`` is ``lambda e_coord`` off the zero set, with ``|lambda| >= 1``."""
    d = len(A)
    zs = set(zeros)
    if coord in zs:
        return FAIL
    if any(not as_alg(A[i][j]).is_zero() for i in zs for j in range(d) if j not in zs):
        return FAIL
    row = [as_alg(A[coord][j]) for j in range(d)]
    if any(not row[j].is_zero() for j in range(d) if j != coord and j not in zs):
        return FAIL
    return _flag(row[coord].abs2() >= 1)


# --------------------------------------------------------------------------
# template obligations in reduced Jordan coordinates


def _zero_vars(p: Poly, coords) -> Poly:
    nv = p.nvars
    dead = {2 * c for c in coords} | {2 * c + 1 for c in coords}
    subs = [Poly(nv) if k in dead else Poly.var(nv, k) for k in range(nv)]
    return p.compose(subs)


def _row_form(red: JordanInstance, i: int) -> CPoly:
    return linear_form(red.d, jordan_matrix(red.blocks)[i])


def _rows_closed(red: JordanInstance, coords) -> bool:
    J = jordan_matrix(red.blocks)
    s = set(coords)
    return all(J[i][j].is_zero() for i in s for j in range(red.d) if j not in s)


def template_obligations(red: JordanInstance, t, reference_lattice=None) -> dict[str, str]:
    from .synth import tube_bounds, wedge_poly

    out: dict[str, str] = {}
    d = red.d
    if t.kind in ("divergent", "contracting", "nondiag"):
        if t.block is None or not 0 <= t.block < len(red.blocks):
            return {"template_block": FAIL}
        b = red.blocks[t.block]
        lam = b.eigenvalue
        zn0 = red.power_x(t.n0)
    if t.kind == "divergent":
        ci = b.start + t.k - 1
        tail = range(ci + 1, b.start + b.size)
        c = t.constants[0]
        out["modulus"] = _flag(lam.abs2() > 1)
        img = _row_form(red, ci)
        ident = CPoly(_zero_vars(img.re, tail), _zero_vars(img.im, tail)).abs2() \
            - CPoly.coord(d, ci).abs2() * lam.abs2()
        out["recurrence_identity"] = _flag(ident.is_zero())
        out["tail_stable"] = _flag(_rows_closed(red, tail))
        out["x_tail_zero"] = _flag(all(red.x[i].is_zero() for i in tail))
        out["threshold"] = _flag(c == zn0[ci].abs2() and c > red.y[ci].abs2())
    elif t.kind == "contracting":
        bounds = list(t.constants)
        out["modulus"] = _flag(lam.abs2() < 1)
        out["constants_match_prescription"] = _flag(len(bounds) == b.size and bounds == tube_bounds(red, t.block))
        lam_abs = sqrt_pos(lam.abs2())
        radii = [sqrt_pos(r) for r in bounds]
        ok = True
        for k in range(len(radii)):
            nxt = radii[k + 1] if k + 1 < len(radii) else AlgNum(0)
            if lam_abs * radii[k] + nxt > radii[k]:
                ok = False
        out["telescoping"] = _flag(ok)
        ok = True
        for k, i in enumerate(b.coords):
            want = CPoly.coord(d, i).scale(lam)
            if k + 1 < b.size:
                want = want + CPoly.coord(d, i + 1)
            got = _row_form(red, i)
            ok = ok and got.re == want.re and got.im == want.im
        out["recurrence_identity"] = _flag(ok)
        out["block_stable"] = _flag(_rows_closed(red, b.coords))
        out["threshold"] = _flag(len(bounds) == b.size and all(
            zn0[i].abs2() <= bk for i, bk in zip(b.coords, bounds)))
    elif t.kind == "nondiag":
        p, q = b.start + t.k - 2, b.start + t.k - 1
        tail = range(q + 1, b.start + b.size)
        c = t.constants[0]
        out["modulus"] = _flag(lam.abs2() == 1)
        zp, zq = CPoly.coord(d, p), CPoly.coord(d, q)
        wedge = wedge_poly(d, lam, p, q)
        img_p = _row_form(red, p)
        raw_q = _row_form(red, q)
        img_q = CPoly(_zero_vars(raw_q.re, tail), _zero_vars(raw_q.im, tail))
        e1 = img_p.abs2() - (zp.abs2() + wedge * 2 + zq.abs2())
        e2 = scalar_product(img_p.scale(lam), img_q) - (wedge + zq.abs2())
        out["expansion_norm"] = _flag(e1.is_zero())
        out["expansion_wedge"] = _flag(e2.is_zero())
        out["wedge_present"] = _flag(bool(t.wedge))
        out["tail_stable"] = _flag(_rows_closed(red, tail))
        out["x_tail_zero"] = _flag(all(red.x[i].is_zero() for i in tail))
        w_at = (lam * zn0[p] * zn0[q].conj()).re()
        out["threshold"] = _flag(c == zn0[p].abs2() and c > red.y[p].abs2() and w_at.sign() >= 0)
    elif t.kind == "closure":
        eigs = [b.eigenvalue for b in red.blocks]
        out["diagonal"] = _flag(all(b.size == 1 for b in red.blocks))
        out["modulus"] = _flag(all(lam.abs2() == 1 for lam in eigs))
        out["eigenvalues_satisfy_relations"] = _flag(all(verify_relation(eigs, v) for v in t.basis))
        if reference_lattice is not None:
            out["lattice_matches"] = _flag(tuple(map(tuple, t.basis)) == reference_lattice.basis)
    return out


# --------------------------------------------------------------------------
# sampling in reduced Jordan coordinates


def _field_unit(values) -> AlgNum | None:
    """``i`` inside the field of ``values`` (None when that field has no ``i``)."""
    fields = {id(v.field): v.field for v in values if not v.is_rational}
    if not fields:
        return AlgNum.i()
    if len(fields) > 1:
        return None
    (F,) = fields.values()
    if F.i_expr is None:
        return None
    return AlgNum._elem(F, F.i_expr)


def _unit_vector(rng, unit):
    t = _rand_rat(rng, 3)
    den = 1 + t * t
    re, im = (1 - t * t) / den, 2 * t / den
    if unit is None:
        return AlgNum(1 if rng.random() < 0.5 else -1)
    return _complex(re, im, unit)


def _radius(rng, lo: float | None, hi: float | None) -> Fraction:
    """Rational radius, biased towards the boundary of ``[lo, hi]``."""
    if hi is None:
        val = lo * (1 + 10 ** (-rng.uniform(0, 4))) if rng.random() < 0.5 else lo * rng.uniform(1, 3)
    else:
        val = hi * (1 - 10 ** (-rng.uniform(0, 4))) if rng.random() < 0.5 else hi * rng.uniform(0, 1)
    return Fraction(val).limit_denominator(10 ** 6)


def _integer_kernel(basis, d: int) -> list[tuple[int, ...]]:
    """Integer vectors spanning the orthogonal complement of the relation lattice."""
    if not basis:
        return [tuple(int(i == j) for i in range(d)) for j in range(d)]
    X, nullity = fmpz_mat([list(v) for v in basis]).nullspace()
    return [tuple(int(X[i, j]) for i in range(d)) for j in range(nullity)]


def _jordan_samples(red: JordanInstance, t, f_red: SemialgFormula, seed: int, count: int) -> list[tuple]:
    from .synth import eigenvalues

    rng = random.Random(seed)
    if t.kind == "closure":
        unit = _field_unit(list(red.x) + eigenvalues(red))
    else:
        b = red.blocks[t.block]
        unit = _field_unit([red.x[i] for i in b.coords] + [b.eigenvalue])
    out = [tuple(p) for ps in point_sets_of(f_red.root) if ps.coords is None for p in ps.points]
    d = red.d

    def free():
        return _complex(_rand_rat(rng, 3), _rand_rat(rng, 3), unit)

    if t.kind == "closure":
        eigs = eigenvalues(red)
        kernel = _integer_kernel(t.basis, d)
    target = len(out) + count
    tries = 0
    while len(out) < target and tries < 30 * max(count, 1):
        tries += 1
        if t.kind in ("divergent", "contracting", "nondiag"):
            # J is block diagonal and the region only constrains block t.block,
            # so the other coordinates are left at zero
            b = red.blocks[t.block]
            w = [free() if i in b.coords else AlgNum(0) for i in range(d)]
        else:
            w = [free() for _ in range(d)]
        if t.kind == "divergent":
            ci = b.start + t.k - 1
            c = float(t.constants[0])
            w[ci] = _unit_vector(rng, unit) * _radius(rng, c ** 0.5, None)
            for i in range(ci + 1, b.start + b.size):
                w[i] = AlgNum(0)
        elif t.kind == "contracting":
            for i, bk in zip(b.coords, t.constants):
                w[i] = _unit_vector(rng, unit) * _radius(rng, None, float(bk) ** 0.5)
        elif t.kind == "nondiag":
            p, q = b.start + t.k - 2, b.start + t.k - 1
            rho = _radius(rng, float(t.constants[0]) ** 0.5, None)
            w[p] = _unit_vector(rng, unit) * rho
            w[q] = _unit_vector(rng, unit) * (rho * Fraction(rng.randint(0, 40), 20))
            for i in range(q + 1, b.start + b.size):
                w[i] = AlgNum(0)
        elif t.kind == "closure":
            n = rng.randint(0, 60)
            mu = [lam ** n for lam in eigs]
            if unit is not None:
                for col in kernel:
                    nu = _unit_vector(rng, unit)
                    mu = [m * nu ** e for m, e in zip(mu, col)]
            w = [m * xi for m, xi in zip(mu, red.x)]
        if eval_at(f_red, w):
            out.append(tuple(w))
    return out


# --------------------------------------------------------------------------
# certificates


def _localize_constants(red: JordanInstance, t):
    """Swap parsed template constants for equal values living in the block's field.

    A parsed constant sits in the field of its own minimal polynomial, and
    mixing it with Jordan-coordinate values would force slow cross-field
    arithmetic.  Constants that do not match the recomputed ones are kept.
    """
    from dataclasses import replace

    from .synth import tube_bounds

    if t.kind == "contracting":
        local = tube_bounds(red, t.block)
    elif t.kind in ("divergent", "nondiag"):
        b = red.blocks[t.block]
        offset = t.k - 1 if t.kind == "divergent" else t.k - 2
        local = [red.power_x(t.n0)[b.start + offset].abs2()]
    else:
        return t
    if len(local) != len(t.constants):
        return t
    return replace(t, constants=tuple(lc if lc == c else c for lc, c in zip(local, t.constants)))


def _trace_signature(trace) -> list:
    return [(s["kind"], list(s["removed_coordinates"])) if isinstance(s, dict)
            else (s.kind, list(s.removed_coordinates)) for s in trace]


def verify_certificate(instance: OrbitInstance, cert: dict, config: VerifyConfig | None = None) -> VerifyReport:
    """Check a certificate produced by ``synthesize`` against ``instance``."""
    from .synth import eigenvalues

    config = config or VerifyConfig()
    verdict = cert.get("verdict")
    report = VerifyReport(verdict=verdict, seed=config.seed)
    if verdict == "REACHABLE":
        n = int(cert["n"])
        z = tuple(instance.x)
        for _ in range(n):
            z = mat_vec(instance.A, z)
        report.stability_symbolic["reaches_y"] = _flag(z == tuple(instance.y))
        return report
    if verdict == "NO_INVARIANT":
        out = normalize(jordan_decompose(instance)[1])
        if not isinstance(out, Reduced):
            report.stability_symbolic["normal_form"] = FAIL
            return report
        red = out.instance
        mu = [AlgNum.from_json(v) for v in cert["witness"]["mu"]]
        lattice = RelationLattice.from_json(cert["lattice"])
        eigs = eigenvalues(red)
        sym = report.stability_symbolic
        sym["diagonal_unit_case"] = _flag(classify(red.blocks).kind == "ModOneDiagonal")
        sym["witness_unit_modulus"] = _flag(len(mu) == red.d and all(m.abs2() == 1 for m in mu))
        sym["witness_maps_x_to_y"] = _flag(len(mu) == red.d and all(
            m * xi == yi for m, xi, yi in zip(mu, red.x, red.y)))
        sym["witness_relations"] = _flag(all(verify_relation(mu, v) for v in lattice.basis))
        sym["eigenvalue_relations"] = _flag(all(verify_relation(eigs, v) for v in lattice.basis))
        ref = relation_lattice(eigs, lattice.exponent_bound)
        sym["lattice_matches"] = _flag(ref.basis == lattice.basis)
        report.notes.append(f"closure membership relative to exponent bound {lattice.exponent_bound}")
        return report
    if verdict != "INVARIANT_FOUND":
        raise InvalidInput(f"unknown verdict {verdict!r}")

    f = parse(cert["formula"])
    if f.d != instance.d:
        raise InvalidInput("formula and instance dimensions differ")
    _exact_checks(instance, f, config, report)
    _template_checks(instance, cert, f, config, report)
    return report


def _template_checks(instance: OrbitInstance, cert: dict, f: SemialgFormula, config: VerifyConfig,
                     report: VerifyReport) -> None:
    """Symbolic obligations in Jordan coordinates, transport, and sampling for a template."""
    from .synth import CASE_TEMPLATE, Template, build_from_template, eigenvalues, to_input_coordinates

    try:
        t = Template.from_json(cert["template"])
        if t.kind not in ("divergent", "contracting", "nondiag", "closure", "early"):
            raise InvalidInput(f"unknown template {t.kind!r}")
    except (KeyError, TypeError, InvalidInput) as exc:
        report.stability_symbolic["template"] = NA
        report.notes.append(f"no usable template ({exc}); sampling in input coordinates")
        _raw_stability(instance, f, config, report)
        return
    dec, jinst = jordan_decompose(instance)
    out = normalize(jinst)
    sym = report.stability_symbolic
    sym["trace_matches"] = _flag(_trace_signature(out.trace) == _trace_signature(cert.get("reduction_trace", [])))

    if t.kind == "early":
        if not isinstance(out, EarlyInvariant) or out.trace[-1].kind != t.early_kind:
            sym["normal_form"] = FAIL
            return
        stage = out.stage
        sym["pinned_subspace_stable"] = _flag(_rows_closed(stage, out.pinned))
        if t.early_kind == "XNonzeroYZero":
            step = out.trace[-1]
            sym["eigenvalue_nonzero"] = _flag(not stage.blocks[step.block].eigenvalue.is_zero())
        if t.early_kind == "NilpotentYNonzero":
            sym["prefix_enters_subspace"] = _flag(
                all(stage.power_x(stage.d)[i].is_zero() for i in out.pinned))
        rebuilt = to_input_coordinates(out.formula, dec, instance)
        sym["transport"] = _flag(serialize(rebuilt) == cert["formula"])
        unit = _field_unit([v for row in dec.Q for v in row])
        fj = out.formula
        pts = sample_points(fj, config.seed, config.samples, unit=unit, real_only=unit is None)
        J = jinst.matrix()
        report.stability_sampled = _sampled(J, fj, pts)
        return

    if not isinstance(out, Reduced):
        sym["normal_form"] = FAIL
        return
    red = out.instance
    tag = classify(red.blocks)
    sym["case_matches"] = _flag(CASE_TEMPLATE[tag.kind] == t.kind and (
        t.kind == "closure" or tag.block == t.block))
    ref = None
    if t.kind == "closure":
        ref = relation_lattice(eigenvalues(red), t.exponent_bound or config.exponent_bound)
    try:
        sym.update(template_obligations(red, t, ref))
        f_red = build_from_template(red, _localize_constants(red, t))
    except (InvalidInput, IndexError, ValueError) as exc:
        sym["template_wellformed"] = FAIL
        report.notes.append(f"template error: {exc}")
        return
    lifted = lift_invariant(f_red, out.trace, jinst)
    rebuilt = to_input_coordinates(lifted, dec, instance)
    sym["transport"] = _flag(serialize(rebuilt) == cert["formula"])
    pts = _jordan_samples(red, t, f_red, config.seed, config.samples)
    report.stability_sampled = _sampled(red.matrix(), f_red, pts)
    if len(pts) < config.samples:
        report.notes.append(f"sampler produced {len(pts)} of {config.samples} points")

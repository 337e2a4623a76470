"""Case constructions for non-reachability invariants and the decision pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exactnum import AlgNum, InvalidInput, root_of_unity_order, sqrt_pos
from .formula import (
    Atom,
    CPoly,
    SemialgFormula,
    conj,
    disj,
    is_closed,
    point_set,
    real_restriction,
    scalar_product,
    serialize,
    substitute_linear,
    zero_coords,
)
from .linalg import JordanDecomposition, JordanInstance, OrbitInstance, jordan_decompose, mat_vec
from .reduce import EarlyInvariant, Reachable, ReductionStep, lift_invariant, normalize
from .spectral import (
    CaseTag,
    ClosureCheck,
    RelationLattice,
    TorusWitness,
    _arguments,
    classify,
    closure_membership,
    relation_lattice,
)

# safety cap on the threshold searches; thresholds are finite by construction
MAX_THRESHOLD = 200_000


class SynthesisError(RuntimeError):
    """An internal check failed; no certificate is emitted."""


@dataclass(frozen=True)
class SynthParams:
    n0: int
    block: int
    k: int  # 1-based coordinate inside the block


@dataclass(frozen=True)
class SynthConfig:
    search_bound: int = 10_000
    exponent_bound: int = 64
    samples: int = 1000
    seed: int = 0
    orbit_iterations: int = 200
    verify: bool = True

    def __post_init__(self):
        if self.search_bound < 1 or self.exponent_bound < 1 or self.samples < 0:
            raise InvalidInput("bounds must be positive")


def orbit_prefix(instance, n: int) -> list[tuple]:
    """``[x, A x, ..., A^(n-1) x]`` computed exactly."""
    if n < 0:
        raise InvalidInput("prefix length must be non-negative")
    if isinstance(instance, JordanInstance):
        return instance.orbit(n)
    out, z = [], tuple(instance.x)
    for _ in range(n):
        out.append(z)
        z = mat_vec(instance.A, z)
    return out


# --------------------------------------------------------------------------
# helpers on one Jordan block


def _block_step(lam: AlgNum, zJ: Sequence[AlgNum]) -> list[AlgNum]:
    s = len(zJ)
    return [lam * zJ[k] + (zJ[k + 1] if k + 1 < s else 0) for k in range(s)]


def _last_nonzero(vals: Sequence[AlgNum]) -> int:
    idx = [k for k, v in enumerate(vals) if not v.is_zero()]
    if not idx:
        raise InvalidInput("block projection of x is zero")
    return idx[-1]


def _with_prefix(red: JordanInstance, n0: int, region) -> SemialgFormula:
    pts = red.orbit(n0)
    node = disj(point_set(pts), region) if pts else region
    return SemialgFormula(red.d, node)


def _tail(b, off: int):
    return range(b.start + off + 1, b.start + b.size)


# --------------------------------------------------------------------------
# |lambda| > 1


def divergent_params(red: JordanInstance, j: int) -> tuple[SynthParams, AlgNum]:
    b = red.blocks[j]
    lam = b.eigenvalue
    if lam.abs2().cmp(1) <= 0:
        raise InvalidInput("divergent case needs |lambda| > 1")
    xJ = [red.x[i] for i in b.coords]
    off = _last_nonzero(xJ)
    r = lam.abs2()
    val = xJ[off].abs2()
    target = red.y[b.start + off].abs2()
    n = 0
    while not val > target:
        val = val * r
        n += 1
        if n > MAX_THRESHOLD:
            raise SynthesisError("divergent threshold search did not terminate")
    return SynthParams(n, j, off + 1), val


def divergent_region(d: int, b, k: int, c: AlgNum):
    ci = b.start + k - 1
    return conj(Atom(CPoly.coord(d, ci).abs2() - c, ">="), zero_coords(d, _tail(b, k - 1)))


def build_divergent(red: JordanInstance, params: SynthParams, c: AlgNum) -> SemialgFormula:
    b = red.blocks[params.block]
    return _with_prefix(red, params.n0, divergent_region(red.d, b, params.k, c))


def synth_divergent(red: JordanInstance, j: int, n0: int | None = None):
    """Prefix of the orbit plus ``|z_{J,k}|^2 >= |(A^n0 x)_{J,k}|^2`` with a zero tail."""
    params, c = divergent_params(red, j)
    if n0 is not None:
        params = SynthParams(n0, j, params.k)
        c = red.power_x(n0)[red.blocks[j].start + params.k - 1].abs2()
    return build_divergent(red, params, c), params, c


# --------------------------------------------------------------------------
# |lambda| < 1


def tube_bounds(red: JordanInstance, j: int) -> list[AlgNum]:
    """Squared radii ``((1 - |lambda|)^k ||y_J||_inf)^2`` for k = 1..d(J)."""
    b = red.blocks[j]
    lam_abs = sqrt_pos(b.eigenvalue.abs2())
    m2 = max((red.y[i].abs2() for i in b.coords), key=_Cmp)
    shrink = 1 - lam_abs
    out, f = [], AlgNum(1)
    for _ in range(b.size):
        f = f * shrink
        out.append(f * f * m2)
    return out


class _Cmp:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return self.v.cmp(other.v) < 0


def contracting_params(red: JordanInstance, j: int) -> tuple[SynthParams, list[AlgNum]]:
    b = red.blocks[j]
    lam = b.eigenvalue
    if lam.abs2().cmp(1) >= 0:
        raise InvalidInput("contracting case needs |lambda| < 1")
    bounds = tube_bounds(red, j)
    zJ = [red.x[i] for i in b.coords]
    n = 0
    while not all(z.abs2() <= bk for z, bk in zip(zJ, bounds)):
        zJ = _block_step(lam, zJ)
        n += 1
        if n > MAX_THRESHOLD:
            raise SynthesisError("contracting threshold search did not terminate")
    return SynthParams(n, j, 1), bounds


def contracting_region(d: int, b, bounds: Sequence[AlgNum]):
    return conj(*[Atom(bk - CPoly.coord(d, i).abs2(), ">=") for i, bk in zip(b.coords, bounds)])


def build_contracting(red: JordanInstance, params: SynthParams, bounds: Sequence[AlgNum]) -> SemialgFormula:
    b = red.blocks[params.block]
    return _with_prefix(red, params.n0, contracting_region(red.d, b, bounds))


def synth_contracting(red: JordanInstance, j: int, n0: int | None = None):
    """Prefix of the orbit plus the tube ``|z_{J,k}| <= (1 - |lambda|)^k ||y_J||_inf``."""
    params, bounds = contracting_params(red, j)
    if n0 is not None:
        params = SynthParams(n0, j, 1)
    return build_contracting(red, params, bounds), params, bounds


# --------------------------------------------------------------------------
# |lambda| = 1, non-diagonal block


def wedge_offset(red: JordanInstance, j: int) -> AlgNum:
    """``-<lambda x_{J,k-1}, x_{J,k}> / |x_{J,k}|^2``."""
    b = red.blocks[j]
    xJ = [red.x[i] for i in b.coords]
    q = _last_nonzero(xJ)
    p = q - 1
    inner = (b.eigenvalue * xJ[p] * xJ[q].conj()).re()
    return -inner / xJ[q].abs2()


def nondiag_params(red: JordanInstance, j: int) -> tuple[SynthParams, AlgNum]:
    b = red.blocks[j]
    lam = b.eigenvalue
    if lam.abs2() != 1 or b.size < 2:
        raise InvalidInput("wedge case needs a non-diagonal block with |lambda| = 1")
    xJ = [red.x[i] for i in b.coords]
    q = _last_nonzero(xJ)
    if q < 1:
        raise InvalidInput("wedge case needs x_{J,>1} != 0")
    p = q - 1
    t = wedge_offset(red, j)
    target = red.y[b.start + p].abs2()
    zJ = xJ
    n = 0
    while True:
        val = zJ[p].abs2()
        if val > target and AlgNum(n) >= t:
            return SynthParams(n, j, q + 1), val
        zJ = _block_step(lam, zJ)
        n += 1
        if n > MAX_THRESHOLD:
            raise SynthesisError("wedge threshold search did not terminate")


def wedge_poly(d: int, lam: AlgNum, p: int, q: int):
    return scalar_product(CPoly.coord(d, p).scale(lam), CPoly.coord(d, q))


def nondiag_region(d: int, b, k: int, c: AlgNum, wedge: bool = True):
    p, q = b.start + k - 2, b.start + k - 1
    parts = [Atom(CPoly.coord(d, p).abs2() - c, ">=")]
    if wedge:
        parts.append(Atom(wedge_poly(d, b.eigenvalue, p, q), ">="))
    parts.append(zero_coords(d, _tail(b, k - 1)))
    return conj(*parts)


def build_nondiag(red: JordanInstance, params: SynthParams, c: AlgNum, wedge: bool = True) -> SemialgFormula:
    b = red.blocks[params.block]
    return _with_prefix(red, params.n0, nondiag_region(red.d, b, params.k, c, wedge))


def synth_nondiag(red: JordanInstance, j: int, n0: int | None = None):
    """Prefix plus ``|z_{J,k-1}|^2 >= c``, ``<lambda z_{J,k-1}, z_{J,k}> >= 0`` and a zero tail."""
    params, c = nondiag_params(red, j)
    if n0 is not None:
        params = SynthParams(n0, j, params.k)
        c = red.power_x(n0)[red.blocks[j].start + params.k - 2].abs2()
    return build_nondiag(red, params, c), params, c


# --------------------------------------------------------------------------
# |lambda| = 1, diagonal: orbit closure


def closure_region(red: JordanInstance, basis: Sequence[Sequence[int]]):
    d = red.d
    x = red.x
    atoms = [Atom(CPoly.coord(d, i).abs2() - x[i].abs2(), "=") for i in range(d)]
    one = CPoly.const(d, 1)
    for v in basis:
        lhs, rhs = one, one
        cl, cr = AlgNum(1), AlgNum(1)
        for i, e in enumerate(v):
            if e > 0:
                lhs = lhs * CPoly.coord(d, i) ** e
                cr = cr * x[i] ** e
            elif e < 0:
                rhs = rhs * CPoly.coord(d, i) ** (-e)
                cl = cl * x[i] ** (-e)
        diff = lhs.scale(cl) - rhs.scale(cr)
        atoms += [Atom(diff.re, "="), Atom(diff.im, "=")]
    return conj(*atoms)


def build_closure(red: JordanInstance, basis) -> SemialgFormula:
    return SemialgFormula(red.d, closure_region(red, basis))


def eigenvalues(red: JordanInstance) -> list[AlgNum]:
    return [b.eigenvalue for b in red.blocks]


def synth_diag_closure(red: JordanInstance, lattice: RelationLattice):
    """Orbit-closure formula, or the torus witness when ``y`` lies in the closure."""
    if any(b.size != 1 for b in red.blocks):
        raise InvalidInput("closure case needs a diagonal matrix")
    eigs = eigenvalues(red)
    if any(lam.abs2() != 1 for lam in eigs):
        raise InvalidInput("closure case needs unit-modulus eigenvalues")
    check = closure_membership(red.x, red.y, eigs, lattice)
    if check.witness is not None:
        return check
    return build_closure(red, lattice.basis), check


# --------------------------------------------------------------------------
# reachability


@dataclass(frozen=True)
class ReachResult:
    kind: str  # Reachable | Unreachable | UnreachableRelativeToClosure | Indeterminate
    n: int | None = None
    bound: int | None = None
    detail: str = ""

    def to_json(self) -> dict:
        return {"kind": self.kind, "n": self.n, "bound": self.bound, "detail": self.detail}


def _search(red: JordanInstance, limit: int) -> int | None:
    z = tuple(red.x)
    y = tuple(red.y)
    for n in range(limit):
        if z == y:
            return n
        z = red.apply(z)
    return None


def _structural_bound(red: JordanInstance, tag: CaseTag) -> int:
    if tag.kind == "HasModulusGreaterOne":
        return divergent_params(red, tag.block)[0].n0
    if tag.kind == "HasModulusLessOne":
        return contracting_params(red, tag.block)[0].n0
    return nondiag_params(red, tag.block)[0].n0


def _torus_search(red: JordanInstance, mu: Sequence[AlgNum], limit: int) -> int | None:
    """Least ``n < limit`` with ``lambda^n == mu``; floats filter, exact arithmetic decides."""
    eigs = eigenvalues(red)
    theta = np.array([float(t.mid()) for t in _arguments(eigs, 128)])
    phi = np.array([float(t.mid()) for t in _arguments(list(mu), 128)])
    n = np.arange(limit, dtype=np.float64)
    s = np.outer(n, theta) - phi
    near = np.all(np.abs(s - np.round(s)) < 1e-6, axis=1)
    for k in np.nonzero(near)[0]:
        k = int(k)
        if all(lam ** k == m for lam, m in zip(eigs, mu)):
            return k
    return None


def decide_reduced(red: JordanInstance, tag: CaseTag, search_bound: int,
                   lattice: RelationLattice | None = None) -> ReachResult:
    if tag.kind != "ModOneDiagonal":
        bound = _structural_bound(red, tag)
        n = _search(red, bound)
        if n is not None:
            return ReachResult("Reachable", n, bound)
        return ReachResult("Unreachable", None, bound, "structural bound")
    eigs = eigenvalues(red)
    orders = [root_of_unity_order(lam) for lam in eigs]
    if all(o is not None for o in orders):
        period = math.lcm(*orders)
        n = _search(red, period)
        if n is not None:
            return ReachResult("Reachable", n, period)
        return ReachResult("Unreachable", None, period, "finite orbit")
    if lattice is None:
        raise InvalidInput("diagonal case needs a relation lattice")
    check = closure_membership(red.x, red.y, eigs, lattice)
    if check.witness is None:
        return ReachResult("UnreachableRelativeToClosure", None, None, "; ".join(check.reasons))
    n = _torus_search(red, check.witness.mu, search_bound + 1)
    if n is not None:
        return ReachResult("Reachable", n, search_bound)
    return ReachResult("Indeterminate", None, search_bound, "y lies in the orbit closure")


def decide_reachability(instance: OrbitInstance, search_bound: int = 10_000,
                        exponent_bound: int = 64) -> ReachResult:
    _, jinst = jordan_decompose(instance)
    out = normalize(jinst)
    if isinstance(out, Reachable):
        return ReachResult("Reachable", out.n, jinst.d, "orbit prefix")
    if isinstance(out, EarlyInvariant):
        return ReachResult("Unreachable", None, jinst.d, f"invariant {out.trace[-1].kind}")
    red = out.instance
    tag = classify(red.blocks)
    lattice = relation_lattice(eigenvalues(red), exponent_bound) if tag.kind == "ModOneDiagonal" else None
    res = decide_reduced(red, tag, search_bound, lattice)
    if res.n is not None:
        return ReachResult(res.kind, res.n + out.time_shift, res.bound, res.detail)
    return res


# --------------------------------------------------------------------------
# templates and certificates


@dataclass(frozen=True)
class Template:
    """Everything needed to rebuild the invariant in reduced Jordan coordinates."""

    kind: str  # divergent | contracting | nondiag | closure | early
    block: int | None = None
    k: int | None = None
    n0: int | None = None
    constants: tuple[AlgNum, ...] = ()
    basis: tuple[tuple[int, ...], ...] = ()
    exponent_bound: int | None = None
    wedge: bool = True
    early_kind: str | None = None

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for name in ("block", "k", "n0", "exponent_bound", "early_kind"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        if self.constants:
            out["constants"] = [c.to_json() for c in self.constants]
        if self.kind == "closure":
            out["basis"] = [list(v) for v in self.basis]
        if self.kind == "nondiag":
            out["wedge"] = self.wedge
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Template":
        return cls(
            kind=data["kind"], block=data.get("block"), k=data.get("k"), n0=data.get("n0"),
            constants=tuple(AlgNum.from_json(c) for c in data.get("constants", [])),
            basis=tuple(tuple(int(e) for e in v) for v in data.get("basis", [])),
            exponent_bound=data.get("exponent_bound"), wedge=data.get("wedge", True),
            early_kind=data.get("early_kind"))


def build_from_template(red: JordanInstance, t: Template) -> SemialgFormula:
    if t.kind == "divergent":
        return build_divergent(red, SynthParams(t.n0, t.block, t.k), t.constants[0])
    if t.kind == "contracting":
        return build_contracting(red, SynthParams(t.n0, t.block, 1), t.constants)
    if t.kind == "nondiag":
        return build_nondiag(red, SynthParams(t.n0, t.block, t.k), t.constants[0], t.wedge)
    if t.kind == "closure":
        return build_closure(red, t.basis)
    raise InvalidInput(f"template {t.kind!r} has no reduced-coordinate formula")


CASE_TEMPLATE = {"HasModulusGreaterOne": "divergent", "HasModulusLessOne": "contracting",
                 "ModOneNonDiagonal": "nondiag", "ModOneDiagonal": "closure"}


@dataclass
class SynthCertificate:
    verdict: str  # REACHABLE | INVARIANT_FOUND | NO_INVARIANT
    instance: OrbitInstance
    n: int | None = None
    formula: SemialgFormula | None = None
    case_tag: CaseTag | None = None
    n0: int | None = None
    closed: bool | None = None
    template: Template | None = None
    witness: TorusWitness | None = None
    lattice: RelationLattice | None = None
    prefix_points: tuple = ()
    trace: tuple[ReductionStep, ...] = ()
    decomposition: JordanDecomposition | None = None
    reachability: ReachResult | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"schema_version": 1, "verdict": self.verdict, "instance": self.instance.to_json()}
        if self.n is not None:
            out["n"] = self.n
        if self.formula is not None:
            out["formula"] = serialize(self.formula)
            out["closed"] = self.closed
            if self.instance.is_rational():
                out["formula_real"] = serialize(real_restriction(self.formula))
        if self.case_tag is not None:
            out["case"] = self.case_tag.to_json()
        if self.n0 is not None:
            out["n0"] = self.n0
        if self.template is not None:
            out["template"] = self.template.to_json()
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        if self.lattice is not None:
            out["lattice"] = self.lattice.to_json()
            out["lattice_note"] = (f"relations searched up to exponent bound {self.lattice.exponent_bound}; "
                                   "closure membership is relative to that bound")
        if self.prefix_points:
            out["prefix_points"] = [[v.to_json() for v in p] for p in self.prefix_points]
        out["reduction_trace"] = [s.to_json() for s in self.trace]
        if self.decomposition is not None:
            out["jordan"] = {
                "blocks": [{"eigenvalue": b.eigenvalue.to_json(), "size": b.size, "start": b.start}
                           for b in self.decomposition.blocks]}
        if self.reachability is not None:
            out["reachability"] = self.reachability.to_json()
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def to_input_coordinates(f: SemialgFormula, dec: JordanDecomposition, instance: OrbitInstance) -> SemialgFormula:
    """Carry a Jordan-coordinate formula to the input's coordinates.

    Listed points of ``f`` are images ``Q A^n x`` of orbit points, so their
    preimages are looked up instead of recomputed through ``Q^{-1}``.
    """
    count = len(_points_of(f)) + instance.d + 1
    known: dict = {}
    for o in orbit_prefix(instance, count):
        known.setdefault(_point_key(mat_vec(dec.Q, o)), tuple(o))
    return substitute_linear(f, dec.Q, dec.Qinv, lambda p: known.get(_point_key(p)))


def _point_key(p) -> tuple:
    # representation-level key: avoids hashing through minimal polynomials
    return tuple(("q", v.rational) if v.is_rational else (id(v.field), str(v.expr)) for v in p)


def _points_of(f: SemialgFormula) -> tuple:
    from .formula import point_sets_of
    return tuple(p for ps in point_sets_of(f.root) if ps.coords is None for p in ps.points)


def synthesize(instance: OrbitInstance, config: SynthConfig | None = None) -> SynthCertificate:
    """Decide and, when possible, construct a verified non-reachability invariant."""
    config = config or SynthConfig()
    if not instance.is_rational():
        raise InvalidInput("synthesis needs rational input entries")
    dec, jinst = jordan_decompose(instance)
    out = normalize(jinst)
    base = dict(instance=instance, decomposition=dec)
    if isinstance(out, Reachable):
        cert = SynthCertificate("REACHABLE", n=out.n, trace=(), **base,
                                reachability=ReachResult("Reachable", out.n, jinst.d, "orbit prefix"))
        return _finish(cert, config)
    if isinstance(out, EarlyInvariant):
        f = to_input_coordinates(out.formula, dec, instance)
        cert = SynthCertificate(
            "INVARIANT_FOUND", formula=f, closed=out.closed and is_closed(f),
            template=Template("early", early_kind=out.trace[-1].kind), trace=out.trace,
            prefix_points=_points_of(f), **base,
            reachability=ReachResult("Unreachable", None, jinst.d, f"invariant {out.trace[-1].kind}"))
        return _finish(cert, config)

    red = out.instance
    tag = classify(red.blocks)
    lattice = None
    if tag.kind == "ModOneDiagonal":
        lattice = relation_lattice(eigenvalues(red), config.exponent_bound)
    reach = decide_reduced(red, tag, config.search_bound, lattice)
    if reach.kind == "Reachable":
        n = reach.n + out.time_shift
        cert = SynthCertificate("REACHABLE", n=n, trace=out.trace, case_tag=tag, **base,
                                reachability=ReachResult("Reachable", n, reach.bound, reach.detail))
        return _finish(cert, config)

    if tag.kind == "ModOneDiagonal":
        res = synth_diag_closure(red, lattice)
        if isinstance(res, ClosureCheck):
            cert = SynthCertificate("NO_INVARIANT", witness=res.witness, lattice=lattice, case_tag=tag,
                                    trace=out.trace, reachability=reach, **base)
            return _finish(cert, config)
        red_f, _ = res
        template = Template("closure", basis=lattice.basis, exponent_bound=lattice.exponent_bound)
        n0 = None
    elif tag.kind == "HasModulusGreaterOne":
        red_f, params, c = synth_divergent(red, tag.block)
        template = Template("divergent", params.block, params.k, params.n0, (c,))
        n0 = params.n0
    elif tag.kind == "HasModulusLessOne":
        red_f, params, bounds = synth_contracting(red, tag.block)
        template = Template("contracting", params.block, params.k, params.n0, tuple(bounds))
        n0 = params.n0
    else:
        red_f, params, c = synth_nondiag(red, tag.block)
        template = Template("nondiag", params.block, params.k, params.n0, (c,))
        n0 = params.n0

    lifted = lift_invariant(red_f, out.trace, jinst)
    f = to_input_coordinates(lifted, dec, instance)
    cert = SynthCertificate("INVARIANT_FOUND", formula=f, case_tag=tag, n0=n0, closed=is_closed(f),
                            template=template, lattice=lattice, trace=out.trace,
                            prefix_points=_points_of(f), reachability=reach, **base)
    return _finish(cert, config)


def _finish(cert: SynthCertificate, config: SynthConfig) -> SynthCertificate:
    if cert.formula is not None:
        text = serialize(cert.formula)
        cert.diagnostics["formula_bytes"] = len(text.encode())
    if config.verify:
        from .verify import VerifyConfig, verify_certificate

        report = verify_certificate(cert.instance, cert.to_json(),
                                    VerifyConfig(config.samples, config.seed, config.orbit_iterations,
                                                 config.exponent_bound))
        if not report.ok:
            raise SynthesisError(f"certificate failed verification: {report.failures()}")
        cert.diagnostics["verified"] = True
        cert.diagnostics["verify_seed"] = config.seed
    return cert

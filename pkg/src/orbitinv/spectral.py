"""Eigenvalue classification, multiplicative relations and orbit closures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from flint import arb, fmpz_mat

from .exactnum import AlgNum, InvalidInput, _precision, as_alg, modulus_cmp_one, root_of_unity_order
from .linalg import JordanBlockDesc

CASES = ("HasModulusGreaterOne", "HasModulusLessOne", "ModOneNonDiagonal", "ModOneDiagonal")

# exhaustive saturation runs when the search grid has at most this many points
EXHAUSTIVE_LIMIT = 2_000_000


@dataclass(frozen=True)
class CaseTag:
    kind: str
    block: int | None = None

    def __post_init__(self):
        if self.kind not in CASES:
            raise InvalidInput(f"unknown case {self.kind!r}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "block": self.block}


def classify(blocks: Sequence[JordanBlockDesc]) -> CaseTag:
    """First applicable case scanning blocks in canonical order."""
    mods = [modulus_cmp_one(b.eigenvalue) for b in blocks]
    for want, kind in ((1, "HasModulusGreaterOne"), (-1, "HasModulusLessOne")):
        for j, m in enumerate(mods):
            if m == want:
                return CaseTag(kind, j)
    for j, b in enumerate(blocks):
        if b.size > 1:
            return CaseTag("ModOneNonDiagonal", j)
    return CaseTag("ModOneDiagonal")


def verify_relation(eigs: Sequence[AlgNum], v: Sequence[int]) -> bool:
    """Exact test of ``prod eigs[i] ** v[i] == 1``."""
    if len(eigs) != len(v):
        raise InvalidInput("relation length differs from the number of eigenvalues")
    num = AlgNum(1)
    den = AlgNum(1)
    for lam, e in zip(eigs, v):
        e = int(e)
        if e > 0:
            num = num * as_alg(lam) ** e
        elif e < 0:
            den = den * as_alg(lam) ** (-e)
    return num == den


@dataclass(frozen=True)
class RelationLattice:
    basis: tuple[tuple[int, ...], ...]
    exponent_bound: int
    exhaustive_radius: int = 0

    @property
    def dim(self) -> int:
        return len(self.basis[0]) if self.basis else 0

    def contains(self, v: Sequence[int]) -> bool:
        return lattice_contains(self.basis, v)

    def to_json(self) -> dict:
        return {"basis": [list(r) for r in self.basis], "exponent_bound": self.exponent_bound,
                "exhaustive_radius": self.exhaustive_radius}

    @classmethod
    def from_json(cls, data) -> "RelationLattice":
        return cls(tuple(tuple(int(c) for c in r) for r in data["basis"]),
                   int(data["exponent_bound"]), int(data.get("exhaustive_radius", 0)))


def hnf_basis(vectors: Sequence[Sequence[int]], d: int) -> tuple[tuple[int, ...], ...]:
    """Canonical (Hermite normal form) basis of the lattice the vectors span."""
    rows = [list(map(int, v)) for v in vectors if any(v)]
    if not rows:
        return ()
    H = fmpz_mat(rows).hnf()
    out = []
    for i in range(H.nrows()):
        r = tuple(int(H[i, j]) for j in range(d))
        if any(r):
            out.append(r)
    return tuple(out)


def lattice_contains(basis: Sequence[Sequence[int]], v: Sequence[int]) -> bool:
    """Membership for a basis in row echelon (Hermite) form."""
    v = [int(c) for c in v]
    for row in basis:
        p = next(j for j, c in enumerate(row) if c)
        if v[p] % row[p]:
            return False
        q = v[p] // row[p]
        v = [a - q * b for a, b in zip(v, row)]
    return not any(v)


def _arguments(eigs: Sequence[AlgNum], prec: int) -> list[arb]:
    """Certified enclosures of ``arg(eig) / 2pi``."""
    out = []
    with _precision(prec + 32):
        two_pi = 2 * arb.pi()
        for lam in eigs:
            out.append(lam.ball(prec + 32).arg() / two_pi)
    return out


def _lll_candidates(eigs: Sequence[AlgNum], bits: int, bound: int) -> list[tuple[int, ...]]:
    d = len(eigs)
    theta = _arguments(eigs, 2 * bits)
    scale = 2 ** bits
    rows = []
    for i, t in enumerate(theta):
        row = [0] * (d + 1)
        row[i] = 1
        row[d] = int((t * scale).mid().floor().unique_fmpz())
        rows.append(row)
    rows.append([0] * d + [scale])
    reduced = fmpz_mat(rows).lll()
    cands = []
    for i in range(reduced.nrows()):
        v = tuple(int(reduced[i, j]) for j in range(d))
        if any(v) and max(abs(c) for c in v) <= bound:
            cands.append(v)
    return cands


def _exhaustive(eigs, radius: int, basis, tol: float = 1e-7) -> list[tuple[int, ...]]:
    """Grid vectors whose argument sum is near an integer and that lie outside ``basis``."""
    d = len(eigs)
    theta = np.array([float(t.mid()) for t in _arguments(eigs, 128)])
    rng = np.arange(-radius, radius + 1)
    grids = np.stack(np.meshgrid(*([rng] * d), indexing="ij"), axis=-1).reshape(-1, d)
    s = grids @ theta
    near = np.abs(s - np.round(s)) < tol
    out = []
    for v in grids[near]:
        t = tuple(int(c) for c in v)
        if any(t) and not lattice_contains(basis, t):
            out.append(t)
    return out


def relation_lattice(eigs: Sequence[AlgNum], exponent_bound: int = 64) -> RelationLattice:
    """Basis of the multiplicative relations among unit-modulus ``eigs``.

    Root-of-unity orders come first, then lattice reduction on certified
    argument approximations, then (when the grid is small enough) an
    exhaustive sweep of the box of radius ``exponent_bound``.  Every
    relation is verified exactly before it is used.
    """
    eigs = [as_alg(e) for e in eigs]
    d = len(eigs)
    if exponent_bound < 1:
        raise InvalidInput("exponent bound must be positive")
    for lam in eigs:
        if lam.is_zero() or modulus_cmp_one(lam) != 0:
            raise InvalidInput("relation lattice needs unit-modulus eigenvalues")
    found: list[tuple[int, ...]] = []
    for i, lam in enumerate(eigs):
        order = root_of_unity_order(lam)
        if order is not None and order <= exponent_bound:
            v = [0] * d
            v[i] = order
            found.append(tuple(v))
    basis = hnf_basis(found, d)
    previous = None
    for bits in (32, 64, 128, 256, 512):
        for v in _lll_candidates(eigs, bits, exponent_bound):
            if not lattice_contains(basis, v) and verify_relation(eigs, v):
                found.append(v)
                basis = hnf_basis(found, d)
        if previous == basis and bits >= 64:
            break
        previous = basis
    radius = exponent_bound
    while radius > 0 and (2 * radius + 1) ** d > EXHAUSTIVE_LIMIT:
        radius //= 2
    if radius:
        while True:
            extra = [v for v in _exhaustive(eigs, radius, basis) if verify_relation(eigs, v)]
            if not extra:
                break
            found.append(extra[0])
            basis = hnf_basis(found, d)
    return RelationLattice(basis, exponent_bound, radius)


@dataclass(frozen=True)
class TorusWitness:
    mu: tuple[AlgNum, ...]

    def to_json(self) -> dict:
        return {"mu": [m.to_json() for m in self.mu]}


@dataclass(frozen=True)
class ClosureCheck:
    """Outcome of an orbit-closure membership test; ``reasons`` explain a miss."""

    witness: TorusWitness | None
    reasons: tuple[str, ...] = ()

    def __bool__(self):
        return self.witness is not None


def closure_membership(x: Sequence[AlgNum], y: Sequence[AlgNum], eigs: Sequence[AlgNum],
                       lattice: RelationLattice) -> ClosureCheck:
    """Is ``y`` in the closure of the orbit of ``x`` under ``diag(eigs)``?"""
    x = [as_alg(v) for v in x]
    y = [as_alg(v) for v in y]
    if not (len(x) == len(y) == len(eigs)):
        raise InvalidInput("dimension mismatch")
    reasons = []
    for i, (a, b) in enumerate(zip(x, y)):
        if a.is_zero():
            raise InvalidInput("closure membership needs nonzero x coordinates")
        if a.abs2() != b.abs2():
            reasons.append(f"modulus differs at coordinate {i + 1}")
    if reasons:
        return ClosureCheck(None, tuple(reasons))
    mu = tuple(b / a for a, b in zip(x, y))
    for v in lattice.basis:
        if not verify_relation(mu, v):
            reasons.append(f"relation {list(v)} fails at y/x")
    if reasons:
        return ClosureCheck(None, tuple(reasons))
    return ClosureCheck(TorusWitness(mu))

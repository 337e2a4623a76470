"""Exact linear algebra over algebraic numbers and the Jordan decomposition."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from flint import fmpq_poly

from .exactnum import (
    AlgNum,
    ExactArithmeticError,
    InvalidInput,
    as_alg,
    closed_field,
    common_closed_field,
    factor_irreducible,
)

Vector = tuple[AlgNum, ...]
Matrix = tuple[Vector, ...]

ZERO = AlgNum(0)
ONE = AlgNum(1)


# --------------------------------------------------------------------------
# matrices


def as_matrix(rows) -> Matrix:
    return tuple(tuple(as_alg(v) for v in row) for row in rows)


def as_vector(vals) -> Vector:
    return tuple(as_alg(v) for v in vals)


def identity(n: int) -> Matrix:
    return tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n))


def mat_vec(M: Matrix, v: Sequence[AlgNum]) -> Vector:
    v = as_vector(v)
    out = []
    for row in M:
        acc = ZERO
        for a, b in zip(as_vector(row), v):
            if not a.is_zero() and not b.is_zero():
                acc = acc + a * b
        out.append(acc)
    return tuple(out)


def mat_mul(M: Matrix, N: Matrix) -> Matrix:
    cols = list(zip(*as_matrix(N)))
    return tuple(tuple(_dot(row, col) for col in cols) for row in as_matrix(M))


def _dot(u, v) -> AlgNum:
    acc = ZERO
    for a, b in zip(u, v):
        if not a.is_zero() and not b.is_zero():
            acc = acc + a * b
    return acc


def transpose(M: Matrix) -> Matrix:
    return tuple(zip(*M))


def mat_sub(M: Matrix, N: Matrix) -> Matrix:
    return tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(M, N))


def mat_conj(M: Matrix) -> Matrix:
    return tuple(tuple(a.conj() for a in row) for row in M)


def rref(M: Sequence[Sequence[AlgNum]]) -> tuple[list[list[AlgNum]], list[int]]:
    """Reduced row echelon form with exact pivoting (first nonzero entry)."""
    R = [[as_alg(v) for v in r] for r in M]
    rows = len(R)
    cols = len(R[0]) if rows else 0
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if not R[i][c].is_zero()), None)
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        inv = R[r][c].inv()
        R[r] = [v * inv for v in R[r]]
        for i in range(rows):
            if i != r and not R[i][c].is_zero():
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return R, pivots


def nullspace(M: Sequence[Sequence[AlgNum]], ncols: int | None = None) -> list[Vector]:
    """Kernel basis in echelon order: one vector per free column."""
    if not M:
        n = ncols or 0
        return [tuple(ONE if i == j else ZERO for i in range(n)) for j in range(n)]
    R, pivots = rref(M)
    n = len(M[0])
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = [ZERO] * n
        v[f] = ONE
        for row, p in zip(R, pivots):
            v[p] = -row[f]
        basis.append(tuple(v))
    return basis


def rank(M) -> int:
    if not M:
        return 0
    return len(rref(M)[1])


def inverse(M: Matrix) -> Matrix:
    n = len(M)
    aug = [list(row) + list(e) for row, e in zip(M, identity(n))]
    R, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise InvalidInput("matrix is singular")
    return tuple(tuple(row[n:]) for row in R)


def mat_pow(M: Matrix, k: int) -> Matrix:
    """``M**k`` by repeated squaring (``k >= 0``)."""
    if k < 0:
        raise InvalidInput("negative matrix power")
    out = identity(len(M))
    base = as_matrix(M)
    while k:
        if k & 1:
            out = mat_mul(out, base)
        base = mat_mul(base, base)
        k >>= 1
    return out


# --------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class OrbitInstance:
    """Matrix ``A`` and vectors ``x``, ``y`` with exact entries."""

    A: Matrix
    x: Vector
    y: Vector

    def __post_init__(self):
        d = len(self.A)
        if d == 0:
            raise InvalidInput("dimension must be positive")
        if any(len(row) != d for row in self.A):
            raise InvalidInput("matrix A is not square")
        if len(self.x) != d or len(self.y) != d:
            raise InvalidInput(f"x and y must have length {d}")

    @classmethod
    def make(cls, A, x, y) -> "OrbitInstance":
        return cls(as_matrix(A), as_vector(x), as_vector(y))

    @property
    def d(self) -> int:
        return len(self.A)

    def is_rational(self) -> bool:
        return all(v.is_rational for row in self.A for v in row) and all(
            v.is_rational for v in self.x + self.y)

    def to_json(self) -> dict:
        enc = lambda v: v.to_json()
        return {"A": [[enc(v) for v in row] for row in self.A],
                "x": [enc(v) for v in self.x], "y": [enc(v) for v in self.y]}

    @classmethod
    def from_json(cls, data) -> "OrbitInstance":
        if isinstance(data, str):
            data = json.loads(data)
        for key in ("A", "x", "y"):
            if key not in data:
                raise InvalidInput(f"instance is missing field {key!r}")
        def entry(v, where):
            try:
                return AlgNum.from_json(v)
            except (InvalidInput, TypeError, ValueError) as exc:
                raise InvalidInput(f"{where}: {exc}") from exc

        def vector(key):
            vals = data[key]
            if not isinstance(vals, list):
                raise InvalidInput(f"{key}: expected a list")
            return [entry(v, f"{key}[{i}]") for i, v in enumerate(vals)]

        rows = data["A"]
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            raise InvalidInput("A: expected a list of rows")
        A = [[entry(v, f"A[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(rows)]
        x, y = vector("x"), vector("y")
        return cls.make(A, x, y)


def char_poly(A: Matrix) -> fmpq_poly:
    """``det(tI - A)`` by the Faddeev-LeVerrier recurrence over Q."""
    n = len(A)
    if any(len(row) != n for row in A):
        raise InvalidInput("matrix is not square")
    try:
        Aq = [[as_alg(v).rational for v in row] for row in A]
    except InvalidInput as exc:
        raise InvalidInput("char_poly needs rational entries") from exc
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    M = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{n-k+1} I ; c_{n-k} = -tr(A M_k) / k
        AM = [[sum(Aq[i][l] * M[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        M = [[AM[i][j] + (coeffs[n - k + 1] if i == j else 0) for j in range(n)] for i in range(n)]
        tr = sum(sum(Aq[i][l] * M[l][i] for l in range(n)) for i in range(n))
        coeffs[n - k] = -tr / k
    return fmpq_poly([_fq(c) for c in coeffs])


def _fq(q: Fraction):
    from flint import fmpq
    return fmpq(q.numerator, q.denominator)


def factor_poly(p: fmpq_poly) -> list[tuple[fmpq_poly, int]]:
    """Irreducible monic factors over Q with multiplicities."""
    return factor_irreducible(p)


def conjugate_instance(inst: OrbitInstance, Q: Matrix, Qinv: Matrix | None = None) -> OrbitInstance:
    """The instance ``(Q A Q^-1, Q x, Q y)``."""
    Q = as_matrix(Q)
    if len(Q) != inst.d or any(len(r) != inst.d for r in Q):
        raise InvalidInput("change of basis has the wrong shape")
    if Qinv is None:
        Qinv = inverse(Q)
    elif mat_mul(Q, Qinv) != identity(inst.d):
        raise InvalidInput("Qinv is not the inverse of Q")
    return OrbitInstance(mat_mul(mat_mul(Q, inst.A), Qinv), mat_vec(Q, inst.x), mat_vec(Q, inst.y))


# --------------------------------------------------------------------------
# Jordan form


@dataclass(frozen=True)
class JordanBlockDesc:
    eigenvalue: AlgNum
    size: int
    start: int

    @property
    def coords(self) -> range:
        return range(self.start, self.start + self.size)

    @property
    def diagonal(self) -> bool:
        return self.size == 1


@dataclass(frozen=True)
class JordanDecomposition:
    blocks: tuple[JordanBlockDesc, ...]
    Q: Matrix
    Qinv: Matrix


@dataclass(frozen=True)
class JordanInstance:
    """An instance whose matrix is the Jordan matrix of ``blocks``."""

    blocks: tuple[JordanBlockDesc, ...]
    x: Vector
    y: Vector

    @property
    def d(self) -> int:
        return len(self.x)

    def matrix(self) -> Matrix:
        return jordan_matrix(self.blocks)

    def instance(self) -> OrbitInstance:
        return OrbitInstance(self.matrix(), self.x, self.y)

    def apply(self, z: Sequence[AlgNum]) -> Vector:
        return jordan_apply(self.blocks, z)

    def orbit(self, n: int) -> list[Vector]:
        out, z = [], tuple(self.x)
        for _ in range(n):
            out.append(z)
            z = self.apply(z)
        return out

    def power_x(self, n: int) -> Vector:
        z = tuple(self.x)
        for _ in range(n):
            z = self.apply(z)
        return z


def jordan_matrix(blocks: Sequence[JordanBlockDesc]) -> Matrix:
    d = sum(b.size for b in blocks)
    rows = [[ZERO] * d for _ in range(d)]
    for b in blocks:
        for k in b.coords:
            rows[k][k] = b.eigenvalue
            if k + 1 < b.start + b.size:
                rows[k][k + 1] = ONE
    return tuple(tuple(r) for r in rows)


def jordan_apply(blocks: Sequence[JordanBlockDesc], z: Sequence[AlgNum]) -> Vector:
    out = list(z)
    for b in blocks:
        end = b.start + b.size
        for k in b.coords:
            v = b.eigenvalue * z[k] if not z[k].is_zero() else ZERO
            if k + 1 < end and not z[k + 1].is_zero():
                v = v + z[k + 1]
            out[k] = v
    return tuple(out)


def _right_chains(N: list[list[AlgNum]], mult: int, d: int) -> list[list[Vector]]:
    """Jordan chains of the nilpotent part on the generalized eigenspace."""
    powers = [identity(d)]
    kernels = [[]]
    while len(kernels[-1]) < mult:
        powers.append(mat_mul(powers[-1], N))
        kernels.append(nullspace(powers[-1]))
        if len(powers) > mult + 1:
            raise ExactArithmeticError("generalized eigenspace dimension mismatch")
    top = len(kernels) - 1
    dims = [len(k) for k in kernels]
    chains: list[list[Vector]] = []
    for s in range(top, 0, -1):
        ge_s = dims[s] - dims[s - 1]
        ge_next = dims[s + 1] - dims[s] if s + 1 <= top else 0
        need = ge_s - ge_next
        if need == 0:
            continue
        span = list(kernels[s - 1])
        for ch in chains:
            span.append(ch[len(ch) - s])  # level-s vector of a longer chain
        base_rank = rank(span) if span else 0
        for b in kernels[s]:
            if need == 0:
                break
            trial = span + [b]
            r = rank(trial)
            if r > base_rank:
                span, base_rank = trial, r
                chain = [b]
                for _ in range(s - 1):
                    chain.append(mat_vec(N, chain[-1]))
                chains.append(list(reversed(chain)))  # p_1 = N^{s-1} v, ..., p_s = v
                need -= 1
        if need:
            raise ExactArithmeticError("could not complete Jordan chains")
    chains.sort(key=len, reverse=True)
    return chains


def jordan_decompose(inst: OrbitInstance) -> tuple[JordanDecomposition, JordanInstance]:
    """Jordan decomposition ``Q A Q^-1 = J`` and the instance in Jordan coordinates.

    Chains for each eigenvalue are computed inside a conjugation-closed
    number field containing it; the decomposition is verified exactly before
    it is returned.
    """
    A = inst.A
    d = inst.d
    cp = char_poly(A)
    eig_mult: list[tuple[AlgNum, int]] = []
    for f, m in factor_poly(cp):
        for lam in AlgNum.roots_of(f):
            eig_mult.append((lam, m))
    eig_mult.sort(key=lambda em: em[0].sort_key())
    shared = common_closed_field([lam for lam, _ in eig_mult])

    per_eig: dict[int, tuple[AlgNum, list[list[Vector]], list[Vector]]] = {}
    results = []
    for idx, (lam, mult) in enumerate(eig_mult):
        conj_of = None
        if not lam.is_rational and not lam.is_real():
            lam_bar = lam.conj()
            for j, (mu, _) in enumerate(eig_mult[:idx]):
                if mu == lam_bar:
                    conj_of = j
                    break
        if conj_of is not None:
            mu_in, chains, rows = per_eig[conj_of]
            lam_in = mu_in.conj()
            chains = [[tuple(v.conj() for v in vec) for vec in ch] for ch in chains]
            rows = [tuple(v.conj() for v in r) for r in rows]
        else:
            if lam.is_rational:
                lam_in = lam
            elif shared is not None:
                lam_in = shared[1][idx]
            else:
                lam_in = closed_field(lam)[1]
            N = [[A[i][j] - (lam_in if i == j else ZERO) for j in range(d)] for i in range(d)]
            chains = _right_chains(N, mult, d)
            P = [v for ch in chains for v in ch]  # columns
            height = max(len(ch) for ch in chains)
            Nt = transpose(tuple(tuple(r) for r in N))
            Np = mat_pow(Nt, height)
            left = nullspace(Np)  # rows spanning the left generalized eigenspace
            if len(left) != mult:
                raise ExactArithmeticError("left generalized eigenspace has the wrong dimension")
            LP = tuple(tuple(_dot(l, p) for p in P) for l in left)
            rows = list(mat_mul(inverse(LP), tuple(left)))
        per_eig[idx] = (lam_in, chains, rows)
        results.append((lam, lam_in, chains, rows))

    blocks: list[JordanBlockDesc] = []
    Qrows: list[Vector] = []
    Pcols: list[Vector] = []
    for lam, lam_in, chains, rows in results:
        pos = 0
        for ch in chains:
            blocks.append(JordanBlockDesc(lam_in, len(ch), len(Qrows)))
            Qrows.extend(rows[pos:pos + len(ch)])
            Pcols.extend(ch)
            pos += len(ch)
        _verify_eigen_part(A, lam_in, chains, rows)
    Q = tuple(Qrows)
    Qinv = transpose(tuple(Pcols))
    if len(Q) != d:
        raise ExactArithmeticError("Jordan blocks do not cover the space")
    decomp = JordanDecomposition(tuple(blocks), Q, Qinv)
    jinst = JordanInstance(tuple(blocks), mat_vec(Q, inst.x), mat_vec(Q, inst.y))
    return decomp, jinst


def _verify_eigen_part(A: Matrix, lam: AlgNum, chains, rows) -> None:
    """Exact per-eigenvalue checks that together give ``Q A Q^-1 = J``.

    ``rows A = J_lam rows`` and ``rows P_lam = I`` are checked inside the
    eigenvalue's field; ``rows (A - lam)^m = 0`` and ``(A - lam)^m P_lam = 0``
    place both sides in the generalized eigenspaces, which makes the cross
    terms between different eigenvalues vanish.
    """
    d = len(A)
    P = [v for ch in chains for v in ch]
    m = len(P)
    sizes = [len(ch) for ch in chains]
    Jl = [[ZERO] * m for _ in range(m)]
    pos = 0
    for s in sizes:
        for k in range(s):
            Jl[pos + k][pos + k] = lam
            if k + 1 < s:
                Jl[pos + k][pos + k + 1] = ONE
        pos += s
    R = tuple(rows)
    lhs = mat_mul(R, A)
    rhs = mat_mul(tuple(tuple(r) for r in Jl), R)
    if lhs != rhs:
        raise ExactArithmeticError("Jordan verification failed: Q A != J Q")
    RP = tuple(tuple(_dot(r, p) for p in P) for r in R)
    if RP != identity(m):
        raise ExactArithmeticError("Jordan verification failed: Q Qinv != I")
    N = tuple(tuple(A[i][j] - (lam if i == j else ZERO) for j in range(d)) for i in range(d))
    Nm = mat_pow(N, m)
    if any(not v.is_zero() for p in P for v in mat_vec(Nm, p)):
        raise ExactArithmeticError("Jordan verification failed: chain outside generalized eigenspace")
    if any(not v.is_zero() for r in R for v in mat_vec(transpose(Nm), r)):
        raise ExactArithmeticError("Jordan verification failed: row outside left generalized eigenspace")

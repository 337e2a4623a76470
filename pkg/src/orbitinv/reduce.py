"""Normalization of Jordan-form instances to non-trivial ones, and lifting back."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .exactnum import InvalidInput
from .formula import (
    Atom,
    CPoly,
    SemialgFormula,
    conj,
    disj,
    embed,
    point_set,
    zero_coords,
)
from .linalg import JordanBlockDesc, JordanInstance

STEP_KINDS = (
    "NilpotentYNonzero",
    "NilpotentDropBlocks",
    "XZeroYNonzero",
    "XNonzeroYZero",
    "DropZeroBlocks",
    "NonDiagFirstCoordYNonzero",
    "DropTailCoordinates",
)


@dataclass(frozen=True)
class ReductionStep:
    kind: str
    removed_coordinates: tuple[int, ...]
    dim_before: int
    prefix_length: int = 0
    prefix_points: tuple = ()
    block: int | None = None
    k: int | None = None

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise InvalidInput(f"unknown reduction step {self.kind!r}")
        if any(not 0 <= c < self.dim_before for c in self.removed_coordinates):
            raise InvalidInput("removed coordinate out of range")

    @property
    def kept(self) -> tuple[int, ...]:
        gone = set(self.removed_coordinates)
        return tuple(i for i in range(self.dim_before) if i not in gone)

    @property
    def is_early(self) -> bool:
        return self.kind in ("NilpotentYNonzero", "XZeroYNonzero", "XNonzeroYZero",
                             "NonDiagFirstCoordYNonzero")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "removed_coordinates": list(self.removed_coordinates),
               "dim_before": self.dim_before, "prefix_length": self.prefix_length}
        if self.prefix_points:
            out["prefix_points"] = [[v.to_json() for v in p] for p in self.prefix_points]
        if self.block is not None:
            out["block"] = self.block
        if self.k is not None:
            out["k"] = self.k
        return out


@dataclass(frozen=True)
class Reachable:
    n: int


@dataclass(frozen=True)
class EarlyInvariant:
    """An invariant found during normalization, in the input's Jordan coordinates."""

    formula: SemialgFormula
    trace: tuple[ReductionStep, ...]
    closed: bool
    stage: JordanInstance | None = None  # instance the last step acted on
    pinned: tuple[int, ...] = ()  # stage coordinates forced to zero


@dataclass(frozen=True)
class Reduced:
    """A non-trivial instance; ``time_shift`` orbit steps were consumed."""

    instance: JordanInstance
    trace: tuple[ReductionStep, ...]
    kept: tuple[int, ...]
    time_shift: int = 0


NormalizeOutcome = Reachable | EarlyInvariant | Reduced


def restrict(inst: JordanInstance, kept: Sequence[int], x=None) -> JordanInstance:
    """Sub-instance on the coordinates ``kept`` (each block keeps a prefix of itself)."""
    keep = set(kept)
    blocks = []
    start = 0
    for b in inst.blocks:
        coords = [c for c in b.coords if c in keep]
        if not coords:
            continue
        if coords != list(range(b.start, b.start + len(coords))):
            raise InvalidInput("kept coordinates must form a prefix of each block")
        blocks.append(JordanBlockDesc(b.eigenvalue, len(coords), start))
        start += len(coords)
    src_x = inst.x if x is None else x
    return JordanInstance(tuple(blocks), tuple(src_x[i] for i in kept), tuple(inst.y[i] for i in kept))


def _nonzero(vals) -> bool:
    return any(not v.is_zero() for v in vals)


def _block_vals(vec, b: JordanBlockDesc):
    return [vec[i] for i in b.coords]


def _last_nonzero(vec, b: JordanBlockDesc) -> int:
    """0-based offset inside the block of the last nonzero entry."""
    offs = [k for k, i in enumerate(b.coords) if not vec[i].is_zero()]
    return offs[-1]


def normalize(inst: JordanInstance) -> NormalizeOutcome:
    """Apply the reduction cases in order; early invariants are lifted to ``inst``'s coordinates."""
    d = inst.d
    prefix = inst.orbit(d + 1)
    for n, p in enumerate(prefix):
        if tuple(p) == tuple(inst.y):
            return Reachable(n)

    trace: list[ReductionStep] = []
    cur = inst
    kept_global = tuple(range(d))
    shift = 0

    def early(formula: SemialgFormula, step: ReductionStep, pinned, closed: bool = True):
        full = tuple(trace) + (step,)
        return EarlyInvariant(lift_invariant(formula, tuple(trace), inst), full, closed, cur, tuple(pinned))

    # invertibility
    nil = [j for j, b in enumerate(cur.blocks) if b.eigenvalue.is_zero()]
    for j in nil:
        b = cur.blocks[j]
        if _nonzero(_block_vals(cur.y, b)):
            f = SemialgFormula(d, disj(point_set(prefix[:d]), zero_coords(d, b.coords)))
            step = ReductionStep("NilpotentYNonzero", (), d, d, tuple(prefix[:d]), j)
            return EarlyInvariant(f, (step,), True, cur, tuple(b.coords))
    if nil:
        removed = tuple(i for j in nil for i in cur.blocks[j].coords)
        step = ReductionStep("NilpotentDropBlocks", removed, d, d, tuple(prefix[:d]))
        trace.append(step)
        cur = restrict(cur, step.kept, x=prefix[d])
        kept_global = step.kept
        shift = d

    # zero projections
    dc = cur.d
    for j, b in enumerate(cur.blocks):
        xj, yj = _block_vals(cur.x, b), _block_vals(cur.y, b)
        if not _nonzero(xj) and _nonzero(yj):
            f = SemialgFormula(dc, zero_coords(dc, b.coords))
            return early(f, ReductionStep("XZeroYNonzero", (), dc, block=j), b.coords)
    for j, b in enumerate(cur.blocks):
        xj, yj = _block_vals(cur.x, b), _block_vals(cur.y, b)
        if _nonzero(xj) and not _nonzero(yj):
            k = _last_nonzero(cur.x, b)
            c = b.start + k
            f = SemialgFormula(dc, conj(Atom(CPoly.coord(dc, c).abs2(), "!="),
                                        zero_coords(dc, range(c + 1, b.start + b.size))))
            return early(f, ReductionStep("XNonzeroYZero", (), dc, block=j, k=k + 1),
                         range(c + 1, b.start + b.size), closed=False)
    zero_blocks = [b for b in cur.blocks if not _nonzero(_block_vals(cur.x, b))]
    if zero_blocks:
        removed = tuple(i for b in zero_blocks for i in b.coords)
        step = ReductionStep("DropZeroBlocks", removed, dc)
        trace.append(step)
        kept_global = tuple(kept_global[i] for i in step.kept)
        cur = restrict(cur, step.kept)

    # non-diagonal blocks with vanishing tail
    dc = cur.d
    tails = []
    for j, b in enumerate(cur.blocks):
        if b.size < 2:
            continue
        xt = [cur.x[i] for i in b.coords][1:]
        yt = [cur.y[i] for i in b.coords][1:]
        if not _nonzero(xt):
            if _nonzero(yt):
                f = SemialgFormula(dc, zero_coords(dc, range(b.start + 1, b.start + b.size)))
                return early(f, ReductionStep("NonDiagFirstCoordYNonzero", (), dc, block=j, k=1),
                             range(b.start + 1, b.start + b.size))
            tails.extend(range(b.start + 1, b.start + b.size))
    if tails:
        step = ReductionStep("DropTailCoordinates", tuple(tails), dc)
        trace.append(step)
        kept_global = tuple(kept_global[i] for i in step.kept)
        cur = restrict(cur, step.kept)

    return Reduced(cur, tuple(trace), kept_global, shift)


def lift_invariant(formula: SemialgFormula, trace: Sequence[ReductionStep], context) -> SemialgFormula:
    """Carry an invariant of the reduced instance back through ``trace``."""
    steps = [s for s in trace if not s.is_early]
    if not steps:
        if formula.d != context.d:
            raise InvalidInput("formula dimension does not match the instance")
        return formula
    if steps[0].dim_before != context.d:
        raise InvalidInput("trace does not start at the instance's dimension")
    for a, b in zip(steps, steps[1:]):
        if len(a.kept) != b.dim_before:
            raise InvalidInput("inconsistent reduction trace")
    if len(steps[-1].kept) != formula.d:
        raise InvalidInput("formula dimension does not match the end of the trace")
    f = formula
    for step in reversed(steps):
        d = step.dim_before
        if step.kind == "NilpotentDropBlocks":
            lifted = embed(f, d, step.kept, free_points=True)
            f = SemialgFormula(d, disj(point_set(step.prefix_points), lifted.root))
        else:
            lifted = embed(f, d, step.kept, free_points=False)
            f = SemialgFormula(d, conj(lifted.root, zero_coords(d, step.removed_coordinates)))
    return f

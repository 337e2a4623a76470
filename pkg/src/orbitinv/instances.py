"""Instance families used by the test suite and the scripts."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .linalg import OrbitInstance, mat_vec


def rotation_family(d: int) -> OrbitInstance:
    """Copies of the rotation (1/5)[[4,-3],[3,4]] on the diagonal, plus [1] when ``d`` is odd.

    ``x = (1,..,1)`` and ``y = 2x``; the target is off the orbit closure.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    A = [[Fraction(0)] * d for _ in range(d)]
    for b in range(d // 2):
        i = 2 * b
        A[i][i], A[i][i + 1] = Fraction(4, 5), Fraction(-3, 5)
        A[i + 1][i], A[i + 1][i + 1] = Fraction(3, 5), Fraction(4, 5)
    if d % 2:
        A[d - 1][d - 1] = Fraction(1)
    return OrbitInstance.make(A, [1] * d, [2] * d)


@dataclass(frozen=True)
class RandomSpec:
    dims: tuple[int, ...] = (2, 3, 4)
    entry_bound: int = 3
    max_denominator: int = 5
    max_shift: int = 3  # target starts from A^s x with s <= max_shift


def _entry(rng: random.Random, spec: RandomSpec) -> Fraction:
    b = spec.entry_bound
    if rng.random() < 0.5:
        return Fraction(rng.randint(-b, b))
    q = rng.randint(1, spec.max_denominator)
    return Fraction(rng.randint(-b * q, b * q), q)


def random_instance(rng: random.Random, spec: RandomSpec = RandomSpec()) -> OrbitInstance:
    """Random rational instance whose target is an orbit point nudged in its first coordinate."""
    d = rng.choice(spec.dims)
    A = [[_entry(rng, spec) for _ in range(d)] for _ in range(d)]
    x = [_entry(rng, spec) for _ in range(d)]
    inst = OrbitInstance.make(A, x, x)
    z = inst.x
    for _ in range(rng.randint(0, spec.max_shift)):
        z = mat_vec(inst.A, z)
    nudge = Fraction(rng.choice((1, -1)), rng.randint(1, spec.max_denominator))
    y = [z[0].rational + nudge] + [v.rational for v in z[1:]]
    return OrbitInstance.make(A, x, y)

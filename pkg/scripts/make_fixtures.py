"""Write the fixture corpus of instances to fixtures/*.json."""

from __future__ import annotations

import argparse
import json
from fractions import Fraction
from pathlib import Path

from orbitinv.linalg import OrbitInstance


def scaled(rows, s):
    return [[Fraction(v) * s for v in r] for r in rows]


ROT = scaled([[4, -3], [3, 4]], Fraction(1, 5))
DOUBLE_ROT = [[4, -3, 4, -3], [3, 4, 3, 4], [0, 0, 4, -3], [0, 0, 3, 4]]
ROT_PAIR = [[Fraction(4, 5), Fraction(-3, 5), 0, 0], [Fraction(3, 5), Fraction(4, 5), 0, 0],
            [0, 0, Fraction(4, 5), Fraction(-3, 5)], [0, 0, Fraction(3, 5), Fraction(4, 5)]]

FIXTURES = {
    "example1_far": (ROT, [1, 0], [2, 0]),
    "example1_circle": (ROT, [1, 0], [0, 1]),
    "example2": (scaled(DOUBLE_ROT, Fraction(4, 25)), [1, 0, 1, 0], [3, 0, 0, 1]),
    "example3": (scaled(DOUBLE_ROT, Fraction(1, 5)), [1, 0, 1, 0], [3, 0, 0, 1]),
    "rot90_reach": ([[0, -1], [1, 0]], [1, 0], [0, 1]),
    "rot90_off": ([[0, -1], [1, 0]], [1, 0], [1, 1]),
    "doubling": ([[2]], [1], [3]),
    "halving": ([[Fraction(1, 2)]], [1], [Fraction(1, 3)]),
    "shear": ([[1, 1], [0, 1]], [0, 1], [-1, 0]),
    "nilpotent": ([[0, 1], [0, 0]], [1, 0], [0, 1]),
    "rotation_pair": (ROT_PAIR, [1, 0, 1, 0], [1, 0, 0, 1]),
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "fixtures")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, (A, x, y) in FIXTURES.items():
        inst = OrbitInstance.make(A, x, y)
        (args.out / f"{name}.json").write_text(json.dumps(inst.to_json(), indent=2) + "\n")
    print(f"wrote {len(FIXTURES)} fixtures to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Certificate formula size on the diagonal-rotation family, dimensions 2 to 10.

The family stacks copies of the rotation (1/5)[[4,-3],[3,4]] on the diagonal,
with a trailing 1x1 block [1] in odd dimension.  Start x = (1,..,1) and target
y = 2x, which lies off the orbit closure, so each instance yields a closure
invariant.  Prints dimension, formula bytes and seconds, then the least-squares
fit of bytes against d with polynomials of degree <= 3 and its R^2.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
import numpy as np

from orbitinv.instances import rotation_family
from orbitinv.synth import SynthConfig, synthesize


@dataclass(frozen=True)
class SizeConfig:
    dims: tuple[int, ...] = tuple(range(2, 11))
    max_degree: int = 3
    samples: int = 50


def measure(cfg: SizeConfig) -> list[tuple[int, int, float]]:
    rows = []
    for d in cfg.dims:
        t0 = time.perf_counter()
        cert = synthesize(rotation_family(d), SynthConfig(samples=cfg.samples))
        rows.append((d, cert.diagnostics["formula_bytes"], time.perf_counter() - t0))
    return rows


def polynomial_fit(xs, ys, degree: int) -> tuple[np.ndarray, float]:
    """Coefficients (highest power first) and R^2 of the least-squares fit."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    coeffs = np.polyfit(xs, ys, degree)
    resid = ys - np.polyval(coeffs, xs)
    total = float(np.sum((ys - ys.mean()) ** 2))
    return coeffs, 1.0 - float(np.sum(resid ** 2)) / total if total else 1.0


def best_fit(rows, max_degree: int) -> tuple[int, float]:
    xs = [r[0] for r in rows]
    ys = [r[1] for r in rows]
    fits = [(deg, polynomial_fit(xs, ys, deg)[1]) for deg in range(1, max_degree + 1)]
    return max(fits, key=lambda f: f[1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--max-dim", type=int, default=10)
    args = ap.parse_args(argv)
    cfg = SizeConfig(dims=tuple(range(2, args.max_dim + 1)))
    rows = measure(cfg)
    for d, size, secs in rows:
        print(f"d={d:2d} bytes={size:7d} time={secs:6.2f}s")
    deg, r2 = best_fit(rows, cfg.max_degree)
    print(f"best polynomial fit: degree {deg}, R^2 = {r2:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

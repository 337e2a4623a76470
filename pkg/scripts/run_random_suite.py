"""Synthesize and re-verify certificates for a batch of random instances.

Each instance is checked four ways: reachability is ruled out by the
decision procedure, the certificate passes the verifier with no exact or
sampled failures, the first ``orbit`` iterates stay inside the invariant,
and none of them equals the target.  One line per instance, then a tally.
"""

from __future__ import annotations

import argparse
import random
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from orbitinv.formula import eval_at
from orbitinv.instances import RandomSpec, random_instance
from orbitinv.linalg import OrbitInstance, mat_vec
from orbitinv.synth import SynthConfig, decide_reachability, synthesize
from orbitinv.verify import VerifyConfig, verify_certificate


@dataclass(frozen=True)
class SuiteConfig:
    count: int = 200
    seed: int = 2024
    samples: int = 1000
    orbit: int = 200
    jobs: int | None = None


@dataclass(frozen=True)
class Outcome:
    index: int
    d: int
    verdict: str
    template: str | None
    failures: tuple[str, ...]
    seconds: float

    @property
    def ok(self) -> bool:
        return not self.failures


def draw_instances(cfg: SuiteConfig) -> list[OrbitInstance]:
    """``cfg.count`` instances whose target is confirmed unreachable."""
    rng = random.Random(cfg.seed)
    out = []
    while len(out) < cfg.count:
        inst = random_instance(rng, RandomSpec())
        if decide_reachability(inst).kind != "Reachable":
            out.append(inst)
    return out


def check(args) -> Outcome:
    index, inst, cfg = args
    t0 = time.perf_counter()
    failures: list[str] = []
    reach = decide_reachability(inst)
    if reach.kind not in ("Unreachable", "UnreachableRelativeToClosure", "Indeterminate"):
        failures.append(f"reachability:{reach.kind}")
    cert = synthesize(inst, SynthConfig(samples=cfg.samples))
    data = cert.to_json()
    report = verify_certificate(inst, data, VerifyConfig(samples=cfg.samples, seed=cfg.seed))
    failures += report.failures()
    if cert.formula is not None:
        z = inst.x
        for n in range(cfg.orbit):
            if z == inst.y:
                failures.append(f"orbit_hits_y@{n}")
                break
            if not eval_at(cert.formula, z):
                failures.append(f"orbit_out@{n}")
                break
            z = mat_vec(inst.A, z)
    kind = data.get("template", {}).get("kind")
    return Outcome(index, inst.d, cert.verdict, kind, tuple(failures), time.perf_counter() - t0)


def run_suite(cfg: SuiteConfig) -> list[Outcome]:
    jobs = [(i, inst, cfg) for i, inst in enumerate(draw_instances(cfg))]
    if cfg.jobs == 1:
        return [check(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        return list(pool.map(check, jobs))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args(argv)
    cfg = SuiteConfig(count=args.count, seed=args.seed, samples=args.samples, jobs=args.jobs)
    t0 = time.perf_counter()
    outcomes = run_suite(cfg)
    for o in outcomes:
        status = "ok" if o.ok else "FAIL " + ",".join(o.failures)
        print(f"{o.index:4d} d={o.d} {o.verdict:16s} {o.template or '-':12s} {o.seconds:6.2f}s {status}")
    tally = Counter((o.verdict, o.template) for o in outcomes)
    print("tally:", dict(sorted(tally.items(), key=str)))
    bad = sum(not o.ok for o in outcomes)
    print(f"{len(outcomes) - bad}/{len(outcomes)} passed in {time.perf_counter() - t0:.1f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())

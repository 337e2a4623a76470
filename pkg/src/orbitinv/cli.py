"""Command-line front end: ``orbitinv decide|synth|verify``.

Exit codes: 0 verdict produced (and, for synth, verified), 1 verification
failure, 2 input error.  Certificates are written as sorted, indented JSON
so that identical inputs and seeds give byte-identical files; timings
appear only in the one-line summary, never in an artifact.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .exactnum import InvalidInput
from .formula import parse, stability_smt2, to_smt2
from .linalg import OrbitInstance
from .synth import SynthConfig, SynthesisError, decide_reachability, synthesize
from .verify import VerifyConfig, verify_certificate

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_INPUT_ERROR = 0, 1, 2
FORMATS = ("json", "text", "smt2")


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Path
    certificate: Path | None = None
    output: Path | None = None
    search_bound: int = 10_000
    exponent_bound: int = 64
    samples: int = 1000
    seed: int = 0
    format: str = "json"
    batch: bool = False
    jobs: int | None = None

    def __post_init__(self):
        if self.command not in ("decide", "synth", "verify"):
            raise InvalidInput(f"unknown command {self.command!r}")
        if self.search_bound < 1 or self.exponent_bound < 1 or self.samples < 0:
            raise InvalidInput("bounds must be positive")
        if self.format not in FORMATS:
            raise InvalidInput(f"unknown format {self.format!r}")


def _load_json(path: Path, what: str) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidInput(f"{path}: cannot read {what}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load_instance(path: Path) -> OrbitInstance:
    data = _load_json(path, "instance")
    if isinstance(data, dict) and "instance" in data and "A" not in data:
        data = data["instance"]
    if not isinstance(data, dict):
        raise InvalidInput(f"{path}: instance must be a JSON object")
    try:
        return OrbitInstance.from_json(data)
    except InvalidInput as exc:
        raise InvalidInput(f"{path}: {exc}") from exc


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _synth_config(cfg: RunConfig) -> SynthConfig:
    return SynthConfig(search_bound=cfg.search_bound, exponent_bound=cfg.exponent_bound,
                       samples=cfg.samples, seed=cfg.seed)


def _smt_bundle(cert: dict, instance: OrbitInstance) -> str:
    f = parse(cert["formula"])
    head = f"; orbitinv obligation bundle, schema_version 1, verdict {cert['verdict']}\n"
    try:
        return head + stability_smt2(f, instance.A)
    except InvalidInput as exc:
        return head + f"; stability obligation unavailable: {exc}\n" + to_smt2(f)


def _text_summary(cert: dict) -> str:
    lines = [f"verdict: {cert['verdict']}"]
    if "n" in cert:
        lines.append(f"reached at n = {cert['n']}")
    if "case" in cert:
        lines.append(f"case: {cert['case']['kind']}")
    if "template" in cert:
        lines.append(f"template: {cert['template']['kind']}")
    if "witness" in cert:
        lines.append("torus witness: " + ", ".join(map(str, cert["witness"]["mu"])))
    if "formula" in cert:
        lines.append(f"formula: {cert['formula']}")
    return "\n".join(lines) + "\n"


def _render(cfg: RunConfig, payload: dict, instance: OrbitInstance) -> str:
    if cfg.format == "text":
        return _text_summary(payload)
    if cfg.format == "smt2" and "formula" in payload:
        return _smt_bundle(payload, instance)
    return dump_json(payload)


def _emit(cfg: RunConfig, text: str, out_path: Path | None):
    if out_path is None:
        sys.stdout.write(text)
    else:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text)


def run_one(cfg: RunConfig, path: Path, out_path: Path | None) -> tuple[int, str]:
    """Process one instance file; returns the exit code and a one-line summary."""
    start = time.perf_counter()
    try:
        instance = load_instance(path)
        if cfg.command == "decide":
            res = decide_reachability(instance, cfg.search_bound, cfg.exponent_bound)
            payload = {"schema_version": 1, "instance": instance.to_json(), "reachability": res.to_json()}
            if res.n is not None:
                payload["n"] = res.n
            payload["verdict"] = res.kind
            code = EXIT_OK
        elif cfg.command == "synth":
            if not instance.is_rational():
                raise InvalidInput(f"{path}: synthesis needs rational entries")
            try:
                cert = synthesize(instance, _synth_config(cfg))
            except SynthesisError as exc:
                return EXIT_VERIFY_FAILED, f"{path}: {exc}"
            payload = cert.to_json()
            code = EXIT_OK
        else:
            cert_path = cfg.certificate if cfg.certificate is not None else path
            cert = _load_json(cert_path, "certificate")
            if "verdict" not in cert:
                raise InvalidInput(f"{cert_path}: certificate has no verdict")
            report = verify_certificate(instance, cert, VerifyConfig(cfg.samples, cfg.seed,
                                                                     exponent_bound=cfg.exponent_bound))
            if "instance" in cert and OrbitInstance.from_json(cert["instance"]) != instance:
                report.stability_symbolic["embedded_instance_matches"] = "fail"
            payload = report.to_json()
            code = EXIT_OK if report.ok else EXIT_VERIFY_FAILED
    except (InvalidInput, KeyError) as exc:
        msg = str(exc) if isinstance(exc, InvalidInput) else f"{path}: missing field {exc}"
        return EXIT_INPUT_ERROR, f"input error: {msg}"
    text = _render(cfg, payload, instance) if cfg.command != "verify" else dump_json(payload)
    _emit(cfg, text, out_path)
    elapsed = time.perf_counter() - start
    failures = payload.get("failures")
    tail = f" failures={failures}" if failures else ""
    return code, f"{path.name}: {payload.get('verdict')} ({elapsed:.2f}s){tail}"


def _batch_job(args):
    cfg, path, out_path = args
    return run_one(cfg, path, out_path)


def run(cfg: RunConfig) -> int:
    if not cfg.batch:
        code, summary = run_one(cfg, cfg.input, cfg.output)
        # keep stdout clean for the artifact when no output file is given
        to_stdout = cfg.output is not None and code != EXIT_INPUT_ERROR
        print(summary, file=sys.stdout if to_stdout else sys.stderr)
        return code
    if not cfg.input.is_dir():
        print(f"input error: {cfg.input} is not a directory", file=sys.stderr)
        return EXIT_INPUT_ERROR
    out_dir = cfg.output or cfg.input / "out"
    suffix = {"json": ".json", "text": ".txt", "smt2": ".smt2"}[cfg.format]
    files = sorted(p for p in cfg.input.glob("*.json"))
    jobs = [(cfg, p, out_dir / f"{p.stem}.{cfg.command}{suffix}") for p in files]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        results = list(pool.map(_batch_job, jobs))
    for code, summary in results:
        print(summary)
    return max((code for code, _ in results), default=EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbitinv", description="Non-reachability invariants for linear orbit instances.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", type=Path, help="output file (directory with --batch)")
    common.add_argument("--search-bound", type=int, default=10_000)
    common.add_argument("--exponent-bound", type=int, default=64)
    common.add_argument("--samples", type=int, default=1000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=FORMATS, default="json")
    common.add_argument("--batch", action="store_true", help="treat INPUT as a directory of instances")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for --batch")
    for name, help_text in (("decide", "decide reachability"), ("synth", "synthesize and verify a certificate")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("input", type=Path)
    p = sub.add_parser("verify", parents=[common], help="check a certificate")
    p.add_argument("input", type=Path, help="instance JSON (or a certificate, which embeds its instance)")
    p.add_argument("certificate", type=Path, nargs="?")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(command=args.command, input=args.input, certificate=getattr(args, "certificate", None),
                        output=args.output, search_bound=args.search_bound, exponent_bound=args.exponent_bound,
                        samples=args.samples, seed=args.seed, format=args.format, batch=args.batch, jobs=args.jobs)
    except InvalidInput as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Semialgebraic non-reachability invariants for linear orbit instances.

Given a rational matrix ``A`` and vectors ``x``, ``y``, the package decides
whether ``y`` is outside every set that contains ``x`` and is mapped into
itself by ``A``, builds such a set when one exists, and checks certificates.
"""

from .exactnum import AlgNum, InvalidInput
from .formula import SemialgFormula, eval_at, parse, serialize
from .linalg import OrbitInstance
from .synth import SynthConfig, SynthesisError, decide_reachability, synthesize
from .verify import VerifyConfig, verify_certificate, verify_invariant

__all__ = [
    "AlgNum",
    "InvalidInput",
    "OrbitInstance",
    "SemialgFormula",
    "SynthConfig",
    "SynthesisError",
    "VerifyConfig",
    "decide_reachability",
    "eval_at",
    "parse",
    "serialize",
    "synthesize",
    "verify_certificate",
    "verify_invariant",
]

__version__ = "0.1.0"

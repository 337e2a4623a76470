import copy
import dataclasses
import json
from pathlib import Path

import pytest

from orbitinv.formula import serialize
from orbitinv.linalg import OrbitInstance, jordan_decompose
from orbitinv.reduce import lift_invariant, normalize
from orbitinv.synth import SynthConfig, Template, build_from_template, synthesize, to_input_coordinates

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"


def load_fixture(name: str) -> OrbitInstance:
    return OrbitInstance.from_json(json.loads((FIXTURE_DIR / f"{name}.json").read_text()))


def fixture_names() -> list[str]:
    return sorted(p.stem for p in FIXTURE_DIR.glob("*.json"))


def retemplate(cert: dict, **changes) -> dict:
    """A copy of ``cert`` whose template and formula are rebuilt consistently after ``changes``.

    This models a careful forger: the transport check still passes, so any
    failure must come from the mathematical obligations themselves.
    """
    instance = OrbitInstance.from_json(cert["instance"])
    t = Template.from_json(cert["template"])
    t = dataclasses.replace(t, **changes)
    dec, jinst = jordan_decompose(instance)
    red = normalize(jinst)
    f = to_input_coordinates(lift_invariant(build_from_template(red.instance, t), red.trace, jinst), dec, instance)
    out = copy.deepcopy(cert)
    out["template"] = t.to_json()
    out["formula"] = serialize(f)
    if "n0" in out and t.n0 is not None:
        out["n0"] = t.n0
    return out


_CERTS: dict = {}


@pytest.fixture(scope="session")
def certificate():
    """Synthesized certificates by fixture name, computed once per session."""

    def get(name: str, samples: int = 200) -> dict:
        key = (name, samples)
        if key not in _CERTS:
            _CERTS[key] = synthesize(load_fixture(name), SynthConfig(samples=samples)).to_json()
        return _CERTS[key]

    return get


# --------------------------------------------------------------------------
# acceptance report: one pass/fail line per criterion after the run

_CRITERIA: dict[int, tuple[str, list[str]]] = {}
_NOTES: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion a test belongs to")


def pytest_itemcollected(item):
    for m in item.iter_markers("criterion"):
        item.user_properties.append(("criterion", tuple(m.args)))


def pytest_runtest_logreport(report):
    # a criterion fails if any of its tests fails in setup or call
    if report.when == "teardown" or (report.when == "setup" and report.passed):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    n, title = props["criterion"]
    _CRITERIA.setdefault(n, (title, []))[1].append(report.outcome)
    if getattr(report, "wasxfail", None):
        _NOTES.setdefault(n, []).append(report.wasxfail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[n]
        status = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
        for note in _NOTES.get(n, []):
            terminalreporter.write_line(f"    {note}")

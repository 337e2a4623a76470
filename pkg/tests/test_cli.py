import json
import shutil
import subprocess
import sys

import pytest

from conftest import FIXTURE_DIR
from orbitinv.cli import EXIT_INPUT_ERROR, EXIT_OK, EXIT_VERIFY_FAILED, RunConfig, main
from orbitinv.exactnum import InvalidInput


def fixture(name):
    return str(FIXTURE_DIR / f"{name}.json")


def test_synth_no_invariant(tmp_path, capsys):
    out = tmp_path / "cert.json"
    assert main(["synth", fixture("example1_circle"), "-o", str(out), "--samples", "100"]) == EXIT_OK
    cert = json.loads(out.read_text())
    assert cert["verdict"] == "NO_INVARIANT" and cert["schema_version"] == 1
    assert len(cert["witness"]["mu"]) == 2
    assert "NO_INVARIANT" in capsys.readouterr().out


def test_decide_reachable(capsys):
    assert main(["decide", fixture("rot90_reach")]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["verdict"] == "Reachable" and payload["n"] == 1


def test_verify_round_trip_and_tampering(tmp_path):
    cert_path = tmp_path / "cert.json"
    assert main(["synth", fixture("example2"), "-o", str(cert_path), "--samples", "100"]) == EXIT_OK
    report = tmp_path / "report.json"
    assert main(["verify", fixture("example2"), str(cert_path), "-o", str(report), "--samples", "100"]) == EXIT_OK
    assert json.loads(report.read_text())["ok"] is True
    # the certificate embeds its instance, so it verifies on its own too
    assert main(["verify", str(cert_path), "-o", str(report), "--samples", "100"]) == EXIT_OK

    cert = json.loads(cert_path.read_text())
    cert["template"]["constants"][0] = "9/63"
    cert_path.write_text(json.dumps(cert))
    assert main(["verify", fixture("example2"), str(cert_path), "-o", str(report), "--samples", "100"]) == EXIT_VERIFY_FAILED


def test_verify_against_a_different_instance_fails(tmp_path):
    cert_path = tmp_path / "cert.json"
    assert main(["synth", fixture("doubling"), "-o", str(cert_path), "--samples", "50"]) == EXIT_OK
    report = tmp_path / "report.json"
    code = main(["verify", fixture("halving"), str(cert_path), "-o", str(report), "--samples", "50"])
    assert code == EXIT_VERIFY_FAILED


@pytest.mark.parametrize("content,needle", [
    ('{"A": [["1", "2/x"], ["0", "1"]], "x": ["1", "0"], "y": ["0", "1"]}', "A[0][1]: malformed rational '2/x'"),
    ('{"A": [["1", "0"]], "x": ["1", "0"], "y": ["0", "1"]}', "square"),
    ('{"A": [["1"]], "x": ["1", "2"], "y": ["0"]}', "x"),
    ('{"A": [["1"]],\n "x": ["1"] "y": ["0"]}', "line 2 column"),
])
def test_input_errors_exit_2(tmp_path, capsys, content, needle):
    bad = tmp_path / "bad.json"
    bad.write_text(content)
    assert main(["synth", str(bad)]) == EXIT_INPUT_ERROR
    assert needle in capsys.readouterr().err


def test_missing_file_and_bad_options(tmp_path, capsys):
    assert main(["decide", str(tmp_path / "nope.json")]) == EXIT_INPUT_ERROR
    assert main(["decide", fixture("doubling"), "--samples", "-1"]) == EXIT_INPUT_ERROR
    with pytest.raises(InvalidInput):
        RunConfig(command="decide", input=tmp_path, format="xml")


def test_text_and_smt2_formats(tmp_path):
    text_out = tmp_path / "c.txt"
    assert main(["synth", fixture("doubling"), "--format", "text", "-o", str(text_out), "--samples", "50"]) == EXIT_OK
    assert text_out.read_text().startswith("verdict: INVARIANT_FOUND")
    smt_out = tmp_path / "c.smt2"
    assert main(["synth", fixture("doubling"), "--format", "smt2", "-o", str(smt_out), "--samples", "50"]) == EXIT_OK
    assert "(set-logic QF_NRA)" in smt_out.read_text()


def test_batch_mode(tmp_path, capsys):
    src = tmp_path / "in"
    src.mkdir()
    for name in ("doubling", "halving", "rot90_reach", "example1_circle"):
        shutil.copy(fixture(name), src)
    out = tmp_path / "out"
    assert main(["synth", "--batch", str(src), "-o", str(out), "--samples", "50", "--jobs", "2"]) == EXIT_OK
    written = sorted(p.name for p in out.iterdir())
    assert written == ["doubling.synth.json", "example1_circle.synth.json", "halving.synth.json",
                       "rot90_reach.synth.json"]
    assert len(capsys.readouterr().out.strip().splitlines()) == 4


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "orbitinv", "decide", fixture("doubling")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == EXIT_OK
    assert json.loads(proc.stdout)["verdict"] == "Unreachable"

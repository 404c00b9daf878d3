import csv
import io
import json
import math
import re
import subprocess
import sys

import pytest

from qmacsec import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, (json.loads(out) if out else None), err


def test_run_sum(capsys):
    code, doc, _ = run_json(capsys, "run", "qsk-sum", "--d", "3", "--k", "5", "--instances", "2", "--seed", "7")
    assert code == 0 and doc["schema_version"] == cli.SCHEMA_VERSION
    assert doc["rate"]["value"] == pytest.approx(0.4, abs=1e-15)
    assert doc["rate"]["terms"] == [[3, 5]]
    run0 = doc["runs"][0]
    data = [[int(v) for v in row] for row in run0["data"]]
    assert [int(f) for f in run0["output"]] == [sum(c) % 3 for c in zip(*data)]


def test_run_qs2_new(capsys):
    code, doc, _ = run_json(capsys, "run", "qs2-and-new", "--a", "1", "--b", "1", "--z", "2")
    assert code == 0 and doc["runs"][0]["output"] == ["1"]
    assert doc["runs"][0]["transcript"][0]["y"] == 0


def test_run_dot(capsys):
    code, doc, _ = run_json(capsys, "run", "dot-demo", "--a", "10", "--b", "10", "--r", "1")
    assert code == 0
    assert doc["runs"][0]["transcript"][0]["y"] == 10 and doc["runs"][0]["output"] == ["1"]
    assert doc["rate"]["value"] == pytest.approx(1 / math.log2(11), abs=1e-12)


def test_run_protocol_flag_and_quantum(capsys):
    code, doc, _ = run_json(capsys, "run", "--protocol", "qsk-prod", "--d", "9", "--k", "3",
                            "--instances", "4", "--mode", "quantum")
    assert code == 0 and doc["physical_qudits"] and not doc["paper_rate_divergent"]


def test_run_unpaired_quantum(capsys):
    code, _, err = run(capsys, "run", "qsk-sum", "--d", "3", "--k", "5", "--instances", "2", "--mode", "quantum")
    assert code == 2 and "--pad" in err
    code, doc, _ = run_json(capsys, "run", "qsk-sum", "--d", "3", "--k", "5", "--instances", "2",
                            "--mode", "quantum", "--pad")
    assert code == 0 and doc["paper_rate_divergent"]


def test_run_with_data(capsys):
    code, doc, _ = run_json(capsys, "run", "qsk-prod", "--p", "2", "--r", "2", "--k", "2", "--data", "[[2],[2]]")
    assert code == 0 and doc["runs"][0]["output"] == ["x+1"]


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "no-such-protocol"],
        ["run", "qsk-sum", "--d", "3"],
        ["run", "qsk-prod", "--d", "6", "--k", "2"],
        ["run", "qsk-sum", "--d", "3", "--k", "3", "--instances", "3"],
        ["run", "qs2-and-new", "--a", "2", "--b", "0"],
        ["run", "dot-demo", "--a", "1", "--b", "10"],
        ["run", "dot-demo", "--a", "10", "--b", "10", "--r", "2"],
        ["run", "qsk-sum", "--d", "3", "--k", "2", "--data", "[[5],[0]]"],
        ["verify"],
        ["verify", "qsk-sum", "--d", "3", "--k", "2", "--format", "csv"],
        ["verify", "qsk-sum", "--protocol", "qsk-prod", "--d", "3", "--k", "2"],
    ],
)
def test_config_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and not out and err


def test_verify_examples(capsys):
    code, doc, _ = run_json(capsys, "verify", "qsk-prod", "--p", "3", "--r", "1", "--k", "2")
    assert code == 0 and doc["passed"] and doc["mutual_information"]["dits"] == 0
    code, doc, _ = run_json(capsys, "verify", "qsk-sum", "--d", "2", "--k", "3")
    assert code == 0 and doc["rate"]["achieved"] == pytest.approx(2 / 3, abs=1e-15)
    code, doc, _ = run_json(capsys, "verify", "broken-qsk-sum", "--d", "2", "--k", "4")
    assert code == 5 and "security" in doc["failed_checks"] and doc["security"]["witness"]


def test_verify_bad_decode_exit(capsys):
    code, doc, _ = run_json(capsys, "verify", "broken-qs2-and-decode")
    assert code == 5 and doc["failed_checks"] == ["correctness"]


def test_verify_security_section_is_integral(capsys):
    _, doc, _ = run_json(capsys, "verify", "qs2-and-cited")
    (factor,) = doc["security"]["factors"]
    assert factor["denominator"] == 3
    for dist in factor["distributions"]:
        assert all(isinstance(c, int) for c in dist["counts"])
    f0 = next(d for d in factor["distributions"] if d["F"] == ["0"])
    assert f0["support"] == [[0, 0], [0, 1], [1, 0]] and f0["counts"] == [1, 1, 1]


def test_limit_exit(capsys, monkeypatch):
    code, _, err = run(capsys, "verify", "qsk-sum", "--d", "3", "--k", "5", "--limit", "100")
    assert code == 4 and "limit" in err
    monkeypatch.setenv("QMAC_SECCOMP_LIMIT", "100")
    code, _, _ = run(capsys, "verify", "qsk-sum", "--d", "3", "--k", "5")
    assert code == 4


def test_internal_error_exit(capsys, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("simulated invariant failure")

    monkeypatch.setattr(cli.verify, "enumerate_scheme", boom)
    code, _, err = run(capsys, "verify", "qsk-sum", "--d", "2", "--k", "2")
    assert code == 3 and "internal" in err


def test_sweep_sum_grid(capsys):
    code, out, _ = run(capsys, "sweep", "qsk-sum", "--d", "2-5", "--k", "2-5", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 16
    done = [r for r in rows if r["status"] == "pass"]
    # d=5, K=5 needs ~1.2e9 evaluations, above the default limit; the sweep carries on
    (skipped,) = [r for r in rows if r["status"] != "pass"]
    assert (skipped["d"], skipped["K"], skipped["status"]) == ("5", "5", "limit-exceeded")
    assert code == 4
    for r in done:
        assert float(r["rate"]) == pytest.approx(2 / int(r["K"]), abs=1e-15)
        assert r["security"] == "secure" and float(r["cmi_dits"]) == 0


def test_sweep_prod_rates(capsys):
    code, doc, _ = run_json(capsys, "sweep", "qsk-prod", "--d", "3,5,7", "--k", "2")
    assert code == 0
    for row in doc["rows"]:
        d = row["d"]
        assert row["rate"] == pytest.approx(1 / math.log(3 * (d - 1), d), abs=1e-12)


def test_sweep_empty_and_bad_cells(capsys):
    code, out, _ = run(capsys, "sweep", "qsk-sum", "--d", "", "--k", "2", "--format", "csv")
    assert code == 0 and out.strip().splitlines() == [",".join(cli.SWEEP_FIELDS)]
    code, doc, _ = run_json(capsys, "sweep", "qsk-prod", "--d", "3,6", "--k", "2")
    assert [r["status"] for r in doc["rows"]] == ["pass", "config-error"] and code == 2
    code, doc, _ = run_json(capsys, "sweep", "broken-qsk-sum", "--d", "2", "--k", "2,4")
    assert [r["status"] for r in doc["rows"]] == ["pass", "fail"] and code == 5


def test_sweep_worker_pool_matches_serial(capsys):
    _, a, _ = run(capsys, "sweep", "qsk-sum", "--d", "2,3", "--k", "2,3", "--format", "csv")
    _, b, _ = run(capsys, "sweep", "qsk-sum", "--d", "2,3", "--k", "2,3", "--format", "csv", "--jobs", "2")
    assert a == b


def _strip_timing(text):
    doc = json.loads(text)
    doc.pop("timing")
    return json.dumps(doc, sort_keys=False)


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "qsk-sum", "--d", "4", "--k", "5", "--instances", "6", "--seed", "3"],
        ["run", "qsk-prod", "--d", "8", "--k", "3", "--instances", "2", "--seed", "3", "--mode", "quantum", "--pad"],
        ["verify", "qsk-prod", "--d", "4", "--k", "3"],
        ["verify", "broken-qsk-prod", "--d", "5", "--k", "2"],
    ],
)
def test_byte_determinism(capsys, argv):
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    mask = lambda t: re.sub(r'"seconds": [0-9.e-]+', '"seconds": 0', t)  # noqa: E731
    assert mask(a) == mask(b)


def test_seed_changes_run(capsys):
    _, a, _ = run(capsys, "run", "qsk-sum", "--d", "5", "--k", "4", "--seed", "1")
    _, b, _ = run(capsys, "run", "qsk-sum", "--d", "5", "--k", "4", "--seed", "2")
    assert _strip_timing(a) != _strip_timing(b)


def test_list_protocols(capsys):
    code, doc, _ = run_json(capsys, "list-protocols")
    names = {p["name"]: p for p in doc["protocols"]}
    assert code == 0 and names["qsk-prod"]["params"] == ["p", "r", "k"]
    assert names["broken-qsk-sum"]["negative_control"]


def test_out_file(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "verify", "qsk-sum", "--d", "2", "--k", "2", "--out", str(path))
    assert code == 0 and not out
    assert json.loads(path.read_text())["passed"]


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "qmacsec.cli", "verify", "broken-qsk-sum", "--d", "3", "--k", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 5
    assert json.loads(proc.stdout)["failed_checks"] == ["security", "cmi"]

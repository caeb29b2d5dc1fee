import csv
import json
import math

import numpy as np
import pytest

from gapower import scenario as sc
from gapower.cli import main
from gapower.errors import ScenarioError
from gapower.report import analyze

REFERENCE_RMS = dict(i_p=107.15, i_q=27.44, i_F=86.51, i_f=63.22, i_B=6.65, i_b=26.62, i=110.61)

CURRENT_SCENARIO = """\
schema_version: 1
name: explicit
mode: averaged
base_omega: 1.0
supply:
  unit: V
  phases:
    - name: a
      terms:
        - {order: 1, rms: 10.0}
load:
  current:
    unit: A
    phases:
      - name: a
        terms:
          - {order: 1, rms: 1.0, phase_deg: -30.0}
"""


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _summary(path):
    return {(r[0], r[1]): r[2] for r in _read_csv(path)[1:]}


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    names = capsys.readouterr().out.split()
    assert "illustration1" in names and "illustration2" in names


def test_run_illustration2_matches_reference_rms(tmp_path):
    assert main(["run", "illustration2", "--theory=gapot", "--out", str(tmp_path), "--quiet"]) == 0
    summary = _summary(tmp_path / "illustration2" / "summary.csv")
    for name, value in REFERENCE_RMS.items():
        assert float(summary[("gapot", f"rms_phase_{name}")]) == pytest.approx(value, rel=5e-3)
    assert float(summary[("oracle", "oracle_delta_P_rel")]) < 1e-9
    table = _read_csv(tmp_path / "illustration2" / "gapot_table.csv")
    rows = {r[1]: r for r in table[1:]}
    assert rows["i_F"][2] == "86.52cos t + 86.52cos 3t"
    # peak amplitude 6.655 prints as 6.66 at two decimals
    amp = rows["i_B"][2].split("sin t")[0]
    assert rows["i_B"][2] == f"{amp}sin t + {amp}sin 3t"
    assert float(amp) == pytest.approx(6.65, abs=0.011)
    assert rows["i"][-1] == "110.61"


def test_run_illustration1_both_theories(tmp_path, capsys):
    assert main(["run", "illustration1", "--theory=both", "--out", str(tmp_path)]) == 0
    assert "illustration1" in capsys.readouterr().out
    summary = _summary(tmp_path / "illustration1" / "summary.csv")
    assert float(summary[("gapot", "pf_after")]) == pytest.approx(1.0, abs=1e-9)
    assert float(summary[("cv", "pf_after")]) < 1.0
    assert float(summary[("cv", "gapot_instantaneous_equivalence_delta")]) < 1e-10
    spectrum = _read_csv(tmp_path / "illustration1" / "cv_spectrum.csv")
    assert any(r[2:4] == ["1", "negative"] and float(r[4]) > 1 for r in spectrum)
    assert any(r[2] == "3" and float(r[4]) > 1 for r in spectrum)


def test_output_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "illustration1", "illustration2", "--theory=both", "--out", str(out), "--quiet"]) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    assert files
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_parallel_jobs_match_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "illustration1", "illustration2", "--out", str(a), "--quiet"]) == 0
    assert main(["run", "illustration1", "illustration2", "--out", str(b), "--quiet", "--jobs", "2"]) == 0
    for p in a.rglob("*.csv"):
        assert p.read_bytes() == (b / p.relative_to(a)).read_bytes()


def test_json_lines_format(tmp_path):
    assert main(["run", "illustration2", "--format", "json-lines", "--out", str(tmp_path), "--quiet"]) == 0
    lines = (tmp_path / "illustration2" / "report.jsonl").read_text().splitlines()
    records = [json.loads(x) for x in lines]
    rms = {r["key"]: r["value"] for r in records if r["record"] == "summary"}
    assert rms["rms_phase_i"] == pytest.approx(110.61, rel=5e-3)
    assert {r["record"] for r in records} >= {"summary", "gapot_table", "gapot_components"}


def test_env_var_sets_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("GAPOWER_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", "illustration2", "--quiet"]) == 0
    assert (tmp_path / "env" / "illustration2" / "summary.csv").exists()


def test_empty_supply_is_validation_error(tmp_path, capsys):
    bad = tmp_path / "empty.yaml"
    bad.write_text(CURRENT_SCENARIO.replace("  phases:\n    - name: a\n      terms:\n        - {order: 1, rms: 10.0}\n", "  phases: []\n", 1))
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert "supply" in capsys.readouterr().err


def test_duplicate_order_names_phase_and_order(tmp_path):
    text = CURRENT_SCENARIO.replace("        - {order: 1, rms: 10.0}\n", "        - {order: 1, rms: 10.0}\n        - {order: 1, rms: 5.0}\n")
    with pytest.raises(ScenarioError) as err:
        sc.loads(text, "dup.yaml")
    msg = str(err.value)
    assert "order 1" in msg and "'a'" in msg and "dup.yaml:" in msg


def test_instantaneous_single_phase_rejected():
    with pytest.raises(ScenarioError, match="single-phase"):
        sc.loads(CURRENT_SCENARIO.replace("mode: averaged", "mode: instantaneous"))


def test_validate_reports_every_issue(tmp_path, capsys):
    text = CURRENT_SCENARIO.replace("mode: averaged", "mode: sideways").replace("base_omega: 1.0", "base_omega: -1")
    path = tmp_path / "many.yaml"
    path.write_text(text)
    assert main(["validate", str(path)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) >= 2
    assert all(line.startswith(f"{path}:") for line in err)
    assert main(["validate", "illustration1"]) == 0


def test_both_circuit_and_current_rejected():
    text = CURRENT_SCENARIO + "  circuit:\n    topology: series_rlc\n    branches:\n      - {R: 1.0}\n"
    with pytest.raises(ScenarioError, match="exactly one"):
        sc.loads(text)


def test_round_trip_gives_identical_results():
    for name in sc.builtin_names():
        original = sc.load(name)
        again = sc.loads(original.dumps())
        assert again.supply == original.supply
        ra, rb = analyze(original), analyze(again)
        assert ra.gapot.decomposition.phase_rms == rb.gapot.decomposition.phase_rms
        assert ra.gapot.pf_after == rb.gapot.pf_after


def test_dump_command(capsys):
    assert main(["dump", "illustration2"]) == 0
    assert "schema_version: 1" in capsys.readouterr().out


def test_explicit_current_scenario(tmp_path):
    s = sc.loads(CURRENT_SCENARIO)
    r = analyze(s)
    assert r.oracle is None
    assert r.gapot.decomposition.power.active_power == pytest.approx(10 * math.cos(math.radians(30)), rel=1e-12)
    assert r.gapot.decomposition.power.budeanu_q == pytest.approx(10 * math.sin(math.radians(30)), rel=1e-12)


def test_numeric_failure_exit_code(tmp_path, capsys):
    resonant = CURRENT_SCENARIO.split("load:")[0] + "load:\n  circuit:\n    topology: series_rlc\n    branches:\n      - {L: 1.0, C: 1.0}\n"
    path = tmp_path / "lc.yaml"
    path.write_text(resonant)
    assert main(["run", str(path), "--out", str(tmp_path)]) == 3
    assert "numeric failure" in capsys.readouterr().err


def test_cv_on_single_phase_is_an_error(tmp_path):
    assert main(["run", "illustration2", "--theory=cv", "--out", str(tmp_path)]) == 2
    assert main(["run", "illustration2", "--theory=both", "--out", str(tmp_path), "--quiet"]) == 0


def test_emit_waveforms_peaks(tmp_path, capsys):
    assert main(["emit-waveforms", "illustration1", "--out", str(tmp_path)]) == 0
    wave = np.loadtxt(tmp_path / "illustration1" / "waveforms" / "gapot_i_p.csv", delimiter=",", skiprows=1)
    assert wave.shape == (1024, 4)
    assert wave[0, 1] == pytest.approx(math.sqrt(2) * 230 / 3, rel=1e-12)
    assert wave[0, 1] == pytest.approx(108.4, abs=0.05)
    assert main(["emit-waveforms", "illustration2", "--out", str(tmp_path), "--samples-per-period", "256"]) == 0
    wave = np.loadtxt(tmp_path / "illustration2" / "waveforms" / "gapot_i_F.csv", delimiter=",", skiprows=1)
    assert wave.shape == (256, 2)
    assert np.argmax(np.abs(wave[:, 1])) == 0
    assert wave[0, 1] == pytest.approx(173.02, abs=0.02)


def test_zero_current_waveforms_are_zero(tmp_path):
    text = CURRENT_SCENARIO.replace("          - {order: 1, rms: 1.0, phase_deg: -30.0}\n", "          []\n").replace("        terms:\n          []", "        terms: []")
    path = tmp_path / "zero.yaml"
    path.write_text(text)
    assert main(["emit-waveforms", str(path), "--out", str(tmp_path)]) == 0
    files = sorted((tmp_path / "explicit" / "waveforms").glob("gapot_i*.csv"))
    assert len(files) == 7
    for f in files:
        assert not np.loadtxt(f, delimiter=",", skiprows=1)[:, 1:].any()

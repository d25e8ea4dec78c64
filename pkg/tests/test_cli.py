import csv
import io
import json

import numpy as np
import pytest

from snspd_optics.cli import fmt, report_figures, run
from snspd_optics.metrology import save_record, synthesize_measurement


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_spectrum_mirror(capsys):
    code, out, _ = invoke(capsys, "spectrum", "--stack", "mirror13", "--from", "1350", "--to", "1800", "--step", "5")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 92
    header = lines[0].split(",")
    assert header[:5] == ["wavelength_nm", "polarization", "R", "T", "A_total"]
    assert header[5:] == [f"A_layer_{i}" for i in range(13)]
    assert min(float(r["R"]) for r in rows(out)) >= 0.97


def test_spectrum_to_file(tmp_path, capsys):
    path = tmp_path / "s.json"
    code, out, _ = invoke(capsys, "spectrum", "--stack", "single-planar", "--step", "100", "--format", "json", "--out", str(path))
    assert code == 0 and out == ""
    doc = json.loads(path.read_text())
    assert [d["wavelength_nm"] for d in doc] == [1400, 1500, 1600, 1700]


def test_csv_and_json_carry_same_values(capsys):
    args = ("spectrum", "--stack", "single-device", "--from", "1500", "--to", "1600", "--step", "50", "--orders", "5", "--pol", "both")
    _, c, _ = invoke(capsys, *args)
    _, j, _ = invoke(capsys, *args, "--format", "json")
    as_csv, as_json = rows(c), json.loads(j)
    assert len(as_csv) == len(as_json) == 6
    for a, b in zip(as_csv, as_json):
        assert a.keys() == b.keys()
        for k in a:
            assert a[k] == str(b[k]) or float(a[k]) == b[k]


def test_unknown_preset(capsys):
    code, _, err = invoke(capsys, "spectrum", "--stack", "nosuch")
    assert code == 1
    assert "unknown-preset" in err


def test_out_of_range_wavelength(capsys):
    code, _, err = invoke(capsys, "spectrum", "--stack", "single-planar", "--from", "1900", "--to", "1950")
    assert code == 1 and "out-of-range" in err


def test_parse_errors(capsys):
    assert invoke(capsys, "spectrum", "--bogus")[0] == 2
    assert invoke(capsys)[0] == 2
    assert invoke(capsys, "spectrum", "--pol", "XY")[0] == 2


def test_map_commands(capsys):
    base = ("--stack", "single-device", "--from", "1550", "--to", "1551", "--orders", "5", "--ff-from", "0.6", "--ff-to", "0.7", "--ff-step", "0.1", "--jobs", "1")
    code, out, _ = invoke(capsys, "ffmap", *base)
    assert code == 0
    table = rows(out)
    assert [float(r["fill_factor"]) for r in table] == [0.6, 0.7]
    assert all(0 <= float(r["value"]) <= 1 for r in table)
    code, out, _ = invoke(capsys, "polcontrast", *base)
    assert code == 0 and all(abs(float(r["value"])) <= 1 for r in rows(out))


def test_sde_sim(capsys):
    code, out, _ = invoke(capsys, "sde-sim", "--stack", "bilayer-device", "--from", "1550", "--to", "1551", "--orders", "5")
    assert code == 0
    (row,) = rows(out)
    assert float(row["sde"]) == pytest.approx(0.925 * float(row["eta_abs"]), rel=1e-8)


def test_synthesize_then_sde_calc(tmp_path, capsys):
    path = tmp_path / "rec.json"
    code, _, _ = invoke(capsys, "synthesize", "--sde", "0.925", "--out", str(path))
    assert code == 0
    code, out, _ = invoke(capsys, "sde-calc", "--in", str(path))
    assert code == 0
    doc = json.loads(out)
    assert doc["sde"] == pytest.approx(0.925, abs=1e-8)
    assert doc["combined_percent"] == pytest.approx(1.2, abs=0.05)


def test_sde_calc_rejects_bad_record(tmp_path, capsys):
    rec = synthesize_measurement(0.5, 1e5, 100.0)
    path = tmp_path / "rec.json"
    save_record(rec, path)
    doc = json.loads(path.read_text())
    doc["attenuators"] = doc["attenuators"][:2]
    path.write_text(json.dumps(doc))
    code, _, err = invoke(capsys, "sde-calc", "--in", str(path))
    assert code == 1 and "measurement-invalid" in err
    code, _, err = invoke(capsys, "sde-calc", "--in", str(tmp_path / "missing.json"))
    assert code == 1 and "error:" in err


def test_stokes(capsys):
    code, out, _ = invoke(capsys, "stokes", "--counts", "250,750,750,250,500,500")
    assert code == 0
    doc = json.loads(out)
    assert doc["psi_rad"] == pytest.approx(3 * np.pi / 8)
    code, _, err = invoke(capsys, "stokes", "--counts", "5,5,5,5,5,5")
    assert code == 1 and "unpolarized" in err


def test_materials_listing(capsys):
    code, out, _ = invoke(capsys, "materials")
    assert code == 0
    for name in ("sio2", "asi", "wsi", "si", "air"):
        assert name in out


def test_optimize_arc_small_budget(capsys):
    code, out, _ = invoke(capsys, "optimize-arc", "--stack", "single-device", "--orders", "3", "--budget", "6", "--restarts", "0", "--step", "50")
    assert code == 0
    doc = json.loads(out)
    assert doc["evaluations"] <= 6
    assert doc["objective"] >= doc["start_objective"]
    assert len(doc["thicknesses_nm"]) == 3


def test_fmt():
    assert fmt(0.1 + 0.2) == 0.3
    assert fmt(3) == 3


@pytest.fixture(scope="module")
def single_figures(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig")
    return {p.name: p for p in report_figures("single", out, orders=9)}


def test_figure_files(single_figures):
    assert set(single_figures) == {"fig1.csv", "fig5_single.csv", "figS1_single.csv", "figS2_single.csv", "figS3_single.csv"}


def test_single_device_optimum_fill_factor(single_figures):
    table = rows(single_figures["figS2_single.csv"].read_text())
    at_1550 = [(float(r["value"]), float(r["fill_factor"])) for r in table if float(r["wavelength_nm"]) == 1550]
    _, best = max(at_1550)
    assert 0.55 <= best <= 0.80


def test_fig5_columns(single_figures):
    for r in rows(single_figures["fig5_single.csv"].read_text()):
        for p in ("TE", "TM"):
            eta = float(r[f"eta_{p}"])
            assert 0 <= eta <= 1
            assert float(r[f"sde_{p}"]) == pytest.approx(0.925 * eta, rel=1e-8)


def test_arc_helps_in_figs1(single_figures):
    table = rows(single_figures["figS1_single.csv"].read_text())
    r = next(r for r in table if float(r["wavelength_nm"]) == 1550)
    assert float(r["arc_TE"]) > float(r["planar_TE"])

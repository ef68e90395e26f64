import csv
import json

import pytest

from dtncert.cli import run
from dtncert.verify import INEQUALITY_IDS


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_spectrum_default_sphere(tmp_path):
    assert run(["spectrum", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "spectrum.csv")
    assert len(rows) == 61
    assert all(r["pass"] == "true" and float(r["im"]) > 0 for r in rows)
    assert all(r["pass"] == "true" for r in read_csv(tmp_path / "resolvent.csv"))
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["runs"][0]["modal"]["all_pass"]


def test_spectrum_ellipsoid_matrix(tmp_path):
    assert run(["spectrum", "--surface", "ellipsoid:1.5,1,1", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "spectrum.csv")
    assert rows and all(r["source"] == "dtn_matrix" for r in rows)
    assert min(float(r["im"]) for r in rows) >= -1e-6


def test_rejected_config_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert run(["spectrum", "--b", "0,1", "--out", str(out)]) == 2
    assert "b > 0 required" in capsys.readouterr().err
    assert not out.exists()
    assert run(["sweep", "--k", "", "--out", str(out)]) == 2
    assert run(["bounds", "--k", "1,2", "--out", str(out)]) == 2
    assert run(["mie", "--surface", "ellipsoid:1.5,1,1", "--out", str(out)]) == 2
    assert not out.exists()


def test_solve_certify_sphere_has_effectivities(tmp_path):
    assert run(["solve-certify", "--resolution", "16,32", "--out", str(tmp_path)]) == 0
    (row,) = read_csv(tmp_path / "certificates.csv")
    for name in ("eff_field", "eff_dn", "eff_far_sq"):
        assert float(row[name]) >= 1
    assert (tmp_path / "solution_k1.json").exists()


def test_solve_certify_variable_ellipsoid_certificate_only(tmp_path):
    args = ["solve-certify", "--surface", "ellipsoid:1.5,1,1", "--gamma", "i*(1+0.5*sin(theta))", "--resolution", "16,32", "--out", str(tmp_path)]
    assert run(args) == 0
    (row,) = read_csv(tmp_path / "certificates.csv")
    assert row["err_field"] == "" and row["eff_field"] == ""
    assert float(row["bound_field"]) > 0


def test_solve_certify_few_sources_still_certifies(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[mfs]\nsources = 6\n")
    assert run(["solve-certify", "--config", str(cfg), "--resolution", "16,32", "--out", str(tmp_path)]) == 0
    (row,) = read_csv(tmp_path / "certificates.csv")
    assert float(row["alpha_norm"]) > 1e-3
    assert float(row["eff_field"]) >= 1


def test_bounds_single_k_ids(tmp_path):
    assert run(["bounds", "--resolution", "16,32", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "verdicts.csv")
    assert {r["id"] for r in rows} == set(INEQUALITY_IDS)
    assert all(r["pass"] == "true" for r in rows)


def test_mie_subcommand(tmp_path):
    assert run(["mie", "--k", "1,3", "--gamma", "1+i", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert all(r["bc_residual_max"] < 1e-12 for r in report["runs"])
    assert read_csv(tmp_path / "mie_coefficients.csv")


def test_dira_convention_matches_dir(tmp_path):
    # eta = 2i in the direct convention is gamma = i at k = 2
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = tmp_path / "c.toml"
    cfg.write_text('[impedance]\ngamma = "2*i"\nconvention = "dirA"\n')
    assert run(["mie", "--k", "2", "--config", str(cfg), "--out", str(a)]) == 0
    assert run(["mie", "--k", "2", "--gamma", "i", "--out", str(b)]) == 0
    assert (a / "mie_coefficients.csv").read_bytes() == (b / "mie_coefficients.csv").read_bytes()


def test_missing_config_file(tmp_path):
    assert run(["spectrum", "--config", str(tmp_path / "none.toml"), "--out", str(tmp_path / "o")]) == 2


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        run(["--help"])
    out = capsys.readouterr().out
    for name in ("spectrum", "solve-certify", "bounds", "sweep", "mie"):
        assert name in out

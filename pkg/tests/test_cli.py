import json

import numpy as np
import pytest

from vibromollow.analytic import Spectrum
from vibromollow.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_THRESHOLD, EXIT_VALIDATION, main
from vibromollow.io import echo_path, read_csv, read_json
from vibromollow.observables import count_local_maxima

ATOM = """
method = "analytic_general"
[emitter]
gamma_ueV = 4.1
[drive]
omega_over_gamma = 10
[grid]
omega_min_meV = -0.15
omega_max_meV = 0.15
omega_step_meV = 0.001
adaptive = false
"""

ONE_MODE = """
method = "{method}"
[emitter]
gamma_ueV = 4.1
[drive]
omega_over_gamma = 10
[[modes]]
nu_meV = 5.0
eta_meV = {eta}
kappa_meV = 0.2
[oracle]
fock_levels = {fock}
"""


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_spectrum_atomic_triplet(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--config", str(_write(tmp_path, ATOM)), "--out", str(out)]) == EXIT_OK
    meta, cols = read_csv(out)
    x, y = cols["omega_meV"], cols["intensity"]
    assert x.size == 301
    i0 = np.argmax(y)
    assert abs(x[i0]) < 1e-12
    side = y[x > 0.02].argmax()
    assert x[x > 0.02][side] == pytest.approx(meta["mollow_splitting_meV"], abs=1e-3)
    assert meta["method"] == "analytic_general" and "dropped_weight" in meta
    assert echo_path(out).exists()


def test_byte_identical_reruns(tmp_path):
    cfg = _write(tmp_path, ATOM)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["spectrum", "--config", str(cfg), "--out", str(a)])
    main(["spectrum", "--config", str(cfg), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    # re-run from the output's own metadata
    c = tmp_path / "c.csv"
    main(["spectrum", "--config", str(a), "--out", str(c)])
    assert a.read_bytes() == c.read_bytes()


def test_json_format(tmp_path):
    out = tmp_path / "s.json"
    assert main(["spectrum", "--config", str(_write(tmp_path, ATOM)), "--out", str(out),
                 "--format", "json"]) == EXIT_OK
    doc, cols = read_json(out)
    assert doc["command"] == "spectrum" and cols["intensity"].size == 301


def test_stdout_when_no_out(tmp_path, capsys):
    assert main(["spectrum", "--config", str(_write(tmp_path, ATOM))]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("# vibromollow table") and "omega_meV,intensity" in text


def test_validation_exit(tmp_path, capsys):
    bad = ATOM.replace("gamma_ueV = 4.1", "gamma_ueV = 4.1\ngamma_pd_ueV = 1\ntemperature_K = 4")
    assert main(["spectrum", "--config", str(_write(tmp_path, bad))]) == EXIT_VALIDATION
    assert "not both" in capsys.readouterr().err
    assert main(["spectrum"]) == EXIT_VALIDATION
    assert main(["spectrum", "--config", str(tmp_path / "missing.toml")]) == EXIT_VALIDATION
    zero = ATOM.replace("omega_max_meV = 0.15", "omega_max_meV = -0.15")
    assert main(["spectrum", "--config", str(_write(tmp_path, zero))]) == EXIT_VALIDATION


def test_numerical_exit(tmp_path, capsys):
    cfg = _write(tmp_path, ONE_MODE.format(method="oracle", eta=3.0, fock=2))
    assert main(["spectrum", "--config", str(cfg)]) == EXIT_NUMERICAL
    assert "TruncationError" in capsys.readouterr().err


def test_compare_exits(tmp_path):
    cfg = _write(tmp_path, ONE_MODE.format(method="oracle", eta=5 / 3, fock=10))
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    meta, cols = read_csv(out)
    assert meta["rmse"] <= 0.05 and meta["passed"] is True
    assert set(cols) == {"tau_ps", "abs_g1_analytic", "abs_g1_numeric"}
    assert (tmp_path / "cmp.spectra.csv").exists()
    assert main(["compare", "--config", str(cfg), "--rmse-cutoff", "1e-9"]) == EXIT_THRESHOLD


def test_compare_uncoupled_limit(tmp_path, capsys):
    cfg = _write(tmp_path, ONE_MODE.format(method="oracle", eta=0.0, fock=2))
    assert main(["compare", "--config", str(cfg), "--rmse-cutoff", "1e-6"]) == EXIT_OK


def test_single_point_sweep_equals_spectrum(tmp_path):
    cfg = _write(tmp_path, ATOM)
    s, w = tmp_path / "s.csv", tmp_path / "w.csv"
    main(["spectrum", "--config", str(cfg), "--out", str(s)])
    assert main(["sweep", "--config", str(cfg), "--out", str(w)]) == EXIT_OK
    _, cs = read_csv(s)
    _, cw = read_csv(w)
    assert np.array_equal(cs["omega_meV"], cw["omega_meV"])
    assert np.array_equal(cs["intensity"], cw["intensity"])
    assert "laser_intensity_uW_um2" in cw


def test_sweep_without_calibration(tmp_path):
    text = ATOM + "[sweep]\naxis = \"omega_over_gamma\"\nvalues = [5, 10, 20]\ncalibrate = false\n"
    w = tmp_path / "w.csv"
    assert main(["sweep", "--config", str(_write(tmp_path, text)), "--out", str(w), "--workers", "2"]) == EXIT_OK
    meta, cols = read_csv(w)
    assert "laser_intensity_uW_um2" not in cols
    assert list(np.unique(cols["drive_value"])) == [5.0, 10.0, 20.0]
    assert meta["failures"] == []


def test_sweep_parallel_matches_serial(tmp_path):
    text = ATOM + "[sweep]\naxis = \"omega_over_gamma\"\nvalues = [20, 5, 10]\n"
    cfg = _write(tmp_path, text)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["sweep", "--config", str(cfg), "--out", str(a)])
    main(["sweep", "--config", str(cfg), "--out", str(b), "--workers", "3"])
    assert a.read_bytes() == b.read_bytes()
    _, cols = read_csv(a)
    assert list(dict.fromkeys(cols["drive_value"])) == [20.0, 5.0, 10.0]


def test_sweep_records_point_failures(tmp_path, capsys):
    text = ATOM + "[sweep]\naxis = \"omega_over_gamma\"\nvalues = [10, -1]\n"
    w = tmp_path / "w.csv"
    assert main(["sweep", "--config", str(_write(tmp_path, text)), "--out", str(w)]) == EXIT_OK
    meta, _ = read_csv(w)
    assert [f["drive_value"] for f in meta["failures"]] == [-1.0]
    assert "warning" in capsys.readouterr().err


def test_criteria_dbt_ordering(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["criteria", "--preset", "dbt-pdcb", "--out", str(out)]) == EXIT_OK
    _, cols = read_csv(out)
    thr = {int(m): t for m, n, t in zip(cols["mode"], cols["n"], cols["threshold_ueV"]) if n == 1}
    assert min(thr[1], thr[2]) > max(thr[3], thr[4], thr[5])


def test_dephasing_command(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["dephasing", "--temperatures", "0", "8", "11.5", "--out", str(out)]) == EXIT_OK
    _, cols = read_csv(out)
    assert cols["gamma_pd_ueV"][0] == 0.0
    assert list(cols["gamma_pd_ueV"]) == sorted(cols["gamma_pd_ueV"])
    assert main(["dephasing", "--temperatures", "-1"]) == EXIT_VALIDATION


def test_calibrate_command(tmp_path):
    out = tmp_path / "k.csv"
    assert main(["calibrate", "--omega", "35", "--dipole", "13.7", "--out", str(out)]) == EXIT_OK
    _, cols = read_csv(out)
    assert cols["intensity_bare_uW_um2"][0] == pytest.approx(20.0, rel=0.1)


def test_scan_validity_small(tmp_path):
    text = ONE_MODE.format(method="oracle", eta=1.0, fock=8) + \
        "[scan]\neta_over_nu = [0.05, 0.3]\nomega_over_eta = [0.01, 0.1]\n"
    out = tmp_path / "v.csv"
    assert main(["scan-validity", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == EXIT_OK
    meta, cols = read_csv(out)
    assert len(cols["rmse"]) == 4
    assert len(meta["boundary_omega_over_eta"]) == 2


def test_bad_workers():
    assert main(["dephasing", "--workers", "0"]) == EXIT_VALIDATION


def test_dbt_sweep_splits_sidebands(tmp_path):
    text = """
preset = "dbt-pdcb"
preset_modes = [3, 4, 5]
method = "analytic_first_replica"
[drive]
omega_renorm_ueV = 5
[sweep]
axis = "omega_renorm_ueV"
values = [5, 35, 60]
dipole_D = 13.7
"""
    out = tmp_path / "w.csv"
    assert main(["sweep", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == EXIT_OK
    _, cols = read_csv(out)
    counts = {}
    for v in (5.0, 35.0, 60.0):
        sel = cols["drive_value"] == v
        spec = Spectrum(cols["omega_meV"][sel], cols["intensity"][sel])
        counts[v] = [count_local_maxima(spec, -nu - 0.15, -nu + 0.15) for nu in (35.67, 35.93, 49.98)]
    assert counts[5.0] == [1, 1, 1]
    assert counts[35.0][0] > 1  # lowest threshold (about 35 µeV) reached first
    assert counts[60.0] == [3, 3, 3]
    laser = cols["laser_intensity_renorm_uW_um2"][cols["drive_value"] == 35.0][0]
    assert laser == pytest.approx(20.0, rel=0.1)

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vibromollow.calibrate import (
    CalibrationInput,
    calibration_row,
    dipole_from_lifetime,
    dipole_from_lifetime_si,
    intensity_from_rabi,
    intensity_from_rabi_si,
    power_from_intensity,
    rabi_from_intensity,
)
from vibromollow.constants import CONSTANTS

# 40-digit mpmath evaluation of the same formulas
DIPOLE_REF = 13.721907448658694
INTENSITY_REF = 19.984663164549795


def test_dbt_dipole():
    assert dipole_from_lifetime(0.094, 745.0) == pytest.approx(13.7, rel=0.01)
    assert dipole_from_lifetime(0.094, 745.0) == pytest.approx(DIPOLE_REF, rel=1e-13)


def test_dipole_scaling():
    d = dipole_from_lifetime(0.094, 745.0)
    assert dipole_from_lifetime(4 * 0.094, 745.0) == pytest.approx(2 * d, rel=1e-14)
    assert dipole_from_lifetime(0.094, 4 * 745.0) == pytest.approx(8 * d, rel=1e-14)


def test_intensity_anchor():
    assert intensity_from_rabi(35.0, 13.7) == pytest.approx(20.0, rel=0.1)
    assert intensity_from_rabi(35.0, 13.7) == pytest.approx(INTENSITY_REF, rel=1e-13)
    assert intensity_from_rabi(0.0, 13.7) == 0.0


@given(om=st.floats(1e-3, 1e4), d=st.floats(0.1, 100))
def test_round_trip(om, d):
    assert rabi_from_intensity(intensity_from_rabi(om, d), d) == pytest.approx(om, rel=1e-12)


@given(om=st.floats(1e-3, 1e4), d=st.floats(0.1, 100))
def test_quadratic_law(om, d):
    assert intensity_from_rabi(2 * om, d) == pytest.approx(4 * intensity_from_rabi(om, d), rel=1e-14)


@given(om=st.floats(1e-3, 1e4), d=st.floats(0.1, 100))
def test_dimensional_audit(om, d):
    # SI units: I = eps0 c / 2 (hbar Omega / d)^2 with hbar Omega in J; 1 µW/µm² = 1e6 W/m²
    e_j = om * 1e-6 * CONSTANTS.e_charge
    direct = 0.5 * CONSTANTS.eps0 * CONSTANTS.c * (e_j / (d * CONSTANTS.debye)) ** 2
    assert intensity_from_rabi_si(om, d) == pytest.approx(direct, rel=1e-12)
    assert intensity_from_rabi(om, d) == pytest.approx(direct / 1e6, rel=1e-9)


def test_dipole_si_and_debye_consistent():
    assert dipole_from_lifetime_si(0.094, 745.0) / CONSTANTS.debye == dipole_from_lifetime(0.094, 745.0)


def test_power():
    assert power_from_intensity(20.0, 0.5) == 10.0
    with pytest.raises(ValueError):
        power_from_intensity(1.0, 0.0)


@pytest.mark.parametrize("kw", [dict(gamma=0.0), dict(gamma=0.1, wavelength=-1.0), dict(gamma=0.1, dipole=0.0),
                                dict(gamma=0.1, spot_area=0.0)])
def test_input_validation(kw):
    with pytest.raises(ValueError):
        CalibrationInput(**kw)


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        intensity_from_rabi(-1.0, 13.7)
    with pytest.raises(ValueError):
        dipole_from_lifetime(0.094, 0.0)
    with pytest.raises(ValueError):
        rabi_from_intensity(1.0, float("nan"))


def test_calibration_row_both_mappings():
    cal = CalibrationInput(0.094, 745.0, dipole=13.7)
    fc = math.exp(-0.2416 / 2)
    row = calibration_row(35.0, fc, cal)
    assert row["intensity_bare_uW_um2"] == pytest.approx(intensity_from_rabi(35.0, 13.7))
    assert row["intensity_renorm_uW_um2"] == pytest.approx(fc ** 2 * row["intensity_bare_uW_um2"])
    assert CalibrationInput(0.094).resolved_dipole() == pytest.approx(DIPOLE_REF)

"""Rabi frequency, laser intensity and transition dipole conversions.

Intensities are in µW/µm² (numerically equal to 1e6 W/m²), energies in µeV,
dipoles in Debye.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .constants import CONSTANTS

_UW_PER_UM2 = 1e6  # W/m^2


def _uev_to_joule(e_uev):
    return e_uev * 1e-6 * CONSTANTS.e_charge


def _positive(name, value, allow_zero=False):
    ok = value >= 0 if allow_zero else value > 0
    if not (ok and math.isfinite(value)):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")


@dataclass(frozen=True)
class CalibrationInput:
    gamma: float  # µeV
    wavelength: float = 745.0  # nm
    dipole: Optional[float] = None  # Debye, overrides the lifetime estimate
    spot_area: float = 1.0  # µm^2

    def __post_init__(self):
        _positive("gamma", self.gamma)
        _positive("wavelength", self.wavelength)
        _positive("spot_area", self.spot_area)
        if self.dipole is not None:
            _positive("dipole", self.dipole)

    def resolved_dipole(self) -> float:
        if self.dipole is not None:
            return self.dipole
        return dipole_from_lifetime(self.gamma, self.wavelength)


def dipole_from_lifetime_si(gamma, wavelength):
    """Transition dipole in C·m from the radiative rate (µeV) and wavelength (nm)."""
    _positive("gamma", gamma)
    _positive("wavelength", wavelength)
    lam = wavelength * 1e-9
    # hbar * gamma_angular is the linewidth energy itself
    return math.sqrt(3.0 * CONSTANTS.eps0 * _uev_to_joule(gamma) * lam ** 3 / (8.0 * math.pi ** 2))


def dipole_from_lifetime(gamma, wavelength):
    """Transition dipole in Debye."""
    return dipole_from_lifetime_si(gamma, wavelength) / CONSTANTS.debye


def field_from_rabi(omega, dipole):
    """Peak field amplitude E0 in V/m for Rabi energy ``omega`` (µeV)."""
    _positive("omega", omega, allow_zero=True)
    _positive("dipole", dipole)
    return _uev_to_joule(omega) / (dipole * CONSTANTS.debye)


def intensity_from_rabi_si(omega, dipole):
    e0 = field_from_rabi(omega, dipole)
    return 0.5 * CONSTANTS.eps0 * CONSTANTS.c * e0 * e0


def intensity_from_rabi(omega, dipole):
    """Cycle-averaged intensity in µW/µm²."""
    return intensity_from_rabi_si(omega, dipole) / _UW_PER_UM2


def rabi_from_intensity(intensity, dipole):
    """Inverse of :func:`intensity_from_rabi`; returns µeV."""
    _positive("intensity", intensity, allow_zero=True)
    _positive("dipole", dipole)
    e0 = math.sqrt(2.0 * intensity * _UW_PER_UM2 / (CONSTANTS.eps0 * CONSTANTS.c))
    return e0 * dipole * CONSTANTS.debye / (1e-6 * CONSTANTS.e_charge)


def power_from_intensity(intensity, spot_area):
    """Power in µW for an intensity (µW/µm²) spread over ``spot_area`` µm²."""
    _positive("intensity", intensity, allow_zero=True)
    _positive("spot_area", spot_area)
    return intensity * spot_area


def calibration_row(omega_bare, fc_factor, cal: CalibrationInput):
    """Intensity for one drive value under both Rabi conventions.

    ``omega_bare`` in µeV. The bare mapping uses the drive as given; the
    renormalized mapping treats omega_bare * fc_factor as the Rabi energy.
    """
    d = cal.resolved_dipole()
    i_bare = intensity_from_rabi(omega_bare, d)
    i_renorm = intensity_from_rabi(omega_bare * fc_factor, d)
    return {
        "omega_bare_ueV": omega_bare,
        "omega_renorm_ueV": omega_bare * fc_factor,
        "dipole_D": d,
        "intensity_bare_uW_um2": i_bare,
        "intensity_renorm_uW_um2": i_renorm,
        "power_bare_uW": power_from_intensity(i_bare, cal.spot_area),
        "power_renorm_uW": power_from_intensity(i_renorm, cal.spot_area),
    }

"""Physical constants and unit conversions.

Energies and rates are carried in meV, times in ps. An energy E (meV)
corresponds to the angular rate E / HBAR (ps^-1).
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 0.6582119569  # meV ps
    k_b: float = 0.08617333  # meV / K
    eps0: float = 8.8541878128e-12  # F / m
    c: float = 299792458.0  # m / s
    debye: float = 3.33564e-30  # C m
    hbar_si: float = 1.054571817e-34  # J s
    e_charge: float = 1.602176634e-19  # C


CONSTANTS = PhysicalConstants()

HBAR = CONSTANTS.hbar
K_B = CONSTANTS.k_b


def mev_to_rate(energy):
    """meV -> angular rate in ps^-1."""
    return energy / HBAR


def rate_to_mev(rate):
    """Angular rate in ps^-1 -> meV."""
    return rate * HBAR


def uev(value):
    """µeV -> meV."""
    return value * 1e-3

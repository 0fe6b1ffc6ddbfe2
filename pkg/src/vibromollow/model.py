"""Domain types and derived quantities for a driven emitter with local phonons.

All energies and rates are in meV. Spectra are measured relative to the
polaron-shifted zero-phonon line, which sits at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import K_B, uev


class ModelError(ValueError):
    """Invalid model parameters."""


class NoSplittingError(ModelError):
    """The drive is too weak for a real Mollow splitting."""


@dataclass(frozen=True)
class EmitterParams:
    """Two-level emitter.

    ``gamma`` and ``gamma_pd`` are in meV; use :meth:`from_microev` for the
    µeV values quoted in most tables.
    """

    gamma: float
    gamma_pd: float = 0.0
    emission_wavelength: float = 745.0  # nm
    detuning: float = 0.0  # meV

    def __post_init__(self):
        if not self.gamma > 0:
            raise ModelError(f"gamma must be > 0, got {self.gamma}")
        if not self.gamma_pd >= 0:
            raise ModelError(f"gamma_pd must be >= 0, got {self.gamma_pd}")
        if not self.emission_wavelength > 0:
            raise ModelError("emission_wavelength must be > 0")

    @classmethod
    def from_microev(cls, gamma_uev, gamma_pd_uev=0.0, emission_wavelength=745.0, detuning=0.0):
        return cls(uev(gamma_uev), uev(gamma_pd_uev), emission_wavelength, detuning)

    @property
    def total_dephasing(self) -> float:
        """Gamma = gamma + 2 gamma_pd."""
        return self.gamma + 2.0 * self.gamma_pd


@dataclass(frozen=True)
class PhononMode:
    """One localized vibration: energy ``nu``, coupling ``eta``, decay ``kappa`` (meV)."""

    nu: float
    eta: float
    kappa: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ModelError(f"mode energy must be > 0, got {self.nu}")
        if not self.eta >= 0:
            raise ModelError(f"coupling must be >= 0, got {self.eta}")
        if not self.kappa >= 0:
            raise ModelError(f"phonon decay must be >= 0, got {self.kappa}")
        if not math.isfinite((self.eta / self.nu) ** 2):
            raise ModelError("Huang-Rhys factor is not finite")

    @property
    def beta(self) -> float:
        return huang_rhys(self)


@dataclass(frozen=True)
class DriveConfig:
    omega_bare: float  # meV

    def __post_init__(self):
        if not self.omega_bare >= 0:
            raise ModelError(f"Rabi frequency must be >= 0, got {self.omega_bare}")


@dataclass(frozen=True)
class VibronicSystem:
    emitter: EmitterParams
    modes: tuple = ()
    drive: DriveConfig = field(default_factory=lambda: DriveConfig(0.0))
    temperature: float = 0.0  # K

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        for m in self.modes:
            if not isinstance(m, PhononMode):
                raise ModelError(f"modes must be PhononMode instances, got {type(m).__name__}")
        if not self.temperature >= 0:
            raise ModelError(f"temperature must be >= 0, got {self.temperature}")

    def with_drive(self, omega_bare: float) -> "VibronicSystem":
        return VibronicSystem(self.emitter, self.modes, DriveConfig(omega_bare), self.temperature)

    def with_modes(self, modes: Sequence[PhononMode]) -> "VibronicSystem":
        return VibronicSystem(self.emitter, tuple(modes), self.drive, self.temperature)

    def with_emitter(self, emitter: EmitterParams) -> "VibronicSystem":
        return VibronicSystem(emitter, self.modes, self.drive, self.temperature)


@dataclass(frozen=True)
class DerivedQuantities:
    gamma: float
    gamma_pd: float
    total_dephasing: float  # Gamma = gamma + 2 gamma_pd
    beta_tilde: float
    fc_factor: float
    omega_bare: float
    omega_renorm: float
    mollow_splitting: Optional[float]
    polaron_shift: float
    lambda_plus: Optional[complex]
    lambda_minus: Optional[complex]
    saturation_s: float
    ratio_a: float

    @property
    def has_splitting(self) -> bool:
        return self.mollow_splitting is not None

    @property
    def excited_population(self) -> float:
        s = self.saturation_s
        return s / (2.0 * (s + 1.0))

    def require_splitting(self) -> float:
        if self.mollow_splitting is None:
            raise NoSplittingError(
                f"renormalized Rabi frequency {self.omega_renorm:.6g} meV is below "
                f"|gamma/4 - gamma_pd/2| = {abs(self.gamma / 4 - self.gamma_pd / 2):.6g} meV"
            )
        return self.mollow_splitting


def huang_rhys(mode: PhononMode) -> float:
    return (mode.eta / mode.nu) ** 2


def mollow_lambdas(omega_renorm, splitting, gamma, gamma_pd):
    """Side-peak amplitudes (Lambda_+, Lambda_-)."""
    d = gamma - 2.0 * gamma_pd
    om2 = omega_renorm * omega_renorm
    lam_p = om2 / complex(8.0 * splitting * splitting, 2.0 * splitting * d)
    lam_m = om2 / complex(8.0 * splitting * splitting, -2.0 * splitting * d)
    return lam_p, lam_m


def derive(system: VibronicSystem) -> DerivedQuantities:
    em = system.emitter
    gamma, gamma_pd = em.gamma, em.gamma_pd
    big_gamma = gamma + 2.0 * gamma_pd
    beta_tilde = math.fsum(huang_rhys(m) for m in system.modes)
    fc = math.exp(-0.5 * beta_tilde)
    omega = system.drive.omega_bare
    omega_r = fc * omega
    radicand = omega_r * omega_r - (gamma / 4.0 - gamma_pd / 2.0) ** 2
    if radicand > 0.0:
        split = math.sqrt(radicand)
        lam_p, lam_m = mollow_lambdas(omega_r, split, gamma, gamma_pd)
    else:
        split = lam_p = lam_m = None
    return DerivedQuantities(
        gamma=gamma,
        gamma_pd=gamma_pd,
        total_dephasing=big_gamma,
        beta_tilde=beta_tilde,
        fc_factor=fc,
        omega_bare=omega,
        omega_renorm=omega_r,
        mollow_splitting=split,
        polaron_shift=math.fsum(m.eta * m.eta / m.nu for m in system.modes),
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        saturation_s=2.0 * omega_r * omega_r / (gamma * big_gamma),
        ratio_a=gamma / big_gamma,
    )


def thermal_occupation(nu, temperature):
    """Bose-Einstein occupation of a mode of energy ``nu`` (meV) at ``temperature`` (K)."""
    nu = np.asarray(nu, dtype=float)
    temperature = np.asarray(temperature, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        x = np.where(temperature > 0, nu / (K_B * np.where(temperature > 0, temperature, 1.0)), np.inf)
        n = np.where(np.isinf(x), 0.0, 1.0 / np.expm1(x))
    return n[()] if n.ndim == 0 else n

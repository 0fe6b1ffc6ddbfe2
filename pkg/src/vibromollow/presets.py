"""Built-in parameter sets."""

from .model import DriveConfig, EmitterParams, PhononMode, VibronicSystem

# DBT in para-dichlorobenzene: (nu, eta, kappa) in meV
DBT_MODES = (
    (22.01, 4.17, 0.129),
    (28.98, 6.06, 0.156),
    (35.67, 2.83, 0.035),
    (35.93, 10.78, 0.037),
    (49.98, 6.00, 0.054),
    (56.95, 7.25, 0.060),
    (83.13, 9.33, 0.016),
    (94.89, 6.37, 0.028),
    (95.28, 7.00, 0.033),
    (97.27, 10.91, 0.060),
)
DBT_GAMMA_UEV = 0.094
DBT_WAVELENGTH_NM = 745.0
DBT_DIPOLE_DEBYE = 13.7
DBT_DEPHASING_MU = 4.7e-7  # ps^5
DBT_DEPHASING_OMEGA_C = 8.6  # ps^-1

PRESETS = ("dbt-pdcb",)


def dbt_modes():
    return tuple(PhononMode(nu, eta, kappa) for nu, eta, kappa in DBT_MODES)


def dbt_system(omega_over_gamma=10.0, gamma_pd_uev=0.0, temperature=0.0):
    """DBT emitter with all ten modes, driven at ``omega_over_gamma`` times gamma."""
    em = EmitterParams.from_microev(DBT_GAMMA_UEV, gamma_pd_uev, DBT_WAVELENGTH_NM)
    return VibronicSystem(em, dbt_modes(), DriveConfig(omega_over_gamma * em.gamma), temperature)

"""Closed-form and numerical spectra of driven emitters with local vibrations."""

from .analytic import (
    CorrelationModel,
    ExponentialTerm,
    Spectrum,
    g1_mean_field,
    g1_multimode_first_replica,
    g1_multimode_general,
    g1_single_mode,
    normalize,
    spectrum_from_model,
    tls_regression_exact,
)
from .calibrate import dipole_from_lifetime, intensity_from_rabi, rabi_from_intensity
from .config import ConfigError, RunConfig, load_config
from .constants import CONSTANTS, HBAR, K_B
from .model import (
    DerivedQuantities,
    DriveConfig,
    EmitterParams,
    ModelError,
    NoSplittingError,
    PhononMode,
    VibronicSystem,
    derive,
)
from .observables import (
    DephasingModel,
    PeakFit,
    dephasing_rate,
    fit_peaks,
    predicted_linewidths,
    resolvability_threshold,
    triplet_ratios,
)

__version__ = "0.1.0"

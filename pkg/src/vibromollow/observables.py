"""Spectral observables: resolvability, triplet ratios, peak fits, dephasing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, signal, special

from .analytic import Spectrum
from .constants import HBAR, K_B
from .model import mollow_lambdas


class QuadratureError(RuntimeError):
    pass


def resolvability_threshold(gamma, gamma_pd, n, kappa):
    """Smallest renormalized Rabi frequency resolving the n-th replica triplet."""
    if n < 0:
        raise ValueError("replica order must be >= 0")
    return 0.25 * math.hypot(gamma - 2.0 * gamma_pd, 4.0 * n * kappa + 5.0 * gamma + 6.0 * gamma_pd)


def predicted_linewidths(gamma, gamma_pd, n, kappa):
    """(central FWHM, side FWHM) of the n-th replica triplet."""
    if n < 0:
        raise ValueError("replica order must be >= 0")
    return (gamma + 2.0 * gamma_pd + n * kappa,
            (3.0 * gamma + 2.0 * gamma_pd + 2.0 * n * kappa) / 2.0)


def triplet_ratios(gamma, gamma_pd, n, kappa, omega_renorm=None):
    """Linewidth ratio R_G = G_C / G_S and amplitude ratio R_A = A_C / A_S.

    With ``omega_renorm`` given, |8 Lambda| is evaluated exactly; without it
    the strong-drive value |8 Lambda| = 1 is used.
    """
    gc, gs = predicted_linewidths(gamma, gamma_pd, n, kappa)
    r_gamma = gc / gs
    if omega_renorm is None:
        eight_lambda = 1.0
    else:
        split2 = omega_renorm ** 2 - (gamma / 4.0 - gamma_pd / 2.0) ** 2
        if split2 <= 0:
            raise ValueError("no Mollow splitting at this drive")
        lam, _ = mollow_lambdas(omega_renorm, math.sqrt(split2), gamma, gamma_pd)
        eight_lambda = abs(8.0 * lam)
    return r_gamma, (2.0 / r_gamma) / eight_lambda


@dataclass(frozen=True)
class PeakFit:
    """One fitted Lorentzian.

    ``center`` and ``fwhm`` in meV; ``height`` in spectrum units; ``area`` is
    int L dw / 2pi with w in ps^-1, the same measure as
    :meth:`Spectrum.integrated_weight`. ``residual`` is the rms misfit over
    the rms signal of the fit window.
    """

    center: float
    fwhm: float
    height: float
    area: float
    residual: float
    baseline: float = 0.0
    converged: bool = True
    asymmetry: float = 0.0  # dispersive admixture, Im(a) / Re(a) of the complex Lorentzian


def lorentzian(x, center, fwhm, height, asymmetry=0.0):
    """Lorentzian of peak value ``height``, optionally with a dispersive part.

    With ``asymmetry`` = Im(a)/Re(a) this is 2 Re[a / (hw + i (center - x))],
    the shape of one complex-exponential term of a correlation function.
    """
    hw = 0.5 * fwhm
    return height * hw * (hw + asymmetry * (center - x)) / ((x - center) ** 2 + hw * hw)


def _area(height, fwhm):
    # pi * h * (fwhm / 2) in meV * units, converted to dw / 2pi in ps^-1
    return 0.25 * height * fwhm / HBAR


def fit_multiplet(spectrum: Spectrum, centers, width_guess, lo, hi, max_nfev=400,
                  residual_tol=0.05, dispersive=False):
    """Joint fit of len(centers) Lorentzians plus a constant baseline on [lo, hi].

    ``dispersive`` frees one asymmetry parameter per peak (see :func:`lorentzian`).
    """
    sel = (spectrum.omega >= lo) & (spectrum.omega <= hi)
    x, y = spectrum.omega[sel], spectrum.values[sel]
    if x.size < 4 * len(centers) + 1:
        raise ValueError("fit window holds too few grid points")
    scale = float(np.max(np.abs(y))) or 1.0
    yn = y / scale
    k = len(centers)
    npp = 4 if dispersive else 3
    p0, lb, ub = [], [], []
    span = hi - lo
    for c in centers:
        p0 += [c, width_guess, float(np.interp(c, x, yn))] + [0.0] * (npp - 3)
        lb += [lo, 1e-6 * span, 0.0] + [-10.0] * (npp - 3)
        ub += [hi, 2.0 * span, np.inf] + [10.0] * (npp - 3)
    p0.append(float(min(yn[0], yn[-1])))
    lb.append(-np.inf)
    ub.append(np.inf)
    p0 = np.clip(p0, lb, ub)

    def model(p):
        out = np.full_like(x, p[-1])
        for i in range(k):
            out += lorentzian(x, *p[npp * i:npp * i + npp])
        return out

    res = optimize.least_squares(lambda p: model(p) - yn, p0, bounds=(lb, ub),
                                 max_nfev=max_nfev, x_scale="jac", method="trf")
    rel = float(np.sqrt(np.mean(res.fun ** 2)) / np.sqrt(np.mean(yn ** 2)))
    fits = []
    for i in range(k):
        c, w, h = res.x[npp * i:npp * i + 3]
        asym = float(res.x[npp * i + 3]) if dispersive else 0.0
        fits.append(PeakFit(float(c), float(w), float(h * scale), float(_area(h * scale, w)), rel,
                            float(res.x[-1] * scale), bool(res.success and rel < residual_tol), asym))
    return sorted(fits, key=lambda f: f.center)


def fit_peaks(spectrum: Spectrum, windows, span=1.5, max_nfev=400, residual_tol=0.05,
              dispersive=False):
    """Fit one Lorentzian plus baseline inside each (center_guess, fwhm_guess) window.

    The fit region is center +- span * fwhm_guess. Failed fits are flagged
    through ``converged`` rather than raised.
    """
    regions = sorted((c - span * w, c + span * w) for c, w in windows)
    for (a0, a1), (b0, b1) in zip(regions, regions[1:]):
        if b0 < a1:
            raise ValueError("fit windows overlap")
    out = []
    for c, w in windows:
        try:
            out.append(fit_multiplet(spectrum, [c], w, c - span * w, c + span * w,
                                     max_nfev, residual_tol, dispersive)[0])
        except ValueError:
            out.append(PeakFit(c, w, float("nan"), float("nan"), float("inf"), 0.0, False))
    return out


def fit_triplet(spectrum: Spectrum, center, splitting, width_guess, pad=2.0, **kw):
    """Joint three-Lorentzian fit of a (possibly overlapping) Mollow triplet."""
    lo = center - splitting - pad * width_guess
    hi = center + splitting + pad * width_guess
    return fit_multiplet(spectrum, [center - splitting, center, center + splitting],
                         width_guess, lo, hi, **kw)


def count_local_maxima(spectrum: Spectrum, lo, hi, rel_prominence=1e-3):
    sel = (spectrum.omega >= lo) & (spectrum.omega <= hi)
    y = spectrum.values[sel]
    if y.size < 3:
        return 0
    peaks, _ = signal.find_peaks(y, prominence=rel_prominence * float(np.max(y)))
    return int(peaks.size)


def is_resolved_triplet(spectrum: Spectrum, center, splitting, side_fwhm):
    """Three-peak test: exactly three local maxima around ``center``."""
    half = splitting + 2.0 * side_fwhm
    return count_local_maxima(spectrum, center - half, center + half) == 3


@dataclass(frozen=True)
class DephasingModel:
    mu: float = 4.7e-7  # ps^5
    omega_c: float = 8.6  # ps^-1

    def __post_init__(self):
        if not (self.mu > 0 and self.omega_c > 0):
            raise ValueError("mu and omega_c must be positive")

    @property
    def omega_c_mev(self):
        return self.omega_c * HBAR


def _kernel(w, omega_c):
    # 8 (3 - e^{-2a} P4(a)) / a^5 = 24 P(5, 2a) / a^5 with P the regularized
    # lower incomplete gamma; avoids cancellation at small a
    a = 2.0 * (w / omega_c) ** 2
    small = a < 1e-3
    a_safe = np.where(small, 1.0, a)
    big = 24.0 * special.gammainc(5, 2.0 * a_safe) / a_safe ** 5
    series = 32.0 / 5.0 - 32.0 * a / 3.0 + 64.0 * a * a / 7.0
    return np.where(small, series, big)


def dephasing_integrand(w, temperature, model: DephasingModel):
    """w^6 N(N+1) K(w) with w in ps^-1."""
    kt = K_B * temperature / HBAR
    x = np.asarray(w, dtype=float) / kt
    # N(N+1) = 1 / (4 sinh^2(x/2))
    occ = 0.25 / np.sinh(0.5 * x) ** 2
    return w ** 6 * occ * _kernel(w, model.omega_c)


def dephasing_rate(temperature, model: DephasingModel = DephasingModel(), rtol=1e-8):
    """Pure-dephasing rate in µeV at ``temperature`` (K).

    The integrand is even in w and the integral runs over the whole real
    line (twice the half-line integral).
    """
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    kt = K_B * temperature / HBAR
    # N(w) < 1e-300 beyond w = 690 kT
    upper = min(50.0 * model.omega_c, 690.0 * kt)
    pts = sorted({p for p in (kt, 5 * kt, model.omega_c, 3 * model.omega_c) if p < upper})
    val, err = integrate.quad(dephasing_integrand, 0.0, upper, args=(temperature, model),
                              points=pts, epsabs=0.0, epsrel=rtol * 1e-2, limit=500)
    if not err <= rtol * abs(val):
        raise QuadratureError(f"dephasing quadrature error {err:.2e} exceeds tolerance")
    return 2.0 * model.mu * val * HBAR * 1e3

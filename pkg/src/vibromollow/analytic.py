"""Closed-form first-order correlation functions and their spectra.

A correlation function is stored as a finite sum of damped exponentials

    G(tau) = sum_k A_k exp(-(d_k + i f_k) tau),

so its spectrum S(w) = int g(tau) exp(i w tau) dtau, with g(-tau) = g(tau)*,
is a sum of complex Lorentzians peaked at w = f_k. Decays and frequencies
are angular rates in ps^-1; frequency grids handed in and out are meV
offsets from the polaron-shifted zero-phonon line. Sidebands appear at
negative offsets.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import special, stats
from scipy.linalg import expm

from . import kernels
from .constants import HBAR, mev_to_rate
from .model import DerivedQuantities, EmitterParams, ModelError, VibronicSystem, derive

DEFAULT_TERM_CUTOFF = 1e-8
DEFAULT_MAX_TERMS = 200_000


class TermBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ExponentialTerm:
    amplitude: complex
    decay: float
    frequency: float

    def __call__(self, tau):
        return self.amplitude * np.exp(-(self.decay + 1j * self.frequency) * np.asarray(tau))


@dataclass(frozen=True)
class CorrelationModel:
    """Sum-of-exponentials representation of G1(tau).

    ``orders[k]`` is the phonon multi-index of term k and ``branch[k]`` is
    0 for a central peak and +1/-1 for the side peak carrying Lambda_+/-.
    ``coherent_weight`` is the weight of the elastic delta peak at the
    laser frequency. Evaluation divides by ``normalization``.
    """

    amplitude: np.ndarray
    decay: np.ndarray
    frequency: np.ndarray
    orders: np.ndarray
    branch: np.ndarray
    coherent_weight: float = 0.0
    normalization: float = 1.0
    dropped_weight: float = 0.0
    gamma: float = 0.0  # emitter decay, ps^-1; sets the default laser width
    method: str = ""

    def __len__(self):
        return self.amplitude.shape[0]

    @property
    def terms(self):
        return [ExponentialTerm(complex(a), float(d), float(f))
                for a, d, f in zip(self.amplitude, self.decay, self.frequency)]

    @property
    def retained_weight(self) -> float:
        """Phonon (Poisson) weight carried by the retained terms."""
        return 1.0 - self.dropped_weight

    def evaluate(self, tau, include_coherent=False):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        rate = -(self.decay + 1j * self.frequency)
        out = kernels.exp_sum(self.amplitude, rate, tau)
        if include_coherent:
            out = out + self.coherent_weight
        return out / self.normalization

    def select(self, mask) -> "CorrelationModel":
        mask = np.asarray(mask)
        return replace(self, amplitude=self.amplitude[mask], decay=self.decay[mask],
                       frequency=self.frequency[mask], orders=self.orders[mask],
                       branch=self.branch[mask])


@dataclass(frozen=True)
class Spectrum:
    """Intensity on a grid of meV offsets from the zero-phonon line.

    Values are per unit angular frequency (ps), so that
    ``integrated_weight`` returns int S dw / 2pi with w in ps^-1.
    """

    omega: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.omega.ndim != 1 or self.omega.shape != self.values.shape:
            raise ValueError("omega and values must be 1-D arrays of equal length")
        if self.omega.size > 1 and not np.all(np.diff(self.omega) > 0):
            raise ValueError("frequency grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrum contains non-finite values")

    def integrated_weight(self, lo=None, hi=None) -> float:
        sel = np.ones(self.omega.shape, dtype=bool)
        if lo is not None:
            sel &= self.omega >= lo
        if hi is not None:
            sel &= self.omega <= hi
        w = mev_to_rate(self.omega[sel])
        return float(np.trapezoid(self.values[sel], w) / (2.0 * np.pi))

    def window(self, lo, hi) -> "Spectrum":
        sel = (self.omega >= lo) & (self.omega <= hi)
        return Spectrum(self.omega[sel], self.values[sel], dict(self.metadata))


def phonon_correlation(modes, tau):
    """Phonon part G_ph(tau) of the dressed correlation; tau in ps."""
    tau = np.asarray(tau, dtype=float)
    expo = np.zeros(tau.shape, dtype=complex)
    for m in modes:
        beta = (m.eta / m.nu) ** 2
        if beta == 0.0:
            continue
        rate = mev_to_rate(0.5 * m.kappa) + 1j * mev_to_rate(m.nu)
        expo -= beta * (1.0 - np.exp(-rate * tau))
    return np.exp(expo)


def _side_decay(dq: DerivedQuantities) -> float:
    return (3.0 * dq.gamma + 2.0 * dq.gamma_pd) / 4.0


def atomic_terms(dq: DerivedQuantities):
    """Central and two side terms of the strongly driven emitter (rates in ps^-1)."""
    split = dq.require_splitting()
    side = mev_to_rate(_side_decay(dq))
    return [
        ExponentialTerm(0.25 + 0j, mev_to_rate(dq.total_dephasing / 2.0), 0.0),
        ExponentialTerm(dq.lambda_plus, side, -mev_to_rate(split)),
        ExponentialTerm(dq.lambda_minus, side, mev_to_rate(split)),
    ]


def coherent_weight(dq: DerivedQuantities) -> float:
    """|<sigma>_ss|^2 = a s / (2 (s + 1)^2)."""
    s, a = dq.saturation_s, dq.ratio_a
    return a * s / (2.0 * (s + 1.0) ** 2)


def _assemble(dq, weights, orders, decay_shift, freq_shift, dropped, method, zpl_weight):
    """Replicate the atomic triplet once per phonon multi-index.

    ``decay_shift`` and ``freq_shift`` are per-index offsets in meV.
    """
    split = dq.require_splitting()
    weights = np.asarray(weights, dtype=float)
    n = weights.shape[0]
    base_amp = np.array([0.25, dq.lambda_plus, dq.lambda_minus], dtype=complex)
    base_decay = np.array([dq.total_dephasing / 2.0, _side_decay(dq), _side_decay(dq)])
    base_freq = np.array([0.0, -split, split])
    amp = (weights[:, None] * base_amp[None, :]).ravel()
    decay = mev_to_rate(base_decay[None, :] + np.asarray(decay_shift)[:, None]).ravel()
    freq = mev_to_rate(base_freq[None, :] + np.asarray(freq_shift)[:, None]).ravel()
    orders = np.repeat(np.asarray(orders, dtype=np.int64).reshape(n, -1), 3, axis=0)
    branch = np.tile(np.array([0, 1, -1], dtype=np.int64), n)
    return CorrelationModel(
        amplitude=amp, decay=decay, frequency=freq, orders=orders, branch=branch,
        coherent_weight=zpl_weight * coherent_weight(dq),
        dropped_weight=float(dropped), gamma=mev_to_rate(dq.gamma), method=method,
    )


def _apply_cutoff(weights, cutoff):
    if cutoff <= 0 or weights.size == 0:
        return np.ones(weights.shape, dtype=bool)
    return weights >= cutoff * weights.max()


def g1_single_mode(system: VibronicSystem, n_max: int, term_cutoff=DEFAULT_TERM_CUTOFF):
    """Poisson series over phonon replicas n = 0..n_max of a single mode."""
    if len(system.modes) != 1:
        raise ModelError(f"single-mode series needs exactly one mode, got {len(system.modes)}")
    if n_max < 0:
        raise ModelError("n_max must be >= 0")
    dq = derive(system)
    mode = system.modes[0]
    beta = mode.beta
    n = np.arange(n_max + 1)
    weights = stats.poisson.pmf(n, beta) if beta > 0 else (n == 0).astype(float)
    keep = _apply_cutoff(weights, term_cutoff)
    tail = stats.poisson.sf(n_max, beta) if beta > 0 else 0.0
    dropped = tail + math.fsum(weights[~keep])
    n = n[keep]
    return _assemble(dq, weights[keep], n[:, None], n * mode.kappa / 2.0, -n * mode.nu,
                     dropped, "analytic_single", math.exp(-beta))


def g1_multimode_first_replica(system: VibronicSystem):
    """Zero-phonon triplet plus one first-replica triplet per mode (linear in beta_j)."""
    if not system.modes:
        raise ModelError("first-replica form needs at least one mode")
    dq = derive(system)
    m = len(system.modes)
    betas = np.array([md.beta for md in system.modes])
    zpl = math.exp(-dq.beta_tilde)
    weights = zpl * np.concatenate(([1.0], betas))
    orders = np.vstack([np.zeros((1, m), dtype=np.int64), np.eye(m, dtype=np.int64)])
    kappa = np.array([0.0] + [md.kappa for md in system.modes])
    nu = np.array([0.0] + [md.nu for md in system.modes])
    dropped = 1.0 - zpl * (1.0 + dq.beta_tilde)
    return _assemble(dq, weights, orders, kappa / 2.0, -nu, dropped,
                     "analytic_first_replica", zpl)


def _log_poisson(n, beta):
    if beta == 0.0:
        return 0.0 if n == 0 else -math.inf
    return -beta + n * math.log(beta) - math.lgamma(n + 1)


def enumerate_orders(betas, weight_threshold, max_terms=DEFAULT_MAX_TERMS):
    """All phonon multi-indices whose product-Poisson weight is >= threshold.

    Best-first search from the most probable index. Each factor is
    unimodal, so every superlevel set is connected under +-1 steps and the
    search is exhaustive.
    """
    betas = [float(b) for b in betas]
    log_thr = math.log(weight_threshold)
    start = tuple(int(math.floor(b)) for b in betas)

    def logw(idx):
        return math.fsum(_log_poisson(n, b) for n, b in zip(idx, betas))

    heap = [(-logw(start), start)]
    seen = {start}
    found = []
    while heap:
        neg, idx = heapq.heappop(heap)
        if -neg < log_thr:
            continue
        found.append((idx, math.exp(-neg)))
        if len(found) > max_terms:
            raise TermBudgetExceeded(
                f"more than {max_terms} phonon multi-indices above weight {weight_threshold:g}")
        for j in range(len(betas)):
            for step in (1, -1):
                nxt = list(idx)
                nxt[j] += step
                if nxt[j] < 0:
                    continue
                nxt = tuple(nxt)
                if nxt in seen:
                    continue
                seen.add(nxt)
                lw = logw(nxt)
                if lw >= log_thr:
                    heapq.heappush(heap, (-lw, nxt))
    found.sort()
    return found


def g1_multimode_general(system: VibronicSystem, weight_threshold=1e-6,
                         max_terms=DEFAULT_MAX_TERMS, term_cutoff=DEFAULT_TERM_CUTOFF):
    """Full product expansion over all modes (overtones and combination lines)."""
    if not 0.0 < weight_threshold < 1.0:
        raise ModelError("weight_threshold must lie in (0, 1)")
    dq = derive(system)
    modes = system.modes
    if not modes:
        found = [((), 1.0)]
    else:
        found = enumerate_orders([m.beta for m in modes], weight_threshold, max_terms)
    orders = np.array([idx for idx, _ in found], dtype=np.int64).reshape(len(found), len(modes))
    weights = np.array([w for _, w in found])
    keep = _apply_cutoff(weights, term_cutoff)
    orders, weights = orders[keep], weights[keep]
    kappa = np.array([m.kappa for m in modes])
    nu = np.array([m.nu for m in modes])
    dropped = max(0.0, 1.0 - math.fsum(weights))
    return _assemble(dq, weights, orders, orders @ kappa / 2.0, -(orders @ nu), dropped,
                     "analytic_general", math.exp(-dq.beta_tilde))


def _tls_generator(emitter: EmitterParams, omega_renorm):
    g = mev_to_rate(emitter.gamma)
    big = mev_to_rate(emitter.total_dephasing)
    om = mev_to_rate(omega_renorm)
    return np.array([
        [-big / 2.0, 0.0, 0.5j * om],
        [0.0, -big / 2.0, -0.5j * om],
        [1j * om, -1j * om, -g],
    ], dtype=complex)


def tls_regression_exact(emitter: EmitterParams, omega_renorm, tau):
    """Atomic <sigma^dagger(0) sigma(tau)> without the strong-drive approximation.

    Evolves the fluctuation vector under the 3x3 Bloch generator and adds
    the coherent product |<sigma>|^2. ``omega_renorm`` in meV, ``tau`` in ps.
    """
    tau = np.asarray(tau, dtype=float)
    gen = _tls_generator(emitter, omega_renorm)
    s = 2.0 * omega_renorm ** 2 / (emitter.gamma * emitter.total_dephasing)
    a = emitter.gamma / emitter.total_dephasing
    pref = s / (2.0 * (s + 1.0) ** 2)
    x0 = pref * np.array([s + 1.0 - a, a, -1j * math.sqrt(2.0 * a * s)])
    coh = a * s / (2.0 * (s + 1.0) ** 2)
    evals, vecs = np.linalg.eig(gen)
    if np.linalg.cond(vecs) < 1e8:
        coef = vecs[0, :] * np.linalg.solve(vecs, x0)
        out = kernels.exp_sum(coef, evals, np.ravel(tau)).reshape(tau.shape)
    else:  # near-defective generator at the splitting threshold
        out = np.array([(expm(gen * t) @ x0)[0] for t in np.ravel(tau)]).reshape(tau.shape)
    return out + coh


def g1_mean_field(system: VibronicSystem, tau, normalized=True):
    """Factorized G_ph(tau) * <sigma^dagger sigma(tau)> with the exact atomic part."""
    dq = derive(system)
    g = phonon_correlation(system.modes, tau) * tls_regression_exact(
        system.emitter, dq.omega_renorm, tau)
    if normalized:
        g = g / dq.excited_population if dq.excited_population > 0 else g
    return g


def normalize(model: CorrelationModel, dq: DerivedQuantities, mode="strong_drive"):
    if mode == "strong_drive":
        norm = 0.5
    elif mode == "exact":
        norm = dq.excited_population
    elif mode == "none":
        norm = 1.0
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return replace(model, normalization=norm)


def spectrum_from_model(model: CorrelationModel, omega, include_coherent=False, laser_width=None):
    """Sum-of-Lorentzians spectrum on a meV grid.

    The elastic peak is drawn as a Lorentzian of FWHM ``laser_width`` (meV,
    default 1% of gamma) carrying the exact coherent weight.
    """
    omega = np.asarray(omega, dtype=float)
    w = mev_to_rate(omega)
    values = kernels.lorentzian_sum(model.amplitude, model.decay, model.frequency, w)
    meta = {
        "method": model.method,
        "normalization": model.normalization,
        "dropped_weight": model.dropped_weight,
        "n_terms": len(model),
        "include_coherent": bool(include_coherent),
        "coherent_weight": model.coherent_weight,
    }
    if include_coherent and model.coherent_weight > 0:
        eps = mev_to_rate(laser_width) if laser_width is not None else 0.01 * model.gamma
        hw = eps / 2.0
        values = values + model.coherent_weight * 2.0 * hw / (hw * hw + w * w)
        meta["laser_width_meV"] = eps * HBAR
    return Spectrum(omega, values / model.normalization, meta)


def adaptive_grid(model: CorrelationModel, omega_min, omega_max, coarse_step,
                  points_per_fwhm=16, span=10.0, min_weight=0.0):
    """Coarse uniform meV grid refined around every retained peak."""
    if not omega_max > omega_min or not coarse_step > 0:
        raise ValueError("invalid grid bounds")
    parts = [np.arange(omega_min, omega_max + 0.5 * coarse_step, coarse_step)]
    centers = model.frequency * HBAR
    hwhm = model.decay * HBAR
    sel = np.abs(model.amplitude) >= min_weight
    seen = set()
    for c, h in zip(centers[sel], hwhm[sel]):
        step = 2.0 * h / points_per_fwhm
        if step <= 0 or c + span * h < omega_min or c - span * h > omega_max:
            continue
        key = (round(c / step), round(math.log(step), 1))
        if key in seen:
            continue
        seen.add(key)
        parts.append(np.arange(c - span * h, c + span * h + 0.5 * step, step))
    grid = np.concatenate(parts)
    grid = grid[(grid >= omega_min) & (grid <= omega_max)]
    grid = np.unique(np.round(grid, 12))
    return grid


def poisson_weights(beta, n_max):
    """e^-beta beta^n / n! for n = 0..n_max."""
    n = np.arange(n_max + 1)
    if beta == 0:
        return (n == 0).astype(float)
    return np.exp(-beta + n * math.log(beta) - special.gammaln(n + 1))

"""Exact reference: the polaron-frame master equation on a truncated Fock space.

Density matrices are vectorized row-major, so vec(A X B) = (A kron B^T) vec(X).
The Hilbert space is ordered emitter (g, e) x mode_1 x ... x mode_M. Rates
inside the workspace are angular rates in ps^-1.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy import stats
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from . import kernels
from .analytic import Spectrum, g1_mean_field
from .constants import HBAR, mev_to_rate
from .model import PhononMode, VibronicSystem

DEFAULT_MAX_HILBERT = 64
DENSE_EIG_LIMIT = 1600  # Liouvillian dimension up to which dense eig is used


class TruncationError(RuntimeError):
    pass


class DegenerateSteadyStateError(RuntimeError):
    pass


class InsufficientDecayError(RuntimeError):
    pass


class StepperError(RuntimeError):
    pass


def default_fock_levels(beta: float, tol: float = 1e-8, minimum: int = 8) -> int:
    """Smallest N whose Poisson tail beyond N - 2 quanta is below ``tol``."""
    n = minimum
    while beta > 0 and stats.poisson.sf(n - 3, beta) >= tol:
        n += 1
    return n


@dataclass(frozen=True)
class TruncationConfig:
    fock_levels: Optional[tuple] = None  # per mode; None -> default_fock_levels
    tau_max: float = 30.0  # ps
    dt: float = 0.01  # ps
    steady_state_method: str = "null-space"
    max_hilbert_dim: int = DEFAULT_MAX_HILBERT
    leakage_tol: float = 1e-6
    displacement_tol: float = 1e-6

    def resolve_levels(self, modes) -> tuple:
        if self.fock_levels is None:
            return tuple(default_fock_levels(m.beta) for m in modes)
        levels = tuple(int(n) for n in self.fock_levels)
        if len(levels) == 1 and len(modes) > 1:
            levels = levels * len(modes)
        if len(levels) != len(modes):
            raise TruncationError(f"{len(levels)} Fock truncations given for {len(modes)} modes")
        if any(n < 2 for n in levels):
            raise TruncationError("fock_levels must be >= 2")
        return levels

    def tau_grid(self):
        n = int(round(self.tau_max / self.dt))
        return np.arange(n + 1) * self.dt


@dataclass
class OracleWorkspace:
    system: VibronicSystem
    levels: tuple
    dims: tuple
    sigma: np.ndarray
    sigma_z: np.ndarray
    b: list
    b_plus: np.ndarray
    b_minus: np.ndarray
    hamiltonian: np.ndarray  # ps^-1
    liouvillian: sp.csr_matrix
    displacement_error: float
    leakage_tol: float = 1e-6
    rho_ss: Optional[np.ndarray] = None
    leakage: Optional[float] = None
    _eig: Optional[tuple] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def apply(self, x):
        """L acting on a density-matrix-shaped array."""
        return (self.liouvillian @ x.reshape(-1)).reshape(x.shape)

    def eig(self):
        if self._eig is None:
            if self.liouvillian.shape[0] > DENSE_EIG_LIMIT:
                raise StepperError("Liouvillian too large for dense eigen-decomposition; use stepper='ode'")
            evals, vecs = sla.eig(self.liouvillian.toarray())
            self._eig = (evals, vecs, sla.lu_factor(vecs))
        return self._eig


def _kron_all(ops):
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def _annihilation(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


def _displacement_check(alpha, n):
    """Largest error of the truncated B_- column |0> against the exact coherent state,
    over levels below n/2."""
    a = _annihilation(n).real
    col = sla.expm(-alpha * (a.T - a))[:, 0]
    k = np.arange(n)
    exact = np.exp(-alpha * alpha / 2) * (-alpha) ** k / np.sqrt(np.exp([math.lgamma(i + 1) for i in k]))
    half = max(1, n // 2)
    return float(np.max(np.abs(col[:half] - exact[:half])))


def _superop_dissipator(c, rate):
    c = sp.csr_matrix(c)
    cd = c.conj().T.tocsr()
    cdc = (cd @ c).tocsr()
    ident = sp.identity(c.shape[0], dtype=complex, format="csr")
    return rate * (sp.kron(c, cd.T) - 0.5 * sp.kron(cdc, ident) - 0.5 * sp.kron(ident, cdc.T))


def build_workspace(system: VibronicSystem, trunc: TruncationConfig = TruncationConfig()) -> OracleWorkspace:
    modes = system.modes
    levels = trunc.resolve_levels(modes)
    dims = (2,) + levels
    hdim = int(np.prod(dims))
    if hdim > trunc.max_hilbert_dim:
        raise TruncationError(f"Hilbert dimension {hdim} exceeds budget {trunc.max_hilbert_dim}")
    if modes:
        nu_max = mev_to_rate(max(m.nu for m in modes))
        if not trunc.dt < 2 * np.pi / nu_max / 10:
            raise TruncationError(
                f"dt = {trunc.dt} ps does not resolve the fastest mode (need < {2 * np.pi / nu_max / 10:.4g} ps)")

    eye2 = np.eye(2, dtype=complex)
    eyes = [np.eye(n, dtype=complex) for n in levels]
    sm = np.zeros((2, 2), dtype=complex)
    sm[0, 1] = 1.0  # |g><e|
    sigma = _kron_all([sm] + eyes)
    sigma_z = _kron_all([np.diag([-1.0, 1.0]).astype(complex)] + eyes)
    b_ops, gen = [], np.zeros((hdim, hdim), dtype=complex)
    disp_err = 0.0
    for j, (mode, n) in enumerate(zip(modes, levels)):
        ops = [eye2] + eyes[:]
        ops[j + 1] = _annihilation(n)
        bj = _kron_all(ops)
        b_ops.append(bj)
        alpha = mode.eta / mode.nu
        gen += alpha * (bj.conj().T - bj)
        disp_err = max(disp_err, _displacement_check(alpha, n))
    if disp_err >= trunc.displacement_tol:
        raise TruncationError(f"displacement operator truncation error {disp_err:.2e} >= {trunc.displacement_tol:g}")
    if modes:
        b_plus = sla.expm(gen)
        b_minus = sla.expm(-gen)
    else:
        b_plus = b_minus = np.eye(hdim, dtype=complex)

    em = system.emitter
    sd = sigma.conj().T
    ham = mev_to_rate(em.detuning) * (sd @ sigma)
    for mode, bj in zip(modes, b_ops):
        ham = ham + mev_to_rate(mode.nu) * (bj.conj().T @ bj)
    ham = ham + 0.5 * mev_to_rate(system.drive.omega_bare) * (sigma @ b_minus + sd @ b_plus)
    ham = 0.5 * (ham + ham.conj().T)

    hs = sp.csr_matrix(ham)
    ident = sp.identity(hdim, dtype=complex, format="csr")
    liou = -1j * (sp.kron(hs, ident) - sp.kron(ident, hs.T))
    liou = liou + _superop_dissipator(sigma @ b_minus, mev_to_rate(em.gamma))
    if em.gamma_pd > 0:
        liou = liou + _superop_dissipator(sd @ sigma, 2.0 * mev_to_rate(em.gamma_pd))
    for mode, bj in zip(modes, b_ops):
        if mode.kappa > 0:
            liou = liou + _superop_dissipator(bj, mev_to_rate(mode.kappa))
    liou = sp.csr_matrix(liou)
    liou.eliminate_zeros()
    return OracleWorkspace(system, levels, dims, sigma, sigma_z, b_ops, b_plus, b_minus,
                           ham, liou, disp_err, trunc.leakage_tol)


def _leakage(ws: OracleWorkspace, rho) -> float:
    """Largest population of the highest Fock level over all modes."""
    diag = np.real(np.diagonal(rho)).reshape(ws.dims)
    worst = 0.0
    for j in range(len(ws.levels)):
        axes = tuple(i for i in range(len(ws.dims)) if i != j + 1)
        worst = max(worst, float(diag.sum(axis=axes)[-1]))
    return worst


def steady_state(ws: OracleWorkspace, method: Optional[str] = None, degeneracy_tol=1e-9):
    """Unit-trace null vector of the Liouvillian; cached on the workspace."""
    method = method or "null-space"
    n = ws.dim
    if method == "null-space":
        dense = ws.liouvillian.toarray()
        _, svals, vh = sla.svd(dense)
        scale = svals[0]
        if svals[-2] < degeneracy_tol * scale:
            raise DegenerateSteadyStateError(
                f"null space of dimension > 1 (singular values {svals[-1]:.2e}, {svals[-2]:.2e})")
        vec = vh[-1].conj()
    elif method == "long-time-propagation":
        rho0 = np.zeros((n, n), dtype=complex)
        rho0[0, 0] = 1.0
        t_long = 50.0 / mev_to_rate(ws.system.emitter.gamma)
        vec = expm_multiply(ws.liouvillian * t_long, rho0.reshape(-1))
    else:
        raise ValueError(f"unknown steady-state method {method!r}")
    rho = vec.reshape(n, n)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    ws.rho_ss = rho
    ws.leakage = _leakage(ws, rho)
    if ws.leakage >= ws.leakage_tol:
        raise TruncationError(f"top Fock level holds population {ws.leakage:.2e}; increase fock_levels")
    return rho


def steady_state_residual(ws: OracleWorkspace) -> float:
    """||L rho_ss|| / ||L|| (Frobenius / spectral-norm estimate)."""
    r = ws.liouvillian @ ws.rho_ss.reshape(-1)
    norm_l = sp.linalg.norm(ws.liouvillian)
    return float(np.linalg.norm(r) / norm_l)


def _correlator_vectors(ws: OracleWorkspace):
    if ws.rho_ss is None:
        steady_state(ws)
    sd = ws.sigma.conj().T
    x0 = (ws.rho_ss @ (sd @ ws.b_plus)).reshape(-1)
    obs = (ws.sigma @ ws.b_minus).T.reshape(-1)  # Tr[O X] = vec(O^T) . vec(X)
    return x0, obs


def propagate(ws: OracleWorkspace, x0, tau, stepper="eig"):
    """exp(L tau) x0 for every tau; returns array of shape (len(tau), dim, dim)."""
    tau = np.asarray(tau, dtype=float)
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    if stepper == "eig":
        evals, vecs, lu = ws.eig()
        c = sla.lu_solve(lu, x0)
        out = (vecs[None, :, :] * (c * np.exp(np.outer(tau, evals)))[:, None, :]).sum(axis=2)
    elif stepper == "ode":
        out = _ode(ws, x0, tau).T
    else:
        raise ValueError(f"unknown stepper {stepper!r}")
    return out.reshape(len(tau), ws.dim, ws.dim)


def _ode(ws, x0, tau, rtol=1e-11, atol=1e-13):
    liou = ws.liouvillian
    sol = solve_ivp(lambda t, y: liou @ y, (0.0, float(tau[-1])), x0, method="DOP853",
                    t_eval=tau, rtol=rtol, atol=atol)
    if not sol.success:
        raise StepperError(sol.message)
    return sol.y


def g1_numeric(ws: OracleWorkspace, tau, stepper="eig"):
    """Tr[(sigma B_-) exp(L tau) (rho_ss sigma^dagger B_+)] on ``tau`` (ps), unnormalized."""
    tau = np.asarray(tau, dtype=float)
    x0, obs = _correlator_vectors(ws)
    if stepper == "eig":
        evals, vecs, lu = ws.eig()
        coef = (obs @ vecs) * sla.lu_solve(lu, x0)
        return kernels.exp_sum(coef, evals, tau)
    if stepper == "ode":
        return obs @ _ode(ws, x0, tau)
    raise ValueError(f"unknown stepper {stepper!r}")


def coherent_limit(ws: OracleWorkspace) -> complex:
    """Long-time limit |<sigma B_->|^2 of the correlator (the elastic part)."""
    if ws.rho_ss is None:
        steady_state(ws)
    m = np.trace(ws.sigma @ ws.b_minus @ ws.rho_ss)
    return abs(m) ** 2


def spectrum_numeric(g1, dt, window=0.0, pad_factor=4, tail_tol=1e-4) -> Spectrum:
    """Spectrum of a uniformly sampled correlator via FFT.

    ``window`` (ps^-1) multiplies the series by exp(-window tau), which adds
    2 * window to every FWHM. The discrete sum obeys Parseval exactly:
    sum(S) dw / 2pi = g1[0].
    """
    g = np.asarray(g1, dtype=complex)
    if abs(g[-1]) > tail_tol * abs(g[0]):
        raise InsufficientDecayError(
            f"|g1(tau_max)| / |g1(0)| = {abs(g[-1]) / abs(g[0]):.2e} > {tail_tol:g}; extend tau_max")
    n = g.shape[0]
    tau = np.arange(n) * dt
    if window > 0:
        g = g * np.exp(-window * tau)
    m = int(pad_factor * n)
    padded = np.zeros(m, dtype=complex)
    padded[:n] = g
    f = np.fft.ifft(padded) * m
    vals = dt * (2.0 * f.real - g[0].real)
    w = 2.0 * np.pi * np.fft.fftfreq(m, d=dt)
    order = np.argsort(w)
    meta = {"method": "oracle_fft", "dt_ps": dt, "window_per_ps": window,
            "added_fwhm_meV": 2.0 * window * HBAR, "pad_factor": pad_factor}
    return Spectrum(w[order] * HBAR, vals[order], meta)


def rmse(series_a, series_b, tau=None, t_max=30.0) -> float:
    """Root-mean-square difference of |a| and |b| over tau in [0, t_max]."""
    a = np.asarray(series_a)
    b = np.asarray(series_b)
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    if tau is not None:
        tau = np.asarray(tau)
        if tau.shape != a.shape:
            raise ValueError("tau grid does not match series")
        sel = tau <= t_max + 1e-12
        a, b = a[sel], b[sel]
    return float(np.sqrt(np.mean((np.abs(a) - np.abs(b)) ** 2)))


@dataclass
class CompareResult:
    tau: np.ndarray
    g1_analytic: np.ndarray
    g1_numeric: np.ndarray
    rmse: float
    levels: tuple
    leakage: float
    coherent: float = 0.0  # elastic limit of the raw numeric correlator
    norm: float = 1.0  # raw numeric g1(0) used to normalize


def compare(system: VibronicSystem, trunc: TruncationConfig = TruncationConfig(), t_max=30.0,
            stepper="eig") -> CompareResult:
    """Normalized |g1| from the factorized analytic form against the oracle."""
    tau = trunc.tau_grid()
    ws = build_workspace(system, trunc)
    steady_state(ws, trunc.steady_state_method)
    raw = g1_numeric(ws, tau, stepper)
    norm = raw[0].real
    num = raw / norm
    ana = g1_mean_field(system, tau)
    return CompareResult(tau, ana, num, rmse(ana, num, tau, t_max), ws.levels, ws.leakage,
                         coherent_limit(ws), norm)


@dataclass
class ValidityScan:
    eta_over_nu: np.ndarray
    omega_over_eta: np.ndarray
    rmse: np.ndarray  # shape (len(eta_over_nu), len(omega_over_eta)); nan on failure
    cutoff: float = 0.05
    failures: list = field(default_factory=list)

    def boundary(self):
        """Per eta/nu row: largest Omega/eta still at or below the cutoff (nan if none)."""
        out = np.full(self.eta_over_nu.shape, np.nan)
        for i, row in enumerate(self.rmse):
            ok = np.where(row <= self.cutoff)[0]
            if ok.size:
                out[i] = self.omega_over_eta[ok.max()]
        return out


def _scan_point(args):
    base, r, q, trunc, t_max = args
    nu = base.modes[0].nu
    kappa = base.modes[0].kappa
    eta = r * nu
    sysp = base.with_modes([PhononMode(nu, eta, kappa)]).with_drive(q * eta)
    try:
        res = compare(sysp, trunc, t_max)
        return res.rmse, None
    except Exception as exc:  # recorded per point, scan continues
        return float("nan"), f"{type(exc).__name__}: {exc}"


def validity_scan(base_system: VibronicSystem, eta_over_nu: Sequence[float],
                  omega_over_eta: Sequence[float], trunc: Optional[TruncationConfig] = None,
                  t_max=30.0, cutoff=0.05, workers=1) -> ValidityScan:
    """RMSE map between factorized analytic and exact |g1| for a single mode.

    The mode energy and decay come from ``base_system.modes[0]``; the
    coupling and drive are set by the grid.
    """
    if len(base_system.modes) != 1:
        raise ValueError("validity scan needs a single-mode base system")
    trunc = trunc or TruncationConfig(tau_max=t_max)
    eta_over_nu = np.asarray(eta_over_nu, dtype=float)
    omega_over_eta = np.asarray(omega_over_eta, dtype=float)
    jobs = [(base_system, r, q, trunc, t_max) for r in eta_over_nu for q in omega_over_eta]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_point, jobs))
    else:
        results = [_scan_point(j) for j in jobs]
    vals = np.array([r[0] for r in results]).reshape(len(eta_over_nu), len(omega_over_eta))
    failures = [(float(j[1]), float(j[2]), r[1]) for j, r in zip(jobs, results) if r[1]]
    return ValidityScan(eta_over_nu, omega_over_eta, vals, cutoff, failures)

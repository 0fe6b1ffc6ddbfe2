"""Computations behind each CLI subcommand; each returns a :class:`Table`."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analytic, oracle
from .analytic import Spectrum
from .calibrate import CalibrationInput, calibration_row
from .config import RunConfig, resolve, with_drive_value
from .constants import HBAR, uev
from .io import Table
from .model import derive
from .observables import (
    DephasingModel,
    dephasing_rate,
    predicted_linewidths,
    resolvability_threshold,
    triplet_ratios,
)
from .presets import DBT_GAMMA_UEV, DBT_WAVELENGTH_NM

DEFAULT_TEMPERATURES = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 11.5, 15.0, 20.0)
DEFAULT_CAL_OMEGAS = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 50.0)
TARGET_TAIL = 1e-5  # relative |g1| at tau_max after the automatic FFT window


def build_model(cfg: RunConfig) -> analytic.CorrelationModel:
    system, a = cfg.system, cfg.section("analytic")
    if cfg.method == "analytic_single":
        model = analytic.g1_single_mode(system, a["n_max"], a["term_cutoff"])
    elif cfg.method == "analytic_first_replica":
        model = analytic.g1_multimode_first_replica(system)
    elif cfg.method == "analytic_general":
        model = analytic.g1_multimode_general(system, a["weight_threshold"],
                                              term_cutoff=a["term_cutoff"])
    else:
        raise ValueError(f"method {cfg.method!r} has no closed-form model")
    return analytic.normalize(model, derive(system), cfg.section("output")["normalization"])


def _norm_value(cfg, dq):
    return {"strong_drive": 0.5, "exact": dq.excited_population, "none": 1.0}[
        cfg.section("output")["normalization"]]


def _auto_bounds(model):
    centers = model.frequency * HBAR
    margin = max(20.0 * float(np.max(model.decay)) * HBAR, 1e-3)
    return float(centers.min()) - margin, float(centers.max()) + margin


def analytic_grid(cfg: RunConfig, model):
    g = cfg.section("grid")
    lo, hi = _auto_bounds(model)
    lo = g["omega_min_meV"] if g["omega_min_meV"] is not None else lo
    hi = g["omega_max_meV"] if g["omega_max_meV"] is not None else hi
    if not hi > lo:
        raise ValueError("empty frequency grid")
    step = g["omega_step_meV"] or (hi - lo) / 4000.0
    if not g["adaptive"]:
        grid = np.arange(lo, hi + 0.5 * step, step)
        if grid.size < 2:
            raise ValueError("frequency grid has fewer than two points")
        return grid
    amp = np.abs(model.amplitude)
    return analytic.adaptive_grid(model, lo, hi, step, min_weight=1e-6 * float(amp.max()))


def _laser_width(cfg):
    w = cfg.section("output")["laser_width_ueV"]
    return uev(w) if w is not None else None


def _fft_spectrum(cfg, g_inc, dt):
    """FFT spectrum, adding an exponential window only if the series has not decayed."""
    window = 0.0
    tail = abs(g_inc[-1]) / abs(g_inc[0])
    win_cfg = cfg.section("oracle")["window_per_ps"]
    if win_cfg > 0:
        window = win_cfg
    elif tail > 1e-4:
        tau_max = dt * (len(g_inc) - 1)
        window = max(0.0, math.log(tail / TARGET_TAIL) / tau_max)
    g = np.asarray(g_inc) * np.exp(-window * np.arange(len(g_inc)) * dt)
    spec = oracle.spectrum_numeric(g, dt)
    spec.metadata["window_per_ps"] = window
    spec.metadata["added_fwhm_meV"] = 2.0 * window * HBAR
    grid = cfg.section("grid")
    lo, hi = grid["omega_min_meV"], grid["omega_max_meV"]
    if lo is not None or hi is not None:
        spec = spec.window(lo if lo is not None else -np.inf, hi if hi is not None else np.inf)
    return spec


def numeric_correlation(cfg: RunConfig):
    """(tau, incoherent g1 normalized, coherent weight normalized, extra metadata)."""
    system, dq = cfg.system, derive(cfg.system)
    g = cfg.section("grid")
    trunc = oracle.TruncationConfig(
        fock_levels=_levels(cfg), tau_max=g["tau_max_ps"], dt=g["dt_ps"],
        steady_state_method=cfg.section("oracle")["steady_state"])
    tau = trunc.tau_grid()
    norm = _norm_value(cfg, dq)
    if cfg.method == "oracle":
        ws = oracle.build_workspace(system, trunc)
        oracle.steady_state(ws, trunc.steady_state_method)
        full = oracle.g1_numeric(ws, tau, cfg.section("oracle")["stepper"])
        coh = oracle.coherent_limit(ws)
        meta = {"fock_levels": list(ws.levels), "leakage": ws.leakage}
    else:
        full = analytic.g1_mean_field(system, tau, normalized=False)
        coh = analytic.coherent_weight(dq) * math.exp(-dq.beta_tilde)
        meta = {}
    return tau, (full - coh) / norm, coh / norm, meta


def _levels(cfg):
    lv = cfg.section("oracle")["fock_levels"]
    if lv is None:
        return None
    return tuple(lv) if isinstance(lv, list) else (lv,)


def _system_metadata(cfg):
    dq = derive(cfg.system)
    return {
        "method": cfg.method,
        "gamma_ueV": dq.gamma * 1e3,
        "gamma_pd_ueV": dq.gamma_pd * 1e3,
        "beta_tilde": dq.beta_tilde,
        "fc_factor": dq.fc_factor,
        "omega_bare_ueV": dq.omega_bare * 1e3,
        "omega_renorm_ueV": dq.omega_renorm * 1e3,
        "mollow_splitting_meV": dq.mollow_splitting,
        "normalization": cfg.section("output")["normalization"],
        "n_modes": len(cfg.system.modes),
    }


def compute_spectrum(cfg: RunConfig) -> Spectrum:
    out = cfg.section("output")
    if cfg.method in ("oracle", "tls_exact"):
        tau, g_inc, coh, extra = numeric_correlation(cfg)
        spec = _fft_spectrum(cfg, g_inc, cfg.section("grid")["dt_ps"])
        spec.metadata.update(extra)
        spec.metadata.update({"method": cfg.method, "coherent_weight": coh, "dropped_weight": 0.0})
        return spec
    model = build_model(cfg)
    grid = analytic_grid(cfg, model)
    return analytic.spectrum_from_model(model, grid, out["include_coherent"], _laser_width(cfg))


def cmd_spectrum(cfg: RunConfig) -> Table:
    spec = compute_spectrum(cfg)
    meta = _system_metadata(cfg)
    meta.update({k: v for k, v in spec.metadata.items() if k != "method"})
    return Table("spectrum", {"omega_meV": spec.omega, "intensity": spec.values}, meta)


def _sweep_values(cfg):
    """(axis, values); without explicit values the configured drive is a one-point sweep."""
    sw = cfg.section("sweep")
    axis = sw["axis"]
    if sw["values"] is not None:
        vals = sw["values"]
    elif None not in (sw["start"], sw["stop"], sw["num"]):
        vals = np.linspace(sw["start"], sw["stop"], sw["num"]).tolist()
    else:
        axis, v = next((k, v) for k, v in cfg.section("drive").items() if v is not None)
        vals = [v]
    if not vals:
        raise ValueError("[sweep] has no drive values")
    return axis, [float(v) for v in vals]


def _sweep_point(args):
    resolved, axis, value = args
    try:
        cfg = resolve(with_drive_value(resolved, axis, value))
        spec = compute_spectrum(cfg)
        return cfg.system.drive.omega_bare, derive(cfg.system).fc_factor, spec.omega, spec.values, None
    except Exception as exc:  # recorded per point, sweep continues
        return None, None, None, None, f"{type(exc).__name__}: {exc}"


def cmd_sweep(cfg: RunConfig, workers=1) -> Table:
    sw = cfg.section("sweep")
    axis, values = _sweep_values(cfg)
    jobs = [(cfg.resolved, axis, v) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    cal = None
    if sw["calibrate"]:
        em = cfg.section("emitter")
        cal = CalibrationInput(em["gamma_ueV"], em["wavelength_nm"], sw["dipole_D"], sw["spot_area_um2"])
    cols = {"drive_value": [], "omega_bare_ueV": [], "omega_meV": [], "intensity": []}
    if cal is not None:
        cols["laser_intensity_uW_um2"] = []
        cols["laser_intensity_renorm_uW_um2"] = []
    failures = []
    for v, (om_bare, fc, omega, vals, err) in zip(values, results):
        if err is not None:
            failures.append({"drive_value": v, "error": err})
            continue
        n = omega.size
        cols["drive_value"].append(np.full(n, v))
        cols["omega_bare_ueV"].append(np.full(n, om_bare * 1e3))
        cols["omega_meV"].append(omega)
        cols["intensity"].append(vals)
        if cal is not None:
            row = calibration_row(om_bare * 1e3, fc, cal)
            cols["laser_intensity_uW_um2"].append(np.full(n, row["intensity_bare_uW_um2"]))
            cols["laser_intensity_renorm_uW_um2"].append(np.full(n, row["intensity_renorm_uW_um2"]))
    if len(failures) == len(values):
        raise RuntimeError(f"every sweep point failed; first error: {failures[0]['error']}")
    cols = {k: np.concatenate(v) for k, v in cols.items()}
    meta = _system_metadata(cfg)
    meta.update({"sweep_axis": axis, "sweep_values": values, "failures": failures})
    return Table("sweep", cols, meta)


def run_compare(cfg: RunConfig):
    comp = cfg.section("compare")
    g = cfg.section("grid")
    t_max = comp["t_max_ps"]
    trunc = oracle.TruncationConfig(fock_levels=_levels(cfg), tau_max=max(g["tau_max_ps"], t_max),
                                    dt=g["dt_ps"], steady_state_method=cfg.section("oracle")["steady_state"])
    return oracle.compare(cfg.system, trunc, t_max, cfg.section("oracle")["stepper"])


def cmd_compare(cfg: RunConfig):
    """(tau table, spectra table, rmse, passed)."""
    res = run_compare(cfg)
    cutoff = cfg.section("compare")["rmse_cutoff"]
    dq = derive(cfg.system)
    dt = cfg.section("grid")["dt_ps"]
    # elastic parts, normalized like the series
    coh_ana = analytic.coherent_weight(dq) * math.exp(-dq.beta_tilde) / dq.excited_population
    coh_num = res.coherent / res.norm
    s_ana = _fft_spectrum(cfg, res.g1_analytic - coh_ana, dt)
    s_num = _fft_spectrum(cfg, res.g1_numeric - coh_num, dt)
    meta = _system_metadata(cfg)
    meta.update({"rmse": res.rmse, "rmse_cutoff": cutoff, "passed": res.rmse <= cutoff,
                 "t_max_ps": cfg.section("compare")["t_max_ps"], "fock_levels": list(res.levels),
                 "leakage": res.leakage})
    series = Table("compare", {
        "tau_ps": res.tau,
        "abs_g1_analytic": np.abs(res.g1_analytic),
        "abs_g1_numeric": np.abs(res.g1_numeric),
    }, meta)
    if not np.array_equal(s_ana.omega, s_num.omega):
        raise RuntimeError("analytic and numeric spectra landed on different grids")
    spectra = Table("compare-spectra", {
        "omega_meV": s_ana.omega,
        "intensity_analytic": s_ana.values,
        "intensity_numeric": s_num.values,
    }, {"window_analytic_per_ps": s_ana.metadata["window_per_ps"],
        "window_numeric_per_ps": s_num.metadata["window_per_ps"]})
    return series, spectra, res.rmse, res.rmse <= cutoff


def cmd_criteria(cfg: RunConfig) -> Table:
    dq = derive(cfg.system)
    n_max = cfg.section("criteria")["n_max"]
    rows = [(0, 0.0, 0.0, 0.0, 0)]
    for j, m in enumerate(cfg.system.modes, start=1):
        rows += [(j, m.nu, m.kappa, m.beta, n) for n in range(1, n_max + 1)]
    cols = {k: [] for k in ("mode", "nu_meV", "kappa_meV", "beta", "n", "threshold_ueV",
                            "threshold_over_gamma", "R_Gamma", "R_A", "Gamma_C_ueV", "Gamma_S_ueV",
                            "resolved")}
    for j, nu, kappa, beta, n in rows:
        thr = resolvability_threshold(dq.gamma, dq.gamma_pd, n, kappa)
        omega_r = dq.omega_renorm if dq.has_splitting else None
        r_g, r_a = triplet_ratios(dq.gamma, dq.gamma_pd, n, kappa, omega_r)
        gc, gs = predicted_linewidths(dq.gamma, dq.gamma_pd, n, kappa)
        for k, v in zip(cols, (j, nu, kappa, beta, n, thr * 1e3, thr / dq.gamma, r_g, r_a,
                               gc * 1e3, gs * 1e3, dq.omega_renorm >= thr)):
            cols[k].append(v)
    meta = _system_metadata(cfg)
    meta["ratio_amplitude_basis"] = "exact |8 Lambda|" if dq.has_splitting else "strong drive |8 Lambda| = 1"
    return Table("criteria", cols, meta)


def cmd_dephasing(temperatures=None, model=DephasingModel(), gamma_ueV=DBT_GAMMA_UEV) -> Table:
    temps = list(DEFAULT_TEMPERATURES if temperatures is None else temperatures)
    if any(t < 0 for t in temps):
        raise ValueError("temperatures must be >= 0")
    rates = [dephasing_rate(t, model) for t in temps]
    return Table("dephasing", {
        "temperature_K": temps,
        "gamma_pd_ueV": rates,
        "gamma_pd_over_gamma": [r / gamma_ueV for r in rates],
    }, {"mu_ps5": model.mu, "omega_c_per_ps": model.omega_c, "gamma_ueV": gamma_ueV,
        "integral": "full real line"})


def cmd_calibrate(omegas=None, gamma_ueV=DBT_GAMMA_UEV, wavelength_nm=DBT_WAVELENGTH_NM,
                  dipole_D=None, spot_area_um2=1.0, fc_factor=1.0) -> Table:
    cal = CalibrationInput(gamma_ueV, wavelength_nm, dipole_D, spot_area_um2)
    rows = [calibration_row(o, fc_factor, cal) for o in (DEFAULT_CAL_OMEGAS if omegas is None else omegas)]
    cols = {k: [r[k] for r in rows] for k in rows[0]}
    return Table("calibrate", cols, {"gamma_ueV": gamma_ueV, "wavelength_nm": wavelength_nm,
                                     "dipole_source": "override" if dipole_D else "lifetime",
                                     "spot_area_um2": spot_area_um2, "fc_factor": fc_factor})


def default_scan_grid():
    return np.linspace(0.05, 1.0, 8), np.logspace(-2, 0, 8)


def cmd_scan_validity(cfg: RunConfig, workers=1) -> Table:
    sc = cfg.section("scan")
    eta_grid, om_grid = default_scan_grid()
    if sc["eta_over_nu"] is not None:
        eta_grid = np.asarray(sc["eta_over_nu"])
    if sc["omega_over_eta"] is not None:
        om_grid = np.asarray(sc["omega_over_eta"])
    g = cfg.section("grid")
    t_max = cfg.section("compare")["t_max_ps"]
    cutoff = cfg.section("compare")["rmse_cutoff"]
    trunc = oracle.TruncationConfig(fock_levels=_levels(cfg), tau_max=max(g["tau_max_ps"], t_max), dt=g["dt_ps"])
    scan = oracle.validity_scan(cfg.system, eta_grid, om_grid, trunc, t_max, cutoff, workers)
    ee, oo = np.meshgrid(scan.eta_over_nu, scan.omega_over_eta, indexing="ij")
    meta = _system_metadata(cfg)
    bnd = scan.boundary()
    meta.update({"rmse_cutoff": cutoff, "boundary_omega_over_eta": bnd.tolist(),
                 "boundary_monotone": scan_boundary_monotone(scan),
                 "failures": [{"eta_over_nu": a, "omega_over_eta": b, "error": e} for a, b, e in scan.failures]})
    return Table("scan-validity", {
        "eta_over_nu": ee.ravel(),
        "omega_over_eta": oo.ravel(),
        "rmse": scan.rmse.ravel(),
        "within_cutoff": (scan.rmse <= cutoff).ravel(),
    }, meta)


def scan_boundary_monotone(scan) -> bool:
    """Each row passes on a prefix of the drive axis and the prefix shrinks with eta/nu."""
    ok = scan.rmse <= scan.cutoff
    counts = ok.sum(axis=1)
    prefix = all(row[:k].all() for row, k in zip(ok, counts))
    return bool(prefix and np.all(np.diff(counts) <= 0))

"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 comparison
RMSE above the cutoff.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import commands
from .analytic import TermBudgetExceeded
from .config import ConfigError, FORMATS, load_config, resolve
from .io import Table, echo_path, render, write_table
from .model import ModelError
from .observables import DephasingModel, QuadratureError
from .oracle import DegenerateSteadyStateError, InsufficientDecayError, StepperError, TruncationError
from .presets import PRESETS

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_THRESHOLD = 0, 1, 2, 3

NUMERICAL_ERRORS = (TruncationError, DegenerateSteadyStateError, InsufficientDecayError, StepperError,
                    QuadratureError, TermBudgetExceeded, np.linalg.LinAlgError, ArithmeticError,
                    RuntimeError)
VALIDATION_ERRORS = (ConfigError, ModelError, ValueError, FileNotFoundError)


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML/JSON config, or an earlier output file")
    common.add_argument("--preset", choices=PRESETS, help="built-in emitter and mode table")
    common.add_argument("--out", type=Path, help="output file (stdout if omitted)")
    common.add_argument("--format", choices=FORMATS, help="output format (default csv)")
    common.add_argument("--workers", type=int, default=1, help="worker processes for sweeps and scans")
    common.add_argument("--rmse-cutoff", type=float, help="RMSE threshold for compare / scan-validity")
    common.add_argument("--method", help="override the method selector")

    p = argparse.ArgumentParser(prog="vibromollow", description="Vibronic Mollow triplet spectra.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="emission spectrum for one drive")
    sub.add_parser("sweep", parents=[common], help="spectra over a range of drive strengths")
    sub.add_parser("compare", parents=[common], help="closed form against the numerical oracle")
    sub.add_parser("criteria", parents=[common], help="per-mode thresholds, ratios and widths")
    d = sub.add_parser("dephasing", parents=[common], help="pure-dephasing rate versus temperature")
    d.add_argument("--temperatures", type=float, nargs="+", metavar="K")
    c = sub.add_parser("calibrate", parents=[common], help="Rabi energy to laser intensity table")
    c.add_argument("--omega", type=float, nargs="+", metavar="UEV", help="Rabi energies in µeV")
    c.add_argument("--dipole", type=float, metavar="DEBYE", help="override the lifetime dipole")
    sub.add_parser("scan-validity", parents=[common], help="RMSE map over coupling and drive")
    return p


def _overrides(args):
    ov = {}
    if args.preset:
        ov["preset"] = args.preset
    if args.method:
        ov["method"] = args.method
    if args.out:
        ov.setdefault("output", {})["path"] = str(args.out)
    if args.format:
        ov.setdefault("output", {})["format"] = args.format
    if args.rmse_cutoff is not None:
        ov.setdefault("compare", {})["rmse_cutoff"] = args.rmse_cutoff
    return ov


def _load(args, required=True):
    ov = _overrides(args)
    if args.config is not None:
        return load_config(args.config, ov)
    if args.preset or not required:
        raw = dict(ov)
        if args.preset:
            raw.setdefault("drive", {"omega_over_gamma": 10.0})
        else:
            return None
        return resolve(raw)
    raise ConfigError("--config or --preset is required")


def _emit(table: Table, cfg, args, resolved=None, suffix=None):
    resolved = cfg.resolved if cfg is not None else resolved
    cfg_path = cfg.output_path if cfg is not None else None
    path = args.out or (Path(cfg_path) if cfg_path else None)
    fmt = args.format or (cfg.section("output")["format"] if cfg is not None else "csv")
    if path is None:
        sys.stdout.write(render(table, resolved, fmt))
        return
    if suffix:
        path = path.with_name(path.stem + suffix + path.suffix)
    for p in write_table(table, path, resolved, fmt):
        if p != echo_path(path) or suffix is None:
            print(f"wrote {p}", file=sys.stderr)


def run(args) -> int:
    cmd = args.command
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    if cmd == "dephasing":
        cfg = _load(args, required=False)
        if cfg is not None:
            model = cfg.dephasing_model
            temps = args.temperatures or cfg.section("dephasing")["temperatures_K"]
            gamma = cfg.section("emitter")["gamma_ueV"]
        else:
            model, temps, gamma = DephasingModel(), args.temperatures, None
        table = commands.cmd_dephasing(temps, model, **({"gamma_ueV": gamma} if gamma else {}))
        _emit(table, cfg, args)
        return EXIT_OK
    if cmd == "calibrate":
        cfg = _load(args, required=False)
        kw = {}
        if cfg is not None:
            em, cal = cfg.section("emitter"), cfg.section("calibrate")
            kw = {"gamma_ueV": em["gamma_ueV"], "wavelength_nm": em["wavelength_nm"],
                  "dipole_D": cal["dipole_D"], "spot_area_um2": cal["spot_area_um2"],
                  "fc_factor": commands.derive(cfg.system).fc_factor}
            omegas = cal["omega_ueV"]
        else:
            omegas = None
        if args.dipole is not None:
            kw["dipole_D"] = args.dipole
        table = commands.cmd_calibrate(args.omega or omegas, **kw)
        _emit(table, cfg, args)
        return EXIT_OK

    cfg = _load(args)
    if cmd == "spectrum":
        _emit(commands.cmd_spectrum(cfg), cfg, args)
    elif cmd == "sweep":
        table = commands.cmd_sweep(cfg, args.workers)
        for f in table.metadata["failures"]:
            print(f"warning: drive {f['drive_value']:g} failed: {f['error']}", file=sys.stderr)
        _emit(table, cfg, args)
    elif cmd == "criteria":
        _emit(commands.cmd_criteria(cfg), cfg, args)
    elif cmd == "compare":
        series, spectra, rmse, passed = commands.cmd_compare(cfg)
        _emit(series, cfg, args)
        if args.out or cfg.output_path:
            _emit(spectra, cfg, args, suffix=".spectra")
        cutoff = cfg.section("compare")["rmse_cutoff"]
        print(f"rmse {rmse:.6g} cutoff {cutoff:g} {'PASS' if passed else 'FAIL'}", file=sys.stderr)
        return EXIT_OK if passed else EXIT_THRESHOLD
    elif cmd == "scan-validity":
        if len(cfg.system.modes) != 1:
            raise ConfigError("scan-validity needs exactly one mode (nu and kappa are taken from it)")
        table = commands.cmd_scan_validity(cfg, args.workers)
        _emit(table, cfg, args)
        b = table.metadata["boundary_omega_over_eta"]
        print("boundary Omega/eta per eta/nu row: " + json.dumps(b), file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return run(args)
    except VALIDATION_ERRORS as exc:
        errs = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
        for e in errs:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

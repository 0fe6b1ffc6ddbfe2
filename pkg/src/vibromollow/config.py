"""Run configuration: parsing, validation, preset expansion and hashing.

Configs are TOML documents (JSON is accepted too, as are CSV or JSON result
files produced by this package, which embed the resolved config they were
made from). Every violation found is reported together.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from . import presets
from .constants import uev
from .model import DriveConfig, EmitterParams, ModelError, PhononMode, VibronicSystem
from .observables import DephasingModel, dephasing_rate

METHODS = ("analytic_single", "analytic_first_replica", "analytic_general", "oracle", "tls_exact")
NORMALIZATIONS = ("strong_drive", "exact", "none")
FORMATS = ("csv", "json")

# section -> {key: (type check, default)}; None default means "absent unless given"
_NUM = (int, float)
SCHEMA = {
    "emitter": {
        "gamma_ueV": (_NUM, None),
        "gamma_pd_ueV": (_NUM, None),
        "temperature_K": (_NUM, None),
        "wavelength_nm": (_NUM, 745.0),
        "detuning_meV": (_NUM, 0.0),
    },
    "drive": {
        "omega_ueV": (_NUM, None),
        "omega_over_gamma": (_NUM, None),
        "omega_renorm_ueV": (_NUM, None),
    },
    "grid": {
        "omega_min_meV": (_NUM, None),
        "omega_max_meV": (_NUM, None),
        "omega_step_meV": (_NUM, None),
        "adaptive": (bool, True),
        "tau_max_ps": (_NUM, 30.0),
        "dt_ps": (_NUM, 0.01),
    },
    "analytic": {
        "n_max": (int, 6),
        "weight_threshold": (_NUM, 1e-6),
        "term_cutoff": (_NUM, 1e-8),
    },
    "oracle": {
        "fock_levels": ((int, list), None),
        "steady_state": (str, "null-space"),
        "stepper": (str, "eig"),
        "window_per_ps": (_NUM, 0.0),
    },
    "output": {
        "path": (str, None),
        "format": (str, "csv"),
        "normalization": (str, "strong_drive"),
        "include_coherent": (bool, False),
        "laser_width_ueV": (_NUM, None),
    },
    "sweep": {
        "axis": (str, "omega_ueV"),
        "values": (list, None),
        "start": (_NUM, None),
        "stop": (_NUM, None),
        "num": (int, None),
        "calibrate": (bool, True),
        "dipole_D": (_NUM, None),
        "spot_area_um2": (_NUM, 1.0),
    },
    "compare": {
        "rmse_cutoff": (_NUM, 0.05),
        "t_max_ps": (_NUM, 30.0),
    },
    "scan": {
        "eta_over_nu": (list, None),
        "omega_over_eta": (list, None),
    },
    "criteria": {
        "n_max": (int, 3),
    },
    "dephasing": {
        "mu_ps5": (_NUM, presets.DBT_DEPHASING_MU),
        "omega_c_per_ps": (_NUM, presets.DBT_DEPHASING_OMEGA_C),
        "temperatures_K": (list, None),
    },
    "calibrate": {
        "omega_ueV": (list, None),
        "dipole_D": (_NUM, None),
        "spot_area_um2": (_NUM, 1.0),
    },
}
MODE_KEYS = ("nu_meV", "eta_meV", "kappa_meV")
TOP_LEVEL = {"method": (str, "analytic_general"), "preset": (str, None), "preset_modes": (list, None)}


class ConfigError(ValueError):
    """Parse or validation failure; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with the system it describes.

    ``resolved`` is the canonical dict (presets expanded, defaults filled)
    that reproduces this run when loaded again.
    """

    resolved: dict
    system: VibronicSystem
    method: str
    output_path: Optional[str] = None  # kept out of ``resolved`` so the hash ignores it

    def section(self, name) -> dict:
        return self.resolved[name]

    @property
    def config_hash(self) -> str:
        return config_hash(self.resolved)

    @property
    def dephasing_model(self) -> DephasingModel:
        d = self.resolved["dephasing"]
        return DephasingModel(d["mu_ps5"], d["omega_c_per_ps"])


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(resolved) -> str:
    return hashlib.sha256(canonical_json(resolved).encode()).hexdigest()[:16]


def _read_document(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix.lower()
    if suffix == ".toml":
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if isinstance(doc, dict) and "config" in doc and "data" in doc:
            return doc["config"]
        return doc
    if suffix == ".csv":
        for line in text.splitlines():
            if not line.startswith("#"):
                break
            if line.startswith("# config: "):
                return json.loads(line[len("# config: "):])
        raise ConfigError(f"{path}: no embedded config found in header")
    raise ConfigError(f"{path}: unsupported config extension {suffix!r}")


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    """Read, merge ``overrides`` (nested dict), validate and resolve."""
    path = Path(path)
    try:
        raw = _read_document(path)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return resolve(_merge(raw, overrides or {}))


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _typecheck(value, types):
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        return False
    return isinstance(value, types)


def _finite(v):
    return not isinstance(v, float) or math.isfinite(v)


def resolve(raw: dict) -> RunConfig:
    """Validate a raw config dict and build the resolved config and system."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    errors = []
    raw = {k: v for k, v in raw.items() if v is not None}
    resolved: dict[str, Any] = {}

    for key, (types, default) in TOP_LEVEL.items():
        val = raw.get(key, default)
        if val is not None and not _typecheck(val, types):
            errors.append(f"{key}: expected {_tname(types)}")
        resolved[key] = val
    for key in raw:
        if key not in TOP_LEVEL and key not in SCHEMA and key != "modes":
            errors.append(f"unknown key {key!r}")

    for section, fields in SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            errors.append(f"[{section}] must be a table")
            given = {}
        out = {}
        for key, val in given.items():
            if key not in fields:
                errors.append(f"[{section}] unknown key {key!r}")
            elif val is not None and not _typecheck(val, fields[key][0]):
                errors.append(f"[{section}].{key}: expected {_tname(fields[key][0])}")
            elif not _finite(val):
                errors.append(f"[{section}].{key}: must be finite")
        for key, (types, default) in fields.items():
            val = given.get(key, default)
            if types is _NUM and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            out[key] = val
        resolved[section] = out

    modes_raw = raw.get("modes", [])
    if not isinstance(modes_raw, list):
        errors.append("modes must be an array of tables")
        modes_raw = []

    preset = resolved.pop("preset")
    preset_modes = resolved.pop("preset_modes")
    em = resolved["emitter"]
    if preset is not None:
        if preset not in presets.PRESETS:
            errors.append(f"unknown preset {preset!r}; available: {', '.join(presets.PRESETS)}")
        else:
            if em["gamma_ueV"] is None:
                em["gamma_ueV"] = presets.DBT_GAMMA_UEV
            if "wavelength_nm" not in raw.get("emitter", {}):
                em["wavelength_nm"] = presets.DBT_WAVELENGTH_NM
            if not modes_raw:
                table = list(presets.DBT_MODES)
                if preset_modes is not None:
                    bad = [j for j in preset_modes if not (isinstance(j, int) and 1 <= j <= len(table))]
                    if bad:
                        errors.append(f"preset_modes: indices must be in 1..{len(table)}, got {bad}")
                    else:
                        table = [table[j - 1] for j in preset_modes]
                modes_raw = [dict(zip(MODE_KEYS, row)) for row in table]
            elif preset_modes is not None:
                errors.append("preset_modes cannot be combined with an explicit modes table")
    elif preset_modes is not None:
        errors.append("preset_modes requires preset")

    modes = []
    for i, m in enumerate(modes_raw):
        if not isinstance(m, dict):
            errors.append(f"modes[{i}] must be a table")
            continue
        extra = set(m) - set(MODE_KEYS)
        if extra:
            errors.append(f"modes[{i}] unknown keys {sorted(extra)}")
        missing = [k for k in MODE_KEYS if k not in m]
        if missing:
            errors.append(f"modes[{i}] missing {missing}")
            continue
        if not all(_typecheck(m[k], _NUM) and _finite(m[k]) for k in MODE_KEYS):
            errors.append(f"modes[{i}] values must be finite numbers")
            continue
        modes.append({k: float(m[k]) for k in MODE_KEYS})
    resolved["modes"] = modes

    if em["gamma_ueV"] is None:
        errors.append("[emitter].gamma_ueV is required (or set preset)")
    if em["gamma_pd_ueV"] is not None and em["temperature_K"] is not None:
        errors.append("[emitter]: give either gamma_pd_ueV or temperature_K, not both")
    drive_keys = [k for k, v in resolved["drive"].items() if v is not None]
    if len(drive_keys) != 1:
        errors.append(f"[drive]: exactly one of omega_ueV, omega_over_gamma, omega_renorm_ueV required, got {drive_keys or 'none'}")
    if resolved["method"] not in METHODS:
        errors.append(f"method: must be one of {', '.join(METHODS)}")
    out = resolved["output"]
    if out["format"] not in FORMATS:
        errors.append("[output].format: must be csv or json")
    if out["normalization"] not in NORMALIZATIONS:
        errors.append(f"[output].normalization: must be one of {', '.join(NORMALIZATIONS)}")
    grid = resolved["grid"]
    if grid["omega_min_meV"] is not None and grid["omega_max_meV"] is not None:
        if not grid["omega_max_meV"] > grid["omega_min_meV"]:
            errors.append("[grid]: omega_max_meV must exceed omega_min_meV (empty frequency grid)")
    if grid["omega_step_meV"] is not None and not grid["omega_step_meV"] > 0:
        errors.append("[grid].omega_step_meV must be > 0")
    if not (grid["tau_max_ps"] > 0 and grid["dt_ps"] > 0 and grid["dt_ps"] < grid["tau_max_ps"]):
        errors.append("[grid]: need 0 < dt_ps < tau_max_ps")
    if resolved["analytic"]["n_max"] < 0:
        errors.append("[analytic].n_max must be >= 0")
    if resolved["method"] == "analytic_single" and len(modes) != 1:
        errors.append(f"method analytic_single needs exactly one mode, got {len(modes)}")
    sw = resolved["sweep"]
    if sw["axis"] not in ("omega_ueV", "omega_over_gamma", "omega_renorm_ueV"):
        errors.append("[sweep].axis: must be omega_ueV, omega_over_gamma or omega_renorm_ueV")
    for sec, key in (("sweep", "values"), ("scan", "eta_over_nu"), ("scan", "omega_over_eta"),
                     ("dephasing", "temperatures_K"), ("calibrate", "omega_ueV")):
        vals = resolved[sec][key]
        if vals is not None:
            if not all(_typecheck(v, _NUM) and _finite(v) for v in vals):
                errors.append(f"[{sec}].{key}: must be a list of finite numbers")
            else:
                resolved[sec][key] = [float(v) for v in vals]
    if errors:
        raise ConfigError(errors)

    try:
        system = build_system(resolved)
    except ModelError as exc:
        raise ConfigError(str(exc)) from None
    path = resolved["output"].pop("path")
    return RunConfig(resolved, system, resolved["method"], path)


def _as_tuple(t):
    return t if isinstance(t, tuple) else (t,)


def _tname(types):
    return " or ".join(t.__name__ for t in _as_tuple(types))


def build_system(resolved: dict) -> VibronicSystem:
    em = resolved["emitter"]
    temperature = em["temperature_K"] or 0.0
    if em["temperature_K"] is not None:
        d = resolved["dephasing"]
        gamma_pd_uev = dephasing_rate(em["temperature_K"], DephasingModel(d["mu_ps5"], d["omega_c_per_ps"]))
    else:
        gamma_pd_uev = em["gamma_pd_ueV"] or 0.0
    emitter = EmitterParams.from_microev(em["gamma_ueV"], gamma_pd_uev, em["wavelength_nm"], em["detuning_meV"])
    modes = tuple(PhononMode(m["nu_meV"], m["eta_meV"], m["kappa_meV"]) for m in resolved["modes"])
    system = VibronicSystem(emitter, modes, DriveConfig(0.0), temperature)
    return system.with_drive(drive_to_bare(resolved["drive"], system))


def drive_to_bare(drive: dict, system: VibronicSystem) -> float:
    """Bare Rabi frequency (meV) from whichever drive key is set."""
    fc = math.exp(-0.5 * sum(m.beta for m in system.modes))
    if drive.get("omega_ueV") is not None:
        return uev(drive["omega_ueV"])
    if drive.get("omega_over_gamma") is not None:
        return drive["omega_over_gamma"] * system.emitter.gamma
    if drive.get("omega_renorm_ueV") is not None:
        return uev(drive["omega_renorm_ueV"]) / fc
    raise ConfigError("[drive]: no drive strength given")


def with_drive_value(resolved: dict, axis: str, value: float) -> dict:
    """Copy of ``resolved`` with the drive replaced by ``axis = value``."""
    out = copy.deepcopy(resolved)
    out["drive"] = {k: None for k in SCHEMA["drive"]}
    out["drive"][axis] = float(value)
    return out


def preset_config(name="dbt-pdcb", **sections) -> dict:
    """Raw config dict for a preset, with optional section overrides."""
    raw = {"preset": name}
    raw.update(sections)
    raw.setdefault("drive", {"omega_over_gamma": 10.0})
    return raw

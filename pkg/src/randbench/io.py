"""File formats: experiment config (INI), decay CSV, manifest and r.f. histograms.

Config files use ``configparser`` syntax with the sections ``experiment``,
``noise`` (both required), ``timing`` and ``fit`` (optional).  Every key is
checked against a schema; unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import platform
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .liouville import ValidationError
from .noise import (
    Depolarizing,
    GateTiming,
    Ideal,
    LocalDepolarizing,
    OverRotation,
    Relaxation,
    RfDistribution,
    RfEnsemble,
)
from .protocol import DecayCurve, ExperimentConfig


class ConfigError(ValidationError):
    """Malformed or inconsistent configuration input."""


CSV_COLUMNS = ("length", "mean_fidelity", "std_dev", "n_runs")
CSV_EXTRA = ("std_error", "log_fidelity", "log_excess")


# --- decay CSV --------------------------------------------------------------

def curve_to_csv(curve: DecayCurve) -> str:
    """Decay table with log columns for semi-log plotting.

    ``log_excess`` is ``ln(F - 1/D)``, linear in the length for a single
    exponential; it is left empty where ``F <= 1/D``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + CSV_EXTRA)
    se = curve.standard_error()
    for n, m, s, k, e in zip(curve.lengths, curve.mean, curve.std, curve.n_runs, se):
        excess = m - 1.0 / curve.dim
        w.writerow([int(n), repr(float(m)), repr(float(s)), int(k), repr(float(e)),
                    repr(math.log(m)) if m > 0 else "",
                    repr(math.log(excess)) if excess > 0 else ""])
    return buf.getvalue()


def write_curve_csv(path, curve: DecayCurve) -> None:
    Path(path).write_text(curve_to_csv(curve))


def read_curve_csv(path, dim: int) -> DecayCurve:
    """Read a decay CSV.

    The four schema columns are required.  A ``std_error`` column, when
    present, supplies the (sequence-clustered) standard errors used as fit
    weights; other extra columns are ignored.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    missing = [c for c in CSV_COLUMNS if c not in rows[0]]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")
    try:
        cols = {c: [float(r[c]) for r in rows] for c in CSV_COLUMNS}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    lengths = np.asarray(cols["length"])
    if np.any(lengths != np.round(lengths)) or np.any(np.diff(lengths) <= 0):
        raise ConfigError(f"{path}: lengths must be increasing integers")
    sem = None
    if "std_error" in rows[0]:
        try:
            sem = np.asarray([float(r["std_error"]) for r in rows])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: non-numeric std_error ({exc})") from exc
    return DecayCurve(lengths.astype(int), cols["mean_fidelity"], cols["std_dev"],
                      np.asarray(cols["n_runs"], dtype=int), dim, sem=sem)


# --- r.f. distribution files ------------------------------------------------

def read_distribution(path) -> RfDistribution:
    """Two whitespace-separated columns ``eps weight`` per line, ``#`` comments.

    Weights that do not sum to one are rescaled with a warning.
    """
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read distribution {path}: {exc}") from exc
    if data.shape[1] != 2 or data.shape[0] == 0:
        raise ConfigError(f"{path}: expected two columns (eps, weight)")
    eps, w = data[:, 0], data[:, 1]
    if np.any(w < 0) or not np.all(np.isfinite(data)):
        raise ConfigError(f"{path}: weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise ConfigError(f"{path}: weights sum to zero")
    if abs(total - 1) > 1e-12:
        warnings.warn(f"distribution weights sum to {total:.6g}; normalizing", stacklevel=2)
    return RfDistribution.normalized(eps, w)


def _named_distribution(spec: str) -> RfDistribution:
    name, _, arg = spec.partition(":")
    if name == "two_point":
        return RfDistribution.two_point()
    if name == "uniform":
        return RfDistribution.uniform(float(arg or 0.2))
    if name == "point":
        return RfDistribution.point(float(arg or 0.0))
    return read_distribution(spec)


# --- config files -----------------------------------------------------------

_EXPERIMENT_KEYS = {
    "n_qubits": int, "lengths": "ints", "max_length": int, "n_sequences": int,
    "n_randomizations": int, "n_epsilon_samples": int, "z_mode": str, "pulse_shape": str,
    "seed": int, "noisy_recovery": bool, "measurement_sigma": float,
    "output": str, "manifest": str,
}
_NOISE_KEYS = {
    "ideal": {},
    "depolarizing": {"p": float},
    "local_depolarizing": {"p": "floats"},
    "relaxation": {"t1": "floats", "t2": "floats"},
    "overrotation": {"epsilon": float},
    "rf_ensemble": {"distribution": str},
}
_TIMING_KEYS = {"pi2": float, "pi": float, "single": float, "cnot": float, "wait": float}
_FIT_KEYS = {"dim": int, "fixed_offset": "offset", "n_bootstrap": int, "min_length": int,
             "output": str}
_SECTIONS = {"experiment", "noise", "timing", "fit"}


@dataclass
class RunSpec:
    """A parsed config file."""

    config: ExperimentConfig
    output: Optional[str] = None
    manifest: Optional[str] = None
    fit: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind == "ints":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if kind == "floats":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "offset":
            return raw.strip().lower() if raw.strip().lower() in ("free", "1/d") else float(raw)
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def _read_section(cp, name: str, schema: dict) -> dict:
    out = {}
    for key, raw in cp.items(name):
        if key not in schema:
            raise ConfigError(f"[{name}] unknown key {key!r}; allowed: {sorted(schema)}")
        out[key] = _convert(name, key, raw, schema[key])
    return out


def _build_noise(fields: dict, base: Path):
    model = fields.pop("model", None)
    if model is None:
        raise ConfigError("[noise] missing required key 'model'")
    if model not in _NOISE_KEYS:
        raise ConfigError(f"[noise] unknown model {model!r}; allowed: {sorted(_NOISE_KEYS)}")
    vals = {}
    for key, raw in fields.items():
        if key not in _NOISE_KEYS[model]:
            raise ConfigError(f"[noise] key {key!r} not valid for model {model!r}")
        vals[key] = _convert("noise", key, raw, _NOISE_KEYS[model][key])
    need = set(_NOISE_KEYS[model]) - set(vals) - ({"distribution"} if model == "rf_ensemble" else set())
    if need:
        raise ConfigError(f"[noise] model {model!r} needs {sorted(need)}")
    if model == "ideal":
        return Ideal()
    if model == "depolarizing":
        return Depolarizing(vals["p"])
    if model == "local_depolarizing":
        return LocalDepolarizing(vals["p"])
    if model == "relaxation":
        return Relaxation(vals["t1"], vals["t2"])
    if model == "overrotation":
        return OverRotation(vals["epsilon"])
    spec = vals.get("distribution", "two_point")
    if spec not in ("two_point",) and not spec.startswith(("uniform", "point")):
        spec = str((base / spec).resolve()) if not Path(spec).is_absolute() else spec
    return RfEnsemble(_named_distribution(spec))


def parse_config(text: str, base_dir=".") -> RunSpec:
    """Parse and validate config text; relative paths resolve against ``base_dir``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    unknown = set(cp.sections()) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}; allowed: {sorted(_SECTIONS)}")
    for required in ("experiment", "noise"):
        if not cp.has_section(required):
            raise ConfigError(f"missing required section [{required}]")
    exp = _read_section(cp, "experiment", _EXPERIMENT_KEYS)
    output, manifest = exp.pop("output", None), exp.pop("manifest", None)
    timing = _read_section(cp, "timing", _TIMING_KEYS) if cp.has_section("timing") else {}
    fit = _read_section(cp, "fit", _FIT_KEYS) if cp.has_section("fit") else {}
    base = Path(base_dir)
    try:
        noise = _build_noise(dict(cp.items("noise")), base)
        cfg_kw = dict(exp)
        cfg_kw["noise"] = noise
        if timing:
            cfg_kw["timing"] = GateTiming(**timing)
        n = cfg_kw.get("n_qubits", 1)
        factory = ExperimentConfig.single_qubit if n == 1 else ExperimentConfig.multi_qubit
        if n == 1:
            cfg = factory(**cfg_kw)
        else:
            cfg_kw.pop("n_qubits")
            cfg = factory(n, **cfg_kw)
    except ConfigError:
        raise
    except (ValidationError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment: {exc}") from exc
    source = {s: dict(cp.items(s)) for s in cp.sections()}
    rel = lambda p: None if p is None else str(p if Path(p).is_absolute() else base / p)
    return RunSpec(cfg, rel(output), rel(manifest), fit, source)


def load_config(path) -> RunSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path.parent)


# --- manifest ---------------------------------------------------------------

def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["noise"] = {"model": type(cfg.noise).__name__, **asdict(cfg.noise)}
    timing = asdict(cfg.timing)
    timing["cnot_overrides"] = {"-".join(map(str, sorted(k))): v
                                for k, v in cfg.timing.cnot_overrides.items()}
    d["timing"] = timing
    return d


def manifest(cfg: ExperimentConfig, command: str, outputs: dict, extra: Optional[dict] = None) -> dict:
    """Run description; contains no timestamps so identical runs give identical bytes."""
    from . import __version__

    return {
        "command": command,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "config": config_to_dict(cfg),
        "outputs": outputs,
        **(extra or {}),
    }


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")

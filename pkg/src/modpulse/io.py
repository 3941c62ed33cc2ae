"""Run configuration and CSV/JSON writers."""
import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class RunConfig:
    rho: List[float] = field(default_factory=lambda: [1.0])
    r: List[float] = field(default_factory=lambda: [1.0])
    gamma: float = 1.0
    n0: int = 0
    l0: float = 0.35
    N: int = 2
    epsilon: float = 0.1
    K: int = 32
    x_points: int = 128            # grid points per 2 pi cell
    domain_cells: Optional[int] = None
    dt_factor: float = 0.9
    T: float = 100.0
    l_points: int = 101
    n_bands: int = 4
    directory: str = "out"
    stride: int = 20
    formats: List[str] = field(default_factory=lambda: ["csv", "json"])
    seed: int = 0
    version: int = CONFIG_VERSION

    def to_dict(self):
        return {"version": self.version, "seed": self.seed,
                "medium": {"rho": self.rho, "r": self.r, "gamma": self.gamma},
                "selection": {"n0": self.n0, "l0": self.l0, "N": self.N, "epsilon": self.epsilon},
                "discretization": {"K": self.K, "x_points": self.x_points,
                                   "domain_cells": self.domain_cells, "dt_factor": self.dt_factor,
                                   "T": self.T, "l_points": self.l_points, "n_bands": self.n_bands},
                "outputs": {"directory": self.directory, "stride": self.stride,
                            "formats": self.formats}}


_SECTIONS = {
    "medium": {"rho": "rho", "r": "r", "gamma": "gamma"},
    "selection": {"n0": "n0", "l0": "l0", "N": "N", "epsilon": "epsilon"},
    "discretization": {"K": "K", "x_points": "x_points", "domain_cells": "domain_cells",
                       "dt_factor": "dt_factor", "T": "T", "l_points": "l_points",
                       "n_bands": "n_bands"},
    "outputs": {"directory": "directory", "stride": "stride", "formats": "formats"},
}


def _num(name, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    return int(v) if integer else float(v)


def _coeffs(name, v):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{name}: expected a non-empty list of cosine coefficients")
    return [_num(f"{name}[{i}]", x) for i, x in enumerate(v)]


def config_from_dict(d):
    """Build and validate a RunConfig from parsed JSON."""
    if not isinstance(d, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = set(d) - set(_SECTIONS) - {"version", "seed"}
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    kw = {}
    if "version" in d:
        kw["version"] = _num("version", d["version"], integer=True)
        if kw["version"] != CONFIG_VERSION:
            raise ConfigError(f"version: unsupported config version {kw['version']}")
    if "seed" in d:
        kw["seed"] = _num("seed", d["seed"], integer=True)
    for sec, keys in _SECTIONS.items():
        if sec not in d:
            continue
        body = d[sec]
        if not isinstance(body, dict):
            raise ConfigError(f"{sec}: expected an object")
        bad = set(body) - set(keys)
        if bad:
            raise ConfigError(f"{sec}: unknown keys {sorted(bad)}")
        for k, v in body.items():
            kw[keys[k]] = (sec, k, v)
    cfg = RunConfig()
    for attr, val in kw.items():
        if not isinstance(val, tuple):
            setattr(cfg, attr, val)
            continue
        sec, k, v = val
        name = f"{sec}.{k}"
        if attr in ("rho", "r"):
            setattr(cfg, attr, _coeffs(name, v))
        elif attr == "formats":
            if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
                raise ConfigError(f"{name}: expected a list of strings")
            setattr(cfg, attr, list(v))
        elif attr == "directory":
            if not isinstance(v, str) or not v:
                raise ConfigError(f"{name}: expected a non-empty path string")
            setattr(cfg, attr, v)
        elif attr == "domain_cells":
            setattr(cfg, attr, None if v is None else _num(name, v, integer=True))
        elif attr in ("n0", "N", "K", "x_points", "l_points", "n_bands", "stride"):
            setattr(cfg, attr, _num(name, v, integer=True))
        else:
            setattr(cfg, attr, _num(name, v))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    from .bloch import PeriodicCoefficient
    try:
        PeriodicCoefficient(tuple(cfg.rho))
    except ValueError as exc:
        raise ConfigError(f"medium.rho: {exc}") from None
    if cfg.gamma not in (1.0, -1.0, 0.0):
        raise ConfigError("medium.gamma: must be +1, -1 or 0")
    checks = [
        ("selection.n0", cfg.n0 >= 0, "must be >= 0"),
        ("selection.l0", -0.5 < cfg.l0 <= 0.5, "must lie in (-1/2, 1/2]"),
        ("selection.N", cfg.N >= 0, "must be >= 0"),
        ("selection.epsilon", 0 < cfg.epsilon <= 0.5, "must lie in (0, 0.5]"),
        ("discretization.K", 4 <= cfg.K <= 256, "must lie in [4, 256]"),
        ("discretization.K", cfg.n0 < 2 * cfg.K, "too small for the selected band"),
        ("discretization.x_points", cfg.x_points >= 8, "must be >= 8"),
        ("discretization.domain_cells", cfg.domain_cells is None or cfg.domain_cells >= 1,
         "must be >= 1 or null"),
        ("discretization.dt_factor", 0 < cfg.dt_factor <= 0.9, "must lie in (0, 0.9] (CFL)"),
        ("discretization.T", cfg.T > 0, "must be > 0"),
        ("discretization.l_points", cfg.l_points >= 1, "must be >= 1"),
        ("discretization.n_bands", 1 <= cfg.n_bands < 2 * cfg.K, "must lie in [1, 2K)"),
        ("outputs.stride", cfg.stride >= 1, "must be >= 1"),
        ("outputs.formats", set(cfg.formats) <= {"csv", "json"} and cfg.formats,
         "entries must be 'csv' or 'json'"),
    ]
    for name, ok, msg in checks:
        if not ok:
            raise ConfigError(f"{name}: {msg}")
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON ({exc})") from None
    return config_from_dict(d)


# ----------------------------------------------------------------------------
# writers
# ----------------------------------------------------------------------------

def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.ndarray):
        return _plain(o.tolist())
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    return o


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(obj), fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class OutputDir:
    """Collects written files for the manifest."""

    def __init__(self, path, formats=("csv", "json")):
        self.path = path
        self.formats = set(formats)
        self.files = []

    def _open(self, name):
        os.makedirs(self.path, exist_ok=True)
        p = os.path.join(self.path, name)
        self.files.append(name)
        return p

    def json(self, name, obj):
        if "json" in self.formats:
            write_json(self._open(name), obj)

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            write_csv(self._open(name), header, rows)

    def manifest(self, extra=None):
        entries = [{"file": f, "sha256": sha256(os.path.join(self.path, f))}
                   for f in sorted(set(self.files))]
        m = {"files": entries}
        if extra:
            m.update(extra)
        write_json(os.path.join(self.path, "manifest.json"), m)
        return m

"""INI run configurations: schema, defaults and validation.

Every section and key is declared in :data:`SCHEMA`; unknown sections or
keys are rejected so that a typo cannot silently fall back to a default.
"""

import configparser
from importlib import resources
from pathlib import Path

from .exceptions import ConfigError

COMMANDS = ("solve", "verify", "levelset", "blowup", "counterexample", "selftest")


def _floats(text):
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text):
    return [int(t) for t in text.replace(",", " ").split()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _words(text):
    return text.replace(",", " ").split()


# section -> key -> (parser, default)
SCHEMA = {
    "run": {
        "command": (str, "verify"),
        "name": (str, "run"),
    },
    "problem": {
        "mode": (str, "rof"),
        "datum": (str, "disc"),
        "dim": (int, 2),
        "cells": (int, 256),
        "length": (float, 1.0),
        "radius": (float, 0.25),
        "level": (float, 0.5),
        "axis": (int, 0),
        "height": (float, 1.0),
        "lam": (float, 32.0),
        "boundary_value": (float, 0.0),
    },
    "model": {
        "preset": (str, "euclidean"),
        "kind": (str, ""),
        "weight": (float, 1.0),
        "matrix": (_floats, []),
    },
    "solver": {
        "max_iters": (int, 20000),
        "gap_tol": (float, 1e-5),
        "step_ratio": (float, 0.0),
        "check_every": (int, 10),
    },
    "diagnostics": {
        "n_points": (int, 32),
        "radii_cells": (_ints, [32, 16, 8, 4]),
        "normal_radius_cells": (int, 8),
        "trace_rho_cells": (int, 16),
        "trace_r_cells": (int, 4),
        "density_rho_cells": (int, 8),
        "gamma": (float, 0.05),
        "thresholds": (int, 128),
        "perimeter_method": (str, "tv"),
        "perturbations": (int, 20),
        "plateau_tol": (float, 0.02),
        "pairing_tol": (float, 0.05),
        "zeqnu_tol": (float, 0.1),
        "trace_tol": (float, 0.05),
        "coarea_tol": (float, 0.05),
        "slack_tol": (float, 1e-8),
    },
    "output": {
        "directory": (str, "anisotv-out"),
        "formats": (_words, ["json", "csv"]),
    },
    "counterexample": {
        "dim": (int, 2),
        "delta": (float, 0.0),
        "epsilon": (float, 0.5),
        "first": (int, 2),
        "last": (int, 6),
        "quadrature": (int, 10000),
        "blowup": (_bool, False),
        "blowup_spacing": (float, 1.0 / 4096),
        "blowup_half_width": (float, 0.19),
    },
}

FORMATS = ("json", "csv", "bin", "pgm", "pbm")


class RunConfig:
    """Parsed, validated run configuration.

    Attributes
    ----------
    text : str
        The configuration verbatim, embedded in reports.
    source : str
        File path or ``preset:<name>``.
    """

    def __init__(self, text, source="<string>"):
        self.text = text
        self.source = source
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: malformed configuration: {exc}") from exc
        self._values = {}
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{source}: unknown section [{section}]")
            for key in parser[section]:
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{source}: unknown key '{key}' in [{section}]")
        for section, keys in SCHEMA.items():
            vals = {}
            for key, (conv, default) in keys.items():
                if parser.has_option(section, key):
                    raw = parser.get(section, key)
                    try:
                        vals[key] = conv(raw)
                    except ValueError as exc:
                        raise ConfigError(f"{source}: [{section}] {key} = {raw!r}: {exc}") from exc
                else:
                    vals[key] = list(default) if isinstance(default, list) else default
            self._values[section] = vals
        self._validate()

    def __getitem__(self, section):
        return self._values[section]

    @property
    def command(self):
        return self._values["run"]["command"]

    def as_dict(self):
        return {s: dict(v) for s, v in self._values.items()}

    def _validate(self):
        v = self._values
        if v["run"]["command"] not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}")
        p = v["problem"]
        if p["mode"] not in ("rof", "prescribed"):
            raise ConfigError("problem mode must be 'rof' or 'prescribed'")
        if p["datum"] not in ("disc", "stripe", "constant"):
            raise ConfigError("problem datum must be 'disc', 'stripe' or 'constant'")
        if p["dim"] not in (2, 3):
            raise ConfigError("problem dim must be 2 or 3")
        if p["cells"] < 8:
            raise ConfigError("problem cells must be >= 8")
        if not 0 <= p["axis"] < p["dim"]:
            raise ConfigError("problem axis out of range")
        for key in ("length", "radius", "lam"):
            if not p[key] > 0:
                raise ConfigError(f"problem {key} must be positive")
        s = v["solver"]
        if s["max_iters"] < 1 or s["check_every"] < 1:
            raise ConfigError("solver max_iters and check_every must be >= 1")
        if not s["gap_tol"] > 0 or s["step_ratio"] < 0:
            raise ConfigError("solver gap_tol must be positive and step_ratio non-negative")
        d = v["diagnostics"]
        radii = d["radii_cells"]
        if not radii or any(b >= a for a, b in zip(radii, radii[1:])) or radii[-1] < 2:
            raise ConfigError("diagnostics radii_cells must be strictly decreasing and >= 2")
        if d["n_points"] < 1 or d["thresholds"] < 2 or d["perturbations"] < 0:
            raise ConfigError("diagnostics counts out of range")
        if d["perimeter_method"] not in ("tv", "faces"):
            raise ConfigError("diagnostics perimeter_method must be 'tv' or 'faces'")
        bad = [f for f in v["output"]["formats"] if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown output formats {bad}; expected a subset of {FORMATS}")
        c = v["counterexample"]
        if c["dim"] not in (2, 3) or c["quadrature"] < 16:
            raise ConfigError("counterexample dim must be 2 or 3 and quadrature >= 16")
        m = v["model"]
        if m["kind"] and m["kind"] not in ("euclidean", "weighted", "riemannian"):
            raise ConfigError("model kind must be euclidean, weighted or riemannian")

    @classmethod
    def from_path(cls, path):
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"configuration file not found: {path}")
        return cls(path.read_text(), str(path))

    @classmethod
    def from_preset(cls, name):
        return cls(preset_text(name), f"preset:{name}")


def preset_names():
    files = resources.files("anisotv") / "presets"
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".ini"))


def preset_text(name):
    res = resources.files("anisotv") / "presets" / f"{name}.ini"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return res.read_text()

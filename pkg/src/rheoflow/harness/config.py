"""Flat-section key = value configuration files.

Parsing is strict: unknown sections or keys are errors, every error is
collected and reported in one pass, and model/parameter consistency is
validated up front (for example the KS model demands zero mobility).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MODELS = ("powerlaw", "newtonian", "graffi", "fullgks", "ks")
DRIVERS = ("direct", "periodic", "picard")
PRESETS = ("taylor-green", "shear-layer", "mixing-blob", "vi-ball", "periodic-forcing")

# section -> {key: (type, default)}; REQUIRED marks keys with no default
REQUIRED = object()
SCHEMA = {
    "grid": {"dim": (int, 2), "n_points": (int, 64), "length": (float, 2.0 * np.pi)},
    "model": {"type": (str, REQUIRED)},
    "powerlaw": {"mu0": (float, 1.0), "p": (float, 2.0)},
    "mixture": {
        "rho10": (float, 2.0),
        "rho20": (float, 1.0),
        "lambda": (float, 0.05),
        "mobility": (float, 0.02),
        "mu": (float, 1.0),
        "m_shift": (float, 0.1),
    },
    "diffusion": {"reg_eps": (float, 0.05)},
    "constraint": {
        "type": (str, ""),
        "radius": (float, 0.5),
        "bound": (float, 0.5),
        "kappa": (float, 100.0),
    },
    "driver": {
        "type": (str, "direct"),
        "dt": (float, 1e-3),
        "t_end": (float, 1.0),
        "period": (float, 0.4),
        "tol": (float, 1e-6),
        "max_iters": (int, 40),
        "ball_radius": (float, 50.0),
        "horizon": (float, 0.15),
    },
    "galerkin": {"modes": (int, 12), "scheme": (str, "rk4"), "splitting": (str, "lie")},
    "scenario": {
        "preset": (str, ""),
        "checkpoint": (str, ""),
        "seed": (int, 0),
        "amplitude": (float, 0.05),
    },
    "output": {"dir": (str, "out"), "stride": (int, 10)},
}


class ConfigError(ValueError):
    """Raised with the full, itemized list of configuration problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class SimulationConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        section, name = key.split(".")
        return self.values[section][name]

    @property
    def model(self) -> str:
        return self["model.type"]

    @property
    def driver(self) -> str:
        return self["driver.type"]

    def dump(self) -> str:
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            for k, v in keys.items():
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)


def _coerce(raw: str, typ, where: str, errors: list):
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        errors.append(f"{where}: cannot parse {raw!r} as {typ.__name__}")
        return None


def parse_config(path) -> SimulationConfig:
    """Parse and validate a config file; raises ConfigError with every problem."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file {path} does not exist"])
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError([f"parse failure: {exc}"]) from exc

    errors: list[str] = []
    values: dict = {}
    for section in cp.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key in cp[section]:
            if key not in SCHEMA[section]:
                errors.append(f"unknown key {key!r} in [{section}]")

    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (typ, default) in keys.items():
            if cp.has_option(section, key):
                val = _coerce(cp.get(section, key), typ, f"[{section}] {key}", errors)
                if val is not None:
                    values[section][key] = val
            elif default is REQUIRED:
                errors.append(f"missing required key {key!r} in [{section}]")
            else:
                values[section][key] = default

    config = SimulationConfig(values)
    if not errors:
        _validate(config, errors)
    if errors:
        raise ConfigError(errors)
    return config


def _validate(config: SimulationConfig, errors: list) -> None:
    v = config.values
    model = v["model"].get("type", "")
    if model not in MODELS:
        errors.append(f"[model] type must be one of {MODELS}, got {model!r}")
        return

    if v["driver"]["type"] not in DRIVERS:
        errors.append(f"[driver] type must be one of {DRIVERS}")
    if v["driver"]["dt"] <= 0:
        errors.append("[driver] dt must be positive")
    if v["driver"]["t_end"] <= 0:
        errors.append("[driver] t_end must be positive")
    if v["grid"]["dim"] not in (2, 3):
        errors.append("[grid] dim must be 2 or 3")
    n = v["grid"]["n_points"]
    if n < 8 or n % 2:
        errors.append("[grid] n_points must be even and >= 8")

    if model in ("powerlaw", "newtonian"):
        if v["powerlaw"]["mu0"] <= 0:
            errors.append("[powerlaw] mu0 must be positive")
        if v["powerlaw"]["p"] <= 1:
            errors.append("[powerlaw] p must satisfy p > 1")
        if model == "newtonian" and v["powerlaw"]["p"] != 2.0:
            errors.append("[powerlaw] the newtonian model fixes p = 2")
    else:
        m = v["mixture"]
        if m["rho10"] <= 0 or m["rho20"] <= 0:
            errors.append("[mixture] unmixed densities must be positive")
        if m["rho10"] == m["rho20"]:
            errors.append("[mixture] rho10 and rho20 must differ")
        if m["mu"] <= 0:
            errors.append("[mixture] mu must be positive")
        if model == "ks" and m["mobility"] != 0.0:
            errors.append("[mixture] the ks model requires mobility = 0 (theta = rho)")

    ctype = v["constraint"]["type"]
    if ctype and ctype not in ("l2ball", "pointwise"):
        errors.append("[constraint] type must be 'l2ball' or 'pointwise'")
    if ctype and v["constraint"]["kappa"] <= 0:
        errors.append("[constraint] kappa must be positive")

    preset = v["scenario"]["preset"]
    checkpoint = v["scenario"]["checkpoint"]
    if preset and preset not in PRESETS:
        errors.append(f"[scenario] preset must be one of {PRESETS}")
    if not preset and not checkpoint:
        errors.append("[scenario] either preset or checkpoint is required")
    if v["output"]["stride"] < 1:
        errors.append("[output] stride must be >= 1")

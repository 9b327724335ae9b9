"""Experiment configuration files.

Flat ``key = value`` lines under ``[section]`` headers::

    [experiment]
    scenario = ball-curvature
    seed = 7
    output = runs/ball

    [grid]
    dim = 2
    N = 256

    [params]
    radius = 0.25
    rel_tol = 0.05

Keys in ``[params]`` are scenario specific and are checked against the
scenario's defaults, which also fix their types.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

OUTPUT_ENV = "TVFLOW_OUT"


@dataclass
class ExperimentConfig:
    scenario: str
    dim: int | None = None
    N: int | None = None
    params: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0
    source: str = "<memory>"

    def __post_init__(self):
        if self.dim is not None and self.dim not in (1, 2, 3):
            raise ConfigError(f"{self.source}: [grid] dim must be 1, 2 or 3, got {self.dim}")
        if self.N is not None and self.N < 4:
            raise ConfigError(f"{self.source}: [grid] N must be at least 4, got {self.N}")
        for key, value in self.params.items():
            if _is_tolerance(key) and isinstance(value, (int, float)) and not value > 0:
                raise ConfigError(f"{self.source}: tolerance {key} must be positive, got {value}")

    def output_dir(self, root=None) -> Path:
        """``$TVFLOW_OUT/<scenario>`` when the variable is set, else ``output`` or ``./tvflow-out/<scenario>``."""
        env = os.environ.get(OUTPUT_ENV)
        if env:
            return Path(env) / self.scenario
        if self.output:
            return Path(self.output)
        return Path(root or "tvflow-out") / self.scenario


def _is_tolerance(key: str) -> bool:
    return key == "tol" or key.endswith("_tol") or key.endswith("tolerance")


def _coerce(raw: str, like, key: str, source: str):
    """Convert ``raw`` to the type of the default ``like``."""
    try:
        if isinstance(like, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            items = [s for s in raw.replace(",", " ").split() if s]
            kind = type(like[0]) if like else float
            return tuple(kind(s) for s in items)
    except ValueError:
        raise ConfigError(f"{source}: cannot read {key} = {raw!r} as {type(like).__name__}") from None
    return raw.strip()


def parse_config(text: str, defaults_for=None, source: str = "<string>") -> ExperimentConfig:
    """Parse config text. ``defaults_for(scenario)`` returns the typed parameter defaults."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.ParsingError as exc:
        where = ", ".join(f"line {lineno}" for lineno, _ in exc.errors)
        raise ConfigError(f"{source}: malformed config at {where}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known = {"experiment", "grid", "params"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"{source}: unknown section [{sec}]")
    if not cp.has_option("experiment", "scenario"):
        raise ConfigError(f"{source}: missing key 'scenario' in [experiment]")
    exp = cp["experiment"]
    for key in exp:
        if key not in ("scenario", "seed", "output"):
            raise ConfigError(f"{source}: unknown key '{key}' in [experiment]")
    scenario = exp["scenario"].strip()
    try:
        seed = int(exp.get("seed", "0"))
    except ValueError:
        raise ConfigError(f"{source}: cannot read seed = {exp.get('seed')!r} as int") from None
    dim = N = None
    if cp.has_section("grid"):
        for key, raw in cp["grid"].items():
            if key not in ("dim", "N"):
                raise ConfigError(f"{source}: unknown key '{key}' in [grid]")
            try:
                value = int(raw)
            except ValueError:
                raise ConfigError(f"{source}: cannot read {key} = {raw!r} as int") from None
            if key == "dim":
                dim = value
            else:
                N = value
    defaults = defaults_for(scenario) if defaults_for else {}
    params = {}
    if cp.has_section("params"):
        for key, raw in cp["params"].items():
            if defaults and key not in defaults:
                raise ConfigError(f"{source}: unknown key '{key}' in [params] for scenario {scenario}")
            params[key] = _coerce(raw, defaults.get(key, ""), key, source)
    return ExperimentConfig(scenario, dim, N, params, exp.get("output"), seed, source)


def load_config(path, defaults_for=None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, defaults_for, source=str(path))

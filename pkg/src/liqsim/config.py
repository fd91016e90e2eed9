"""Scenario configuration files.

A configuration is an INI file. Each section is one scenario whose label is
the section name; keys in ``[DEFAULT]`` apply to every scenario. See
``configs/scenarios.ini`` in the repository for a commented example. All keys
are optional:

    s0, mu, vol, r            price level, drift, mark half-width, discount rate
    q0, slice, horizon        initial shares, shares per unit rate, deadline
    actions                   comma separated admissible rates (must include 0)
    haircut                   fraction of value lost on inventory left at the deadline
    base, sigma, kappa        initial intensity, jump size, decay
    impact, alpha             impact family (power | exponential) and exponent
    grid_points, stages       quantization grid size per stage, decision stages
    mc_paths                  transition samples per (grid point, action)
    eval_paths, train_paths   evaluation and grid-training path counts
    seed, stream              RNG seed pair
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .impact import ImpactedIntensityState, ImpactFunction
from .pdmp import LiquidationConfig, MarketParams
from .rng import RngSeed


@dataclass(frozen=True)
class SolverSettings:
    grid_points: int = 32
    stages: int = 20
    mc_paths: int = 200
    eval_paths: int = 10_000
    train_paths: int = 2_000


@dataclass(frozen=True)
class ScenarioConfig:
    label: str
    market: MarketParams
    liquidation: LiquidationConfig
    intensity: ImpactedIntensityState
    solver: SolverSettings = field(default_factory=SolverSettings)
    seed: RngSeed = RngSeed(0)


DEFAULTS = {
    "s0": 1.0, "mu": 0.0, "vol": 0.01, "r": 0.0,
    "q0": 70_000.0, "slice": 100.0, "horizon": 2.0,
    "actions": (0.0, 5.0, 10.0, 20.0, 40.0, 70.0), "haircut": 0.5,
    "base": 1.0, "sigma": 0.1, "kappa": 0.6,
    "impact": "exponential", "alpha": 0.01,
    "grid_points": 32, "stages": 20, "mc_paths": 200, "eval_paths": 10_000, "train_paths": 2_000,
    "seed": 0, "stream": 0,
}

_INT_KEYS = {"grid_points", "stages", "mc_paths", "eval_paths", "train_paths", "seed", "stream"}
_STR_KEYS = {"impact", "actions"}


class _Locator:
    """Line numbers of sections and keys, which configparser does not keep."""

    _section = re.compile(r"^\s*\[([^\]]+)\]")
    _key = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")

    def __init__(self, text: str):
        self.sections = {}
        self.keys = {}
        current = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            m = self._section.match(line)
            if m:
                current = m.group(1).strip()
                self.sections.setdefault(current, lineno)
                continue
            m = self._key.match(line)
            if m and current is not None and not line[0].isspace():
                self.keys.setdefault((current, m.group(1).strip().lower()), lineno)

    def key(self, section, key):
        return self.keys.get((section, key)) or self.keys.get(("DEFAULT", key))


def _convert(key, raw, locator, section):
    line = locator.key(section, key)
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key == "actions":
            return tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
        if key in _STR_KEYS:
            return raw.strip()
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} in scenario '{section}'", key, line) from None


def _build(section, values, locator) -> ScenarioConfig:
    def fail(key, message):
        raise ConfigError(f"scenario '{section}': {message}", key, locator.key(section, key))

    v = values
    checks = [
        ("kappa", v["kappa"] > 0, "kappa must be > 0"),
        ("s0", v["s0"] > 0, "s0 must be > 0"),
        ("vol", 0 <= v["vol"] < 1, "vol must be in [0, 1)"),
        ("r", v["r"] >= 0, "r must be >= 0"),
        ("q0", v["q0"] > 0, "q0 must be > 0"),
        ("slice", v["slice"] > 0, "slice must be > 0"),
        ("horizon", v["horizon"] > 0, "horizon must be > 0"),
        ("haircut", 0 <= v["haircut"] <= 1, "haircut must be in [0, 1]"),
        ("base", v["base"] >= 0, "base must be >= 0"),
        ("alpha", v["alpha"] >= 0, "alpha must be >= 0"),
        ("impact", v["impact"] in ("power", "exponential"), "impact must be 'power' or 'exponential'"),
        ("grid_points", v["grid_points"] >= 1, "grid_points must be >= 1"),
        ("stages", v["stages"] >= 1, "stages must be >= 1"),
        ("mc_paths", v["mc_paths"] >= 1, "mc_paths must be >= 1"),
        ("eval_paths", v["eval_paths"] >= 2, "eval_paths must be >= 2"),
        ("train_paths", v["train_paths"] >= 1, "train_paths must be >= 1"),
        ("seed", 0 <= v["seed"] < 2**64, "seed must be an unsigned 64-bit integer"),
        ("stream", 0 <= v["stream"] < 2**64, "stream must be an unsigned 64-bit integer"),
    ]
    for key, ok, message in checks:
        if not ok:
            fail(key, message)
    try:
        liquidation = LiquidationConfig(v["q0"], v["slice"], v["horizon"], v["actions"], v["haircut"])
    except ValueError as exc:
        fail("actions", str(exc))
    return ScenarioConfig(
        label=section,
        market=MarketParams(s0=v["s0"], mu=v["mu"], vol=v["vol"], r=v["r"]),
        liquidation=liquidation,
        intensity=ImpactedIntensityState(
            level=v["base"], decay=v["kappa"], excitation=v["sigma"],
            impact=ImpactFunction(v["impact"], v["alpha"]),
        ),
        solver=SolverSettings(v["grid_points"], v["stages"], v["mc_paths"], v["eval_paths"],
                              v["train_paths"]),
        seed=RngSeed(v["seed"], v["stream"]),
    )


def parse_config_text(text: str, source: str = "<config>") -> list:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"{source}: malformed configuration: {exc.message}", line=line) from None
    locator = _Locator(text)
    for key in parser.defaults():
        if key not in DEFAULTS:
            raise ConfigError(f"{source}: unknown key in [DEFAULT]", key, locator.key("DEFAULT", key))
    scenarios = []
    for section in parser.sections():
        values = dict(DEFAULTS)
        for key, raw in parser.items(section):
            if key not in DEFAULTS:
                raise ConfigError(f"{source}: unknown key in scenario '{section}'", key,
                                  locator.key(section, key))
            values[key] = _convert(key, raw, locator, section)
        scenarios.append(_build(section, values, locator))
    if not scenarios:
        raise ConfigError(f"{source}: no scenario sections found")
    return scenarios


def parse_config(path) -> list:
    """Read and validate every scenario in an INI file."""
    path = Path(path)
    return parse_config_text(path.read_text(), str(path))

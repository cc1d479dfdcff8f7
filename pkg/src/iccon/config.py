"""Flat ``key = value`` experiment configuration.

Lines are ``key = value``; ``#`` starts a comment. Cache and profile sizes
may be written as a share of the catalogue (``c = 5%C``). Integers accept
``10^4`` and ``1e4`` as well as plain digits.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .che import DEFAULT_ALPHAS, DEFAULT_C_RATIOS
from .errors import ConfigError
from .simulator import CACHE_POLICIES, POLICIES, SimConfig

SCENARIOS = ("churn", "per-request", "che-sweep")

KEYS = (
    "N", "M", "C", "c", "s", "lambda_c", "lambda_v", "U", "u", "w",
    "policy", "cache_policy", "topology", "seed",
    "stab_window_mult", "stab_eps", "stab_cap_mult",
    "scenario", "slots", "requests_per_slot", "alpha_list", "c_ratio_list",
)

SIM_REQUIRED = ("N", "M", "C", "c", "s", "lambda_c", "lambda_v", "U", "u", "w")
REQUIRED = {
    "churn": SIM_REQUIRED,
    "per-request": SIM_REQUIRED,
    "che-sweep": ("C", "s", "lambda_c"),
}

_POWER = re.compile(r"^\s*(\d+)\s*\^\s*(\d+)\s*$")
_PERCENT = re.compile(r"^\s*([0-9.eE+-]+)\s*%\s*C\s*$")


@dataclass(frozen=True)
class CheSweepSpec:
    C: int
    s: float
    lambda_c: float
    alphas: tuple = DEFAULT_ALPHAS
    c_ratios: tuple = DEFAULT_C_RATIOS


@dataclass(frozen=True)
class ParsedConfig:
    scenario: str
    sim: SimConfig | None = None
    sweep: CheSweepSpec | None = None
    seed: int | None = None
    values: dict = field(default_factory=dict)


def _int(text, key, line):
    m = _POWER.match(text)
    if m:
        return int(m.group(1)) ** int(m.group(2))
    try:
        return int(text)
    except ValueError:
        pass
    try:
        x = float(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", key, line) from None
    if not math.isfinite(x) or x != int(x):
        raise ConfigError(f"expected an integer, got {text!r}", key, line)
    return int(x)


def _float(text, key, line):
    m = _POWER.match(text)
    if m:
        return float(int(m.group(1)) ** int(m.group(2)))
    try:
        x = float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", key, line) from None
    if not math.isfinite(x):
        raise ConfigError(f"expected a finite number, got {text!r}", key, line)
    return x


def _float_list(text, key, line):
    parts = [p for p in (x.strip() for x in text.split(",")) if p]
    if not parts:
        raise ConfigError("expected a comma-separated list of numbers", key, line)
    return tuple(_float(p, key, line) for p in parts)


def _choice(text, key, line, options):
    if text not in options:
        raise ConfigError(f"expected one of {', '.join(options)}, got {text!r}", key, line)
    return text


def _items(text, key, line, C):
    """Item count, absolute or as ``pct%C`` (floored, at least 1)."""
    m = _PERCENT.match(text)
    if m is None:
        return _int(text, key, line)
    if C is None:
        raise ConfigError("a %C value needs C to be set", key, line)
    pct = _float(m.group(1), key, line)
    return max(1, math.floor(pct / 100.0 * C + 1e-9))


def read_pairs(text):
    """``{key: (raw value, line number)}``; rejects unknown and repeated keys."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", line=lineno)
        key, value = (x.strip() for x in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError("unknown key", key, lineno)
        if key in pairs:
            raise ConfigError(f"duplicate key (first on line {pairs[key][1]})", key, lineno)
        if not value:
            raise ConfigError("missing value", key, lineno)
        pairs[key] = (value, lineno)
    return pairs


def parse_config(text, scenario=None):
    """Parse and validate a configuration document.

    ``scenario`` (from the command line) takes effect when the document has
    no ``scenario`` key; if both are present they must agree.
    """
    pairs = read_pairs(text)
    if "scenario" in pairs:
        value, line = pairs["scenario"]
        doc_scenario = _choice(value, "scenario", line, SCENARIOS)
        if scenario is not None and scenario != doc_scenario:
            raise ConfigError(
                f"config is for scenario {doc_scenario!r}, not {scenario!r}", "scenario", line
            )
        scenario = doc_scenario
    scenario = scenario or "churn"
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}", "scenario")

    for key in REQUIRED[scenario]:
        if key not in pairs:
            raise ConfigError("missing required key", key)

    def get(key, conv, *extra):
        value, line = pairs[key]
        return conv(value, key, line, *extra)

    v = {}
    if "C" in pairs:
        v["C"] = get("C", _int)
    for key in ("N", "M", "U", "slots", "requests_per_slot", "seed"):
        if key in pairs:
            v[key] = get(key, _int)
    for key in ("s", "lambda_c", "lambda_v", "w", "stab_window_mult", "stab_eps", "stab_cap_mult"):
        if key in pairs:
            v[key] = get(key, _float)
    for key in ("c", "u"):
        if key in pairs:
            v[key] = get(key, _items, v.get("C"))
    if "policy" in pairs:
        v["policy"] = get("policy", _choice, POLICIES)
    if "cache_policy" in pairs:
        v["cache_policy"] = get("cache_policy", _choice, CACHE_POLICIES)
    if "topology" in pairs:
        value, _line = pairs["topology"]
        if value in ("per-ap", "per_ap"):
            v["topology"] = None
        else:
            v["topology"] = tuple(x.strip() for x in value.split(","))
    for key in ("alpha_list", "c_ratio_list"):
        if key in pairs:
            v[key] = get(key, _float_list)

    def line_of(key):
        return pairs[key][1] if key in pairs else None

    if scenario == "che-sweep":
        spec = CheSweepSpec(
            C=v["C"], s=v["s"], lambda_c=v["lambda_c"],
            alphas=v.get("alpha_list", DEFAULT_ALPHAS),
            c_ratios=v.get("c_ratio_list", DEFAULT_C_RATIOS),
        )
        if spec.C < 2:
            raise ConfigError("C must be >= 2", "C", line_of("C"))
        if spec.s < 0:
            raise ConfigError("Zipf slope must be >= 0", "s", line_of("s"))
        if spec.lambda_c <= 0:
            raise ConfigError("lambda_c must be positive", "lambda_c", line_of("lambda_c"))
        if any(a < 1 for a in spec.alphas):
            raise ConfigError("aggregation levels must be >= 1", "alpha_list", line_of("alpha_list"))
        if any(not 0 < r < 1 for r in spec.c_ratios):
            raise ConfigError("cache ratios must lie in (0, 1)", "c_ratio_list", line_of("c_ratio_list"))
        return ParsedConfig(scenario, sweep=spec, seed=v.get("seed"), values=v)

    sim_keys = set(SimConfig.__dataclass_fields__)
    sim = SimConfig(**{k: x for k, x in v.items() if k in sim_keys})
    try:
        sim.validate()
    except ConfigError as exc:
        raise ConfigError(exc.reason, exc.key, line_of(exc.key)) from None
    return ParsedConfig(scenario, sim=sim, seed=v.get("seed"), values=v)


def load_config(path, scenario=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), scenario)

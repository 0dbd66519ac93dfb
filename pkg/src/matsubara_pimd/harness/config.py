"""JSON experiment configuration: defaults, dotted-key overrides and hashing.

A configuration is one JSON document with three sections::

    {
      "sampler":    {"potential": "model1d", "variant": "matsubara_underdamped",
                     "n_modes": 9, "d_grid": null, "beta": 2.0, "a": 1.0,
                     "gamma": 1.0, "dt": 0.0625, "seed": 12345},
      "experiment": {"name": "timeavg_error", "T": 100000.0, "n_steps": null,
                     "burn_in": 0, "record_stride": 1, "observable": "sinhalfpi",
                     "replicas": 1, "workers": 1, "variants": [...],
                     "betas": [...], "n_values": [...], ...},
      "output":     {"dir": "results"}
    }

Keys missing from a file take the preset defaults of the chosen experiment.
``n_steps`` wins over ``T`` when both are set; ``d_grid: null`` means
``d_grid = n_modes``.
"""

import copy
import hashlib
import json
import os

from ..dynamics import (
    MATSUBARA_UNDERDAMPED,
    STANDARD_UNDERDAMPED,
    VARIANTS,
)
from ..estimators import OBSERVABLES
from ..potentials import BUILTIN_POTENTIALS

OUTPUT_ENV = "PIMD_OUTPUT_DIR"
EXPERIMENTS = ("sample", "timeavg_error", "correlation", "radial_density", "reference")


class ConfigError(ValueError):
    """Invalid or unreadable configuration (CLI exit status 2)."""


_BASE = {
    "sampler": {
        "potential": "model1d",
        "variant": MATSUBARA_UNDERDAMPED,
        "n_modes": 9,
        "d_grid": None,
        "beta": 2.0,
        "a": 1.0,
        "gamma": 1.0,
        "dt": 1.0 / 16,
        "seed": 12345,
    },
    "experiment": {
        "name": "sample",
        "T": 1.0e4,
        "n_steps": None,
        "burn_in": 0,
        "record_stride": 1,
        "observable": "sinhalfpi",
        "replicas": 1,
        "workers": 1,
    },
    "output": {"dir": None},
}

_TWO_VARIANTS = [MATSUBARA_UNDERDAMPED, STANDARD_UNDERDAMPED]

PRESETS = {
    "sample": {},
    "timeavg_error": {
        "experiment": {
            "T": 1.0e5,
            "variants": _TWO_VARIANTS,
            "betas": [1.0, 2.0],
            "n_values": [9, 17, 33],
        },
    },
    "correlation": {
        "experiment": {
            "T": 1.0e5,
            "variants": _TWO_VARIANTS,
            "betas": [1.0, 2.0],
            "n_values": [9, 17, 33],
            "modes": [0, 1, 2, 3, 4],
            "record_stride": 4,
            "max_lag_time": 20.0,
            "center": False,
            "fit_threshold": 0.1,
        },
    },
    "radial_density": {
        "sampler": {"potential": "spherical3d", "beta": 4.0, "dt": 1.0 / 32},
        "experiment": {
            "T": 5.0e4,
            "variants": _TWO_VARIANTS,
            "n_values": [3, 5, 9, 17],
            "bins": 100,
            "r_max": 4.0,
            "n_batches": 50,
            "observable": "radius",
        },
    },
    "reference": {
        "experiment": {"betas": [2.0]},
    },
}

# Values used by the original numerical study, behind --paper-scale.
PAPER_SCALE = {
    "timeavg_error": {"experiment": {"T": 5.0e6, "betas": [1.0, 2.0, 4.0, 8.0],
                                     "n_values": [9, 17, 33, 65, 129]}},
    "correlation": {"experiment": {"T": 5.0e6, "betas": [1.0, 2.0, 4.0, 8.0],
                                   "n_values": [9, 17, 33, 65, 129]}},
    "radial_density": {"experiment": {"T": 5.0e6, "n_values": [3, 5, 9, 17, 33]}},
}


def deep_update(base, other):
    for key, value in other.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            deep_update(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


def default_config(experiment="sample", paper_scale=False):
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    cfg = copy.deepcopy(_BASE)
    deep_update(cfg, PRESETS[experiment])
    if paper_scale:
        deep_update(cfg, PAPER_SCALE.get(experiment, {}))
    cfg["experiment"]["name"] = experiment
    cfg["output"]["dir"] = os.environ.get(OUTPUT_ENV, "results")
    return cfg


def load_config_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = set(data) - set(_BASE)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)} in {path}")
    return data


def parse_value(text):
    """Interpret an override value as JSON, falling back to a plain string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_dotted(cfg, key, value):
    parts = key.split(".")
    if len(parts) != 2 or parts[0] not in cfg:
        raise ConfigError(f"override key must look like section.name, got {key!r}")
    cfg[parts[0]][parts[1]] = value


def resolve(experiment, path=None, overrides=(), paper_scale=False):
    """Build the full configuration: preset, then file, then overrides."""
    cfg = default_config(experiment, paper_scale)
    if path is not None:
        deep_update(cfg, load_config_file(path))
    for key, value in overrides:
        set_dotted(cfg, key, value)
    cfg["experiment"]["name"] = experiment
    validate(cfg)
    return cfg


def validate(cfg):
    s, e = cfg["sampler"], cfg["experiment"]
    if s["variant"] not in VARIANTS:
        raise ConfigError(f"unknown variant {s['variant']!r}")
    if s["potential"] not in BUILTIN_POTENTIALS:
        raise ConfigError(f"unknown potential {s['potential']!r}; "
                          f"choose from {sorted(BUILTIN_POTENTIALS)}")
    if e["observable"] not in OBSERVABLES:
        raise ConfigError(f"unknown observable {e['observable']!r}; "
                          f"choose from {sorted(OBSERVABLES)}")
    for v in e.get("variants", []):
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}")
    for key in ("beta", "a", "dt"):
        if not isinstance(s[key], (int, float)) or not s[key] > 0:
            raise ConfigError(f"sampler.{key} must be a positive number")
    if int(e["replicas"]) < 1:
        raise ConfigError("experiment.replicas must be >= 1")
    n_steps = total_steps(cfg)
    if e["name"] != "reference" and not n_steps > int(e["burn_in"]) >= 0:
        raise ConfigError("need n_steps > burn_in >= 0")
    if int(e["record_stride"]) < 1:
        raise ConfigError("experiment.record_stride must be >= 1")


def total_steps(cfg):
    e = cfg["experiment"]
    if e.get("n_steps") is not None:
        return int(e["n_steps"])
    return int(round(float(e["T"]) / float(cfg["sampler"]["dt"])))


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    """Git blob hash of the canonical JSON; independent of key order."""
    body = canonical_json(cfg).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


__all__ = [
    "OUTPUT_ENV",
    "EXPERIMENTS",
    "ConfigError",
    "PRESETS",
    "PAPER_SCALE",
    "default_config",
    "load_config_file",
    "parse_value",
    "set_dotted",
    "resolve",
    "validate",
    "total_steps",
    "canonical_json",
    "config_hash",
]

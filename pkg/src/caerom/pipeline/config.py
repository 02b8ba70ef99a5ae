"""Experiment configuration: TOML file, per-problem defaults, schema and cross-field checks."""

import copy
import json
from importlib import resources

import jsonschema
import tomli

from caerom.errors import ConfigurationError

_BURGERS = {
    "problem": "burgers",
    "seed": 0,
    "threads": 1,
    "out": "runs/burgers",
    "sampling": {"n": 100, "method": "random", "parameters": [{"name": "nu", "kind": "uniform", "lo": 0.0, "hi": 1.0}]},
    "solver": {
        "burgers": {
            "n_x": 200, "n_t": 100, "x_min": -1.0, "x_max": 1.0, "t_max": 5.0,
            "nu_min": 1e-3, "substeps": 8, "tol": 1e-10, "max_iter": 50,
        }
    },
    "cae": {
        "latent_dim": 8, "filters": [64, 32], "kernel_len": 5, "stride": 2, "pool_window": 5,
        "decoder_unpool": False, "hidden_activation": "relu",
        "train": {"epochs": 2000, "lr": 1e-4, "batch_size": 16, "shuffle": True},
    },
    "ffnn": {
        "hidden": [32, 32, 32, 32], "activation": "relu",
        "train": {"epochs": 30000, "lr": 1e-4, "batch_size": 100, "shuffle": True},
    },
    "mc": {
        "n": 3000, "method": "random", "exact": False, "batch": 250, "pdf_points": 512,
        "probes": [{"label": "x=-0.5075,t=2.4747", "x": -0.5075, "t": 2.4747},
                   {"label": "x=0.5075,t=2.4747", "x": 0.5075, "t": 2.4747}],
    },
    "validate": {"thetas": [[0.2], [0.8]]},
    "converge": {
        "latent_dims": [2, 4, 8], "dataset_sizes": [25, 50, 100], "n_eval": 200, "mode": "cross",
        "reference_latent": 8, "reference_size": 100,
    },
}

_ELASTICITY = {
    "problem": "elasticity",
    "seed": 0,
    "threads": 1,
    "out": "runs/elasticity",
    "sampling": {
        "n": 500, "method": "lhs",
        "parameters": [{"name": f"E{i + 1}", "kind": "lognormal", "mean": 30e9, "sd": 7.5e9} for i in range(3)],
    },
    "solver": {
        "elasticity": {
            "geometry": "default", "poisson": 0.2, "density": 2500.0, "thickness": 1.0,
            "n_steps": 600, "dt": 0.01, "beta": 0.25, "gamma": 0.5, "rayleigh": [0.0, 0.0],
            "ground_motion": {"seed": 0, "pga": 3.0, "f_max": 10.0},
        }
    },
    "cae": {
        "latent_dim": 64, "filters": [256, 128], "kernel_len": 5, "stride": 2, "pool_window": 5,
        "decoder_unpool": False, "hidden_activation": "relu",
        "train": {"epochs": 500, "lr": 1e-4, "batch_size": 8, "shuffle": True},
    },
    "ffnn": {
        "hidden": [256] * 6, "activation": "relu",
        "train": {"epochs": 10000, "lr": 1e-4, "batch_size": 100, "shuffle": True},
    },
    "mc": {
        "n": 500000, "method": "random", "exact": False, "batch": 8, "pdf_points": 512,
        "probes": [{"label": f"monitor{k},t=3.0", "monitor": k, "t": 3.0} for k in range(3)],
    },
    "validate": {"thetas": [[30e9, 30e9, 30e9]]},
    "converge": {
        "latent_dims": [16, 32, 64], "dataset_sizes": [100, 250, 500], "n_eval": 100, "mode": "cross",
        "reference_latent": 64, "reference_size": 500,
    },
}

DEFAULTS = {"burgers": _BURGERS, "elasticity": _ELASTICITY}


def schema():
    text = resources.files("caerom.pipeline").joinpath("config_schema.json").read_text()
    return json.loads(text)


def deep_merge(base, override):
    """Recursive dict merge; values in ``override`` win, lists are replaced whole."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def default_config(problem="burgers"):
    if problem not in DEFAULTS:
        raise ConfigurationError(f"unknown problem {problem!r}")
    return copy.deepcopy(DEFAULTS[problem])


def build_config(user=None, **overrides):
    """Defaults for ``user['problem']`` merged with ``user`` and ``overrides``, then validated."""
    user = dict(user or {})
    problem = overrides.get("problem", user.get("problem", "burgers"))
    cfg = deep_merge(default_config(problem), user)
    cfg = deep_merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    # a user ground-motion table replaces the default one instead of merging into it
    user_gm = user.get("solver", {}).get("elasticity", {}).get("ground_motion")
    if user_gm is not None and problem == "elasticity":
        cfg["solver"]["elasticity"]["ground_motion"] = copy.deepcopy(user_gm)
    validate_config(cfg)
    return cfg


def load_config(path=None, **overrides):
    """Read a TOML experiment file (or only defaults when ``path`` is None)."""
    user = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
    return build_config(user, **overrides)


def validate_config(cfg):
    """Schema check followed by the cross-field consistency rules."""
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config error at {where}: {exc.message}") from exc

    problem = cfg["problem"]
    if problem not in cfg["solver"]:
        raise ConfigurationError(f"solver section for {problem!r} missing")
    params = cfg["sampling"]["parameters"]
    for p in params:
        if p["kind"] == "uniform" and not p["lo"] < p["hi"]:
            raise ConfigurationError(f"parameter {p['name']}: need lo < hi")
    if problem == "burgers":
        if len(params) != 1:
            raise ConfigurationError("the Burgers problem has exactly one parameter (viscosity)")
        p = params[0]
        if p["kind"] == "uniform" and (p["lo"] < 0 or p["hi"] > 1):
            raise ConfigurationError("viscosity range must lie inside [0, 1]")
    else:
        geometry = cfg["solver"]["elasticity"]["geometry"]
        n_stories = 3 if isinstance(geometry, str) else len(geometry["story_heights"])
        if len(params) != n_stories:
            raise ConfigurationError(f"{n_stories} stories need {n_stories} moduli, got {len(params)} parameters")
        gm = cfg["solver"]["elasticity"].get("ground_motion", {})
        if "csv" in gm and ({"seed", "pga", "f_max"} & set(gm)):
            raise ConfigurationError("ground_motion: give either csv or synthetic seed/pga, not both")
    latent = cfg["cae"]["latent_dim"]
    if cfg["ffnn"].get("latent_dim", latent) != latent:
        raise ConfigurationError(f"ffnn.latent_dim {cfg['ffnn']['latent_dim']} != cae.latent_dim {latent}")
    for section in ("cae", "ffnn"):
        if cfg[section]["train"]["batch_size"] > cfg["sampling"]["n"]:
            raise ConfigurationError(f"{section}.train.batch_size exceeds sampling.n")
    for theta in cfg.get("validate", {}).get("thetas", []):
        if len(theta) != len(params):
            raise ConfigurationError(f"validate theta {theta} has {len(theta)} entries, expected {len(params)}")
    conv = cfg.get("converge", {})
    if conv and max(conv.get("dataset_sizes", [1])) > cfg["sampling"]["n"]:
        raise ConfigurationError("converge.dataset_sizes may not exceed sampling.n")
    return cfg

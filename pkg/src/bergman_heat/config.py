"""Run configuration: defaults, JSON loading and validation.

Every subcommand owns a flat JSON config; user files override defaults key
by key.  Volume forms are specified as ``{"id": ..., "coefficients":
{"l,m": value}}`` where the density is ``exp`` of the listed harmonic
combination.
"""

import json
import math

from .errors import ConfigError
from .geometry import VolumeForm, build_grid

_BASE_FORMS = [
    {"id": "fs", "coefficients": {}},
    {"id": "zonal-half", "coefficients": {"1,0": -0.15}},
    {"id": "zonal-full", "coefficients": {"1,0": -0.3}},
    {"id": "tilted", "coefficients": {"1,1": 0.1, "2,1": 0.05}},
]

DEFAULTS = {
    "converge": {
        "p_list": [8, 16, 32, 64, 128],
        "l_max": None,
        "n_theta": None,
        "n_phi": None,
        "volume_forms": _BASE_FORMS,
        "tail_bound": 1e-3,
        "slope_threshold": -0.75,
        "max_median_ratio": 3.0,
        "uniformity_family": ["fs", "zonal-half", "zonal-full"],
        "uniformity_max_factor": 5.0,
        "density_floor": 0.05,
    },
    "decay": {
        # the p grid starts high enough that the p^5-weighted sup is already
        # in its decreasing regime for the default separation
        "p_list": [64, 96, 128, 192, 256],
        "eps": 0.2,
        "form": {"id": "fs", "coefficients": {}},
        "n_theta": None,
        "n_phi": None,
        "max_sample_per_axis": 36,
        "r2_threshold": 0.95,
        "power_weight": 5,
    },
    "near-diagonal": {
        "p_list": [16, 32, 64, 128, 256],
        "window_constant": 3.0,
        "x0": [1.05, 0.4],
        "n_radial": 17,
        "n_angular": 17,
        "form": {"id": "fs", "coefficients": {}},
        "n_theta": None,
        "n_phi": None,
        "slope_range": [-1.4, -0.75],
    },
    "identities": {
        "p_list": [4, 8, 16],
        "volume_forms": _BASE_FORMS,
        "n_theta": 40,
        "n_phi": 80,
        "tolerance": 1e-8,
    },
    "model-check": {
        "quad_order": 48,
        "window": 2.0,
        "n_random": 20,
        "seed": 7,
        "reproducing_tol": 1e-8,
        "annihilation_tol": 1e-8,
        "annihilation_fd_tol": 1e-6,
        "laplacian_tol": 1e-6,
        "modulus_tol": 1e-12,
    },
    "heat-check": {
        "u_min": 1e-3,
        "u_max": 1e-2,
        "n_u": 9,
        "coefficient_rtol": 0.01,
        "l_max": 48,
        "n_theta": 96,
        "n_phi": 192,
        "invariant_tol": 1e-10,
    },
}


def default_l_max(p_max):
    """Truncation default: spectral content of the smoothing operator sits
    at degrees of order sqrt(p), with heat damping beyond."""
    return max(40, math.ceil(4.0 * math.sqrt(p_max)))


def default_grid_sizes(p_max, band_margin=16):
    n_theta = p_max + 24
    return n_theta, 2 * n_theta


def load_config(command, path=None, overrides=None):
    """Merge defaults, an optional JSON file and CLI overrides; validate."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = json.loads(json.dumps(DEFAULTS[command]))
    if path is not None:
        try:
            with open(path) as handle:
                user = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        for key, value in user.items():
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r} for {command}")
            cfg[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    _validate(command, cfg)
    return cfg


def _validate(command, cfg):
    if "p_list" in cfg:
        ps = cfg["p_list"]
        if (not isinstance(ps, list) or not ps
                or any((not isinstance(p, int)) or p < 1 for p in ps)):
            raise ConfigError("p_list must be a nonempty list of positive ints")
        if sorted(ps) != ps:
            raise ConfigError("p_list must be sorted ascending")
    for key in ("tolerance", "tail_bound", "eps", "coefficient_rtol",
                "reproducing_tol", "annihilation_tol", "laplacian_tol",
                "invariant_tol", "modulus_tol", "annihilation_fd_tol"):
        if key in cfg and not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if command == "converge" and len(cfg["p_list"]) < 4:
        raise ConfigError("insufficient points: converge needs >= 4 p values")
    if command == "near-diagonal" and len(cfg["p_list"]) < 4:
        raise ConfigError("insufficient points: need >= 4 p values for a fit")


def parse_form_spec(spec, grid):
    if not isinstance(spec, dict) or "coefficients" not in spec:
        raise ConfigError("volume form spec needs a 'coefficients' map")
    coeffs = {}
    for key, value in spec["coefficients"].items():
        try:
            l_str, m_str = str(key).split(",")
            coeffs[(int(l_str), int(m_str))] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad coefficient key {key!r}") from exc
    return VolumeForm(grid, coeffs, form_id=spec.get("id", "custom"))


def grid_for(cfg, p_max, l_max=None):
    """Build the run grid, auto-sizing from the largest p when not pinned."""
    n_theta, n_phi = default_grid_sizes(p_max)
    if l_max is not None:
        n_theta = max(n_theta, 2 * l_max + 10)
        n_phi = max(n_phi, 4 * l_max + 20)
    if cfg.get("n_theta"):
        n_theta = int(cfg["n_theta"])
    if cfg.get("n_phi"):
        n_phi = int(cfg["n_phi"])
    return build_grid(n_theta, n_phi)

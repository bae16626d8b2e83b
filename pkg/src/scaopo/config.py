"""Strict sectioned run configuration.

A config file is a JSON object whose top-level keys are sections; every
key inside a section is checked against the schema below. Unknown
sections or keys, missing required keys, and rule violations are all
collected and reported together, never silently defaulted.
"""

import json
from dataclasses import dataclass, field

from .driver import StepSchedule
from .errors import ConfigurationError
from .solver import SolverOptions

_REQUIRED = object()


class ConfigError(ConfigurationError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive(v):
    return _is_num(v) and v > 0


def _nonneg(v):
    return _is_num(v) and v >= 0


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _int_like(v):
    return isinstance(v, int) and not isinstance(v, bool)


_ENV_COMMON = {
    "id": (_REQUIRED, lambda v: v in ("lqr", "mimo", "tabular"),
           "must be one of lqr|mimo|tabular"),
}

_ENV_FIELDS = {
    "lqr": {
        "seed": (0, _int_like, "must be an integer"),
        "n_state": (4, _pos_int, "must be a positive integer"),
        "n_action": (2, _pos_int, "must be a positive integer"),
        "n_constraints": (1, _pos_int, "must be a positive integer"),
        "spectral_radius": (0.8, lambda v: _is_num(v) and 0 < v < 1,
                            "must lie in (0, 1)"),
        "noise_std": (0.1, _positive, "must be positive"),
        "state_clip": (50.0, _positive, "must be positive"),
        "action_bound": (3.0, _positive, "must be positive"),
        "limits": (None, lambda v: v is None or (isinstance(v, list)
                                                 and all(_positive(x) for x in v)),
                   "must be null or a list of positive numbers"),
        "limit_slack": (1.2, lambda v: _is_num(v) and v > 1.0,
                        "must exceed 1 so the zero policy stays feasible"),
        "calibration_steps": (10000, _pos_int, "must be a positive integer"),
    },
    "mimo": {
        "n_antennas": (8, _pos_int, "must be a positive integer"),
        "n_users": (4, _pos_int, "must be a positive integer"),
        "bandwidth_hz": (1e7, _positive, "must be positive"),
        "slot_s": (1e-3, _positive, "must be positive"),
        "noise_w": (1e-6, _positive, "must be positive"),
        "arrival_mean_bps": (1e7, _positive, "must be positive"),
        "arrival_jitter": (1.0, lambda v: _is_num(v) and 0.0 <= v <= 1.0,
                           "must lie in [0, 1]"),
        "p_max_w": (10.0, _positive, "must be positive"),
        "alpha_min": (1e-3, _positive, "must be positive"),
        "alpha_max": (10.0, _positive, "must be positive"),
        "n_paths": (4, _pos_int, "must be a positive integer"),
        "angle_spread_deg": (5.0, _positive, "must be positive"),
        "gain_db_low": (-10.0, _is_num, "must be a number"),
        "gain_db_high": (10.0, _is_num, "must be a number"),
        "delay_limit_slots": (2.0, _positive, "must be positive"),
        "buffer_slots": (None, lambda v: v is None or _positive(v),
                         "must be positive or null for unbounded"),
        "obs_queue_clip": (10.0, _positive, "must be positive"),
    },
    "tabular": {
        "seed": (0, _int_like, "must be an integer"),
        "n_states": (3, lambda v: _pos_int(v) and v <= 10,
                     "must be a positive integer at most 10"),
        "n_actions": (2, lambda v: v == 2,
                      "must be 2 (thresholded-head policy)"),
        "n_constraints": (1, _pos_int, "must be a positive integer"),
        "floor": (0.01, lambda v: _is_num(v) and 0 < v < 1,
                  "must lie in (0, 1)"),
        "limits": (None, lambda v: v is None or (isinstance(v, list)
                                                 and all(_is_num(x) for x in v)),
                   "must be null or a list of numbers"),
    },
}

_SCHEMAS = {
    "schedule": {
        "kappa1": (0.6, lambda v: _is_num(v) and 0.5 < v < 1.0,
                   "must lie in (0.5, 1): slower decay breaks the estimate "
                   "averaging, faster decay freezes it"),
        "kappa2": (0.8, lambda v: _is_num(v) and 0.5 < v <= 1.0,
                   "must lie in (0.5, 1]"),
        "beta0": (1.0, _positive, "must be positive"),
        "beta_const": (None, lambda v: v is None or (_is_num(v) and 0 <= v <= 1),
                       "must be null or lie in [0, 1]"),
    },
    "estimator": {
        "half_window": (_REQUIRED, _pos_int, "must be a positive integer"),
        "window_mode": ("constant", lambda v: v in ("constant", "log"),
                        "must be constant|log"),
        "window_floor": (50, _pos_int, "must be a positive integer"),
        "window_growth": (100.0, _positive, "must be positive"),
    },
    "surrogate": {
        "curvature": (1.0, lambda v: (_positive(v)
                                      or (isinstance(v, list) and len(v) > 0
                                          and all(_positive(x) for x in v))),
                      "must be a positive number or list of positive numbers"),
    },
    "policy": {
        "hidden": ([128, 128], lambda v: isinstance(v, list)
                   and all(_pos_int(x) for x in v),
                   "must be a list of positive integers"),
        "param_bound": (10.0, _positive, "must be positive"),
        "init_log_std_scale": (0.25, _positive, "must be positive"),
        "zero_output_init": (False, lambda v: isinstance(v, bool),
                             "must be a boolean"),
    },
    "solver": {
        "gamma0": (1.0, _positive, "must be positive"),
        "max_iterations": (2000, _pos_int, "must be a positive integer"),
        "kkt_tol": (1e-6, _positive, "must be positive"),
        "stall_window": (100, _pos_int, "must be a positive integer"),
        "stall_tol": (1e-10, _positive, "must be positive"),
        "polish": (True, lambda v: isinstance(v, bool), "must be a boolean"),
    },
    "run": {
        "iterations": (_REQUIRED, _pos_int, "must be a positive integer"),
        "batch_size": (1, _pos_int, "must be a positive integer"),
        "seeds": ([0, 1, 2, 3, 4], lambda v: isinstance(v, list) and len(v) > 0
                  and all(_int_like(x) for x in v) and len(set(v)) == len(v),
                  "must be a non-empty list of distinct integers"),
        "variant": ("replay", lambda v: v in ("replay", "no_replay"),
                    "must be replay|no_replay"),
        "output_dir": (None, lambda v: v is None or isinstance(v, str),
                       "must be null or a string"),
        "workers": (0, lambda v: _int_like(v) and v >= 0,
                    "must be a non-negative integer (0 = auto)"),
    },
}

_SECTIONS = ("env", "schedule", "estimator", "surrogate", "policy",
             "solver", "run")


@dataclass(frozen=True)
class RunConfig:
    env: dict
    schedule: StepSchedule
    estimator: dict
    curvature: object            # scalar or list, broadcast per cost index
    policy: dict
    solver: SolverOptions
    run: dict
    resolved: dict = field(repr=False, default_factory=dict)

    def to_dict(self):
        return json.loads(json.dumps(self.resolved))


def _apply_schema(section, schema, data, violations):
    out = {}
    for key, value in data.items():
        if key not in schema:
            violations.append(f"{section}: unknown key {key!r}")
    for key, (default, check, msg) in schema.items():
        if key in data:
            value = data[key]
            if not check(value):
                violations.append(f"{section}.{key}: {msg} (got {value!r})")
            else:
                out[key] = value
        elif default is _REQUIRED:
            violations.append(f"{section}.{key}: required key is missing")
        else:
            out[key] = default
    return out


def validate_config(raw):
    """dict -> RunConfig, or raise ConfigError listing every violation."""
    violations = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object of sections"])
    for key in raw:
        if key not in _SECTIONS:
            violations.append(f"unknown section {key!r}")
    for required in ("env", "estimator", "run"):
        if required not in raw:
            violations.append(f"missing required section {required!r}")
    if violations and "env" not in raw:
        raise ConfigError(violations)

    env_raw = raw.get("env", {})
    env = _apply_schema("env", _ENV_COMMON, {"id": env_raw.get("id")},
                        violations)
    env_id = env.get("id")
    if env_id in _ENV_FIELDS:
        rest = {k: v for k, v in env_raw.items() if k != "id"}
        env.update(_apply_schema("env", _ENV_FIELDS[env_id], rest, violations))

    sched_d = _apply_schema("schedule", _SCHEMAS["schedule"],
                            raw.get("schedule", {}), violations)
    est = _apply_schema("estimator", _SCHEMAS["estimator"],
                        raw.get("estimator", {}), violations)
    surr = _apply_schema("surrogate", _SCHEMAS["surrogate"],
                         raw.get("surrogate", {}), violations)
    pol = _apply_schema("policy", _SCHEMAS["policy"],
                        raw.get("policy", {}), violations)
    solver_d = _apply_schema("solver", _SCHEMAS["solver"],
                             raw.get("solver", {}), violations)
    run = _apply_schema("run", _SCHEMAS["run"], raw.get("run", {}), violations)

    schedule = None
    if not any(v.startswith("schedule.") for v in violations):
        try:
            schedule = StepSchedule(**sched_d)
        except ConfigurationError as exc:
            violations.append(f"schedule: {exc}")

    if (run.get("variant") == "no_replay" and isinstance(run.get("batch_size"), int)
            and (run["batch_size"] % 2 or run["batch_size"] < 2)):
        violations.append("run.batch_size: the no_replay variant needs an "
                          "even batch size >= 2")
    if env_id == "mimo" and isinstance(env.get("n_users"), int) \
            and isinstance(env.get("n_antennas"), int) \
            and env["n_users"] > env["n_antennas"]:
        violations.append("env.n_users: must not exceed env.n_antennas")
    if env_id == "mimo" and _is_num(env.get("alpha_min")) \
            and _is_num(env.get("alpha_max")) \
            and env["alpha_max"] <= env["alpha_min"]:
        violations.append("env.alpha_max: must exceed env.alpha_min")

    if violations:
        raise ConfigError(violations)

    solver = SolverOptions(**solver_d)
    resolved = {"env": env, "schedule": sched_d, "estimator": est,
                "surrogate": surr, "policy": pol, "solver": solver_d,
                "run": run}
    return RunConfig(env=env, schedule=schedule, estimator=est,
                     curvature=surr["curvature"], policy=pol, solver=solver,
                     run=run, resolved=resolved)


def load_config(path):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"])
    return validate_config(raw)

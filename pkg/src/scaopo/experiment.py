"""Multi-seed experiment runner and output writers.

A run directory contains exactly four kinds of files and nothing else:
the archived resolved config, one metrics CSV per seed, the aggregate
curve CSV, and summary.json. Re-running into the same directory first
removes those known files so stale outputs from a previous run cannot
mix with fresh ones.
"""

import fnmatch
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import validate_config
from .driver import DriverConfig, ScaopoDriver
from .envs import (LqrEnv, MimoEnv, MimoParams, TabularEnv, make_lqr,
                   make_tabular, simulate_equal_power, zero_policy_limits)
from .errors import ScaopoError
from .policy import GaussianMlpPolicy, MlpArch, ThresholdedGaussianPolicy

TAIL_FRACTION = 0.2
BASELINE_GRID = 25
BASELINE_SLOTS = 3000

_KNOWN_OUTPUTS = ("config.json", "summary.json", "curve.csv",
                  "metrics_seed*.csv")


def _seed_streams(run_seed):
    env_ss, drv_ss, init_ss = np.random.SeedSequence(run_seed).spawn(3)
    return env_ss, drv_ss, init_ss


def build_env(env_cfg, env_seed_seq, start_action_std=0.0):
    kind = env_cfg["id"]
    if kind == "lqr":
        params = make_lqr(env_cfg["n_state"], env_cfg["n_action"],
                          env_cfg["n_constraints"], seed=env_cfg["seed"],
                          spectral_radius=env_cfg["spectral_radius"],
                          noise_std=env_cfg["noise_std"],
                          state_clip=env_cfg["state_clip"])
        limits = env_cfg["limits"]
        if limits is None:
            calib = np.random.SeedSequence([env_cfg["seed"] & 0xFFFFFFFF, 1])
            limits = zero_policy_limits(params, seed=calib,
                                        n_steps=env_cfg["calibration_steps"],
                                        slack=env_cfg["limit_slack"],
                                        action_std=start_action_std,
                                        action_bound=env_cfg["action_bound"])
        return LqrEnv(params, limits=limits,
                      action_bound=env_cfg["action_bound"],
                      seed=env_seed_seq)
    if kind == "mimo":
        params = MimoParams(
            n_antennas=env_cfg["n_antennas"], n_users=env_cfg["n_users"],
            bandwidth_hz=env_cfg["bandwidth_hz"], slot_s=env_cfg["slot_s"],
            noise_w=env_cfg["noise_w"],
            arrival_mean_bps=env_cfg["arrival_mean_bps"],
            arrival_jitter=env_cfg["arrival_jitter"],
            p_max_w=env_cfg["p_max_w"], alpha_min=env_cfg["alpha_min"],
            alpha_max=env_cfg["alpha_max"], n_paths=env_cfg["n_paths"],
            angle_spread_deg=env_cfg["angle_spread_deg"],
            gain_db_low=env_cfg["gain_db_low"],
            gain_db_high=env_cfg["gain_db_high"],
            delay_limit_slots=env_cfg["delay_limit_slots"],
            buffer_slots=(np.inf if env_cfg["buffer_slots"] is None
                          else env_cfg["buffer_slots"]),
            obs_queue_clip=env_cfg["obs_queue_clip"])
        return MimoEnv(params, seed=env_seed_seq)
    if kind == "tabular":
        mdp = make_tabular(env_cfg["n_states"], env_cfg["n_actions"],
                           env_cfg["n_constraints"], seed=env_cfg["seed"],
                           floor=env_cfg["floor"], limits=env_cfg["limits"])
        return TabularEnv(mdp, seed=env_seed_seq)
    raise ScaopoError(f"unknown env id {kind!r}")


def build_policy(policy_cfg, env, env_id):
    spec = env.spec
    if env_id == "tabular":
        arch = MlpArch(spec.state_dim, 1, tuple(policy_cfg["hidden"]))
        base = GaussianMlpPolicy(arch, spec.action_low, spec.action_high,
                                 param_bound=policy_cfg["param_bound"])
        return ThresholdedGaussianPolicy(base)
    arch = MlpArch(spec.state_dim, spec.action_dim,
                   tuple(policy_cfg["hidden"]))
    return GaussianMlpPolicy(arch, spec.action_low, spec.action_high,
                             param_bound=policy_cfg["param_bound"])


def _driver_config(cfg):
    curvature = cfg.curvature
    if isinstance(curvature, list):
        curvature = tuple(float(c) for c in curvature)
    return DriverConfig(
        half_window=cfg.estimator["half_window"],
        iterations=cfg.run["iterations"],
        batch_size=cfg.run["batch_size"],
        curvature=curvature,
        schedule=cfg.schedule,
        solver=cfg.solver,
        window_mode=cfg.estimator["window_mode"],
        window_floor=cfg.estimator["window_floor"],
        window_growth=cfg.estimator["window_growth"],
        reuse=(cfg.run["variant"] == "replay"))


def start_action_std(cfg):
    """Exploration std of the zero-mean starting policy, used to fold its
    noise into limit calibration when the config leaves limits open."""
    if cfg.env["id"] != "lqr":
        return 0.0
    span = 2.0 * cfg.env["action_bound"]
    return cfg.policy["init_log_std_scale"] * span


def run_single_seed(cfg, seed):
    """One seed end to end; returns (records, driver)."""
    env_ss, drv_ss, init_ss = _seed_streams(seed)
    env = build_env(cfg.env, env_ss, start_action_std(cfg))
    policy = build_policy(cfg.policy, env, cfg.env["id"])
    theta0 = policy.init_params(
        np.random.default_rng(init_ss),
        log_std_scale=cfg.policy["init_log_std_scale"],
        zero_last_layer=cfg.policy["zero_output_init"])
    driver = ScaopoDriver(env, policy, _driver_config(cfg), seed=drv_ss,
                          theta0=theta0)
    records = driver.run()
    return records, driver


def metrics_rows(records):
    rows = []
    for rec in records:
        row = [rec.t, rec.env_steps, float(rec.running_costs[0])]
        row.extend(float(c) for c in rec.running_costs[1:])
        row.extend([rec.kind, rec.solver_iterations])
        rows.append(row)
    return rows


def metrics_header(n_constraints):
    cols = ["iteration", "env_steps", "objective_avg"]
    cols.extend(f"cost{i}_avg" for i in range(1, n_constraints + 1))
    cols.extend(["update", "solver_iterations"])
    return cols


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def tail_means(records):
    """Mean running averages over the final stretch of the run."""
    tail = max(1, int(round(TAIL_FRACTION * len(records))))
    block = np.stack([r.running_costs for r in records[-tail:]])
    return block.mean(axis=0)


def baseline_equal_power(params, env_seed_seq, n_slots=BASELINE_SLOTS,
                         n_grid=BASELINE_GRID):
    """Smallest fixed equal-split transmit power whose simulated mean
    delays stay within the limit, over a log-spaced power grid. Power is
    reported in cost units (fraction of the per-user cap)."""
    top = params.p_max_w * params.n_users
    grid = np.logspace(np.log10(top) - 4, np.log10(top), n_grid)
    best = None
    for total in grid:
        power, delays = simulate_equal_power(params, env_seed_seq, total,
                                             n_slots)
        if np.all(delays <= params.delay_limit_slots):
            best = {"power": power, "power_w": power * params.p_max_w,
                    "delays_slots": delays.tolist(), "meets_limits": True}
            break
    if best is None:
        power, delays = simulate_equal_power(params, env_seed_seq, top,
                                             n_slots)
        best = {"power": power, "power_w": power * params.p_max_w,
                "delays_slots": delays.tolist(), "meets_limits": False}
    return best


def _seed_task(resolved, seed):
    cfg = validate_config(resolved)
    start = time.perf_counter()
    records, driver = run_single_seed(cfg, seed)
    wall_s = time.perf_counter() - start
    finals = tail_means(records)
    limits = np.asarray(driver.env.spec.limits, float)
    entry = {
        "seed": seed,
        "initial_objective": float(records[0].running_costs[0]),
        "final_objective": float(finals[0]),
        "final_costs": [float(c) for c in finals[1:]],
        "limits": limits.tolist(),
        "meets_limits": bool(np.all(finals[1:] <= limits)),
        "feasible_updates": sum(r.kind == "feasible" for r in records),
        "env_steps": records[-1].env_steps,
        "wall_s": wall_s,
    }
    if cfg.env["id"] == "mimo":
        env_ss, _, _ = _seed_streams(seed)
        entry["baseline"] = baseline_equal_power(driver.env.params, env_ss)
    return metrics_rows(records), entry


def prepare_output_dir(path):
    os.makedirs(path, exist_ok=True)
    for name in sorted(os.listdir(path)):
        full = os.path.join(path, name)
        if any(fnmatch.fnmatch(name, pat) for pat in _KNOWN_OUTPUTS):
            os.remove(full)
        else:
            raise ScaopoError(
                f"output directory {path} holds an unrelated file {name!r}; "
                "refusing to write next to it")


def run_experiment(cfg, out_dir, workers=None):
    prepare_output_dir(out_dir)
    resolved = cfg.to_dict()
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")

    seeds = cfg.run["seeds"]
    if workers is None:
        workers = cfg.run["workers"]
    if workers == 0:
        workers = min(len(seeds), os.cpu_count() or 1)
    results = {}
    if workers <= 1 or len(seeds) == 1:
        for seed in seeds:
            results[seed] = _seed_task(resolved, seed)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {seed: pool.submit(_seed_task, resolved, seed)
                       for seed in seeds}
            for seed, fut in futures.items():
                results[seed] = fut.result()

    n_constraints = len(results[seeds[0]][1]["limits"])
    header = metrics_header(n_constraints)
    for seed in seeds:
        rows, _ = results[seed]
        write_csv(os.path.join(out_dir, f"metrics_seed{seed}.csv"),
                  header, rows)

    per_seed_rows = [results[s][0] for s in seeds]
    n_rows = min(len(r) for r in per_seed_rows)
    curve_header = ["iteration", "env_steps"]
    for label in ["objective"] + [f"cost{i}" for i in
                                  range(1, n_constraints + 1)]:
        curve_header.extend([f"{label}_mean", f"{label}_std"])
    curve_rows = []
    for t in range(n_rows):
        base = per_seed_rows[0][t]
        row = [base[0], base[1]]
        for col in range(2, 3 + n_constraints):
            vals = np.array([rows[t][col] for rows in per_seed_rows])
            row.extend([float(vals.mean()), float(vals.std())])
        curve_rows.append(row)
    write_csv(os.path.join(out_dir, "curve.csv"), curve_header, curve_rows)

    entries = [results[s][1] for s in seeds]
    finals = np.array([e["final_objective"] for e in entries])
    costs = np.array([e["final_costs"] for e in entries])
    summary = {
        "per_seed": {str(e["seed"]): e for e in entries},
        "aggregate": {
            "n_seeds": len(seeds),
            "final_objective_mean": float(finals.mean()),
            "final_objective_std": float(finals.std()),
            "final_costs_mean": costs.mean(axis=0).tolist(),
            "final_costs_std": costs.std(axis=0).tolist(),
            "seeds_meeting_limits": sum(e["meets_limits"] for e in entries),
            "wall_s_total": float(sum(e["wall_s"] for e in entries)),
        },
        "limits": entries[0]["limits"],
        "config": resolved,
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def emit_plotdata(run_dir, out_dir=None):
    """Long-format plot tables (series, iteration, value, lo, hi) derived
    from a finished run directory; written outside that directory."""
    if out_dir is None:
        out_dir = run_dir.rstrip("/").rstrip(os.sep) + ".plots"
    with open(os.path.join(run_dir, "summary.json")) as fh:
        summary = json.load(fh)
    header, rows = _read_csv(os.path.join(run_dir, "curve.csv"))
    idx = {name: i for i, name in enumerate(header)}
    limits = summary["limits"]
    n_constraints = len(limits)
    iters = [int(r[idx["iteration"]]) for r in rows]

    def series(label, mean_col, std_col):
        out = []
        for r, t in zip(rows, iters):
            m = float(r[idx[mean_col]])
            s = float(r[idx[std_col]])
            out.append((label, t, m, m - s, m + s))
        return out

    os.makedirs(out_dir, exist_ok=True)
    obj_rows = series("objective", "objective_mean", "objective_std")
    baselines = [e.get("baseline") for e in summary["per_seed"].values()]
    if all(b is not None for b in baselines) and baselines:
        powers = np.array([b["power_w"] for b in baselines])
        obj_rows.extend(("equal_power_baseline", t, float(powers.mean()),
                         float(powers.min()), float(powers.max()))
                        for t in iters)
    write_csv(os.path.join(out_dir, "objective.csv"),
              ["series", "iteration", "value", "lo", "hi"], obj_rows)

    con_rows = []
    for i in range(1, n_constraints + 1):
        con_rows.extend(series(f"cost{i}", f"cost{i}_mean", f"cost{i}_std"))
        lim = float(limits[i - 1])
        con_rows.extend((f"limit{i}", t, lim, lim, lim) for t in iters)
    write_csv(os.path.join(out_dir, "constraints.csv"),
              ["series", "iteration", "value", "lo", "hi"], con_rows)
    return out_dir

"""The optimization loop: collect experience, refresh the moving-average
estimates, build surrogates, solve the dual subproblem (feasibility check
first), and move the parameters by a convex combination with a decaying
step. Supports a window that grows logarithmically, a no-reuse variant
whose buffer is exactly one batch, and bitwise checkpoint/resume.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, ConfigurationError, ContractViolationError
from .estimator import (EstimateState, Experience, ReplayWindow,
                        sample_gradient, sample_value, update_estimates,
                        window_schedule)
from .solver import (SolverOptions, build_surrogates, check_feasibility,
                     solve_objective_update, surrogate_eval)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class StepSchedule:
    """Decaying step sizes: estimate blending alpha(t) = t^-kappa1 (one at
    t = 0) and policy step beta(t) = beta0 * (t+1)^-kappa2. The policy must
    move on the slower timescale, hence kappa1 < kappa2. beta_const pins
    beta for diagnostics (e.g. a frozen policy)."""

    kappa1: float = 0.6
    kappa2: float = 0.8
    beta0: float = 1.0
    beta_const: float | None = None

    def __post_init__(self):
        if not 0.5 < self.kappa1 < 1.0:
            raise ConfigurationError(
                f"kappa1 must lie in (0.5, 1), got {self.kappa1}")
        if not 0.5 < self.kappa2 <= 1.0:
            raise ConfigurationError(
                f"kappa2 must lie in (0.5, 1], got {self.kappa2}")
        if self.kappa1 >= self.kappa2:
            raise ConfigurationError(
                "kappa1 must be < kappa2: the policy step must decay "
                f"faster than the estimate step (got {self.kappa1} >= {self.kappa2})")
        if self.beta0 <= 0:
            raise ConfigurationError("beta0 must be positive")
        if self.beta_const is not None and not 0.0 <= self.beta_const <= 1.0:
            raise ConfigurationError("beta_const must lie in [0, 1]")

    def alpha(self, t):
        return 1.0 if t == 0 else float(t) ** (-self.kappa1)

    def beta(self, t):
        if self.beta_const is not None:
            return self.beta_const
        return self.beta0 * float(t + 1) ** (-self.kappa2)


@dataclass(frozen=True)
class DriverConfig:
    half_window: int
    iterations: int
    batch_size: int = 1
    curvature: float | tuple = 1.0
    schedule: StepSchedule = field(default_factory=StepSchedule)
    solver: SolverOptions = field(default_factory=SolverOptions)
    window_mode: str = "constant"        # "constant" | "log"
    window_floor: int = 50
    window_growth: float = 100.0
    reuse: bool = True                   # False: buffer is exactly one batch

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if not self.reuse:
            if self.window_mode != "constant":
                raise ConfigurationError(
                    "the no-reuse variant needs a constant window")
            if self.batch_size % 2 or self.batch_size < 2:
                raise ConfigurationError(
                    "the no-reuse variant needs an even batch size >= 2")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    env_steps: int
    values: np.ndarray            # running limit-shifted estimates
    running_costs: np.ndarray     # raw window averages, one per cost index
    kind: str                     # "objective" | "feasible"
    solver_iterations: int
    kkt_residual: float
    max_violation: float          # worst constraint surrogate at new params
    wall_ms: float


class ScaopoDriver:
    def __init__(self, env, policy, config, seed, theta0=None, _defer=False):
        self.env = env
        self.policy = policy
        self.config = config
        ss = (seed if isinstance(seed, np.random.SeedSequence)
              else np.random.SeedSequence(seed))
        init_ss, act_ss = ss.spawn(2)
        self._rng_act = np.random.default_rng(act_ss)
        self.lam_obj = None
        self.lam_feas = None
        self.t = 0
        self.env_steps = 0
        spec = env.spec
        half = (config.batch_size // 2 if not config.reuse
                else (window_schedule(0, config.window_mode, config.half_window,
                                      config.window_floor, config.window_growth)
                      if config.window_mode == "log" else config.half_window))
        self.window = ReplayWindow(half, spec.state_dim, spec.action_dim,
                                   spec.n_costs)
        self.est = EstimateState.initial(spec.n_costs, policy.n_params)
        self._shift = spec.shift_vector()
        if _defer:
            return
        if theta0 is None:
            theta0 = policy.init_params(np.random.default_rng(init_ss))
        self.theta = policy.project(np.asarray(theta0, float))
        self._obs = env.reset()
        self._fill_window()

    # ------------------------------------------------------------ experience

    def _env_step(self):
        env_action, stored, _ = self.policy.sample(self.theta, self._obs,
                                                   self._rng_act)
        nxt, costs = self.env.step(env_action)
        self.window.push(Experience(self._obs, stored, costs - self._shift))
        self._obs = nxt
        self.env_steps += 1

    def _fill_window(self):
        while not self.window.full:
            self._env_step()

    # -------------------------------------------------------------- one step

    def step(self):
        cfg = self.config
        t0 = time.perf_counter()
        for _ in range(cfg.batch_size):
            self._env_step()
        if cfg.window_mode == "log" and cfg.reuse:
            half = window_schedule(self.t, cfg.window_mode, cfg.half_window,
                                   cfg.window_floor, cfg.window_growth)
            if half != self.window.half_length:
                self.window.resize(half)
                self._fill_window()

        sched = cfg.schedule
        alpha = sched.alpha(self.t)
        fresh_values = sample_value(self.window)
        blended = (1.0 - alpha) * self.est.values + alpha * fresh_values
        fresh_grads = sample_gradient(self.window, self.policy, self.theta,
                                      blended)
        self.est = update_estimates(self.est, fresh_values, fresh_grads, alpha)

        models = build_surrogates(self.est, self.theta, cfg.curvature)
        bound = self.policy.param_bound
        spent = 0
        if len(models) > 1:
            feasible, sol6 = check_feasibility(models, bound, cfg.solver,
                                               self.lam_feas)
            self.lam_feas = sol6.dual.lam
            spent += sol6.dual.iterations
            if feasible:
                sol = solve_objective_update(models, bound, cfg.solver,
                                             self.lam_obj)
                self.lam_obj = sol.dual.lam
                spent += sol.dual.iterations
            else:
                sol = sol6
        else:
            sol = solve_objective_update(models, bound, cfg.solver, None)
            spent += sol.dual.iterations

        beta = sched.beta(self.t)
        theta_next = (1.0 - beta) * self.theta + beta * sol.theta
        if not self.policy.in_bounds(theta_next):
            raise ContractViolationError(
                "convex combination left the parameter box")
        self.theta = self.policy.project(theta_next)

        max_violation = (max(surrogate_eval(m, self.theta) for m in models[1:])
                         if len(models) > 1 else float("nan"))
        _, _, costs = self.window.arrays()
        running = costs.mean(axis=0) + self._shift
        rec = IterationRecord(
            t=self.t, env_steps=self.env_steps,
            values=self.est.values.copy(), running_costs=running,
            kind=sol.kind, solver_iterations=spent,
            kkt_residual=sol.kkt_residual, max_violation=float(max_violation),
            wall_ms=(time.perf_counter() - t0) * 1e3)
        self.t += 1
        return rec

    def run(self, iterations=None, callback=None):
        n = self.config.iterations if iterations is None else iterations
        records = []
        for _ in range(n):
            rec = self.step()
            records.append(rec)
            if callback is not None:
                callback(rec)
        return records

    # ----------------------------------------------------------- checkpoints

    def save_checkpoint(self, path):
        win = self.window.state_dict()
        env_state = self.env.get_state()
        meta = {
            "version": CHECKPOINT_VERSION,
            "t": self.t,
            "env_steps": self.env_steps,
            "est_step": self.est.step,
            "half_length": win["half_length"],
            "has_lam_obj": self.lam_obj is not None,
            "has_lam_feas": self.lam_feas is not None,
            "rng_act": self._rng_act.bit_generator.state,
            "env_rng": env_state["rng"],
            "env_scalars": env_state["scalars"],
        }
        arrays = {
            "theta": self.theta,
            "est_values": self.est.values,
            "est_grads": self.est.grads,
            "win_states": win["states"],
            "win_actions": win["actions"],
            "win_costs": win["costs"],
            "obs": self._obs,
            "lam_obj": (self.lam_obj if self.lam_obj is not None
                        else np.zeros(0)),
            "lam_feas": (self.lam_feas if self.lam_feas is not None
                         else np.zeros(0)),
        }
        for k, v in env_state["arrays"].items():
            arrays[f"env_{k}"] = v
        np.savez(path, meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def resume(cls, env, policy, config, seed, path):
        """Rebuild a driver mid-run; continuing from here reproduces the
        uninterrupted run bitwise."""
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(
                    f"unsupported checkpoint version {meta.get('version')}")
            drv = cls(env, policy, config, seed, _defer=True)
            drv.t = int(meta["t"])
            drv.env_steps = int(meta["env_steps"])
            drv.theta = data["theta"].copy()
            if drv.theta.shape != (policy.n_params,):
                raise CheckpointError("checkpoint parameter shape mismatch")
            drv.est = EstimateState(values=data["est_values"].copy(),
                                    grads=data["est_grads"].copy(),
                                    step=int(meta["est_step"]))
            drv.window.load_state_dict({
                "half_length": meta["half_length"],
                "states": data["win_states"],
                "actions": data["win_actions"],
                "costs": data["win_costs"]})
            drv.lam_obj = (data["lam_obj"].copy() if meta["has_lam_obj"]
                           else None)
            drv.lam_feas = (data["lam_feas"].copy() if meta["has_lam_feas"]
                            else None)
            drv._rng_act.bit_generator.state = meta["rng_act"]
            drv._obs = data["obs"].copy()
            env_arrays = {k[len("env_"):]: data[k] for k in data.files
                          if k.startswith("env_")}
            env.set_state({"arrays": env_arrays,
                           "scalars": meta["env_scalars"],
                           "rng": meta["env_rng"]})
        return drv

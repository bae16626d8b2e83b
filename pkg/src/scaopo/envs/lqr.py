"""Linear-quadratic regulation with quadratic constraint costs.

Dynamics x' = A x + B a + noise with A rescaled to a target spectral
radius, so the uncontrolled system is stable and the zero policy is a
natural feasibility reference. Cost i is x' Q_i x + a' R_i a with
Gram-matrix weights. States are clipped into a large box to keep the
chain compact under arbitrary admissible actions.
"""

from dataclasses import dataclass

import numpy as np

from .base import EnvSpec
from ..errors import ConfigurationError


@dataclass(frozen=True)
class LqrParams:
    A: np.ndarray
    B: np.ndarray
    Q: tuple          # n_costs state-weight matrices
    R: tuple          # n_costs action-weight matrices
    noise_std: float = 0.1
    state_clip: float = 50.0


def make_lqr(n_state, n_action, n_constraints=1, seed=0,
             spectral_radius=0.8, noise_std=0.1, state_clip=50.0):
    """Random instance: Gaussian A (rescaled), Gaussian B, Gram costs."""
    if not 0.0 < spectral_radius < 1.0:
        raise ConfigurationError("spectral radius must be in (0, 1)")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_state, n_state))
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    A = A * (spectral_radius / rho)
    B = rng.standard_normal((n_state, n_action))
    Q, R = [], []
    for _ in range(n_constraints + 1):
        M = rng.standard_normal((n_state, n_state))
        Q.append(M.T @ M / n_state)
        N = rng.standard_normal((n_action, n_action))
        R.append(N.T @ N / n_action)
    return LqrParams(A=A, B=B, Q=tuple(Q), R=tuple(R),
                     noise_std=noise_std, state_clip=state_clip)


class LqrEnv:
    def __init__(self, params, limits, action_bound, seed):
        n_state = params.A.shape[0]
        n_action = params.B.shape[1]
        n_constraints = len(params.Q) - 1
        self.params = params
        self.spec = EnvSpec(
            state_dim=n_state,
            action_low=np.full(n_action, -float(action_bound)),
            action_high=np.full(n_action, float(action_bound)),
            n_constraints=n_constraints,
            limits=np.asarray(limits, float))
        self._rng = np.random.default_rng(seed)
        self._state = np.zeros(n_state)
        self.clip_events = 0

    def reset(self):
        self._state = np.zeros(self.spec.state_dim)
        return self._state.copy()

    def step(self, action):
        action = self.spec.check_action(action)
        x = self._state
        costs = np.array([x @ q @ x + action @ r @ action
                          for q, r in zip(self.params.Q, self.params.R)])
        noise = self.params.noise_std * self._rng.standard_normal(x.size)
        nxt = self.params.A @ x + self.params.B @ action + noise
        clipped = np.clip(nxt, -self.params.state_clip, self.params.state_clip)
        if np.any(clipped != nxt):
            self.clip_events += 1
        self._state = clipped
        return self._state.copy(), costs

    def get_state(self):
        return {"arrays": {"state": self._state.copy()},
                "scalars": {"clip_events": self.clip_events},
                "rng": self._rng.bit_generator.state}

    def set_state(self, d):
        self._state = np.asarray(d["arrays"]["state"], float).copy()
        self.clip_events = int(d["scalars"]["clip_events"])
        self._rng.bit_generator.state = d["rng"]


def zero_policy_limits(params, seed, n_steps=10000, slack=1.2,
                       action_std=0.0, action_bound=1.0):
    """Constraint limits calibrated as slack times the zero-mean policy's
    long-run constraint costs, so that policy is feasible by construction.
    action_std > 0 includes the starting policy's exploration noise in the
    calibration; zero reproduces the literal all-zero action sequence."""
    n_constraints = len(params.Q) - 1
    env = LqrEnv(params, limits=np.zeros(n_constraints),
                 action_bound=action_bound, seed=seed)
    env.reset()
    rng = np.random.default_rng(np.random.SeedSequence([2, n_steps]))
    n_action = params.B.shape[1]
    total = np.zeros(n_constraints)
    for _ in range(n_steps):
        if action_std > 0.0:
            act = np.clip(rng.normal(0.0, action_std, n_action),
                          -action_bound, action_bound)
        else:
            act = np.zeros(n_action)
        _, costs = env.step(act)
        total += costs[1:]
    return slack * total / n_steps

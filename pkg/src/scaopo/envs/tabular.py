"""Small random ergodic MDPs with one-hot observations.

Transition rows mix a uniform floor with a Dirichlet draw so every
entry is strictly positive (hence a unique stationary distribution);
costs are uniform on [0, 1]. These instances exist to be solved exactly
by the oracle module and to cross-check the sampled estimators.
"""

from dataclasses import dataclass

import numpy as np

from .base import EnvSpec
from ..errors import ConfigurationError, ContractViolationError


@dataclass(frozen=True)
class TabularMdp:
    transitions: np.ndarray      # (states, actions, states)
    costs: np.ndarray            # (n_costs, states, actions)
    limits: np.ndarray           # (n_costs - 1,)

    @property
    def n_states(self):
        return self.transitions.shape[0]

    @property
    def n_actions(self):
        return self.transitions.shape[1]


def make_tabular(n_states=3, n_actions=2, n_constraints=1, seed=0,
                 floor=0.01, limits=None):
    if n_states > 10:
        raise ConfigurationError("tabular instances are capped at 10 states")
    rng = np.random.default_rng(seed)
    raw = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    transitions = floor / n_states + (1.0 - floor) * raw
    costs = rng.uniform(0.0, 1.0, (n_constraints + 1, n_states, n_actions))
    if limits is None:
        limits = np.full(n_constraints, 0.5)
    return TabularMdp(transitions=transitions, costs=costs,
                      limits=np.asarray(limits, float))


class TabularEnv:
    """Wraps a TabularMdp; observations are one-hot state indicators and
    actions are integer indices."""

    def __init__(self, mdp, seed):
        self.mdp = mdp
        self.spec = EnvSpec(
            state_dim=mdp.n_states,
            action_low=np.zeros(1),
            action_high=np.full(1, float(mdp.n_actions - 1)),
            n_constraints=len(mdp.limits),
            limits=mdp.limits)
        self._rng = np.random.default_rng(seed)
        self._state = 0

    def _obs(self):
        v = np.zeros(self.mdp.n_states)
        v[self._state] = 1.0
        return v

    def reset(self):
        self._state = 0
        return self._obs()

    def step(self, action):
        a = int(np.ravel(action)[0])
        if not 0 <= a < self.mdp.n_actions:
            raise ContractViolationError(f"action {a} out of range")
        s = self._state
        costs = self.mdp.costs[:, s, a].copy()
        self._state = int(self._rng.choice(self.mdp.n_states,
                                           p=self.mdp.transitions[s, a]))
        return self._obs(), costs

    def get_state(self):
        return {"arrays": {}, "scalars": {"state": self._state},
                "rng": self._rng.bit_generator.state}

    def set_state(self, d):
        self._state = int(d["scalars"]["state"])
        self._rng.bit_generator.state = d["rng"]

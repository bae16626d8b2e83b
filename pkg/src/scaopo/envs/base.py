"""Shared environment contract.

An environment is a single-threaded stateful object owning its own
generator. `reset()` returns the first observation; `step(action)`
returns (next observation, raw cost vector) where costs[0] is the
objective and costs[1:] the constrained quantities, evaluated at the
pre-transition state. Constraint limits live on EnvSpec so callers can
shift costs consistently.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ContractViolationError


@dataclass(frozen=True)
class EnvSpec:
    state_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    n_constraints: int
    limits: np.ndarray            # one per constraint

    def __post_init__(self):
        if self.action_low.shape != self.action_high.shape:
            raise ConfigurationError("action box bounds must have equal shape")
        if np.any(self.action_high <= self.action_low):
            raise ConfigurationError("action box must have positive width")
        if self.limits.shape != (self.n_constraints,):
            raise ConfigurationError("need exactly one limit per constraint")

    @property
    def action_dim(self):
        return self.action_low.size

    @property
    def n_costs(self):
        return self.n_constraints + 1

    def shift_vector(self):
        """Subtract this from raw costs to get limit-shifted costs."""
        return np.concatenate([[0.0], self.limits])

    def check_action(self, action, tol=1e-9):
        action = np.asarray(action, float)
        if action.shape != self.action_low.shape:
            raise ContractViolationError(
                f"action shape {action.shape} != {self.action_low.shape}")
        if np.any(action < self.action_low - tol) or np.any(action > self.action_high + tol):
            raise ContractViolationError(
                f"action {action} outside box [{self.action_low}, {self.action_high}]")
        return np.clip(action, self.action_low, self.action_high)

"""Replay window and off-policy estimates of average costs and their
policy gradients.

The window stores the most recent 2T transitions. The value estimate is
the plain mean of the stored (shifted) costs. The gradient estimate
anchors each of the oldest T transitions, accumulates a length-T sum of
cost deviations ahead of it as a differential action-value proxy, and
weights the score function of the *current* parameters at the stored
state-action pair, which is what makes reuse of stale data legitimate.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NotReadyError


@dataclass(frozen=True)
class Experience:
    """One stored transition: state, raw (pre-clip) action, and the
    cost vector with constraint limits already subtracted."""

    state: np.ndarray
    action: np.ndarray
    shifted_costs: np.ndarray


class ReplayWindow:
    """Fixed-capacity FIFO over 2T transitions with chronological reads."""

    def __init__(self, half_length, state_dim, action_dim, n_costs):
        if half_length < 1:
            raise ConfigurationError("half_length must be >= 1")
        self.half_length = int(half_length)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.n_costs = int(n_costs)
        self._alloc(self.half_length)

    def _alloc(self, half_length):
        cap = 2 * half_length
        self._states = np.zeros((cap, self.state_dim))
        self._actions = np.zeros((cap, self.action_dim))
        self._costs = np.zeros((cap, self.n_costs))
        self._next = 0
        self._count = 0

    @property
    def capacity(self):
        return 2 * self.half_length

    def __len__(self):
        return self._count

    @property
    def full(self):
        return self._count == self.capacity

    def push(self, exp):
        s = np.asarray(exp.state, float)
        a = np.asarray(exp.action, float)
        c = np.asarray(exp.shifted_costs, float)
        if s.shape != (self.state_dim,):
            raise ConfigurationError(f"state shape {s.shape} != ({self.state_dim},)")
        if a.shape != (self.action_dim,):
            raise ConfigurationError(f"action shape {a.shape} != ({self.action_dim},)")
        if c.shape != (self.n_costs,):
            raise ConfigurationError(f"cost shape {c.shape} != ({self.n_costs},)")
        i = self._next
        self._states[i] = s
        self._actions[i] = a
        self._costs[i] = c
        self._next = (i + 1) % self.capacity
        self._count = min(self._count + 1, self.capacity)

    def push_batch(self, exps):
        for e in exps:
            self.push(e)

    def _order(self):
        if self._count < self.capacity:
            return np.arange(self._count)
        return np.concatenate([np.arange(self._next, self.capacity),
                               np.arange(self._next)])

    def arrays(self):
        """(states, actions, shifted costs), oldest first."""
        idx = self._order()
        return self._states[idx], self._actions[idx], self._costs[idx]

    def resize(self, new_half_length):
        """Change capacity to 2*new_half_length, keeping the newest items."""
        if new_half_length == self.half_length:
            return
        s, a, c = self.arrays()
        keep = min(len(s), 2 * new_half_length)
        self.half_length = int(new_half_length)
        self._alloc(self.half_length)
        for j in range(len(s) - keep, len(s)):
            self.push(Experience(s[j], a[j], c[j]))

    def dump_csv(self, path):
        s, a, c = self.arrays()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"s{i}" for i in range(self.state_dim)]
                       + [f"a{i}" for i in range(self.action_dim)]
                       + [f"c{i}" for i in range(self.n_costs)])
            for row in np.hstack([s, a, c]):
                w.writerow([repr(float(v)) for v in row])

    def state_dict(self):
        s, a, c = self.arrays()
        return {"states": s, "actions": a, "costs": c,
                "half_length": self.half_length}

    def load_state_dict(self, d):
        self.half_length = int(d["half_length"])
        self._alloc(self.half_length)
        for s, a, c in zip(d["states"], d["actions"], d["costs"]):
            self.push(Experience(s, a, c))


def sample_value(window):
    """Mean shifted cost over the full window, one entry per cost index."""
    if not window.full:
        raise NotReadyError(
            f"window holds {len(window)} of {window.capacity} transitions")
    _, _, costs = window.arrays()
    return costs.mean(axis=0)


def sample_gradient(window, policy, params, value_estimates):
    """Single-window policy-gradient estimate, one row per cost index.

    Each of the oldest T transitions anchors a forward sum of T cost
    deviations (cost minus the current running value estimate); that sum
    weights the score of the current params at the stored pair. Index
    arithmetic: anchor l in [0, T) sums costs l..l+T-1 <= 2T-2, so the
    forward window never leaves the buffer.
    """
    if not window.full:
        raise NotReadyError(
            f"window holds {len(window)} of {window.capacity} transitions")
    values = np.asarray(value_estimates, float)
    if values.shape != (window.n_costs,):
        raise ConfigurationError("value_estimates length must match cost count")
    states, actions, costs = window.arrays()
    T = window.half_length
    prefix = np.vstack([np.zeros((1, window.n_costs)), np.cumsum(costs, axis=0)])
    qhat = prefix[T:2 * T] - prefix[0:T] - T * values   # (T, n_costs)
    return policy.weighted_score_sum(params, states[:T], actions[:T], qhat.T) / T


@dataclass(frozen=True)
class EstimateState:
    """Running value and gradient estimates plus the update count."""

    values: np.ndarray          # (n_costs,)
    grads: np.ndarray           # (n_costs, n_params)
    step: int = 0

    @classmethod
    def initial(cls, n_costs, n_params):
        return cls(np.zeros(n_costs), np.zeros((n_costs, n_params)), 0)


def update_estimates(est, new_values, new_grads, alpha):
    """Moving-average blend of fresh single-window estimates."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError(f"alpha must be in (0, 1], got {alpha}")
    new_values = np.asarray(new_values, float)
    new_grads = np.asarray(new_grads, float)
    if new_values.shape != est.values.shape or new_grads.shape != est.grads.shape:
        raise ConfigurationError("estimate shapes changed between updates")
    return EstimateState(
        values=(1.0 - alpha) * est.values + alpha * new_values,
        grads=(1.0 - alpha) * est.grads + alpha * new_grads,
        step=est.step + 1)


def window_schedule(t, mode="constant", base=1500, floor=50, growth=100.0):
    """Half-window size at iteration t: fixed, or growing like log t with
    a floor so early iterations stay usable."""
    if mode == "constant":
        return int(base)
    if mode == "log":
        return max(int(floor), int(math.ceil(growth * math.log(t + math.e))))
    raise ConfigurationError(f"unknown window mode {mode!r}")

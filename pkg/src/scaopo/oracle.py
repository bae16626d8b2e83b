"""Exact quantities for tabular MDPs: stationary distribution, long-run
average cost, the differential action-value (solution of the average-cost
evaluation equation, pinned by a zero stationary-weighted bias), and the
exact policy gradient. Everything here is dense linear algebra on small
instances; it exists to validate the sampled estimators.
"""

import numpy as np

from .errors import ConfigurationError


def transition_under_policy(transitions, policy_table):
    """State-to-state matrix induced by mixing actions per the table."""
    return np.einsum("sa,sat->st", policy_table, transitions)


def stationary_distribution(markov):
    """Left fixed point of a row-stochastic matrix via a pinned solve."""
    n = markov.shape[0]
    a = np.vstack([markov.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    mu, res, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.any(mu < -1e-10) or abs(mu.sum() - 1.0) > 1e-10:
        raise ConfigurationError("chain has no clean stationary distribution")
    mu = np.maximum(mu, 0.0)
    return mu / mu.sum()


def exact_average(transitions, cost_table, policy_table):
    """Long-run mean of cost_table under the policy."""
    markov = transition_under_policy(transitions, policy_table)
    mu = stationary_distribution(markov)
    per_state = np.einsum("sa,sa->s", policy_table, cost_table)
    return float(mu @ per_state)


def differential_values(transitions, cost_table, policy_table):
    """(Q, V, J): the differential action-value and bias solving
    Q(s,a) = c(s,a) - J + sum_s' P(s'|s,a) V(s'), V = E_pi Q,
    with the normalization mu . V = 0."""
    markov = transition_under_policy(transitions, policy_table)
    mu = stationary_distribution(markov)
    per_state = np.einsum("sa,sa->s", policy_table, cost_table)
    J = float(mu @ per_state)
    n = markov.shape[0]
    a = np.vstack([np.eye(n) - markov, mu[None, :]])
    b = np.concatenate([per_state - J, [0.0]])
    V, *_ = np.linalg.lstsq(a, b, rcond=None)
    Q = cost_table - J + np.einsum("sat,t->sa", transitions, V)
    return Q, V, J


def policy_table_for(policy, params, n_states):
    """Evaluate a two-action thresholded policy on every one-hot state."""
    eye = np.eye(n_states)
    return policy.table(params, eye)


def exact_gradient(transitions, cost_table, policy, params):
    """Exact average-cost policy gradient
    sum_s mu(s) sum_a pi(a|s) Q(s,a) grad log pi(a|s)."""
    n_states = transitions.shape[0]
    table = policy_table_for(policy, params, n_states)
    markov = transition_under_policy(transitions, table)
    mu = stationary_distribution(markov)
    Q, _, _ = differential_values(transitions, cost_table, table)
    eye = np.eye(n_states)
    grad = np.zeros(policy.n_params)
    for s in range(n_states):
        for a in range(table.shape[1]):
            w = mu[s] * table[s, a] * Q[s, a]
            grad += w * policy.grad_log_prob(params, eye[s], np.array([float(a)]))
    return grad

"""Gaussian policies backed by a small dense network with hand-coded
reverse-mode gradients of the action log-probability.

Parameters live in one flat float64 vector: for each layer the weight
matrix (row-major) followed by its bias, and the per-dimension log
standard deviations appended at the end.  All operations are pure
functions of (params, inputs); random draws take an explicit generator.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_ndtr

from .errors import ConfigurationError

# activation -> (forward, derivative expressed in terms of the output)
_ACTIVATIONS = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "identity": (lambda x: x, lambda y: np.ones_like(y)),
}

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MlpArch:
    """Shape of the mean network. Default: two tanh hidden layers and a
    sigmoid output squashed into the action box."""

    input_dim: int
    output_dim: int
    hidden_dims: tuple = (128, 128)
    hidden_activation: str = "tanh"
    output_activation: str = "sigmoid"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigurationError("network dims must be positive")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError("hidden dims must be positive")
        if self.hidden_activation not in _ACTIVATIONS:
            raise ConfigurationError(
                f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("sigmoid", "identity"):
            raise ConfigurationError(
                f"unknown output activation {self.output_activation!r}")

    def layer_shapes(self):
        dims = (self.input_dim,) + tuple(self.hidden_dims) + (self.output_dim,)
        return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]

    @property
    def n_weights(self):
        return sum(i * o + o for i, o in self.layer_shapes())


def _unpack(arch, flat):
    """Views (no copies) of the per-layer (W, b) blocks of a flat vector."""
    layers = []
    k = 0
    for (fan_in, fan_out) in arch.layer_shapes():
        w = flat[k:k + fan_in * fan_out].reshape(fan_in, fan_out)
        k += fan_in * fan_out
        b = flat[k:k + fan_out]
        k += fan_out
        layers.append((w, b))
    return layers


class GaussianMlpPolicy:
    """Diagonal Gaussian over a box-shaped action space.

    The mean is the network output passed through a sigmoid and rescaled
    into [low, high]; the stddev is state-independent and trainable,
    stored as log(std / box width) so its parameter stays in a sane range
    no matter the physical units of the actions. Sampling clips into the
    box but keeps the raw draw, whose density is what log_prob and the
    score function refer to.
    """

    def __init__(self, arch, action_low, action_high, param_bound=10.0):
        action_low = np.asarray(action_low, dtype=float)
        action_high = np.asarray(action_high, dtype=float)
        if action_low.shape != (arch.output_dim,) or action_high.shape != (arch.output_dim,):
            raise ConfigurationError("action box must match the output dim")
        if np.any(action_high <= action_low):
            raise ConfigurationError("action box must have positive width")
        if param_bound <= 0:
            raise ConfigurationError("param_bound must be positive")
        self.arch = arch
        self.low = action_low
        self.high = action_high
        self.span = action_high - action_low
        self.param_bound = float(param_bound)

    @property
    def n_params(self):
        return self.arch.n_weights + self.arch.output_dim

    def init_params(self, rng, log_std_scale=0.25, zero_last_layer=False):
        """Uniform +-1/sqrt(fan_in) weight init; log_std set so the initial
        stddev is log_std_scale times the box width."""
        chunks = []
        shapes = self.arch.layer_shapes()
        for idx, (fan_in, fan_out) in enumerate(shapes):
            s = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-s, s, size=fan_in * fan_out)
            b = rng.uniform(-s, s, size=fan_out)
            if zero_last_layer and idx == len(shapes) - 1:
                w[:] = 0.0
                b[:] = 0.0
            chunks.append(w)
            chunks.append(b)
        chunks.append(np.full(self.arch.output_dim, np.log(log_std_scale)))
        return self.project(np.concatenate(chunks))

    def stds(self, params):
        """Per-dimension action stddev implied by the flat parameters."""
        _, log_std = self.split(params)
        return np.exp(log_std) * self.span

    def project(self, params):
        """Clip the flat vector into the admissible box [-B, B]^n."""
        return np.clip(np.asarray(params, dtype=float),
                       -self.param_bound, self.param_bound)

    def in_bounds(self, params, tol=1e-9):
        return bool(np.all(np.abs(params) <= self.param_bound + tol))

    def split(self, params):
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ConfigurationError(
                f"expected {self.n_params} params, got {params.shape}")
        return params[:self.arch.n_weights], params[self.arch.n_weights:]

    # ---------------------------------------------------------------- forward

    def _forward(self, net_params, states):
        """states (N, in) -> (network output (N, out), per-layer outputs)."""
        act, _ = _ACTIVATIONS[self.arch.hidden_activation]
        layers = _unpack(self.arch, net_params)
        outs = [states]
        h = states
        for (w, b) in layers[:-1]:
            h = act(h @ w + b)
            outs.append(h)
        w, b = layers[-1]
        pre = h @ w + b
        if self.arch.output_activation == "sigmoid":
            y = expit(pre)
        else:
            y = pre
        return y, outs

    def forward_mean(self, params, state):
        """Raw network output for one state: in (0,1)^out for the sigmoid
        head, unsquashed for the identity head."""
        net, _ = self.split(params)
        y, _ = self._forward(net, np.asarray(state, float).reshape(1, -1))
        return y[0]

    def mean_action(self, params, state):
        y = self.forward_mean(params, state)
        if self.arch.output_activation == "sigmoid":
            return self.low + self.span * y
        return y

    def _mean_batch(self, net_params, states):
        y, outs = self._forward(net_params, states)
        if self.arch.output_activation == "sigmoid":
            mean = self.low + self.span * y
            dmean_dpre = self.span * y * (1.0 - y)
        else:
            mean = y
            dmean_dpre = np.ones_like(y)
        return mean, dmean_dpre, outs

    # --------------------------------------------------------------- sampling

    def sample(self, params, state, rng, clip=True):
        """One action draw. Returns (env action, raw pre-clip draw, log prob
        of the raw draw)."""
        net, log_std = self.split(params)
        mean, _, _ = self._mean_batch(net, np.asarray(state, float).reshape(1, -1))
        mean = mean[0]
        std = np.exp(log_std) * self.span
        z = rng.standard_normal(self.arch.output_dim)
        raw = mean + std * z
        logp = float(np.sum(-_LOG_SQRT_2PI - np.log(std) - 0.5 * z * z))
        action = np.clip(raw, self.low, self.high) if clip else raw
        return action, raw, logp

    def log_prob(self, params, state, raw_action):
        net, log_std = self.split(params)
        mean, _, _ = self._mean_batch(net, np.asarray(state, float).reshape(1, -1))
        std = np.exp(log_std) * self.span
        z = (np.asarray(raw_action, float) - mean[0]) / std
        return float(np.sum(-_LOG_SQRT_2PI - np.log(std) - 0.5 * z * z))

    # -------------------------------------------------------------- gradients

    def _weighted_mean_grads(self, net_params, outs, delta, weights):
        """For each weight row w_k, accumulate
        sum_l weights[k, l] * d(sum_j delta[l, j] * pre_out[l, j]) / d(net)
        where delta is the gradient at the output pre-activation.
        Returns (k, n_weights); backprop deltas are weight-independent so
        they are computed once and reused across rows."""
        layers = _unpack(self.arch, net_params)
        _, dact = _ACTIVATIONS[self.arch.hidden_activation]
        k = weights.shape[0]
        grads = np.zeros((k, self.arch.n_weights))
        # walk layers backwards, tracking the flat offset of each block
        offsets = []
        pos = 0
        for (fan_in, fan_out) in self.arch.layer_shapes():
            offsets.append((pos, fan_in, fan_out))
            pos += fan_in * fan_out + fan_out
        for li in range(len(layers) - 1, -1, -1):
            inp = outs[li]
            pos, fan_in, fan_out = offsets[li]
            for r in range(k):
                wl = weights[r][:, None]
                gw = (inp * wl).T @ delta
                gb = weights[r] @ delta
                grads[r, pos:pos + fan_in * fan_out] = gw.ravel()
                grads[r, pos + fan_in * fan_out:pos + fan_in * fan_out + fan_out] = gb
            if li > 0:
                w, _ = layers[li]
                delta = (delta @ w.T) * dact(outs[li])
        return grads

    def weighted_score_sum(self, params, states, actions, weights):
        """Rows of sum_l weights[k, l] * grad_params log pi(a_l | s_l).

        states (N, in), actions (N, out) raw draws, weights (k, N).
        Returns (k, n_params).
        """
        states = np.asarray(states, float)
        actions = np.asarray(actions, float)
        weights = np.atleast_2d(np.asarray(weights, float))
        net, log_std = self.split(params)
        mean, dmean_dpre, outs = self._mean_batch(net, states)
        var = np.square(np.exp(log_std) * self.span)
        g_mean = (actions - mean) / var           # dlogp/dmean, (N, out)
        delta = g_mean * dmean_dpre               # at the output pre-activation
        out = np.zeros((weights.shape[0], self.n_params))
        out[:, :self.arch.n_weights] = self._weighted_mean_grads(
            net, outs, delta, weights)
        g_log_std = g_mean * (actions - mean) - 1.0   # dlogp/dlog_std per sample
        out[:, self.arch.n_weights:] = weights @ g_log_std
        return out

    def grad_log_prob(self, params, state, raw_action):
        """Gradient of log pi(raw_action | state) w.r.t. the flat params."""
        g = self.weighted_score_sum(
            params,
            np.asarray(state, float).reshape(1, -1),
            np.asarray(raw_action, float).reshape(1, -1),
            np.ones((1, 1)))
        return g[0]


class ThresholdedGaussianPolicy:
    """Two-action policy derived from a scalar Gaussian head: pick action 1
    when the raw draw clears a fixed threshold.  Gives the continuous
    machinery a discrete face for exact tabular cross-checks.
    """

    def __init__(self, base, threshold=None):
        if base.arch.output_dim != 1:
            raise ConfigurationError("thresholded policy needs a scalar head")
        self.base = base
        if threshold is None:
            threshold = 0.5 * float(base.low[0] + base.high[0])
        self.threshold = float(threshold)
        self.n_actions = 2

    @property
    def n_params(self):
        return self.base.n_params

    @property
    def param_bound(self):
        return self.base.param_bound

    def init_params(self, rng, **kw):
        return self.base.init_params(rng, **kw)

    def project(self, params):
        return self.base.project(params)

    def in_bounds(self, params, tol=1e-9):
        return self.base.in_bounds(params, tol)

    def _z(self, params, states):
        net, log_std = self.base.split(params)
        mean, dmean_dpre, outs = self.base._mean_batch(net, states)
        sigma = float(np.exp(log_std[0]) * self.base.span[0])
        z = (mean[:, 0] - self.threshold) / sigma
        return z, sigma, dmean_dpre, outs

    def prob_one(self, params, state):
        z, _, _, _ = self._z(params, np.asarray(state, float).reshape(1, -1))
        return float(np.exp(log_ndtr(z[0])))

    def table(self, params, states):
        """Action-probability table for a stack of states (rows)."""
        z, _, _, _ = self._z(params, np.asarray(states, float))
        p1 = np.exp(log_ndtr(z))
        return np.stack([1.0 - p1, p1], axis=1)

    def sample(self, params, state, rng):
        net, log_std = self.base.split(params)
        mean, _, _ = self.base._mean_batch(
            net, np.asarray(state, float).reshape(1, -1))
        sigma = float(np.exp(log_std[0]) * self.base.span[0])
        raw = float(mean[0, 0] + sigma * rng.standard_normal())
        a = 1 if raw > self.threshold else 0
        z = (mean[0, 0] - self.threshold) / sigma
        logp = float(log_ndtr(z) if a == 1 else log_ndtr(-z))
        return a, np.array([float(a)]), logp

    def log_prob(self, params, state, action):
        z, _, _, _ = self._z(params, np.asarray(state, float).reshape(1, -1))
        a = int(np.ravel(action)[0])
        return float(log_ndtr(z[0]) if a == 1 else log_ndtr(-z[0]))

    def _score_pieces(self, params, states, actions):
        states = np.asarray(states, float)
        a = np.ravel(np.asarray(actions, float)).astype(int)
        z, sigma, dmean_dpre, outs = self._z(params, states)
        log_pdf = -0.5 * z * z - _LOG_SQRT_2PI
        # dlogpi/dz: hazard ratio with the sign of the chosen action
        f_z = np.where(a == 1,
                       np.exp(log_pdf - log_ndtr(z)),
                       -np.exp(log_pdf - log_ndtr(-z)))
        return f_z, z, sigma, dmean_dpre, outs

    def weighted_score_sum(self, params, states, actions, weights):
        weights = np.atleast_2d(np.asarray(weights, float))
        f_z, z, sigma, dmean_dpre, outs = self._score_pieces(
            params, states, actions)
        net, _ = self.base.split(params)
        g_mean = (f_z / sigma)[:, None]
        delta = g_mean * dmean_dpre
        out = np.zeros((weights.shape[0], self.n_params))
        out[:, :self.base.arch.n_weights] = self.base._weighted_mean_grads(
            net, outs, delta, weights)
        g_log_std = (f_z * (-z))[:, None]
        out[:, self.base.arch.n_weights:] = weights @ g_log_std
        return out

    def grad_log_prob(self, params, state, action):
        g = self.weighted_score_sum(
            params,
            np.asarray(state, float).reshape(1, -1),
            np.asarray(action, float).reshape(1, -1),
            np.ones((1, 1)))
        return g[0]

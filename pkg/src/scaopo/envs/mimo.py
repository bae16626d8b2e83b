"""Multi-user downlink beamforming with per-user queues.

The action is per-user transmit power plus the regularization weight of
a regularized zero-forcing precoder computed from the current channel.
Rates follow the usual SINR formula; queues integrate arrivals minus
service per slot, never go negative, and overflow drops once a finite
buffer (if configured) is full. Costs are dimensionless so that
every index lives on a comparable scale: cost 0 is total transmit power
as a fraction of the per-user cap, cost k is user k's queue delay in
slots (queue over mean arrivals per slot, Little's law).

Channel model: a uniform linear array response per path, a fixed
per-run geometry (mean departure angles, Laplacian per-path offsets,
exponential per-path powers normalized to the user's overall gain), and
per-slot complex Gaussian path coefficients. Per step the generator is
consumed in a fixed order: arrivals first, then the next slot's fading.
"""

from dataclasses import dataclass

import numpy as np

from .base import EnvSpec
from ..errors import ConfigurationError


@dataclass(frozen=True)
class MimoParams:
    n_antennas: int = 8
    n_users: int = 4
    bandwidth_hz: float = 1e7
    slot_s: float = 1e-3
    noise_w: float = 1e-6            # -100 dBm/Hz over 10 MHz
    arrival_mean_bps: float = 1e7    # mean arrival rate per user
    arrival_jitter: float = 1.0      # arrivals ~ U[(1-j)*mean, (1+j)*mean]
    p_max_w: float = 10.0
    alpha_min: float = 1e-3
    alpha_max: float = 10.0
    n_paths: int = 4
    angle_spread_deg: float = 5.0
    gain_db_low: float = -10.0
    gain_db_high: float = 10.0
    delay_limit_slots: float = 2.0
    buffer_slots: float = np.inf     # finite buffer, in slots of mean traffic
    obs_queue_clip: float = 10.0     # observed queue saturates at this * scale

    def __post_init__(self):
        if self.n_users > self.n_antennas:
            raise ConfigurationError("need at least as many antennas as users")
        if self.alpha_min <= 0 or self.alpha_max <= self.alpha_min:
            raise ConfigurationError("bad regularizer range")
        if not 0.0 <= self.arrival_jitter <= 1.0:
            raise ConfigurationError("arrival_jitter must lie in [0, 1]")
        if self.buffer_slots <= 0:
            raise ConfigurationError("buffer_slots must be positive")

    @property
    def queue_scale(self):
        """Observation scale: ten mean per-slot arrivals."""
        return 10.0 * self.arrival_mean_bps * self.slot_s

    @property
    def limits(self):
        """Per-user delay limits in slots, matching the cost units."""
        return np.full(self.n_users, self.delay_limit_slots)


def array_response(n_antennas, angle_rad):
    """Uniform linear array steering vector at half-wavelength spacing."""
    k = np.arange(n_antennas)
    return np.exp(1j * np.pi * k * np.sin(angle_rad))


def rzf_precoder(channel, alpha):
    """Regularized zero-forcing directions with unit-norm columns.
    channel is (users, antennas); returns (antennas, users)."""
    K = channel.shape[0]
    gram = channel @ channel.conj().T + alpha * np.eye(K)
    raw = channel.conj().T @ np.linalg.inv(gram)
    norms = np.linalg.norm(raw, axis=0)
    return raw / norms


def user_rates(channel, precoder, powers, noise_w, bandwidth_hz):
    """Achievable rate per user in bit/s."""
    cross = np.abs(channel @ precoder) ** 2      # (K, K): |h_k^H v_j|^2
    signal = powers * np.diag(cross)
    interference = cross @ powers - signal
    sinr = signal / (interference + noise_w)
    return bandwidth_hz * np.log2(1.0 + sinr)


def user_rate(channel, precoder, powers, k, noise_w, bandwidth_hz):
    return float(user_rates(channel, precoder, powers, noise_w, bandwidth_hz)[k])


def equal_power_action(total_power, n_users, noise_w):
    """Fixed reference: split the budget evenly, regularize by
    noise-over-per-user-power."""
    per_user = total_power / n_users
    powers = np.full(n_users, per_user)
    return powers, noise_w / per_user


@dataclass(frozen=True)
class MimoGeometry:
    path_angles: np.ndarray      # (users, paths) radians
    path_powers: np.ndarray      # (users, paths), sums to linear gain per user
    gains: np.ndarray            # (users,)


def draw_geometry(params, rng):
    K, P = params.n_users, params.n_paths
    gains_db = rng.uniform(params.gain_db_low, params.gain_db_high, K)
    gains = 10.0 ** (gains_db / 10.0)
    mean_angles = rng.uniform(-np.pi / 3, np.pi / 3, K)
    spread = np.deg2rad(params.angle_spread_deg) / np.sqrt(2.0)
    offsets = rng.laplace(0.0, spread, (K, P))
    raw_powers = rng.exponential(1.0, (K, P))
    path_powers = gains[:, None] * raw_powers / raw_powers.sum(axis=1, keepdims=True)
    return MimoGeometry(path_angles=mean_angles[:, None] + offsets,
                        path_powers=path_powers, gains=gains)


def draw_channel(geometry, params, rng):
    K, P, N = params.n_users, params.n_paths, params.n_antennas
    coef = np.sqrt(geometry.path_powers / 2.0) * (
        rng.standard_normal((K, P)) + 1j * rng.standard_normal((K, P)))
    steering = np.stack([[array_response(N, a) for a in row]
                         for row in geometry.path_angles])   # (K, P, N)
    return np.einsum("kp,kpn->kn", coef, steering)


class MimoEnv:
    def __init__(self, params, seed):
        self.params = params
        K, N = params.n_users, params.n_antennas
        self.spec = EnvSpec(
            state_dim=K + 2 * K * N,
            action_low=np.concatenate([np.zeros(K), [params.alpha_min]]),
            action_high=np.concatenate([np.full(K, params.p_max_w),
                                        [params.alpha_max]]),
            n_constraints=K,
            limits=params.limits)
        self._rng = np.random.default_rng(seed)
        self.geometry = draw_geometry(params, self._rng)
        self._queues = np.zeros(K)
        self._channel = draw_channel(self.geometry, params, self._rng)

    def _obs(self):
        q = np.clip(self._queues / self.params.queue_scale,
                    0.0, self.params.obs_queue_clip)
        return np.concatenate([q, self._channel.real.ravel(),
                               self._channel.imag.ravel()])

    def reset(self):
        self._queues = np.zeros(self.params.n_users)
        self._channel = draw_channel(self.geometry, self.params, self._rng)
        return self._obs()

    def step(self, action):
        action = self.spec.check_action(action)
        p = self.params
        powers, alpha = action[:p.n_users], float(action[-1])
        delays = self._queues / (p.arrival_mean_bps * p.slot_s)
        costs = np.concatenate([[powers.sum() / p.p_max_w], delays])
        precoder = rzf_precoder(self._channel, alpha)
        rates = user_rates(self._channel, precoder, powers,
                           p.noise_w, p.bandwidth_hz)
        arrivals = self._rng.uniform(
            (1.0 - p.arrival_jitter) * p.arrival_mean_bps,
            (1.0 + p.arrival_jitter) * p.arrival_mean_bps, p.n_users)
        cap = p.buffer_slots * p.arrival_mean_bps * p.slot_s
        self._queues = np.clip(
            self._queues + (arrivals - rates) * p.slot_s, 0.0, cap)
        self._channel = draw_channel(self.geometry, p, self._rng)
        return self._obs(), costs

    def get_state(self):
        return {"arrays": {"queues": self._queues.copy(),
                           "channel_re": self._channel.real.copy(),
                           "channel_im": self._channel.imag.copy()},
                "scalars": {},
                "rng": self._rng.bit_generator.state}

    def set_state(self, d):
        self._queues = np.asarray(d["arrays"]["queues"], float).copy()
        self._channel = (np.asarray(d["arrays"]["channel_re"], float)
                         + 1j * np.asarray(d["arrays"]["channel_im"], float))
        self._rng.bit_generator.state = d["rng"]


def simulate_equal_power(params, seed, total_power, n_slots):
    """Run the chain under the fixed equal-power action; returns the mean
    costs: (power as a fraction of p_max, per-user delays in slots)."""
    env = MimoEnv(params, seed)
    env.reset()
    powers, alpha = equal_power_action(total_power, params.n_users,
                                       params.noise_w)
    action = np.concatenate([powers, [alpha]])
    action = np.clip(action, env.spec.action_low, env.spec.action_high)
    total = np.zeros(params.n_users + 1)
    for _ in range(n_slots):
        _, costs = env.step(action)
        total += costs
    mean = total / n_slots
    return float(mean[0]), mean[1:]

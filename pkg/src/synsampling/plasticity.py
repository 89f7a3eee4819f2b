"""Reward-based synaptic sampling for a single plastic synapse.

Each synapse carries an eligibility trace ``e`` and a gradient estimate ``g``
(both stored as binary16) and a 32-bit real parameter ``theta``.  The synapse
transmits with weight ``exp(theta - theta0)`` while ``theta > 0`` and is
dormant otherwise.  Dormant synapses either keep drifting under the prior
(``"walk"``) or are retargeted immediately (``"realloc"``).

Time base: ``beta`` is per 1 ms step, while ``tau_e`` and ``tau_g`` are in
seconds.

Storage of ``e`` and ``g`` rounds stochastically to binary16.  With nearest
rounding the per-step leak of ``g`` (a relative change of 2e-5) and most of its
increments fall below half a binary16 ulp and are lost, so the estimator never
forgets.  The rounding bits are a bijective mix of the same 32-bit word that
produces the synapse's noise sample, so one draw per synapse per step remains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .accel import (EXP_MEMO, HALF_MAX, KissState, _exp_unit, _fmix32, half_round_stochastic,
                    kiss_next)

WALK = "walk"
REALLOC = "realloc"
MODES = (WALK, REALLOC)


@dataclass(frozen=True)
class PlasticityConfig:
    beta: float = 1e-5
    temperature: float = 0.1
    prior_mean: float = 0.0
    prior_std: float = 2.0
    theta0: float = 1.5
    theta_max: float = 3.0
    tau_e: float = 1.0          # s
    tau_g: float = 50.0         # s
    alpha: float = 0.02
    dt: float = 1.0             # ms
    mode: str = REALLOC
    theta_reconnect: float = 1e-3
    reward_floor: float = 1e-4
    reward_hat_init: float = 0.5
    init_std: float | None = None   # None: sigma * sqrt(T)

    def __post_init__(self):
        for name in ("beta", "temperature", "prior_std", "tau_e", "tau_g", "dt",
                     "reward_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.theta_reconnect <= 0:
            raise ValueError("theta_reconnect must be positive")
        if not self.theta_max > self.theta_reconnect:
            raise ValueError("theta_max must exceed theta_reconnect")
        if self.reward_hat_init < self.reward_floor:
            raise ValueError("reward_hat_init must not be below reward_floor")
        if self.init_std is not None and self.init_std <= 0:
            raise ValueError("init_std must be positive")

    @property
    def theta_init_std(self) -> float:
        """Spread of the initial parameters, the prior's stationary std by default."""
        if self.init_std is not None:
            return self.init_std
        return self.prior_std * math.sqrt(self.temperature)

    @property
    def noise_scale(self) -> float:
        """Multiplier on (U - 1/2) giving variance 2*beta*T per step."""
        return math.sqrt(2.0 * self.beta * self.temperature) * math.sqrt(12.0)

    @property
    def decay_e(self) -> float:
        return math.exp(-self.dt * 1e-3 / self.tau_e)

    @property
    def decay_g(self) -> float:
        return 1.0 - self.dt * 1e-3 / self.tau_g


@dataclass(frozen=True)
class PlasticSynapse:
    e: float = 0.0
    g: float = 0.0
    theta: float = 0.0
    post_slot: int = 0

    @property
    def functional(self) -> bool:
        return self.theta > 0


@njit(cache=True)
def weight_from_theta(theta, theta0, memo, accel=True):
    if theta > 0.0:
        return float(_exp_unit(theta - theta0, memo, accel))
    return 0.0


def weight_of(theta: float, cfg: PlasticityConfig) -> float:
    return weight_from_theta(float(theta), cfg.theta0, EXP_MEMO)


@njit(cache=True)
def noise_from_word(word, noise_scale):
    return noise_scale * (word * 2.3283064365386963e-10 - 0.5)


def noise_increment(rng: KissState, cfg: PlasticityConfig) -> tuple[float, KissState]:
    word, rng = kiss_next(rng)
    return float(noise_from_word(word, cfg.noise_scale)), rng


@njit(cache=True)
def storage_bits(word):
    """Rounding bits for e (low 13) and g (next 13), decorrelated from the noise sample."""
    return _fmix32(word)


@njit(cache=True)
def _store_half(x, r13):
    # binary16 storage with infinities clamped to the largest finite value
    y = half_round_stochastic(x, r13)
    if y > HALF_MAX:
        return HALF_MAX, 1
    if y < -HALF_MAX:
        return -HALF_MAX, 1
    return y, 0


@njit(cache=True)
def post_factor(z_post, rate_post, dt_ms):
    """[z] - expected spike count in the step, min(1, rate * dt)."""
    expected = rate_post * dt_ms * 1e-3
    if expected > 1.0:
        expected = 1.0
    return (1.0 if z_post else 0.0) - expected


@njit(cache=True)
def reward_gain(reward, reward_hat, alpha):
    return reward / reward_hat + alpha


@njit(cache=True)
def synapse_update(e, g, theta, w, y_pre, post_fac, gain, noise, rbits, dt_ms,
                   decay_e, decay_g, beta, mu, inv_var, theta_max):
    """Eligibility, gradient estimate and parameter update for one step.

    ``post_fac`` comes from :func:`post_factor`, ``gain`` from :func:`reward_gain`,
    ``rbits`` from :func:`storage_bits`.  Theta is clipped at ``theta_max``.
    Returns (e, g, theta, overflow_count).
    """
    e, oe = _store_half(e * decay_e + w * y_pre * post_fac, rbits & 0x1FFF)
    g, og = _store_half(g * decay_g + gain * e * dt_ms * 1e-3, (rbits >> 13) & 0x1FFF)
    theta = min(theta + beta * ((mu - theta) * inv_var + g) + noise, theta_max)
    return e, g, float(np.float32(theta)), oe + og


@njit(cache=True)
def prior_update(theta, noise, beta, mu, inv_var):
    return float(np.float32(theta + beta * (mu - theta) * inv_var + noise))


def plasticity_step(s: PlasticSynapse, w: float, y_pre: float, z_post: bool,
                    f_post: float, r: float, r_hat: float, rng: KissState,
                    cfg: PlasticityConfig) -> tuple[PlasticSynapse, KissState, int]:
    """Returns the updated synapse, the advanced stream and the overflow count."""
    if not s.functional:
        raise ValueError("plasticity_step needs a functional synapse (theta > 0)")
    if r_hat < cfg.reward_floor:
        raise ValueError("reward estimate below floor")
    word, rng = kiss_next(rng)
    e, g, theta, nover = synapse_update(
        s.e, s.g, s.theta, w, y_pre, post_factor(bool(z_post), f_post, cfg.dt),
        reward_gain(r, r_hat, cfg.alpha), noise_from_word(word, cfg.noise_scale),
        storage_bits(word), cfg.dt, cfg.decay_e, cfg.decay_g,
        cfg.beta, cfg.prior_mean, 1.0 / cfg.prior_std ** 2, cfg.theta_max)
    return replace(s, e=e, g=g, theta=theta), rng, int(nover)


def dormant_step(s: PlasticSynapse, rng: KissState,
                 cfg: PlasticityConfig) -> tuple[PlasticSynapse, KissState]:
    """Prior-only drift and diffusion of a disconnected synapse."""
    noise, rng = noise_increment(rng, cfg)
    theta = prior_update(s.theta, noise, cfg.beta, cfg.prior_mean, 1.0 / cfg.prior_std ** 2)
    return PlasticSynapse(0.0, 0.0, theta, s.post_slot), rng


@njit(cache=True)
def draw_slot(raw, n_post):
    """Map a 32-bit draw to [0, n_post) as floor(U * n_post)."""
    return (raw * n_post) >> 32


def reallocate(s: PlasticSynapse, rng: KissState, n_post: int,
               cfg: PlasticityConfig) -> tuple[PlasticSynapse, KissState]:
    """Retarget to a uniformly drawn local neuron at the minimal positive parameter."""
    if n_post < 1:
        raise ValueError("n_post must be >= 1")
    raw, rng = kiss_next(rng)
    return PlasticSynapse(0.0, 0.0, float(np.float32(cfg.theta_reconnect)),
                          int(draw_slot(raw, n_post))), rng


@njit(cache=True)
def _prior_lanes(theta, cong, xs, z, w, n_steps, beta, mu, inv_var, noise_scale):
    # the dormant update over independent chains, one KISS stream per chain in
    # uint32 lanes; arithmetic is identical to prior_update(noise_from_word(word))
    # (fresh local arrays cannot alias, so the lane loop vectorises)
    th_, c_, x_, z_, w_ = theta.copy(), cong.copy(), xs.copy(), z.copy(), w.copy()
    n = th_.shape[0]
    for _ in range(n_steps):
        for i in range(n):
            c = np.uint32(np.uint32(69069) * c_[i] + np.uint32(1234567))
            x = x_[i]
            x = np.uint32(x ^ np.uint32(x << np.uint32(13)))
            x = np.uint32(x ^ (x >> np.uint32(17)))
            x = np.uint32(x ^ np.uint32(x << np.uint32(5)))
            zz = np.uint32(np.uint32(36969) * (z_[i] & np.uint32(0xFFFF)) + (z_[i] >> np.uint32(16)))
            ww = np.uint32(np.uint32(18000) * (w_[i] & np.uint32(0xFFFF)) + (w_[i] >> np.uint32(16)))
            out = np.uint32(np.uint32(np.uint32(np.uint32(zz << np.uint32(16)) + ww) ^ c) + x)
            c_[i] = c
            x_[i] = x
            z_[i] = zz
            w_[i] = ww
            th = np.float64(th_[i])
            # out * 2^-32 - 0.5 exactly, via a signed conversion
            noise = noise_scale * (np.int32(out ^ np.uint32(0x80000000)) * 2.3283064365386963e-10)
            th_[i] = np.float32(th + beta * (mu - th) * inv_var + noise)
    theta[:] = th_
    cong[:] = c_
    xs[:] = x_
    z[:] = z_
    w[:] = w_


def prior_ensemble(streams, theta_init, n_steps: int, cfg: PlasticityConfig,
                   block: int = 1024) -> np.ndarray:
    """Run the free prior process (no disconnection threshold) on many chains.

    ``streams`` holds one KissState per chain.  Returns the float32 parameters
    after ``n_steps`` steps; chain ``i`` equals ``n_steps`` applications of the
    dormant update driven by ``streams[i]``.
    """
    st = np.array(streams, dtype=np.int64).astype(np.uint32)
    theta = np.array(np.broadcast_to(theta_init, (len(st),)), dtype=np.float32)
    for lo in range(0, len(st), block):
        sl = slice(lo, lo + block)
        cong, xs, z, w = (np.ascontiguousarray(st[sl, k]) for k in range(4))
        th = theta[sl].copy()
        _prior_lanes(th, cong, xs, z, w, int(n_steps), cfg.beta, cfg.prior_mean,
                     1.0 / cfg.prior_std ** 2, cfg.noise_scale)
        theta[sl] = th
    return theta

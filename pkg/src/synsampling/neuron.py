"""Discrete-time stochastic spike-response neuron.

Membrane potential is the PSP-weighted synaptic input plus a slowly adapting
bias; the instantaneous rate is exp(u) (in Hz), computed through the
fixed-point exponential unit.  Spikes are Bernoulli draws per 1 ms step with a
fixed refractory window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from numba import njit

from .accel import EXP_MEMO, KissState, _exp_unit, kiss_uniform


@dataclass(frozen=True)
class NeuronConfig:
    tau_r: float = 2.0          # ms, PSP rise
    tau_m: float = 20.0         # ms, PSP fall
    tau_bias: float = 50.0      # s, bias adaptation
    target_rate: float = 5.0    # Hz
    t_ref: float = 5.0          # ms
    dt: float = 1.0             # ms
    bias_init: float = -3.0

    def __post_init__(self):
        if not self.tau_m > self.tau_r > 0:
            raise ValueError("need tau_m > tau_r > 0")
        for name in ("tau_bias", "target_rate", "t_ref", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def decay_fall(self) -> float:
        return math.exp(-self.dt / self.tau_m)

    @property
    def decay_rise(self) -> float:
        return math.exp(-self.dt / self.tau_r)

    @property
    def psp_scale(self) -> float:
        return self.tau_r / (self.tau_m - self.tau_r)

    @property
    def ref_steps(self) -> int:
        return int(round(self.t_ref / self.dt))


@dataclass(frozen=True)
class PspTrace:
    a_fall: float = 0.0
    a_rise: float = 0.0


@dataclass(frozen=True)
class NeuronState:
    u: float = 0.0
    bias: float = -3.0
    rate: float = 0.0
    refractory_remaining: float = 0.0
    spiked: bool = False


def initial_state(cfg: NeuronConfig) -> NeuronState:
    return NeuronState(bias=cfg.bias_init)


@njit(cache=True)
def psp_value(a_fall, a_rise, scale):
    return scale * (a_fall - a_rise)


def psp_step(trace: PspTrace, presyn_spiked: bool, cfg: NeuronConfig) -> tuple[PspTrace, float]:
    """Decay both exponentials one step, then add the new spike (if any)."""
    a_fall = trace.a_fall * cfg.decay_fall + (1.0 if presyn_spiked else 0.0)
    a_rise = trace.a_rise * cfg.decay_rise + (1.0 if presyn_spiked else 0.0)
    return PspTrace(a_fall, a_rise), psp_value(a_fall, a_rise, cfg.psp_scale)


@njit(cache=True)
def neuron_update(u, refractory_steps, bias, unif, dt_ms, ref_steps,
                  target_rate, tau_bias, memo, accel=True):
    """One step of rate, spike draw and bias adaptation.

    Returns (rate_hz, spiked, refractory_steps, bias).  The rate is reported as
    0 while refractory, since no spike can be emitted then.
    """
    if refractory_steps > 0:
        rate = 0.0
        spiked = False
        refractory_steps -= 1
    else:
        rate = float(_exp_unit(float(u), memo, accel))
        p = rate * dt_ms * 1e-3
        if p > 1.0:
            p = 1.0
        spiked = unif < p
        if spiked:
            refractory_steps = ref_steps
    bias += (target_rate * dt_ms * 1e-3 - (1.0 if spiked else 0.0)) / tau_bias
    return rate, spiked, refractory_steps, bias


def neuron_step(state: NeuronState, syn_input: float, rng: KissState,
                cfg: NeuronConfig) -> tuple[NeuronState, bool, KissState]:
    """Advance one neuron by ``cfg.dt``; consumes exactly one uniform from ``rng``."""
    if not math.isfinite(syn_input):
        raise ValueError("synaptic input must be finite")
    unif, rng = kiss_uniform(rng)
    u = syn_input + state.bias
    ref_steps = int(round(state.refractory_remaining / cfg.dt))
    rate, spiked, ref_steps, bias = neuron_update(
        u, ref_steps, state.bias, unif, cfg.dt, cfg.ref_steps,
        cfg.target_rate, cfg.tau_bias, EXP_MEMO)
    new = replace(state, u=u, bias=bias, rate=rate,
                  refractory_remaining=ref_steps * cfg.dt, spiked=bool(spiked))
    return new, bool(spiked), rng

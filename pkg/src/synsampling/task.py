"""Closed-loop pattern discrimination environment.

Two rate patterns over the input neurons alternate with rest periods
(500 ms presentation, 500 ms rest, pattern drawn uniformly per presentation).
Reward is the clamped relative rate contrast between the two hidden
populations in favour of the population assigned to the present pattern.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .accel import KissState, kiss_block, kiss_uniform, seed_scramble

REST, PATTERN1, PATTERN2 = 0, 1, 2
PHASE_NAMES = {REST: "rest", PATTERN1: "pattern1", PATTERN2: "pattern2"}

# entropy words deriving pattern streams from the master seed
_PATTERN_ENTROPY = (0x50A77E01, 0x50A77E02)


@dataclass(frozen=True)
class TaskConfig:
    n_inputs: int = 200
    max_pattern_rate: float = 60.0     # Hz
    background_rate: float = 2.0       # Hz
    presentation_ms: int = 500
    rest_ms: int = 500
    rate_sigma_ms: float = 20.0
    contrast_eps: float = 0.1          # Hz
    inhibition_min: float = 2.0
    inhibition_max: float = 10.0

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ValueError("n_inputs must be >= 1")
        if self.max_pattern_rate < 0 or self.background_rate < 0:
            raise ValueError("rates must be non-negative")
        if self.presentation_ms <= 0 or self.rest_ms < 0:
            raise ValueError("bad phase durations")
        if not 0 <= self.inhibition_min <= self.inhibition_max:
            raise ValueError("bad inhibition range")

    @property
    def presentation_fraction(self) -> float:
        return self.presentation_ms / (self.presentation_ms + self.rest_ms)


@dataclass(frozen=True)
class PatternSet:
    rates_p1: np.ndarray
    rates_p2: np.ndarray
    background: float

    @classmethod
    def generate(cls, seed: KissState, cfg: TaskConfig) -> "PatternSet":
        rates = []
        for entropy in _PATTERN_ENTROPY:
            raw, _ = kiss_block(seed_scramble(seed, entropy), cfg.n_inputs)
            rates.append(raw / 4294967296.0 * cfg.max_pattern_rate)
        if np.array_equal(rates[0], rates[1]):
            raise ValueError("degenerate pattern set: both patterns identical")
        return cls(rates[0], rates[1], cfg.background_rate)

    def rate_table(self) -> np.ndarray:
        """(3, n_inputs) rates indexed by phase code."""
        return np.stack([np.full_like(self.rates_p1, self.background),
                         self.rates_p1, self.rates_p2])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["neuron_id", "rate_p1", "rate_p2"])
            for i, (a, b) in enumerate(zip(self.rates_p1, self.rates_p2)):
                wr.writerow([i, repr(float(a)), repr(float(b))])

    @classmethod
    def from_csv(cls, path, background: float) -> "PatternSet":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        order = np.argsort(data[:, 0])
        return cls(data[order, 1].copy(), data[order, 2].copy(), background)


@dataclass
class EnvState:
    phase: int = REST
    clock_ms: int = 0
    reward: float = 0.0
    reward_hat: float = 0.5


def phase_schedule(state: EnvState, rng: KissState,
                   cfg: TaskConfig) -> tuple[int, KissState]:
    """Phase for the step at ``state.clock_ms``; a new pattern is drawn at each cycle start."""
    phase, phase_rng = schedule_phase(state.clock_ms, state.phase, rng, cfg)
    return phase, phase_rng


def schedule_phase(t_ms: int, current: int, rng: KissState, cfg: TaskConfig):
    period = cfg.presentation_ms + cfg.rest_ms
    pos = t_ms % period
    if pos == 0:
        unif, rng = kiss_uniform(rng)
        return (PATTERN1 if unif < 0.5 else PATTERN2), rng
    if pos >= cfg.presentation_ms:
        return REST, rng
    return current, rng


def input_spikes(phase: int, patterns: PatternSet, rng: KissState,
                 dt_ms: float = 1.0) -> tuple[np.ndarray, KissState]:
    """Independent Bernoulli(rate * dt) draw per input neuron, one uniform each."""
    rates = patterns.rate_table()[phase]
    raw, rng = kiss_block(rng, rates.shape[0])
    return raw / 4294967296.0 < rates * dt_ms * 1e-3, rng


@njit(cache=True)
def reward_value(rate_a, rate_b, phase, eps):
    if phase == PATTERN1:
        c = (rate_a - rate_b) / (rate_a + rate_b + eps)
    elif phase == PATTERN2:
        c = (rate_b - rate_a) / (rate_a + rate_b + eps)
    else:
        return 0.0
    if c < 0.0:
        return 0.0
    if c > 1.0:
        return 1.0
    return c


def compute_reward(rate_a: float, rate_b: float, phase: int, eps: float = 0.1) -> float:
    return reward_value(float(rate_a), float(rate_b), int(phase), float(eps))


def gaussian_kernel(sigma: float, causal: bool = False) -> np.ndarray:
    """Sampled Gaussian truncated at 4 sigma, normalised to unit sum.

    The causal variant keeps lags 0..4 sigma only (element k is lag k).
    """
    half = int(math.ceil(4 * sigma))
    lags = np.arange(0 if causal else -half, half + 1, dtype=float)
    k = np.exp(-0.5 * (lags / sigma) ** 2)
    return k / k.sum()


def metrics_filter(series, sigma: float) -> np.ndarray:
    """Zero-phase Gaussian smoothing with edge renormalisation.

    ``sigma`` is in samples.  Near the ends the truncated kernel is
    renormalised over the available samples, so constants are preserved.
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return x.copy()
    k = gaussian_kernel(sigma)
    num = np.convolve(x, k, mode="same") if x.size >= k.size else _conv_same(x, k)
    den = np.convolve(np.ones_like(x), k, mode="same") if x.size >= k.size else _conv_same(np.ones_like(x), k)
    return num / den


def _conv_same(x, k):
    full = np.convolve(x, k, mode="full")
    start = (k.size - 1) // 2
    return full[start:start + x.size]


def normalize_reward(curve, cfg: TaskConfig | None = None) -> np.ndarray:
    """Divide by the best achievable time-averaged reward (reward 1 whenever a pattern is shown)."""
    cfg = cfg or TaskConfig()
    return np.asarray(curve, dtype=float) / cfg.presentation_fraction


def population_rates(counts, pop_size: int, sigma_ms: float, dt_ms: float = 1.0) -> np.ndarray:
    """Display rate (Hz) from per-step population spike counts, zero-phase filtered."""
    return metrics_filter(np.asarray(counts, dtype=float), sigma_ms / dt_ms) / (pop_size * dt_ms * 1e-3)

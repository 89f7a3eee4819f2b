"""Cycle, capacity, power and energy arithmetic for one processing core.

All numbers are closed-form over a small set of measured constants.  ``hw``
means the RNG and exp accelerators are used, ``sw`` means software routines.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .memmodel import DEFAULT_RESERVE, DTCM_BYTES, max_plastic_synapses

HW, SW = "hw", "sw"


@dataclass(frozen=True)
class CostConstants:
    rng_cycles: dict = field(default_factory=lambda: {HW: 5, SW: 42})
    exp_cycles: dict = field(default_factory=lambda: {HW: 15, SW: 104, "sw_newlib": 163})
    rest_cycles: int = 90
    budget_cycles: int = 500_000          # per 1 ms step at 500 MHz
    overhead_core0: int = 45_000
    overhead_other: int = 40_000
    power_mw: dict = field(default_factory=lambda: {"dram": 285.0, "no_dram": 225.0})
    step_ms: dict = field(default_factory=lambda: {HW: 0.76, SW: 1.58})
    clock_mhz: float = 500.0

    def __post_init__(self):
        values = [*self.rng_cycles.values(), *self.exp_cycles.values(), self.rest_cycles,
                  self.budget_cycles, self.overhead_core0, self.overhead_other,
                  *self.power_mw.values(), *self.step_ms.values(), self.clock_mhz]
        if any(v <= 0 for v in values):
            raise ValueError("cost constants must be positive")

    def overhead(self, core: int) -> int:
        return self.overhead_core0 if core == 0 else self.overhead_other


DEFAULT = CostConstants()


def _check_mode(mode: str) -> None:
    if mode not in (HW, SW):
        raise ValueError(f"mode must be 'hw' or 'sw', got {mode!r}")


def cycles_per_update(mode: str, c: CostConstants = DEFAULT) -> int:
    _check_mode(mode)
    return c.rng_cycles[mode] + c.exp_cycles[mode] + c.rest_cycles


def accel_fraction(mode: str, c: CostConstants = DEFAULT) -> float:
    """Share of an update spent in random number generation and exp."""
    return (c.rng_cycles[mode] + c.exp_cycles[mode]) / cycles_per_update(mode, c)


def speedup(c: CostConstants = DEFAULT) -> float:
    return cycles_per_update(SW, c) / cycles_per_update(HW, c)


def round_hundreds(n: int) -> int:
    return int(round(n, -2))


@dataclass(frozen=True)
class CapacityReport:
    mode: str
    core: int
    constants: CostConstants = DEFAULT
    reserve: int = DEFAULT_RESERVE

    @property
    def cycles_per_update(self) -> int:
        return cycles_per_update(self.mode, self.constants)

    @property
    def compute_bound(self) -> int:
        c = self.constants
        return max(0, (c.budget_cycles - c.overhead(self.core)) // self.cycles_per_update)

    @property
    def memory_bound(self) -> int:
        return max_plastic_synapses(DTCM_BYTES, self.reserve)

    @property
    def max_synapses(self) -> int:
        return min(self.compute_bound, self.memory_bound)


def capacity(mode: str, core: int = 0, c: CostConstants = DEFAULT) -> int:
    return CapacityReport(mode, core, c).compute_bound


@dataclass(frozen=True)
class EnergyReport:
    dram: bool
    accel: bool
    constants: CostConstants = DEFAULT

    @property
    def power_mw(self) -> float:
        return self.constants.power_mw["dram" if self.dram else "no_dram"]

    @property
    def step_ms(self) -> float:
        return self.constants.step_ms[HW if self.accel else SW]

    @property
    def energy_uj(self) -> float:
        # mW x ms = uJ
        return self.power_mw * self.step_ms

    @property
    def reduction(self) -> float:
        """Fractional saving relative to the DRAM + software baseline."""
        base = EnergyReport(True, False, self.constants).energy_uj
        return 1.0 - self.energy_uj / base

    @property
    def extrapolated(self) -> bool:
        # no measured row exists for DRAM storage combined with the accelerators
        return self.dram and self.accel


def energy(dram: bool, accel: bool, c: CostConstants = DEFAULT) -> EnergyReport:
    return EnergyReport(dram, accel, c)


@dataclass(frozen=True)
class StepCost:
    cycles: int
    budget: int
    clock_mhz: float

    @property
    def violation(self) -> bool:
        return self.cycles > self.budget

    @property
    def ms(self) -> float:
        return self.cycles / (self.clock_mhz * 1e3)


def step_cycles(core: int, n_plastic: int, mode: str, c: CostConstants = DEFAULT) -> StepCost:
    if n_plastic < 0:
        raise ValueError("n_plastic must be non-negative")
    cycles = c.overhead(core) + n_plastic * cycles_per_update(mode, c)
    return StepCost(cycles, c.budget_cycles, c.clock_mhz)


def cycle_table(c: CostConstants = DEFAULT) -> list[dict]:
    rows = []
    for mode in (HW, SW):
        rows.append({"mode": mode, "rng": c.rng_cycles[mode], "exp": c.exp_cycles[mode],
                     "rest": c.rest_cycles, "total": cycles_per_update(mode, c),
                     "rng_exp_fraction_pct": round(100 * accel_fraction(mode, c))})
    return rows


def capacity_table(c: CostConstants = DEFAULT, reserve: int = DEFAULT_RESERVE) -> list[dict]:
    rows = []
    for mode in (HW, SW):
        for core in (0, 1):
            rep = CapacityReport(mode, core, c, reserve)
            rows.append({"mode": mode, "core": "core0" if core == 0 else "other",
                         "cycles_per_update": rep.cycles_per_update,
                         "compute_bound": rep.compute_bound,
                         "compute_bound_rounded": round_hundreds(rep.compute_bound),
                         "memory_bound": rep.memory_bound,
                         "memory_bound_rounded": round_hundreds(rep.memory_bound)})
    return rows


def energy_table(c: CostConstants = DEFAULT) -> list[dict]:
    rows = []
    for dram, accel in ((True, False), (False, False), (False, True), (True, True)):
        rep = EnergyReport(dram, accel, c)
        rows.append({"dram": "on" if dram else "off", "accel": "on" if accel else "off",
                     "power_mw": rep.power_mw, "step_ms": rep.step_ms,
                     "energy_uj": round(rep.energy_uj, 1),
                     "reduction_pct": round(100 * rep.reduction),
                     "extrapolated": rep.extrapolated})
    return rows

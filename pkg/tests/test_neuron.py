import math

import numpy as np
import pytest

from synsampling.accel import DEFAULT_SEED, EXP_MEMO, seed_scramble
from synsampling.neuron import (NeuronConfig, NeuronState, PspTrace, initial_state,
                                neuron_step, neuron_update, psp_step)

CFG = NeuronConfig()


def _kernel(t_ms):
    return (2 / 18) * (math.exp(-t_ms / 20) - math.exp(-t_ms / 2))


def test_config_validation():
    with pytest.raises(ValueError):
        NeuronConfig(tau_r=20.0, tau_m=2.0)
    with pytest.raises(ValueError):
        NeuronConfig(t_ref=0.0)
    assert CFG.ref_steps == 5


def test_silent_trace_stays_zero():
    tr = PspTrace()
    for _ in range(100):
        tr, y = psp_step(tr, False, CFG)
        assert y == 0.0


def test_single_spike_kernel_value():
    tr, y0 = psp_step(PspTrace(), True, CFG)
    assert y0 == 0.0
    tr, _ = psp_step(tr, False, CFG)
    tr, y2 = psp_step(tr, False, CFG)
    # (2/18)(e^-0.1 - e^-1)
    assert y2 == pytest.approx(0.059661997429390795, rel=1e-12)


def test_recurrence_matches_closed_form():
    tr, _ = psp_step(PspTrace(), True, CFG)
    for t in range(1, 400):
        tr, y = psp_step(tr, False, CFG)
        assert y == pytest.approx(_kernel(t), rel=1e-6, abs=1e-300)
        assert y >= 0
    assert y < 1e-8


def test_resting_rate_at_initial_bias():
    u = 0.0 + CFG.bias_init
    rate, spiked, ref, bias = neuron_update(u, 0, CFG.bias_init, 0.999, 1.0, 5, 5.0, 50.0,
                                            EXP_MEMO)
    # e^-3 = 0.0497871 Hz, within the exp unit's precision
    assert rate == pytest.approx(0.049787068367863944, abs=2 ** -15)
    assert not spiked


def test_spike_probability_threshold():
    # p = rate * 1e-3 with rate = e^-3
    p = 4.9787068367863945e-05
    _, hit, _, _ = neuron_update(-3.0, 0, -3.0, p * 0.99, 1.0, 5, 5.0, 50.0, EXP_MEMO)
    _, miss, _, _ = neuron_update(-3.0, 0, -3.0, p * 1.01, 1.0, 5, 5.0, 50.0, EXP_MEMO)
    assert hit and not miss


def test_refractory_blocks_spikes():
    rate, spiked, ref, _ = neuron_update(20.0, 3, 0.0, 0.0, 1.0, 5, 5.0, 50.0, EXP_MEMO)
    assert not spiked and ref == 2 and rate == 0.0


def test_spike_starts_refractory_window():
    _, spiked, ref, _ = neuron_update(20.0, 0, 0.0, 0.0, 1.0, 5, 5.0, 50.0, EXP_MEMO)
    assert spiked and ref == 5


def test_bias_drift_without_spikes():
    bias = -3.0
    for _ in range(1000):
        _, _, _, bias = neuron_update(-50.0, 0, bias, 0.5, 1.0, 5, 5.0, 50.0, EXP_MEMO)
    assert bias == pytest.approx(-3.0 + 0.1, abs=1e-12)


def test_neuron_step_consumes_one_uniform():
    rng = seed_scramble(DEFAULT_SEED, 11)
    st, _, rng2 = neuron_step(initial_state(CFG), 0.0, rng, CFG)
    from synsampling.accel import kiss_next
    _, expect = kiss_next(rng)
    assert rng2 == expect
    assert st.u == -3.0


def test_rejects_non_finite_input():
    with pytest.raises(ValueError):
        neuron_step(NeuronState(), float("nan"), DEFAULT_SEED, CFG)


def test_rate_homeostasis():
    """Stationary input for 500 s: the bias drives the realised rate to 5 Hz."""
    rng = seed_scramble(DEFAULT_SEED, 5)
    st = initial_state(CFG)
    spikes = 0
    n = 500_000
    for _ in range(n):
        st, s, rng = neuron_step(st, 2.0, rng, CFG)
        spikes += s
    rate = spikes / (n * 1e-3)
    assert abs(rate - 5.0) <= 1.0

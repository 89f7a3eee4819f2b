"""Fixed point, exp unit, KISS and binary16 helpers.

Reference numbers were computed once with mpmath at 50 digits (exp), numpy's
float16 (binary16) and a standalone C KISS program, then frozen here.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from synsampling import accel, tablegen
from synsampling.accel import (DEFAULT_SEED, FX_LSB, FX_MAX, FX_MIN, KissState, exp_accel,
                               exp_accel_many, exp_error_lsb, exp_grid, exp_hybrid, fx_convert,
                               fx_to_real, half_decode, half_encode, half_round,
                               half_round_stochastic, kiss_block, kiss_next, kiss_seed,
                               kiss_uniform, seed_scramble)


class TestFixedPoint:
    def test_spot_values(self):
        assert fx_convert(0.0) == (0, False)
        assert fx_convert(1.0) == (0x8000, False)
        assert fx_convert(1e9) == (0x7FFFFFFF, True)
        assert fx_convert(-1e9) == (FX_MIN, True)

    def test_ties_to_even(self):
        assert fx_convert(0.5 * FX_LSB)[0] == 0
        assert fx_convert(1.5 * FX_LSB)[0] == 2
        assert fx_convert(-2.5 * FX_LSB)[0] == -2

    @given(st.integers(FX_MIN, FX_MAX))
    def test_raw_round_trip(self, raw):
        assert fx_convert(fx_to_real(raw)) == (raw, False)


class TestExpUnit:
    def test_exact_points(self):
        assert exp_accel(0) == 0x8000
        # exp(1) * 2**15 = 89072.6589...
        assert exp_accel(0x8000) == 89073
        # exp(-10) * 2**15 = 1.4877
        assert exp_accel(-10 * 0x8000) == 1
        # exp(-5) * 2**15 = 220.789
        assert exp_accel(-5 * 0x8000) == 221
        assert exp_accel(12 * 0x8000) == FX_MAX

    def test_saturation_threshold(self):
        # ln(65536) = 11.0903548889...
        below, _ = fx_convert(11.0903)
        above, _ = fx_convert(11.0904)
        assert exp_accel(below) < FX_MAX
        assert exp_accel(above) == FX_MAX

    def test_underflow(self):
        assert exp_accel(FX_MIN) == 0
        assert exp_hybrid(-20.0) == 0.0

    def test_rejects_out_of_range_operand(self):
        with pytest.raises(ValueError):
            exp_accel(FX_MAX + 1)

    def test_golden_vectors(self):
        ops, ref = accel.exp_golden()
        got = exp_accel_many(ops)
        assert len(ops) > 4000
        assert np.max(np.abs(got - np.array(ref))) <= 1

    def test_grid_within_one_lsb(self):
        err = exp_error_lsb(exp_grid())
        assert err.max() <= 1.0

    def test_monotone_on_grid(self):
        vals = exp_accel_many(exp_grid())
        assert np.all(np.diff(vals) >= 0)

    def test_dense_window_near_one(self):
        raw = np.arange(-(1 << 16), 1 << 16, dtype=np.int64)
        assert exp_error_lsb(raw).max() <= 1.0

    def test_hybrid_conversion_chain(self):
        assert exp_hybrid(0.0) == 1.0
        bound = FX_LSB + np.spacing(np.float32(1.6487213))
        assert abs(exp_hybrid(0.5) - 1.6487212707001282) <= bound

    def test_tables_match_generator(self):
        from synsampling import _exp_tables
        import inspect
        assert tablegen.render() == inspect.getsource(_exp_tables)

    def test_int_table_entries(self):
        scale = 2 ** tablegen.TABLE_BITS
        for n, v in zip(range(tablegen.INT_MIN, tablegen.INT_MAX + 1), accel.INT_TABLE):
            assert abs(int(v) - math.exp(n) * scale) <= max(1.0, math.exp(n) * scale * 1e-15)

    @pytest.mark.slow
    def test_exhaustive(self):
        assert accel.exp_scan_exhaustive() <= 1.0


class TestKiss:
    def test_golden_prefix(self):
        ref = accel.kiss_golden()
        got, _ = kiss_block(DEFAULT_SEED, len(ref))
        assert [int(v) for v in got] == ref
        assert ref[:5] == [0x9BDDF92E, 0xD5A41E38, 0xB2F6FF02, 0x181980C1, 0x1A48ACF3]

    def test_scalar_and_block_agree(self):
        block, end = kiss_block(DEFAULT_SEED, 50)
        state = DEFAULT_SEED
        for v in block:
            out, state = kiss_next(state)
            assert out == v
        assert state == end

    def test_deterministic(self):
        a, _ = kiss_block(DEFAULT_SEED, 1_000_000)
        b, _ = kiss_block(DEFAULT_SEED, 1_000_000)
        assert np.array_equal(a, b)

    def test_chi_square_bytes(self):
        out, _ = kiss_block(DEFAULT_SEED, 1_000_000)
        counts = np.bincount(out >> 24, minlength=256)
        assert stats.chisquare(counts).pvalue > 0.001

    def test_uniform_mean_and_range(self):
        out, _ = kiss_block(DEFAULT_SEED, 1_000_000)
        u = out / 2.0 ** 32
        assert 0.0 <= u.min() and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.002

    def test_uniform_scaling(self):
        u, s = kiss_uniform(DEFAULT_SEED)
        raw, s2 = kiss_next(DEFAULT_SEED)
        assert u == raw / 2.0 ** 32 and s == s2

    def test_zero_xorshift_rejected(self):
        with pytest.raises(ValueError):
            kiss_seed(1, 0, 2, 3)
        with pytest.raises(ValueError):
            kiss_next(KissState(1, 0, 2, 3))

    def test_no_short_cycle(self):
        out, _ = kiss_block(DEFAULT_SEED, 1 << 22)
        assert np.unique(out).size > 0.999 * out.size


class TestSeedScramble:
    def test_identity_for_zero(self):
        assert seed_scramble(DEFAULT_SEED, 0) == DEFAULT_SEED

    def test_distinct_entropy_distinct_state(self):
        states = {seed_scramble(DEFAULT_SEED, e) for e in range(2000)}
        assert len(states) == 2000

    def test_diverges_immediately(self):
        a, _ = kiss_next(DEFAULT_SEED)
        b, _ = kiss_next(seed_scramble(DEFAULT_SEED, 1))
        assert a != b

    @given(st.integers(0, 2 ** 32 - 1))
    def test_result_is_valid(self, entropy):
        s = seed_scramble(DEFAULT_SEED, entropy)
        assert s.xs != 0 and s.z != 0 and s.w != 0
        assert all(0 <= v < 2 ** 32 for v in s)


class TestBinary16:
    def test_spot_values(self):
        assert half_encode(1.0) == 0x3C00
        assert half_encode(0.0) == 0x0000
        assert half_encode(-2.0) == 0xC000
        assert half_decode(half_encode(0.1)) == 0.0999755859375
        assert half_encode(1e6) == 0x7C00
        assert half_encode(-1e6) == 0xFC00

    def test_subnormals(self):
        assert half_encode(2.0 ** -24) == 0x0001
        assert half_decode(0x03FF) == np.float32(1023 * 2.0 ** -24)

    def test_matches_numpy_float16(self):
        rng = np.random.default_rng(7)
        x = np.concatenate([
            rng.standard_normal(200_000).astype(np.float32) * 100,
            (rng.standard_normal(100_000) * 1e-6).astype(np.float32),
            rng.uniform(-70000, 70000, 100_000).astype(np.float32),
        ])
        with np.errstate(over="ignore"):
            ref = x.astype(np.float16).view(np.uint16)
        assert np.array_equal(half_encode(x), ref)

    def test_all_patterns_round_trip(self):
        bits = np.arange(1 << 16, dtype=np.uint16)
        finite = bits[(bits & 0x7C00) != 0x7C00]
        assert np.array_equal(half_encode(half_decode(finite)), finite)

    def test_relative_error_normal_range(self):
        x = np.geomspace(6.2e-5, 65000, 100_000).astype(np.float32)
        rel = np.abs(half_decode(half_encode(x)) - x) / x
        assert rel.max() <= 2.0 ** -11

    def test_fast_round_matches_codec(self):
        rng = np.random.default_rng(3)
        x = np.concatenate([rng.standard_normal(50_000) * 10,
                            rng.standard_normal(20_000) * 1e-6,
                            [0.0, -0.0, 65504.0, 65520.0, -65520.0]]).astype(np.float32)
        ref = half_decode(half_encode(x))
        got = np.array([half_round(float(v)) for v in x], dtype=np.float32)
        assert np.array_equal(got.view(np.uint32), ref.view(np.uint32))

    def test_stochastic_round_brackets_and_unbiased(self):
        x = 1.0 + 3 * 2.0 ** -12     # three eighths of the way to the next binary16 value
        lo, hi = 1.0, 1.0 + 2.0 ** -10
        r = np.arange(8192)
        vals = np.array([half_round_stochastic(x, int(k)) for k in r])
        assert set(np.unique(vals)) == {lo, hi}
        assert abs(vals.mean() - np.float32(x)) < 1e-12

    def test_stochastic_round_subnormal_unbiased(self):
        x = 2.5 * 2.0 ** -24
        vals = np.array([half_round_stochastic(x, k) for k in range(8192)])
        assert abs(vals.mean() - x) < 1e-15
        assert half_round_stochastic(-x, 0) == -2 * 2.0 ** -24

    def test_stochastic_round_overflow(self):
        assert half_round_stochastic(70000.0, 0) == math.inf
        assert half_round_stochastic(-70000.0, 0) == -math.inf

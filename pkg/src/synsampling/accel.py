"""Bit-level emulation of the per-core hardware helpers.

Covers the s16.15 fixed-point format, the split-table exponential unit, the
KISS pseudo random number generator (with seed scrambling) and the IEEE-754
binary16 storage format used for eligibility traces and gradient estimates.

All integer kernels are written against int64 so the same code runs compiled
(numba) inside the simulation loop and interpreted from Python.

KISS variant
------------
One 32-bit step advances four words::

    cong = 69069 * cong + 1234567                 (mod 2**32)
    xs  ^= xs << 13;  xs ^= xs >> 17;  xs ^= xs << 5
    z    = 36969 * (z & 0xFFFF) + (z >> 16)
    w    = 18000 * (w & 0xFFFF) + (w >> 16)
    out  = (((z << 16) + w) ^ cong) + xs          (mod 2**32)

``DEFAULT_SEED`` is the customary published starting point.
"""
from __future__ import annotations

import math
import struct
from importlib import resources
from typing import NamedTuple

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.extending import intrinsic

from . import _exp_tables as _tab

FX_FRAC_BITS = 15
FX_ONE = 1 << FX_FRAC_BITS
FX_MAX = 0x7FFFFFFF
FX_MIN = -0x80000000
FX_LSB = 2.0 ** -FX_FRAC_BITS

_M32 = 0xFFFFFFFF
_M28 = (1 << 28) - 1

INT_TABLE = np.array(_tab.INT_TABLE, dtype=np.int64)
FRAC_TABLE = np.array(_tab.FRAC_TABLE, dtype=np.int64)
POLY_COEFFS = np.array(_tab.POLY_COEFFS, dtype=np.int64)
_TB = _tab.TABLE_BITS
_INT_MIN = _tab.INT_MIN
_INT_MAX = _tab.INT_MAX
_POLY_BITS = _tab.POLY_BITS
_POLY_MASK = (1 << _POLY_BITS) - 1
_OUT_SHIFT = _TB - FX_FRAC_BITS


# ---------------------------------------------------------------------------
# s16.15 fixed point
# ---------------------------------------------------------------------------

def fx_convert(x: float) -> tuple[int, bool]:
    """Round ``x`` to s16.15 (nearest, ties to even).

    Returns ``(raw, saturated)``; out-of-range values clamp to the range ends.
    """
    raw, sat = _fx_convert(float(x))
    return int(raw), bool(sat)


def fx_to_real(raw: int) -> float:
    return int(raw) * FX_LSB


@njit(cache=True)
def _fx_convert(x):
    v = np.rint(x * 32768.0)
    if v > 2147483647.0:
        return FX_MAX, True
    if v < -2147483648.0:
        return FX_MIN, True
    return np.int64(v), False


# ---------------------------------------------------------------------------
# exponential accelerator
# ---------------------------------------------------------------------------

@njit(cache=True)
def _mul_shr40(a, b):
    # (a * b) >> 40 for 0 <= a < 2**56, 0 <= b < 2**42 without leaving int64
    a1 = a >> 28
    a0 = a & _M28
    b1 = b >> 28
    b0 = b & _M28
    return (a1 * b1 << 16) + (a1 * b0 >> 12) + (a0 * b1 >> 12) + (a0 * b0 >> 40)


@njit(cache=True)
def _exp_raw(x, int_table, frac_table, coeffs):
    n = x >> FX_FRAC_BITS
    if n > _INT_MAX:
        return FX_MAX
    if n < _INT_MIN:
        return 0
    frac = x & 0x7FFF
    p = frac >> _POLY_BITS
    q = frac & _POLY_MASK
    # exp(q * 2**-15) by Horner in the 2**-40 accumulator
    acc = coeffs[2]
    acc = coeffs[1] + ((acc * q) >> FX_FRAC_BITS)
    acc = coeffs[0] + ((acc * q) >> FX_FRAC_BITS)
    y = _mul_shr40(int_table[n - _INT_MIN], _mul_shr40(frac_table[p], acc))
    out = y >> _OUT_SHIFT
    rem = y & ((1 << _OUT_SHIFT) - 1)
    half = 1 << (_OUT_SHIFT - 1)
    if rem > half or (rem == half and (out & 1) == 1):
        out += 1
    if out > FX_MAX:
        return FX_MAX
    return out


def exp_accel(raw: int) -> int:
    """exp of an s16.15 operand, returned as s16.15 (saturating, underflow to 0)."""
    raw = int(raw)
    if not FX_MIN <= raw <= FX_MAX:
        raise ValueError(f"operand {raw} is not an s16.15 raw value")
    return int(_exp_raw(raw, INT_TABLE, FRAC_TABLE, POLY_COEFFS))


@njit(cache=True)
def _exp_raw_many(xs, int_table, frac_table, coeffs):
    out = np.empty(xs.shape[0], dtype=np.int64)
    for i in range(xs.shape[0]):
        out[i] = _exp_raw(xs[i], int_table, frac_table, coeffs)
    return out


def exp_accel_many(raw) -> np.ndarray:
    """Vectorised :func:`exp_accel` over an integer array."""
    xs = np.ascontiguousarray(raw, dtype=np.int64)
    return _exp_raw_many(xs.ravel(), INT_TABLE, FRAC_TABLE, POLY_COEFFS).reshape(xs.shape)


# Every operand below MEMO_LO underflows to 0 and every operand at or above
# MEMO_HI saturates, so the live region is small enough to precompute once.
# The memo is a cache of _exp_raw, not a second approximation.
MEMO_LO = -12 * FX_ONE


def _build_memo():
    hi = 12 * FX_ONE
    vals = exp_accel_many(np.arange(MEMO_LO, hi, dtype=np.int64))
    first_sat = int(np.argmax(vals == FX_MAX))
    # stored as the float32 the unit hands back, which halves the cache footprint
    return (vals[:first_sat] * FX_LSB).astype(np.float32), MEMO_LO + first_sat


EXP_MEMO, MEMO_HI = _build_memo()


@njit(cache=True)
def _exp_hybrid(x, memo):
    raw, _ = _fx_convert(x)
    if raw < MEMO_LO:
        return np.float32(0.0)
    idx = raw - MEMO_LO
    if idx >= memo.shape[0]:
        return np.float32(FX_MAX * FX_LSB)
    return memo[idx]


@njit(cache=True)
def _exp_unit(x, memo, accel):
    """Accelerator path when ``accel``, otherwise a software float32 exp saturating like s16.15."""
    if accel:
        return _exp_hybrid(x, memo)
    y = math.exp(min(x, 12.0))
    return np.float32(min(y, FX_MAX * FX_LSB))


def exp_hybrid(x: float) -> float:
    """Float exp routed through the fixed-point unit: float -> s16.15 -> exp -> float32."""
    return float(_exp_hybrid(float(np.float32(x)), EXP_MEMO))


# ---------------------------------------------------------------------------
# KISS pseudo random number generator
# ---------------------------------------------------------------------------

class KissState(NamedTuple):
    cong: int
    xs: int
    z: int
    w: int


DEFAULT_SEED = KissState(cong=380116160, xs=123456789, z=362436069, w=521288629)
_XS_REPAIR = 0x2545F491
_Z_REPAIR = 0x159A55E5
_W_REPAIR = 0x1F123BB5


def kiss_seed(cong: int, xs: int, z: int, w: int) -> KissState:
    """Validate four seed words; a zero xorshift word is rejected."""
    words = [int(v) for v in (cong, xs, z, w)]
    if any(not 0 <= v <= _M32 for v in words):
        raise ValueError("KISS seed words must be 32-bit unsigned")
    if words[1] == 0:
        raise ValueError("KISS xorshift seed word must be nonzero")
    return KissState(*words)


@njit(cache=True)
def _kiss(cong, xs, z, w):
    cong = (69069 * cong + 1234567) & _M32
    xs ^= (xs << 13) & _M32
    xs ^= xs >> 17
    xs ^= (xs << 5) & _M32
    z = 36969 * (z & 0xFFFF) + (z >> 16)
    w = 18000 * (w & 0xFFFF) + (w >> 16)
    out = (((((z << 16) + w) & _M32) ^ cong) + xs) & _M32
    return out, cong, xs, z, w


@njit(cache=True)
def kiss_next_arr(st):
    """Advance a state held in a length-4 int64 array in place; returns the output."""
    out, st[0], st[1], st[2], st[3] = _kiss(st[0], st[1], st[2], st[3])
    return out


@njit(cache=True)
def kiss_uniform_arr(st):
    return kiss_next_arr(st) * 2.3283064365386963e-10


def kiss_next(state: KissState) -> tuple[int, KissState]:
    if state.xs == 0:
        raise ValueError("invalid KISS state: xorshift word is zero")
    out, *words = _kiss(*state)
    return int(out), KissState(*(int(v) for v in words))


def kiss_uniform(state: KissState) -> tuple[float, KissState]:
    """Uniform real in [0, 1): the next output scaled by 2**-32."""
    out, state = kiss_next(state)
    return out / 4294967296.0, state


@njit(cache=True)
def _kiss_block(cong, xs, z, w, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i], cong, xs, z, w = _kiss(cong, xs, z, w)
    return out, cong, xs, z, w


def kiss_block(state: KissState, n: int) -> tuple[np.ndarray, KissState]:
    """``n`` consecutive outputs, as an int64 array, plus the advanced state."""
    if state.xs == 0:
        raise ValueError("invalid KISS state: xorshift word is zero")
    out, *words = _kiss_block(*state, int(n))
    return out, KissState(*(int(v) for v in words))


@njit(cache=True)
def _fmix32(h):
    # murmur3 finaliser; bijective on 32-bit words, maps 0 to 0
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & _M32
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & _M32
    h ^= h >> 16
    return h


def seed_scramble(seed: KissState, entropy: int) -> KissState:
    """XOR-fold an external entropy word into every state word.

    Each word receives a different bijective mix of ``entropy`` (all of which map
    0 to 0), so ``entropy == 0`` is the identity and the congruential word alone
    makes the map injective in ``entropy``.  Zero MWC/xorshift words produced by
    the fold are replaced by fixed nonzero constants.
    """
    entropy = int(entropy) & _M32
    h1 = _fmix32(entropy)
    h2 = _fmix32(h1)
    h3 = _fmix32(h2)
    h4 = _fmix32(h3)
    cong = seed.cong ^ h1
    xs = seed.xs ^ h2 or _XS_REPAIR
    z = seed.z ^ h3 or _Z_REPAIR
    w = seed.w ^ h4 or _W_REPAIR
    return KissState(cong, xs, z, w)


def kiss_state_array(state: KissState) -> np.ndarray:
    return np.array(state, dtype=np.int64)


# ---------------------------------------------------------------------------
# binary16
# ---------------------------------------------------------------------------

HALF_MAX = 65504.0


def _f32_bits(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float32).view(np.uint32).astype(np.int64)


def half_encode(x):
    """IEEE-754 binary16 bit pattern(s) of 32-bit real(s), round to nearest even.

    Accepts a scalar (returns ``int``) or an array (returns ``uint16`` array).
    Overflow gives the signed infinity pattern; subnormals are produced.
    """
    scalar = np.ndim(x) == 0
    b = _f32_bits(x)
    sign = (b >> 16) & 0x8000
    exp = (b >> 23) & 0xFF
    mant = b & 0x7FFFFF
    e = exp - 127 + 15

    # normal range
    h = (e << 10) | (mant >> 13)
    rem = mant & 0x1FFF
    h = h + ((rem > 0x1000) | ((rem == 0x1000) & ((h & 1) == 1)))

    # subnormal / zero range
    shift = np.clip(14 - e, 14, 25)
    m = mant | 0x800000
    hs = m >> shift
    rems = m & ((np.int64(1) << shift) - 1)
    halfs = np.int64(1) << (shift - 1)
    hs = hs + ((rems > halfs) | ((rems == halfs) & ((hs & 1) == 1)))
    hs = np.where(e < -10, 0, hs)

    out = np.where(e <= 0, hs, h)
    out = np.where(e >= 31, 0x7C00, out)
    out = np.where(exp == 0xFF, 0x7C00 | np.where(mant != 0, 0x200, 0), out)
    out = (sign | out).astype(np.uint16)
    return int(out) if scalar else out


def half_decode(bits):
    """32-bit real(s) from binary16 bit pattern(s)."""
    scalar = np.ndim(bits) == 0
    h = np.asarray(bits, dtype=np.int64)
    sign = np.where((h & 0x8000) != 0, -1.0, 1.0)
    exp = (h >> 10) & 0x1F
    mant = h & 0x3FF
    val = np.where(
        exp == 0,
        mant * 2.0 ** -24,
        (1024 + mant) * np.exp2(exp.astype(np.float64) - 25),
    )
    val = np.where(exp == 0x1F, np.where(mant == 0, np.inf, np.nan), val)
    out = (sign * val).astype(np.float32)
    return float(out) if scalar else out


@intrinsic
def _f32_as_i32(typingctx, x):
    sig = types.int32(types.float32)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], ir.IntType(32))
    return sig, codegen


@intrinsic
def _i32_as_f32(typingctx, x):
    sig = types.float32(types.int32)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], ir.FloatType())
    return sig, codegen


@njit(cache=True)
def half_round(x):
    """decode(encode(float32(x))), on the float32 bit pattern.

    Results beyond the binary16 range come back as +-inf.
    """
    f = np.float32(x)
    b = np.int64(_f32_as_i32(f)) & 0xFFFFFFFF
    mag = b & 0x7FFFFFFF
    if mag >= 0x7F800000:
        return float(f)
    if mag < 0x38800000:
        # below the smallest normal: fixed quantum 2**-24, rounded by magic constant
        c = 402653184.0
        return math.copysign((float(f) + c) - c, float(f))
    mag = (mag + 0xFFF + ((mag >> 13) & 1)) & ~0x1FFF
    if mag > 0x477FE000:
        return math.copysign(math.inf, float(f))
    return float(_i32_as_f32(np.int32((b & 0x80000000) | mag)))


@njit(cache=True)
def half_round_stochastic(x, r13):
    """Round float32(x) to binary16 up or down at random, unbiased.

    ``r13`` is a uniform integer in [0, 8192); the result is the upper
    neighbour with probability equal to the fractional distance.  Results
    beyond the binary16 range come back as +-inf.
    """
    f = np.float32(x)
    b = np.int64(_f32_as_i32(f)) & 0xFFFFFFFF
    mag = b & 0x7FFFFFFF
    if mag >= 0x7F800000:
        return float(f)
    if mag < 0x38800000:
        v = math.floor(abs(float(f)) * 16777216.0 + r13 * 0.0001220703125) * 5.960464477539063e-08
        return math.copysign(v, float(f))
    mag = (mag + r13) & ~0x1FFF
    if mag > 0x477FE000:
        return math.copysign(math.inf, float(f))
    return float(_i32_as_f32(np.int32((b & 0x80000000) | mag)))


def half_codec_roundtrip(x: float) -> float:
    return half_decode(half_encode(np.float32(x)))


def f32_bits(x: float) -> int:
    return struct.unpack("<I", struct.pack("<f", x))[0]


# ---------------------------------------------------------------------------
# golden vectors
# ---------------------------------------------------------------------------

def _read_hex(name: str) -> list[int]:
    text = resources.files("synsampling.data").joinpath(name).read_text()
    return [int(tok, 16) for tok in text.split()]


def kiss_golden() -> list[int]:
    """Reference outputs from ``DEFAULT_SEED``, generated by a separate C program."""
    return _read_hex("kiss_golden.hex")


def exp_golden() -> tuple[list[int], list[int]]:
    """(operands, correctly rounded exp) pairs from a high-precision oracle."""
    ops = [v - (1 << 32) if v & 0x80000000 else v for v in _read_hex("exp_operands.hex")]
    return ops, _read_hex("exp_reference.hex")


def write_hex(path, values) -> None:
    with open(path, "w") as fh:
        for v in values:
            fh.write(f"{int(v) & _M32:08x}\n")


# ---------------------------------------------------------------------------
# verification against an independent oracle
# ---------------------------------------------------------------------------

def exp_oracle(raw) -> np.ndarray:
    """Real-valued exp of s16.15 operands in LSB units, clamped to the output range."""
    x = np.asarray(raw, dtype=np.float64) * FX_LSB
    with np.errstate(over="ignore"):
        y = np.exp(x) * FX_ONE
    return np.minimum(y, float(FX_MAX))


def exp_error_lsb(raw) -> np.ndarray:
    """|emulated - oracle| in LSB for each operand."""
    return np.abs(exp_accel_many(raw) - exp_oracle(raw))


def exp_grid(n: int = 1 << 20) -> np.ndarray:
    """``n`` operands evenly spread over the whole s16.15 domain."""
    return np.linspace(FX_MIN, FX_MAX, n).round().astype(np.int64)


def exp_scan_exhaustive(chunk: int = 1 << 24, progress=None) -> float:
    """Largest error over all 2**32 operands."""
    worst = 0.0
    for start in range(FX_MIN, FX_MAX + 1, chunk):
        raw = np.arange(start, min(start + chunk, FX_MAX + 1), dtype=np.int64)
        worst = max(worst, float(exp_error_lsb(raw).max()))
        if progress is not None:
            progress(start)
    return worst

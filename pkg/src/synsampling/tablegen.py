"""Generator for the exponential accelerator tables.

The tables are emitted as Python source (``_exp_tables.py``) so they can be
embedded and diffed like any other generated file::

    python -m synsampling.tablegen > src/synsampling/_exp_tables.py
"""
import sys

import mpmath

#: fractional bits of every table entry and of the internal accumulator
TABLE_BITS = 40
#: integer-part range covered by the integer LUT
INT_MIN, INT_MAX = -16, 11
#: upper fractional bits indexing the fraction LUT
FRAC_BITS = 9
#: lower fractional bits fed to the polynomial
POLY_BITS = 15 - FRAC_BITS
POLY_DEGREE = 2


def _round_half_even(v):
    f = mpmath.floor(v)
    d = v - f
    n = int(f)
    if d > 0.5 or (d == 0.5 and n % 2):
        n += 1
    return n


def int_table():
    scale = mpmath.mpf(2) ** TABLE_BITS
    return [_round_half_even(mpmath.exp(n) * scale)
            for n in range(INT_MIN, INT_MAX + 1)]


def frac_table():
    scale = mpmath.mpf(2) ** TABLE_BITS
    return [_round_half_even(mpmath.exp(mpmath.mpf(p) / 2 ** FRAC_BITS) * scale)
            for p in range(2 ** FRAC_BITS)]


def poly_coefficients():
    """Near-minimax coefficients of exp(t) on [0, 2**-FRAC_BITS), lowest order first."""
    width = mpmath.mpf(2) ** -FRAC_BITS
    poly, _err = mpmath.chebyfit(mpmath.exp, [0, width], POLY_DEGREE + 1, error=True)
    scale = mpmath.mpf(2) ** TABLE_BITS
    # chebyfit returns the highest order first
    return [_round_half_even(c * scale) for c in reversed(poly)]


def render() -> str:
    with mpmath.workdps(60):
        ints, fracs, coeffs = int_table(), frac_table(), poly_coefficients()
    lines = [
        "# Generated by synsampling.tablegen; do not edit.",
        f"TABLE_BITS = {TABLE_BITS}",
        f"INT_MIN = {INT_MIN}",
        f"INT_MAX = {INT_MAX}",
        f"FRAC_BITS = {FRAC_BITS}",
        f"POLY_BITS = {POLY_BITS}",
        "INT_TABLE = (",
    ]
    lines += [f"    {v}," for v in ints]
    lines += [")", "FRAC_TABLE = ("]
    lines += [f"    {v}," for v in fracs]
    lines += [")", "POLY_COEFFS = ("]
    lines += [f"    {v}," for v in coeffs]
    lines += [")", ""]
    return "\n".join(lines)


if __name__ == "__main__":
    sys.stdout.write(render())

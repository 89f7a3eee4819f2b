import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from synsampling.accel import DEFAULT_SEED, FX_LSB, half_decode
from synsampling.memmodel import (DTCM_BYTES, BudgetExceededError, CoreConnectivity, CoreImage,
                                  FanoutOverflowError, MemoryModelError, SynapseRow,
                                  UnknownKeyError, build_core_image, lookup_row,
                                  max_plastic_synapses, plastic_block_decode,
                                  plastic_block_encode, reassign_post, row_size)


def _finite_f32(rng, n):
    bits = rng.integers(0, 2 ** 32, n, dtype=np.uint64).astype(np.uint32)
    bits[(bits & 0x7F800000) == 0x7F800000] &= 0xBFFFFFFF
    return bits.view(np.float32)


def _finite_half(rng, n):
    bits = rng.integers(0, 2 ** 16, n).astype(np.uint16)
    bits[(bits & 0x7C00) == 0x7C00] &= 0xBFFF
    return half_decode(bits)


def _random_image(rng) -> CoreImage:
    n_local = int(rng.integers(1, 257))
    n_slots = int(rng.integers(0, 8))
    n_keys = int(rng.integers(0, 12))
    keys = np.sort(rng.choice(2 ** 32, n_keys, replace=False)).astype(np.uint32)
    plastic = rng.random(n_keys) < 0.7 if n_slots else np.zeros(n_keys, bool)
    rows, addresses, offset = [], [], 0
    for k in range(n_keys):
        n = n_slots if plastic[k] else 0
        nf = int(rng.integers(0, 4))
        row = SynapseRow(e=_finite_half(rng, n), g=_finite_half(rng, n),
                         theta=_finite_f32(rng, n), control=_finite_f32(rng, int(rng.integers(0, 3))),
                         fixed_targets=rng.integers(0, n_local, nf),
                         fixed_weights=rng.integers(-2 ** 23, 2 ** 23, nf) * FX_LSB)
        blob = row.to_bytes()
        addresses.append(offset)
        rows.append(blob)
        offset += len(blob)
    ids = rng.integers(0, n_local, (n_slots if plastic.any() else 0, int(plastic.sum())))
    return CoreImage(keys, np.array(addresses, np.uint32), b"".join(rows), ids, n_local,
                     budget=DTCM_BYTES)


def _full_core(n_local=5, n_pre=200, per_pair=3):
    return CoreConnectivity(n_local, {k: [t for t in range(n_local) for _ in range(per_pair)]
                                      for k in range(n_pre)})


class TestLayout:
    @pytest.mark.parametrize("args,size", [((3, 0, 2), 44), ((0, 0, 0), 12), ((15, 0, 2), 140)])
    def test_row_size(self, args, size):
        assert row_size(*args) == size

    def test_row_size_rejects_negative(self):
        with pytest.raises(ValueError):
            row_size(-1, 0, 0)

    def test_block_encodings(self):
        assert plastic_block_encode(0.0, 0.0, 1.0) == bytes([0, 0, 0, 0, 0, 0, 0x80, 0x3F])
        assert plastic_block_encode(1.0, -2.0, 0.5) == bytes([0, 0x3C, 0, 0xC0, 0, 0, 0, 0x3F])

    @given(st.floats(-65504, 65504, width=16), st.floats(-65504, 65504, width=16),
           st.floats(allow_nan=False, allow_infinity=False, width=32))
    def test_block_round_trip(self, e, g, theta):
        blob = plastic_block_encode(e, g, theta)
        assert plastic_block_encode(*plastic_block_decode(blob)) == blob
        assert plastic_block_decode(blob) == (e, g, theta)

    def test_row_round_trip_with_fixed(self):
        row = SynapseRow(np.float32([0.5, -1.0]), np.float32([0.25, 0.0]), np.float32([1.5, 2.0]),
                         np.float32([0.6, 0.95]), np.array([3, 7]), np.array([-0.25, 0.125]))
        back = SynapseRow.parse(row.to_bytes(), 0)
        assert back.to_bytes() == row.to_bytes()
        assert list(back.fixed_targets) == [3, 7]
        assert list(back.fixed_weights) == [-0.25, 0.125]
        assert len(row.to_bytes()) == row_size(2, 2, 2)


class TestImage:
    def test_round_trip_random_images(self):
        """10^4 random images: serialise, parse, serialise again."""
        rng = np.random.default_rng(2024)
        for _ in range(10_000):
            img = _random_image(rng)
            blob = img.to_bytes()
            back = CoreImage.from_bytes(blob)
            assert back.to_bytes() == blob
            assert back.n_local == img.n_local
            assert np.array_equal(back.post_ids, img.post_ids)

    def test_rows_tile_storage(self):
        img = _random_image(np.random.default_rng(5))
        sizes = [SynapseRow.parse(img.rows, int(a)).nbytes for a in img.addresses]
        assert sum(sizes) == len(img.rows)

    def test_full_core_fits(self):
        img, _ = build_core_image(_full_core(), DEFAULT_SEED, control=(0.6, 0.95))
        assert len(img.keys) == 200
        assert img.post_ids.shape == (15, 200)
        assert img.nbytes <= DTCM_BYTES
        assert img.nbytes == 200 * (8 + row_size(15, 0, 2)) + 15 * 200

    def test_build_is_deterministic_and_positive(self):
        a, s1 = build_core_image(_full_core(), DEFAULT_SEED)
        b, s2 = build_core_image(_full_core(), DEFAULT_SEED)
        assert a.to_bytes() == b.to_bytes() and s1 == s2
        th = np.concatenate([a.row(k).theta for k in range(200)])
        assert th.min() > 0

    def test_empty_connectivity(self):
        img, _ = build_core_image(CoreConnectivity(0), DEFAULT_SEED)
        assert len(img.keys) == 0 and img.rows == b"" and img.nbytes == 0

    def test_budget_exceeded(self):
        with pytest.raises(BudgetExceededError) as info:
            build_core_image(_full_core(per_pair=10), DEFAULT_SEED, budget=20_000)
        assert info.value.needed > info.value.budget

    def test_fanout_overflow(self):
        with pytest.raises(FanoutOverflowError):
            build_core_image(CoreConnectivity(300, {0: [0]}), DEFAULT_SEED)

    def test_bad_magic(self):
        blob = bytearray(_random_image(np.random.default_rng(1)).to_bytes())
        blob[0] = ord("X")
        with pytest.raises(MemoryModelError):
            CoreImage.from_bytes(bytes(blob))

    def test_dump_load(self, tmp_path):
        img, _ = build_core_image(_full_core(), DEFAULT_SEED)
        img.dump(tmp_path / "core.bin")
        assert CoreImage.load(tmp_path / "core.bin").to_bytes() == img.to_bytes()

    def test_export_csv(self, tmp_path):
        img, _ = build_core_image(_full_core(n_pre=4), DEFAULT_SEED)
        img.export_csv(tmp_path / "c.csv", local_to_global=[10, 11, 12, 13, 14])
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "pre,slot,post,e,g,theta"
        assert len(lines) == 1 + 4 * 15
        assert lines[1].split(",")[2] == "10"


class TestLookup:
    def test_hit_and_miss(self):
        img, _ = build_core_image(_full_core(n_pre=10), DEFAULT_SEED)
        assert lookup_row(img, 3) == lookup_row(img, 3) == int(img.addresses[3])
        with pytest.raises(UnknownKeyError):
            lookup_row(img, 999)
        with pytest.raises(KeyError):
            img.column(999)

    def test_reassign(self):
        img, _ = build_core_image(_full_core(n_pre=10), DEFAULT_SEED)
        before = img.post_ids.copy()
        rows = img.rows
        reassign_post(img, 4, 2, 1)
        assert img.post_ids[2, img.column(4)] == 1
        assert (img.post_ids != before).sum() <= 1
        assert img.rows == rows
        assert img.post_ids.shape == before.shape

    def test_reassign_out_of_range(self):
        img, _ = build_core_image(_full_core(n_pre=10), DEFAULT_SEED)
        with pytest.raises(ValueError):
            reassign_post(img, 0, 0, 255)
        with pytest.raises(IndexError):
            reassign_post(img, 0, 15, 0)


def test_capacity_in_expected_bracket():
    n = max_plastic_synapses()
    assert 4400 <= n <= 5000
    assert round(n, -2) == 4700

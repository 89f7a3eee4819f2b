"""Per-core memory image: master population table, synapse rows, post-ID array.

Byte layout (little-endian throughout)::

    master population table   n x (u32 key, u32 byte address into row storage)
    synapse row               u32 plastic_len (bytes)
                              plastic_len/8 blocks of (f16 e, f16 g, f32 theta)
                              u32 fixed_len (bytes)
                              u32 control_len (bytes)
                              control words (f32 h_rise, f32 h_fall)
                              fixed words: byte 0 local target, bytes 1-3 weight
                              as the low 24 bits of the s16.15 raw value
    post-ID array             u8 [slot, column]; one column per row with plastic
                              synapses, in table order

Row lengths are stored in bytes.  A dump file is a 16-byte header
(magic, u16 version, u16 local neuron count, u32 table entries, u32 row bytes)
followed by the table, the row storage and the post-ID array.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .accel import FX_LSB, KissState, fx_convert, half_decode, half_encode, kiss_uniform

DTCM_BYTES = 64 * 1024
#: code, stack and heap share DTCM with the synapse data
DEFAULT_RESERVE = 16 * 1024
MAGIC = b"SSCI"
VERSION = 1
HEADER = struct.Struct("<4sHHII")
BLOCK = struct.Struct("<HHf")
MAX_LOCAL = 256


class MemoryModelError(Exception):
    pass


class BudgetExceededError(MemoryModelError):
    def __init__(self, needed: int, budget: int, breakdown: dict):
        self.needed, self.budget, self.breakdown = needed, budget, breakdown
        parts = ", ".join(f"{k}={v}" for k, v in breakdown.items())
        super().__init__(f"core image needs {needed} bytes > budget {budget} ({parts})")


class FanoutOverflowError(MemoryModelError):
    pass


class UnknownKeyError(MemoryModelError, KeyError):
    pass


def row_size(n_plastic: int, n_fixed: int, n_control_words: int) -> int:
    if min(n_plastic, n_fixed, n_control_words) < 0:
        raise ValueError("counts must be non-negative")
    return 4 + 8 * n_plastic + 4 + 4 + 4 * n_control_words + 4 * n_fixed


def plastic_block_encode(e: float, g: float, theta: float) -> bytes:
    return BLOCK.pack(half_encode(np.float32(e)), half_encode(np.float32(g)), theta)


def plastic_block_decode(blob: bytes) -> tuple[float, float, float]:
    eb, gb, theta = BLOCK.unpack(blob)
    return half_decode(eb), half_decode(gb), theta


def _fixed_word(target: int, weight: float) -> int:
    raw, _ = fx_convert(weight)
    return (target & 0xFF) | ((raw & 0xFFFFFF) << 8)


def _fixed_unpack(word: int) -> tuple[int, float]:
    raw = word >> 8
    if raw & 0x800000:
        raw -= 1 << 24
    return word & 0xFF, raw * FX_LSB


@dataclass
class SynapseRow:
    e: np.ndarray          # float32, binary16-representable
    g: np.ndarray
    theta: np.ndarray      # float32
    control: np.ndarray    # float32 (h_rise, h_fall)
    fixed_targets: np.ndarray
    fixed_weights: np.ndarray

    @property
    def n_plastic(self) -> int:
        return int(self.theta.shape[0])

    @property
    def nbytes(self) -> int:
        return row_size(self.n_plastic, len(self.fixed_targets), len(self.control))

    def to_bytes(self) -> bytes:
        n = self.n_plastic
        blocks = np.empty(n, dtype=[("e", "<u2"), ("g", "<u2"), ("t", "<f4")])
        blocks["e"] = half_encode(np.asarray(self.e, dtype=np.float32))
        blocks["g"] = half_encode(np.asarray(self.g, dtype=np.float32))
        blocks["t"] = self.theta
        fixed = np.array([_fixed_word(int(t), float(w))
                          for t, w in zip(self.fixed_targets, self.fixed_weights)], dtype="<u4")
        return b"".join([
            struct.pack("<I", 8 * n), blocks.tobytes(),
            struct.pack("<II", 4 * len(fixed), 4 * len(self.control)),
            np.asarray(self.control, dtype="<f4").tobytes(), fixed.tobytes(),
        ])

    @classmethod
    def parse(cls, buf: bytes, offset: int) -> "SynapseRow":
        try:
            (plen,) = struct.unpack_from("<I", buf, offset)
            if plen % 8:
                raise MemoryModelError(f"row at {offset}: plastic length {plen} not a multiple of 8")
            n = plen // 8
            blocks = np.frombuffer(buf, dtype=[("e", "<u2"), ("g", "<u2"), ("t", "<f4")],
                                   count=n, offset=offset + 4)
            pos = offset + 4 + plen
            flen, clen = struct.unpack_from("<II", buf, pos)
            if flen % 4 or clen % 4:
                raise MemoryModelError(f"row at {offset}: region lengths not word multiples")
            pos += 8
            control = np.frombuffer(buf, dtype="<f4", count=clen // 4, offset=pos).copy()
            pos += clen
            words = np.frombuffer(buf, dtype="<u4", count=flen // 4, offset=pos)
        except (struct.error, ValueError) as exc:
            raise MemoryModelError(f"row at {offset} runs past the end of row storage") from exc
        unpacked = [_fixed_unpack(int(w)) for w in words]
        return cls(
            e=half_decode(blocks["e"]), g=half_decode(blocks["g"]),
            theta=blocks["t"].astype(np.float32),
            control=control,
            fixed_targets=np.array([t for t, _ in unpacked], dtype=np.int64),
            fixed_weights=np.array([w for _, w in unpacked], dtype=np.float64),
        )


@dataclass
class CoreImage:
    keys: np.ndarray                 # uint32, strictly increasing
    addresses: np.ndarray            # uint32 byte offsets into ``rows``
    rows: bytes
    post_ids: np.ndarray             # uint8 [slot, column]
    n_local: int
    budget: int = DTCM_BYTES - DEFAULT_RESERVE
    plastic_keys: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=np.uint32)
        self.addresses = np.asarray(self.addresses, dtype=np.uint32)
        self.post_ids = np.asarray(self.post_ids, dtype=np.uint8)
        if self.post_ids.ndim != 2:
            raise MemoryModelError("post-ID array must be 2-d")
        self.validate()

    # -- accounting ---------------------------------------------------------
    def breakdown(self) -> dict:
        return {"table": 8 * len(self.keys), "rows": len(self.rows),
                "post_ids": int(self.post_ids.size)}

    @property
    def nbytes(self) -> int:
        return sum(self.breakdown().values())

    # -- structure ----------------------------------------------------------
    def validate(self) -> None:
        if len(self.keys) != len(self.addresses):
            raise MemoryModelError("table keys/addresses length mismatch")
        if len(self.keys) > 1 and not np.all(np.diff(self.keys.astype(np.int64)) > 0):
            raise MemoryModelError("table keys must be strictly increasing")
        if np.any(self.addresses % 4):
            raise MemoryModelError("row addresses must be 4-byte aligned")
        if not 0 <= self.n_local <= MAX_LOCAL:
            raise MemoryModelError(f"local neuron count {self.n_local} outside [0, {MAX_LOCAL}]")
        plastic = []
        for k, a in zip(self.keys, self.addresses):
            row = SynapseRow.parse(self.rows, int(a))
            if row.n_plastic:
                plastic.append((int(k), row.n_plastic))
        self.plastic_keys = np.array([k for k, _ in plastic], dtype=np.int64)
        slots = {n for _, n in plastic}
        if len(slots) > 1:
            raise MemoryModelError("plastic rows must share one slot count for the post-ID array")
        n_slots = slots.pop() if slots else 0
        if self.post_ids.shape != (n_slots, len(plastic)):
            raise MemoryModelError(
                f"post-ID array shape {self.post_ids.shape} != ({n_slots}, {len(plastic)})")
        if self.post_ids.size and int(self.post_ids.max()) >= self.n_local:
            raise MemoryModelError("post-ID entry out of local neuron range")
        if self.nbytes > self.budget:
            raise BudgetExceededError(self.nbytes, self.budget, self.breakdown())

    def row(self, pre_id: int) -> SynapseRow:
        return SynapseRow.parse(self.rows, lookup_row(self, pre_id))

    def column(self, pre_id: int) -> int:
        idx = int(np.searchsorted(self.plastic_keys, pre_id))
        if idx >= len(self.plastic_keys) or self.plastic_keys[idx] != pre_id:
            raise UnknownKeyError(pre_id)
        return idx

    # -- serialisation --------------------------------------------------------
    def to_bytes(self) -> bytes:
        table = np.empty(len(self.keys), dtype=[("k", "<u4"), ("a", "<u4")])
        table["k"], table["a"] = self.keys, self.addresses
        head = HEADER.pack(MAGIC, VERSION, self.n_local, len(self.keys), len(self.rows))
        return head + table.tobytes() + bytes(self.rows) + self.post_ids.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes, budget: int | None = None) -> "CoreImage":
        if len(blob) < HEADER.size:
            raise MemoryModelError("truncated core image header")
        magic, version, n_local, n_keys, n_row = HEADER.unpack_from(blob)
        if magic != MAGIC or version != VERSION:
            raise MemoryModelError(f"bad magic/version {magic!r}/{version}")
        pos = HEADER.size
        table = np.frombuffer(blob, dtype=[("k", "<u4"), ("a", "<u4")], count=n_keys, offset=pos)
        pos += 8 * n_keys
        rows = bytes(blob[pos:pos + n_row])
        if len(rows) != n_row:
            raise MemoryModelError("truncated row storage")
        pos += n_row
        n_slots, n_cols = 0, 0
        for a in table["a"]:
            n = SynapseRow.parse(rows, int(a)).n_plastic
            if n:
                n_slots, n_cols = n, n_cols + 1
        ids = np.frombuffer(blob, dtype=np.uint8, offset=pos)
        if ids.size != n_slots * n_cols:
            raise MemoryModelError(f"post-ID array has {ids.size} bytes, expected {n_slots * n_cols}")
        return cls(table["k"].copy(), table["a"].copy(), rows,
                   ids.reshape(n_slots, n_cols).copy(), n_local,
                   budget=budget if budget is not None else DTCM_BYTES)

    def dump(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path, budget: int | None = None) -> "CoreImage":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), budget=budget)

    def export_csv(self, path, local_to_global=None) -> None:
        """One line per plastic synapse: pre, slot, post, e, g, theta."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["pre", "slot", "post", "e", "g", "theta"])
            for col, key in enumerate(self.plastic_keys):
                row = self.row(int(key))
                for s in range(row.n_plastic):
                    post = int(self.post_ids[s, col])
                    if local_to_global is not None:
                        post = int(local_to_global[post])
                    wr.writerow([int(key), s, post, repr(float(row.e[s])),
                                 repr(float(row.g[s])), repr(float(row.theta[s]))])


def lookup_row(image: CoreImage, pre_id: int) -> int:
    """Binary search the master population table; returns the row's byte address."""
    idx = int(np.searchsorted(image.keys, np.uint32(pre_id)))
    if idx >= len(image.keys) or int(image.keys[idx]) != pre_id:
        raise UnknownKeyError(pre_id)
    return int(image.addresses[idx])


def reassign_post(image: CoreImage, pre_id: int, slot: int, new_post: int) -> CoreImage:
    """Point one synapse slot at a new local neuron (in place)."""
    col = image.column(pre_id)
    if not 0 <= slot < image.post_ids.shape[0]:
        raise IndexError(f"slot {slot} out of range for pre {pre_id}")
    if not 0 <= new_post < image.n_local:
        raise ValueError(f"post {new_post} outside local range [0, {image.n_local})")
    image.post_ids[slot, col] = new_post
    return image


@dataclass
class CoreConnectivity:
    """What one core must store: plastic targets per presynaptic key, fixed synapses."""
    n_local: int
    plastic: dict = field(default_factory=dict)   # key -> sequence of local targets
    fixed: dict = field(default_factory=dict)     # key -> sequence of (target, weight)


def _gauss_positive(rng: KissState, mean: float, std: float,
                    upper: float = math.inf) -> tuple[float, KissState]:
    # Box-Muller on two KISS uniforms, rejected to (0, upper]
    while True:
        u1, rng = kiss_uniform(rng)
        u2, rng = kiss_uniform(rng)
        x = mean + std * math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
        if 0 < x <= upper:
            return x, rng


def build_core_image(conn: CoreConnectivity, rng: KissState, *, prior_mean: float = 0.0,
                     prior_std: float = 2.0, theta_max: float = math.inf, control=(0.0, 0.0),
                     budget: int = DTCM_BYTES - DEFAULT_RESERVE) -> tuple[CoreImage, KissState]:
    """Lay out one core's data, drawing initial parameters from the core's own stream.

    Rows are stored in ascending key order.  Every plastic row must have the same
    number of slots (they share the post-ID array).
    """
    if not 0 <= conn.n_local <= MAX_LOCAL:
        raise FanoutOverflowError(f"{conn.n_local} local neurons exceed {MAX_LOCAL}")
    keys = sorted(set(conn.plastic) | set(conn.fixed))
    slot_counts = {len(conn.plastic[k]) for k in conn.plastic if len(conn.plastic[k])}
    if len(slot_counts) > 1:
        raise FanoutOverflowError("plastic rows must have identical slot counts")
    for k, targets in conn.plastic.items():
        if any(not 0 <= t < conn.n_local for t in targets):
            raise FanoutOverflowError(f"pre {k}: target outside local range")
    for k, fixed in conn.fixed.items():
        if any(not 0 <= t < conn.n_local for t, _ in fixed):
            raise FanoutOverflowError(f"pre {k}: fixed target outside local range")

    rows, addresses, columns = [], [], []
    offset = 0
    control = np.asarray(control, dtype=np.float32)
    for k in keys:
        targets = list(conn.plastic.get(k, ()))
        thetas = []
        for _ in targets:
            th, rng = _gauss_positive(rng, prior_mean, prior_std, theta_max)
            thetas.append(th)
        fixed = list(conn.fixed.get(k, ()))
        row = SynapseRow(
            e=np.zeros(len(targets), np.float32), g=np.zeros(len(targets), np.float32),
            theta=np.array(thetas, dtype=np.float32), control=control,
            fixed_targets=np.array([t for t, _ in fixed], dtype=np.int64),
            fixed_weights=np.array([w for _, w in fixed], dtype=np.float64))
        blob = row.to_bytes()
        addresses.append(offset)
        rows.append(blob)
        offset += len(blob)
        if targets:
            columns.append(targets)
    post_ids = (np.array(columns, dtype=np.uint8).T if columns
                else np.zeros((0, 0), dtype=np.uint8))
    storage = b"".join(rows)
    needed = 8 * len(keys) + len(storage) + post_ids.size
    if needed > budget:
        raise BudgetExceededError(needed, budget, {"table": 8 * len(keys), "rows": len(storage),
                                                   "post_ids": int(post_ids.size)})
    image = CoreImage(np.array(keys, dtype=np.uint32), np.array(addresses, dtype=np.uint32),
                      storage, post_ids, conn.n_local, budget=budget)
    return image, rng


def max_plastic_synapses(budget: int = DTCM_BYTES, reserve: int = DEFAULT_RESERVE,
                         n_pre: int = 200, n_control_words: int = 2,
                         n_lateral_rows: int = 20, lateral_fixed_per_row: int = 5) -> int:
    """Largest plastic synapse count that fits the data budget.

    Fixed cost: one table entry and one row header (+control words) per input row
    and the lateral rows.  Marginal cost: 8 bytes per block + 1 post-ID byte.
    """
    fixed = n_pre * (8 + row_size(0, 0, n_control_words))
    fixed += n_lateral_rows * (8 + row_size(0, lateral_fixed_per_row, n_control_words))
    return max(0, (budget - reserve - fixed) // 9)

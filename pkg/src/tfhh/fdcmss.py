"""Time-faded heavy hitter sketch: a count-min grid of 2-counter summaries.

The sketch is a ``depth x width`` grid of cells.  Each of the ``depth``
rows hashes every incoming item to one cell with an independent pairwise
hash; each cell runs a tiny Space-Saving summary with exactly two
counters.  Stream items are weighted by a forward-decay function
``g(tick - landmark)`` so that old items fade out: the grid stores raw
(non-normalized) weighted counts and every query divides by
``g(now - landmark)``, which makes the stored state independent of the
query time.

Two sketches built with the same shape and hash seed can be merged cell
by cell without touching the original streams, and all counters can be
scaled by a constant, which is what a pairwise averaging exchange needs
(merge, then halve).

Estimates never undershoot the true decayed count of an item, and the
row-minimum rule keeps the overshoot bounded by the colliding mass of a
single cell.

References
----------
Cormode, G. and Muthukrishnan, S. "An improved data stream summary: the
count-min sketch and its applications." J. Algorithms 55 (2005).
Metwally, A., Agrawal, D., El Abbadi, A. "Efficient computation of
frequent and top-k elements in data streams." ICDT 2005.
Cormode, G., Shkapenyuk, V., Srivastava, D., Xu, B. "Forward decay: a
practical time decay model for streaming systems." ICDE 2009.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels

HASH_PRIME = (1 << 61) - 1
_HASH_LABEL = int.from_bytes(b"tfhh-hash-params", "little")

_MAGIC = b"TFS1"
_HEADER = struct.Struct("<4sIIQ")
_CELL_DTYPE = np.dtype(
    {
        "names": ["item", "present", "fhat"],
        "formats": ["<u4", "u1", "<f8"],
        "offsets": [0, 4, 5],
        "itemsize": 13,
    }
)

MAX_ITEM = (1 << 32) - 1


# ---------------------------------------------------------------------------
# forward decay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecaySpec:
    """Forward-decay function: polynomial ``x**degree`` or ``exp(rate*x)``."""

    kind: str = "polynomial"
    degree: float = 2.0
    rate: float = 1.0
    landmark: int = 0

    def __post_init__(self):
        if self.kind not in ("polynomial", "exponential"):
            raise ValueError(f"unknown decay kind: {self.kind!r}")
        if self.kind == "polynomial" and self.degree <= 0:
            raise ValueError("polynomial decay needs degree > 0")
        if self.kind == "exponential" and self.rate <= 0:
            raise ValueError("exponential decay needs rate > 0")

    @classmethod
    def polynomial(cls, degree: float = 2.0, landmark: int = 0) -> "DecaySpec":
        return cls(kind="polynomial", degree=degree, landmark=landmark)

    @classmethod
    def exponential(cls, rate: float, landmark: int = 0) -> "DecaySpec":
        return cls(kind="exponential", rate=rate, landmark=landmark)

    def raw_weight(self, tick: int) -> float:
        """g(tick - landmark); the tick must lie beyond the landmark."""
        x = tick - self.landmark
        if x <= 0:
            raise ValueError(
                f"timestamp {tick} does not lie beyond landmark {self.landmark}"
            )
        if self.kind == "polynomial":
            return float(x) ** self.degree
        return math.exp(self.rate * x)

    def raw_weights(self, ticks: np.ndarray) -> np.ndarray:
        x = np.asarray(ticks, dtype=np.float64) - self.landmark
        if np.any(x <= 0):
            raise ValueError("all timestamps must lie beyond the landmark")
        if self.kind == "polynomial":
            return x**self.degree
        return np.exp(self.rate * x)


def weight(tick: int, decay: DecaySpec) -> float:
    """Raw decay weight of one timestamp (normalize by weight(now) at query)."""
    return decay.raw_weight(tick)


# ---------------------------------------------------------------------------
# 2-counter summary (one cell), exposed for direct use and testing
# ---------------------------------------------------------------------------


@dataclass
class SSummary:
    """A Space-Saving summary with two counters, backed by numpy views."""

    items: np.ndarray
    present: np.ndarray
    fhat: np.ndarray

    @classmethod
    def empty(cls) -> "SSummary":
        return cls(
            items=np.zeros(2, dtype=np.uint32),
            present=np.zeros(2, dtype=np.uint8),
            fhat=np.zeros(2, dtype=np.float64),
        )

    def counters(self) -> list[tuple[int, float]]:
        """Occupied counters as (item, frequency) pairs."""
        return [
            (int(self.items[c]), float(self.fhat[c]))
            for c in range(2)
            if self.present[c]
        ]

    def mass(self) -> float:
        return float(self.fhat.sum())


def _check_item(item: int) -> None:
    if not 0 <= item <= MAX_ITEM:
        raise ValueError(f"item {item} outside the 32-bit unsigned range")


def ss_update(summary: SSummary, item: int, x: float) -> None:
    """Apply one weighted occurrence to a 2-counter summary in place."""
    _check_item(item)
    if x < 0:
        raise ValueError("weights must be non-negative")
    kernels._cell_update(
        summary.items.reshape(1, 1, 2),
        summary.present.reshape(1, 1, 2),
        summary.fhat.reshape(1, 1, 2),
        0,
        0,
        np.uint32(item),
        float(x),
    )


# ---------------------------------------------------------------------------
# the sketch proper
# ---------------------------------------------------------------------------


def hash_params(hash_seed: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row multipliers/offsets for ((a*x + b) mod P) mod w, from one seed."""
    ss = np.random.SeedSequence([int(hash_seed), _HASH_LABEL])
    rng = np.random.Generator(np.random.PCG64(ss))
    ha = rng.integers(1, HASH_PRIME, size=depth, dtype=np.uint64)
    hb = rng.integers(0, HASH_PRIME, size=depth, dtype=np.uint64)
    return ha, hb


@dataclass
class Sketch:
    depth: int
    width: int
    hash_seed: int
    items: np.ndarray
    present: np.ndarray
    fhat: np.ndarray
    ha: np.ndarray = field(repr=False)
    hb: np.ndarray = field(repr=False)

    def cell(self, row: int, col: int) -> SSummary:
        """View of one cell as a 2-counter summary (shares storage)."""
        return SSummary(
            items=self.items[row, col],
            present=self.present[row, col],
            fhat=self.fhat[row, col],
        )

    def copy(self) -> "Sketch":
        return Sketch(
            depth=self.depth,
            width=self.width,
            hash_seed=self.hash_seed,
            items=self.items.copy(),
            present=self.present.copy(),
            fhat=self.fhat.copy(),
            ha=self.ha,
            hb=self.hb,
        )


def new_sketch(depth: int, width: int, hash_seed: int) -> Sketch:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if width < 1:
        raise ValueError("width must be at least 1")
    if not 0 <= hash_seed < (1 << 64):
        raise ValueError("hash seed must fit in 64 bits")
    ha, hb = hash_params(hash_seed, depth)
    return Sketch(
        depth=depth,
        width=width,
        hash_seed=hash_seed,
        items=np.zeros((depth, width, 2), dtype=np.uint32),
        present=np.zeros((depth, width, 2), dtype=np.uint8),
        fhat=np.zeros((depth, width, 2), dtype=np.float64),
        ha=ha,
        hb=hb,
    )


def row_index(sk: Sketch, row: int, item: int) -> int:
    """Column the item hashes to in the given row."""
    _check_item(item)
    return int(
        kernels.hash_item(
            sk.ha[row], sk.hb[row], np.uint64(sk.width), np.uint64(item)
        )
    )


def sketch_update(sk: Sketch, item: int, tick: int, decay: DecaySpec) -> None:
    """Record one stream occurrence (item at integer tick) in the sketch."""
    _check_item(item)
    x = decay.raw_weight(tick)
    kernels.update_many(
        sk.items,
        sk.present,
        sk.fhat,
        sk.ha,
        sk.hb,
        np.asarray([item], dtype=np.uint32),
        np.asarray([x], dtype=np.float64),
    )


def sketch_update_many(
    sk: Sketch, items: np.ndarray, ticks: np.ndarray, decay: DecaySpec
) -> None:
    """Record a whole (items, ticks) stream segment; the hot ingest path."""
    items = np.ascontiguousarray(items, dtype=np.uint32)
    weights = np.ascontiguousarray(decay.raw_weights(ticks))
    if items.shape != weights.shape:
        raise ValueError("items and ticks must have matching length")
    kernels.update_many(sk.items, sk.present, sk.fhat, sk.ha, sk.hb, items, weights)


def point_estimate(sk: Sketch, item: int, now: int, decay: DecaySpec) -> float:
    """Estimated decayed count of the item, normalized to query time."""
    _check_item(item)
    raw = kernels.point_estimate_raw(
        sk.items, sk.present, sk.fhat, sk.ha, sk.hb, np.uint32(item)
    )
    return float(raw) / decay.raw_weight(now)


def sketch_total(sk: Sketch, now: int, decay: DecaySpec) -> float:
    """Total decayed count of the whole stream seen by this sketch.

    Every row receives every update, so the sum over one row equals the
    1-norm of the decayed frequency vector; row 0 is used.
    """
    return float(sk.fhat[0].sum()) / decay.raw_weight(now)


def _check_compatible(a: Sketch, b: Sketch) -> None:
    if (a.depth, a.width, a.hash_seed) != (b.depth, b.width, b.hash_seed):
        raise ValueError(
            "sketches must share depth, width and hash seed to merge: "
            f"({a.depth},{a.width},{a.hash_seed}) vs ({b.depth},{b.width},{b.hash_seed})"
        )


def _merge_scaled(a: Sketch, b: Sketch, out_scale: float) -> Sketch:
    _check_compatible(a, b)
    out = new_sketch(a.depth, a.width, a.hash_seed)
    kernels.merge_cells(
        a.items,
        a.present,
        a.fhat,
        b.items,
        b.present,
        b.fhat,
        out.items,
        out.present,
        out.fhat,
        float(out_scale),
    )
    return out


def merge(a: Sketch, b: Sketch) -> Sketch:
    """Cell-wise merge; equivalent to having sketched both streams jointly."""
    return _merge_scaled(a, b, 1.0)


def scale(sk: Sketch, divisor: float) -> Sketch:
    """Divide every counter by a positive constant (new sketch)."""
    if divisor <= 0:
        raise ValueError("scale divisor must be positive")
    out = sk.copy()
    out.fhat /= divisor
    return out


def local_query(
    sk: Sketch, phi: float, eps_star: float, now: int, decay: DecaySpec
) -> dict[int, float]:
    """Candidate heavy hitters of this sketch's own stream.

    Returns item -> estimated normalized decayed frequency for every item
    whose point estimate clears the threshold
    ``phi * total * (1 - eps_star) / (1 + eps_star)``.
    """
    if not 0 < phi < 1:
        raise ValueError("phi must lie in (0, 1)")
    if not 0 <= eps_star < 1:
        raise ValueError("eps_star must lie in [0, 1)")
    norm = decay.raw_weight(now)
    raw_total = float(sk.fhat[0].sum())
    tau_raw = phi * raw_total * (1.0 - eps_star) / (1.0 + eps_star)
    out_items = np.empty(sk.depth * sk.width, dtype=np.uint32)
    out_est = np.empty(sk.depth * sk.width, dtype=np.float64)
    count = kernels.query_scan(
        sk.items, sk.present, sk.fhat, sk.ha, sk.hb, tau_raw, out_items, out_est
    )
    result: dict[int, float] = {}
    for idx in range(count):
        result[int(out_items[idx])] = float(out_est[idx]) / norm
    return result


# ---------------------------------------------------------------------------
# serialization (versioned, little-endian)
# ---------------------------------------------------------------------------


def serialize(sk: Sketch) -> bytes:
    """Header (magic, depth, width, hash seed) then row-major packed cells."""
    rec = np.empty(sk.depth * sk.width * 2, dtype=_CELL_DTYPE)
    rec["item"] = sk.items.ravel()
    rec["present"] = sk.present.ravel()
    rec["fhat"] = sk.fhat.ravel()
    header = _HEADER.pack(_MAGIC, sk.depth, sk.width, sk.hash_seed)
    return header + rec.tobytes()


def serialized_size(depth: int, width: int) -> int:
    return _HEADER.size + depth * width * 2 * _CELL_DTYPE.itemsize


def deserialize(buf: bytes) -> Sketch:
    if len(buf) < _HEADER.size:
        raise ValueError("buffer too short for a sketch header")
    magic, depth, width, hash_seed = _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}; not a serialized sketch")
    expected = serialized_size(depth, width)
    if len(buf) != expected:
        raise ValueError(f"expected {expected} bytes, got {len(buf)}")
    rec = np.frombuffer(buf, dtype=_CELL_DTYPE, offset=_HEADER.size)
    sk = new_sketch(depth, width, hash_seed)
    shape = (depth, width, 2)
    sk.items[:] = rec["item"].reshape(shape)
    sk.present[:] = rec["present"].reshape(shape)
    sk.fhat[:] = rec["fhat"].reshape(shape)
    return sk

"""Synthetic workload: Zipf streams, peer partitioning, exact oracle.

Streams are drawn i.i.d. from a Zipf distribution over ``universe``
ranks (P(rank i) proportional to i**-skew) through a precomputed
inverse-CDF table, so each draw costs one binary search.  Ranks are
mapped to item ids by a seed-derived permutation and timestamps are the
1-based stream positions.  The exact oracle brute-forces the decayed
frequency of every item for ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fdcmss import DecaySpec
from .rng import generator

_STREAM_DTYPE = np.dtype(
    {
        "names": ["item", "tick"],
        "formats": ["<u4", "<u8"],
        "offsets": [0, 4],
        "itemsize": 12,
    }
)


class Stream(NamedTuple):
    items: np.ndarray  # uint32
    ticks: np.ndarray  # int64, strictly positive

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class StreamSpec:
    length: int
    universe: int = 100_000
    skew: float = 1.2
    seed: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("stream length must be at least 1")
        if not 1 <= self.universe <= 1 << 32:
            raise ValueError("universe size must fit in a 32-bit item id")
        if self.skew <= 0:
            raise ValueError("skew must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def zipf_cdf(universe: int, skew: float) -> np.ndarray:
    """Cumulative rank probabilities, last entry pinned to exactly 1."""
    probs = np.arange(1, universe + 1, dtype=np.float64) ** (-skew)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return cdf


def gen_stream(spec: StreamSpec) -> Stream:
    """Draw the stream; items via inverse-CDF lookup, ticks 1..length."""
    cdf = zipf_cdf(spec.universe, spec.skew)
    perm = generator(spec.seed, "item-permutation").permutation(spec.universe)
    perm = perm.astype(np.uint32)
    u = generator(spec.seed, "zipf-draws").random(spec.length)
    ranks = np.searchsorted(cdf, u, side="right")
    items = perm[ranks]
    ticks = np.arange(1, spec.length + 1, dtype=np.int64)
    return Stream(items=items, ticks=ticks)


def partition(stream: Stream, num_peers: int) -> list[Stream]:
    """Round-robin split: the k-th element (0-based) goes to peer (k mod p) + 1.

    Entry i of the returned list is the sub-stream of peer i + 1.
    Timestamps keep their global values.
    """
    if num_peers < 1:
        raise ValueError("need at least one peer")
    return [
        Stream(items=stream.items[i::num_peers], ticks=stream.ticks[i::num_peers])
        for i in range(num_peers)
    ]


@dataclass(frozen=True)
class ExactAnswer:
    """Ground-truth decayed frequencies at a fixed query time."""

    frequencies: np.ndarray
    total: float
    phi: float
    heavy: frozenset[int]

    def frequency(self, item: int) -> float:
        if 0 <= item < len(self.frequencies):
            return float(self.frequencies[item])
        return 0.0

    def heavy_hitters(self, phi: float) -> frozenset[int]:
        if not 0 < phi < 1:
            raise ValueError("phi must lie in (0, 1)")
        mask = self.frequencies > phi * self.total
        return frozenset(int(v) for v in np.nonzero(mask)[0])


def exact_oracle(
    stream: Stream, decay: DecaySpec, now: int, phi: float
) -> ExactAnswer:
    """Brute-force decayed frequency of every item, normalized at `now`."""
    if not 0 < phi < 1:
        raise ValueError("phi must lie in (0, 1)")
    if len(stream) and now < int(stream.ticks.max()):
        raise ValueError("query time precedes the last stream tick")
    weights = decay.raw_weights(stream.ticks) / decay.raw_weight(now)
    freqs = np.bincount(stream.items, weights=weights)
    total = float(weights.sum())
    mask = freqs > phi * total
    heavy = frozenset(int(v) for v in np.nonzero(mask)[0])
    return ExactAnswer(frequencies=freqs, total=total, phi=phi, heavy=heavy)


def save_stream(path, stream: Stream) -> None:
    """Binary dump: one packed (uint32 item, uint64 tick) record per element."""
    rec = np.empty(len(stream), dtype=_STREAM_DTYPE)
    rec["item"] = stream.items
    rec["tick"] = stream.ticks.astype(np.uint64)
    with open(path, "wb") as fh:
        fh.write(rec.tobytes())


def load_stream(path) -> Stream:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) % _STREAM_DTYPE.itemsize:
        raise ValueError("stream file length is not a whole number of records")
    rec = np.frombuffer(buf, dtype=_STREAM_DTYPE)
    return Stream(
        items=rec["item"].copy(), ticks=rec["tick"].astype(np.int64)
    )

"""Averaging gossip over sketches plus a scalar peer-count estimator.

Each peer holds a sketch of its own sub-stream and a scalar q; exactly
one peer starts with q = 1, everyone else with 0.  A push-pull exchange
replaces both sketches with the cell-wise merge halved, and both q
values with their mean, so the sum of every counter and the sum of q are
invariant while the values converge to the global average.  At query
time 1/q estimates the number of participating peers and rescales the
local averaged estimates back to global counts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from . import fdcmss
from .fdcmss import DecaySpec, Sketch
from .planner import GAMMA, gossip_error_factor
from .workload import Stream

# largest representable value strictly below 1, used to keep a query
# executable when too few rounds have run (tau collapses towards 0)
_EPS_STAR_CAP = float(np.nextafter(1.0, 0.0))


class NotConvergedError(RuntimeError):
    """Raised when a peer is queried before any q mass reached it."""


@dataclass(frozen=True)
class GossipParams:
    p_star: float
    delta_g: float
    fan_out: int = 1
    rounds: int = 24
    phi: float = 0.02
    gamma: float = GAMMA

    def __post_init__(self):
        if self.p_star < 1:
            raise ValueError("p_star must be at least 1")
        if not 0 < self.delta_g < 1:
            raise ValueError("delta_g must lie in (0, 1)")
        if self.fan_out < 1:
            raise ValueError("fan_out must be at least 1")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if not 0 < self.phi < 1:
            raise ValueError("phi must lie in (0, 1)")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")


@dataclass
class PeerState:
    peer_id: int  # 1-based; peer 1 seeds the q mass
    sketch: Sketch
    q: float
    round: int = 0
    alive: bool = True
    online: bool = True


def init_peer(
    peer_id: int,
    local_stream: Stream,
    depth: int,
    width: int,
    hash_seed: int,
    decay: DecaySpec,
) -> PeerState:
    """Sketch the peer's sub-stream; peer 1 carries the unit of q mass."""
    if peer_id < 1:
        raise ValueError("peer ids are 1-based")
    sk = fdcmss.new_sketch(depth, width, hash_seed)
    if len(local_stream):
        fdcmss.sketch_update_many(sk, local_stream.items, local_stream.ticks, decay)
    return PeerState(peer_id=peer_id, sketch=sk, q=1.0 if peer_id == 1 else 0.0)


def pair_update(a: PeerState, b: PeerState) -> tuple[PeerState, PeerState]:
    """Atomic push-pull exchange: both peers adopt the averaged state."""
    merged = fdcmss._merge_scaled(a.sketch, b.sketch, 0.5)
    qm = (a.q + b.q) / 2.0
    return (
        replace(a, sketch=merged, q=qm),
        replace(b, sketch=merged, q=qm),
    )


def epsilon_star(params: GossipParams, rounds: int) -> float:
    """Residual gossip error factor after the given number of rounds."""
    return gossip_error_factor(params.p_star, params.delta_g, rounds, params.gamma)


def is_pre_convergence(params: GossipParams, rounds: int) -> bool:
    """True when so few rounds ran that the error factor is not below 1."""
    return epsilon_star(params, rounds) >= 1.0


def estimate_p(state: PeerState) -> float:
    """Estimated number of participating peers, 1/q."""
    if state.q <= 0.0:
        raise NotConvergedError(
            f"peer {state.peer_id} holds no q mass; it never joined an exchange"
        )
    return 1.0 / state.q


def query(
    state: PeerState, params: GossipParams, now: int, decay: DecaySpec
) -> dict[int, float]:
    """Global heavy hitters as seen from one peer.

    Local averaged estimates above the threshold are scaled by the
    peer-count estimate 1/q back to global decayed frequencies.  The
    error factor is capped just below 1 so that a pre-convergence query
    still executes (the threshold then collapses towards 0; see
    ``is_pre_convergence``).
    """
    p_tilde = estimate_p(state)
    es = min(epsilon_star(params, state.round), _EPS_STAR_CAP)
    local = fdcmss.local_query(state.sketch, params.phi, es, now, decay)
    return {item: f * p_tilde for item, f in local.items()}


# ---------------------------------------------------------------------------
# full-network averaging oracle (reference dynamics for tests/validation)
# ---------------------------------------------------------------------------


def draw_pairs(num_peers: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Permutation of all peers plus one uniform partner (not self) each."""
    perm = rng.permutation(num_peers)
    raw = rng.integers(0, num_peers - 1, size=num_peers)
    partners = raw + (raw >= perm)
    return perm, partners


def avg_merge_round(
    states: list[PeerState], rng: np.random.Generator
) -> list[PeerState]:
    """One oracle round: every peer, in random order, averages with a
    uniform random other peer (no topology restriction)."""
    out = list(states)
    perm, partners = draw_pairs(len(out), rng)
    for idx in range(len(out)):
        i = int(perm[idx])
        j = int(partners[idx])
        out[i], out[j] = pair_update(out[i], out[j])
    for i, s in enumerate(out):
        out[i] = replace(s, round=s.round + 1)
    return out


def scalar_avg_round(values: np.ndarray, rng: np.random.Generator) -> None:
    """Same pair-selection dynamics applied to one scalar per peer, in place."""
    from . import kernels

    perm, partners = draw_pairs(len(values), rng)
    kernels.scalar_avg_round(values, perm, partners)


# ---------------------------------------------------------------------------
# wire format of a gossip message
# ---------------------------------------------------------------------------


def encode_state(state: PeerState) -> bytes:
    """Message payload of an exchange: serialized sketch plus q."""
    return fdcmss.serialize(state.sketch) + struct.pack("<d", state.q)


def decode_state(buf: bytes) -> tuple[Sketch, float]:
    if len(buf) < 8:
        raise ValueError("buffer too short for a gossip message")
    sk = fdcmss.deserialize(buf[:-8])
    (q,) = struct.unpack("<d", buf[-8:])
    return sk, q


def message_size_bytes(depth: int, width: int) -> int:
    """Bytes on the wire for one direction of an exchange."""
    return fdcmss.serialized_size(depth, width) + 8

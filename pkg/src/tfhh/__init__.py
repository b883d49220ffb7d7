"""Gossip-based mining of time-faded heavy hitters on unstructured overlays.

Peers sketch their own stream into a grid of tiny Space-Saving
summaries under forward decay, then converge to the global answer by
randomized pairwise averaging; any single peer can then be queried for
the network-wide heavy hitters.
"""

from .fdcmss import (
    DecaySpec,
    Sketch,
    SSummary,
    deserialize,
    local_query,
    merge,
    new_sketch,
    point_estimate,
    scale,
    serialize,
    sketch_total,
    sketch_update,
    sketch_update_many,
    ss_update,
    weight,
)
from .gossip import (
    GossipParams,
    NotConvergedError,
    PeerState,
    epsilon_star,
    estimate_p,
    init_peer,
    pair_update,
    query,
)
from .planner import GAMMA, Plan, make_plan
from .workload import Stream, StreamSpec, exact_oracle, gen_stream, partition

__version__ = "0.1.0"

__all__ = [
    "DecaySpec",
    "Sketch",
    "SSummary",
    "Stream",
    "StreamSpec",
    "GossipParams",
    "PeerState",
    "NotConvergedError",
    "Plan",
    "GAMMA",
    "new_sketch",
    "sketch_update",
    "sketch_update_many",
    "ss_update",
    "point_estimate",
    "sketch_total",
    "merge",
    "scale",
    "local_query",
    "serialize",
    "deserialize",
    "weight",
    "init_peer",
    "pair_update",
    "epsilon_star",
    "estimate_p",
    "query",
    "make_plan",
    "gen_stream",
    "partition",
    "exact_oracle",
]

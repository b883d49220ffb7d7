"""Synchronous-round simulator for gossip over unstructured overlays.

Topologies are undirected connected graphs (random G(n,p) or
preferential attachment) with 1-based peer ids.  Each round first
applies churn transitions, then walks the live-and-online peers in a
random permutation; every peer picks fan-out random live-and-online
neighbours and performs sequential atomic push-pull exchanges with
them.  Two churn models are provided: fail-stop (independent permanent
failure each round) and an on/off availability model with per-peer
heavy-tailed session and offline durations (offline peers keep their
state and rejoin).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gossip import GossipParams, PeerState, message_size_bytes, pair_update
from .rng import generator


class InvalidRunError(RuntimeError):
    """The peer seeding the q mass failed before its first exchange."""


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph; ``neighbors[i]`` lists peer i+1's
    neighbour ids (1-based) in ascending order."""

    num_peers: int
    neighbors: list
    num_edges: int
    kind: str = "custom"

    def degree(self, peer_id: int) -> int:
        return len(self.neighbors[peer_id - 1])


def _finish(adj: list[list[int]], kind: str) -> Topology:
    p = len(adj)
    arrays = [np.asarray(sorted(a), dtype=np.int64) for a in adj]
    edges = sum(len(a) for a in arrays) // 2
    return Topology(num_peers=p, neighbors=arrays, num_edges=edges, kind=kind)


def is_connected(topo: Topology) -> bool:
    p = topo.num_peers
    if p <= 1:
        return True
    seen = np.zeros(p + 1, dtype=bool)
    stack = [1]
    seen[1] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in topo.neighbors[u - 1]:
            v = int(v)
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == p


def default_edge_prob(num_peers: int) -> float:
    """2 ln(p) / p, comfortably above the G(n,p) connectivity threshold."""
    if num_peers <= 1:
        return 0.0
    return min(1.0, 2.0 * np.log(num_peers) / num_peers)


def _er_attempt(num_peers: int, edge_prob: float, rng: np.random.Generator) -> Topology:
    adj: list[list[int]] = [[] for _ in range(num_peers)]
    for i in range(num_peers - 1):
        draws = rng.random(num_peers - 1 - i)
        for off in np.nonzero(draws < edge_prob)[0]:
            j = i + 1 + int(off)
            adj[i].append(j + 1)
            adj[j].append(i + 1)
    return _finish(adj, "er")


def gen_erdos_renyi(
    num_peers: int, edge_prob: float | None = None, seed: int = 0
) -> Topology:
    """Connected G(n, p); unconnected draws are retried on sub-seeds (max 100)."""
    if num_peers < 1:
        raise ValueError("need at least one peer")
    if edge_prob is None:
        edge_prob = default_edge_prob(num_peers)
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    for attempt in range(100):
        topo = _er_attempt(num_peers, edge_prob, generator(seed, "er", attempt))
        if is_connected(topo):
            return topo
    raise ValueError(
        f"no connected graph on {num_peers} peers with edge probability "
        f"{edge_prob} after 100 attempts"
    )


def gen_barabasi_albert(num_peers: int, m_attach: int = 3, seed: int = 0) -> Topology:
    """Preferential attachment: a cycle core of ``m_attach`` nodes, then
    each new node attaches to ``m_attach`` distinct existing nodes with
    probability proportional to degree."""
    if m_attach < 1:
        raise ValueError("m_attach must be at least 1")
    if num_peers < m_attach:
        raise ValueError("need at least m_attach peers")
    rng = generator(seed, "ba")
    adj: list[list[int]] = [[] for _ in range(num_peers)]
    targets: list[int] = []  # one entry per edge endpoint

    def add_edge(u: int, v: int) -> None:
        adj[u - 1].append(v)
        adj[v - 1].append(u)
        targets.append(u)
        targets.append(v)

    if m_attach == 2:
        add_edge(1, 2)
    elif m_attach >= 3:
        for u in range(1, m_attach + 1):
            add_edge(u, u % m_attach + 1)

    for new in range(m_attach + 1, num_peers + 1):
        chosen: set[int] = set()
        if not targets:  # m_attach == 1: the core is a single isolated node
            chosen.add(1)
        while len(chosen) < m_attach:
            cand = targets[int(rng.integers(0, len(targets)))]
            chosen.add(cand)
        for t in sorted(chosen):
            add_edge(new, t)
    return _finish(adj, "ba")


def gen_complete(num_peers: int) -> Topology:
    if num_peers < 1:
        raise ValueError("need at least one peer")
    everyone = np.arange(1, num_peers + 1, dtype=np.int64)
    adj = [np.delete(everyone, i) for i in range(num_peers)]
    edges = num_peers * (num_peers - 1) // 2
    return Topology(num_peers=num_peers, neighbors=adj, num_edges=edges, kind="complete")


def save_edge_list(topo: Topology, path) -> None:
    """Plain text dump, one ``u v`` line per edge with u < v."""
    with open(path, "w") as fh:
        for u in range(1, topo.num_peers + 1):
            for v in topo.neighbors[u - 1]:
                if u < v:
                    fh.write(f"{u} {int(v)}\n")


def load_edge_list(path, num_peers: int | None = None) -> Topology:
    edges = []
    top = 0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = (int(tok) for tok in line.split())
            edges.append((u, v))
            top = max(top, u, v)
    p = num_peers if num_peers is not None else top
    adj: list[list[int]] = [[] for _ in range(p)]
    for u, v in edges:
        adj[u - 1].append(v)
        adj[v - 1].append(u)
    return _finish(adj, "custom")


# ---------------------------------------------------------------------------
# Pareto type II (Lomax) sampling, used by the availability churn model
# ---------------------------------------------------------------------------


def sample_pareto2(mu, beta, alpha, u):
    """Inverse-CDF draw: mu + beta * ((1-u)**(-1/alpha) - 1)."""
    beta = np.asarray(beta, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if np.any(beta <= 0) or np.any(alpha <= 0):
        raise ValueError("beta and alpha must be positive")
    if np.any(u < 0) or np.any(u >= 1):
        raise ValueError("u must lie in [0, 1)")
    out = mu + beta * ((1.0 - u) ** (-1.0 / alpha) - 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def pareto2_cdf(mu, beta, alpha, x):
    """F(x) = 1 - (1 + (x - mu)/beta)**(-alpha) for x >= mu, else 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x < mu, 0.0, 1.0 - (1.0 + (x - mu) / beta) ** (-np.asarray(alpha)))
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# churn models
# ---------------------------------------------------------------------------


@dataclass
class NoChurn:
    kind: str = "none"

    def step(self, states: list[PeerState], rng: np.random.Generator) -> None:
        pass


def fail_stop_step(
    states: list[PeerState], fail_prob: float, rng: np.random.Generator
) -> None:
    """Each live peer independently fails (permanently) this round."""
    if not 0.0 <= fail_prob <= 1.0:
        raise ValueError("fail probability must lie in [0, 1]")
    draws = rng.random(len(states))
    for i, s in enumerate(states):
        if s.alive and draws[i] < fail_prob:
            s.alive = False


@dataclass
class FailStopChurn:
    fail_prob: float
    kind: str = "fail_stop"

    def step(self, states: list[PeerState], rng: np.random.Generator) -> None:
        fail_stop_step(states, self.fail_prob, rng)


@dataclass
class YaoChurn:
    """On/off availability: per-peer mean lifetime l_i and offline time d_i
    drawn once, then alternating session/offline durations drawn from
    per-peer heavy-tailed distributions, ceiled to whole rounds >= 1."""

    mean_life: np.ndarray
    mean_off: np.ndarray
    lifetime_kind: str = "pareto"  # or "exponential"
    next_transition: np.ndarray = field(default=None, repr=False)
    rounds_elapsed: int = 0
    kind: str = "yao"

    def _durations(self, idx: np.ndarray, online_next: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
        u = rng.random(len(idx))
        dur = np.empty(len(idx), dtype=np.float64)
        on = online_next
        if np.any(on):
            li = self.mean_life[idx[on]]
            if self.lifetime_kind == "exponential":
                dur[on] = -li * np.log1p(-u[on])
            else:
                dur[on] = sample_pareto2(0.0, 2.0, 2.0 * li, u[on])
        if np.any(~on):
            di = self.mean_off[idx[~on]]
            dur[~on] = sample_pareto2(0.0, 3.0, 2.0 * di, u[~on])
        return np.maximum(np.int64(1), np.ceil(dur).astype(np.int64))

    def step(self, states: list[PeerState], rng: np.random.Generator) -> None:
        r = self.rounds_elapsed
        due = np.nonzero(self.next_transition <= r)[0]
        if len(due):
            flipping_to_online = np.array(
                [not states[i].online for i in due], dtype=bool
            )
            durs = self._durations(due, flipping_to_online, rng)
            for pos, i in enumerate(due):
                states[i].online = bool(flipping_to_online[pos])
                self.next_transition[i] = r + int(durs[pos])
        self.rounds_elapsed = r + 1


def yao_init(
    num_peers: int, rng: np.random.Generator, lifetime_kind: str = "pareto"
) -> YaoChurn:
    """Draw per-peer mean lifetime/offline parameters and first sessions.

    l_i ~ ParetoII(mu=1.01, beta=1, alpha=3), d_i ~ ParetoII(mu=1.01,
    beta=2, alpha=3).  All peers start online with a full session drawn
    from their lifetime distribution.
    """
    if lifetime_kind not in ("pareto", "exponential"):
        raise ValueError(f"unknown lifetime kind {lifetime_kind!r}")
    mean_life = sample_pareto2(1.01, 1.0, 3.0, rng.random(num_peers))
    mean_off = sample_pareto2(1.01, 2.0, 3.0, rng.random(num_peers))
    churn = YaoChurn(
        mean_life=np.asarray(mean_life, dtype=np.float64),
        mean_off=np.asarray(mean_off, dtype=np.float64),
        lifetime_kind=lifetime_kind,
    )
    first = churn._durations(
        np.arange(num_peers), np.ones(num_peers, dtype=bool), rng
    )
    churn.next_transition = first.astype(np.int64)
    return churn


def make_churn(kind: str, num_peers: int, *, fail_prob: float = 0.0,
               lifetime_kind: str = "pareto", rng: np.random.Generator = None):
    if kind == "none":
        return NoChurn()
    if kind == "fail_stop":
        return FailStopChurn(fail_prob=fail_prob)
    if kind == "yao":
        if rng is None:
            rng = generator(0, "yao-init")
        return yao_init(num_peers, rng, lifetime_kind)
    raise ValueError(f"unknown churn kind {kind!r}")


# ---------------------------------------------------------------------------
# round driver
# ---------------------------------------------------------------------------


@dataclass
class RoundReport:
    interactions: int = 0
    bytes_sent: int = 0


@dataclass(frozen=True)
class ConvergenceStats:
    round: int
    sigma2: float
    ratio: float | None = None


def q_variance(states: list[PeerState], center: float) -> float:
    """Variance of the q values about a fixed center, 1/(p-1) normalization."""
    q = np.array([s.q for s in states])
    return float(np.sum((q - center) ** 2) / (len(q) - 1))


def run_round(
    topo: Topology,
    states: list[PeerState],
    params: GossipParams,
    churn,
    rng: np.random.Generator,
    report: RoundReport | None = None,
) -> list[PeerState]:
    """Advance the network one synchronous round; returns the new states."""
    if topo.num_peers != len(states):
        raise ValueError("topology size does not match the number of peers")
    states = list(states)
    if churn is not None:
        churn.step(states, rng)
    first = states[0]
    if not first.alive and first.q == 1.0:
        raise InvalidRunError(
            "the q-seeding peer failed before completing any exchange"
        )
    active = np.array([s.alive and s.online for s in states], dtype=bool)
    active_idx = np.nonzero(active)[0]
    interactions = 0
    for i0 in rng.permutation(active_idx):
        nbrs = topo.neighbors[i0]  # 1-based ids
        avail = nbrs[active[nbrs - 1]]
        if avail.size == 0:
            continue
        k = min(params.fan_out, avail.size)
        picked = rng.choice(avail, size=k, replace=False)
        for j1 in picked:
            j0 = int(j1) - 1
            a, b = pair_update(states[i0], states[j0])
            states[i0] = a
            states[j0] = b
            interactions += 1
    for idx, s in enumerate(states):
        if s.alive:
            states[idx] = replace(s, round=s.round + 1)
    if report is not None:
        sk = states[0].sketch
        report.interactions += interactions
        report.bytes_sent += interactions * 2 * message_size_bytes(sk.depth, sk.width)
    return states

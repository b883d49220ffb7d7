"""Closed-form sizing of sketch width/depth and gossip round count.

The estimation error after gossiping splits into a network part (how far
pairwise averaging has converged) and a sketch part (collisions in cells
of width w).  The network part is controlled by the factor

    eps_star(r) = p_star * sqrt(gamma**r / delta_g)

where gamma = 1 / (2 * sqrt(e)) is the expected per-round variance
reduction of permutation-based pairwise averaging.  Given a target
false-positive tolerance ``eps`` around the threshold ``phi``, either
rounds are fixed first and the width follows (time dominant), or the
minimal width ``floor(e / (2 eps)) + 1`` is fixed and the rounds follow
(space dominant).  All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

E = math.e
GAMMA = 0.5 / math.sqrt(math.e)


def gamma() -> float:
    """Expected variance-reduction factor per averaging round, 1/(2*sqrt(e))."""
    return GAMMA


def _check_phi_eps(phi: float, eps: float) -> None:
    if not 0 < phi < 1:
        raise ValueError("phi must lie in (0, 1)")
    if not 0 < eps < phi:
        raise ValueError("tolerance eps must satisfy 0 < eps < phi")


def _check_delta_g(delta_g: float) -> None:
    if not 0 < delta_g < 1:
        raise ValueError("delta_g must lie in (0, 1)")


def _check_p_star(p_star: float) -> None:
    if p_star < 1:
        raise ValueError("p_star must be at least 1")


def gossip_error_factor(
    p_star: float, delta_g: float, rounds: int, gamma: float = GAMMA
) -> float:
    """eps_star = p_star * sqrt(gamma**rounds / delta_g)."""
    _check_p_star(p_star)
    _check_delta_g(delta_g)
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return p_star * math.sqrt(gamma**rounds / delta_g)


def width_for_rounds(
    phi: float, eps: float, rounds: int, p_star: float, delta_g: float
) -> int:
    """Smallest width meeting tolerance eps when `rounds` rounds are run."""
    _check_phi_eps(phi, eps)
    es = gossip_error_factor(p_star, delta_g, rounds)
    if es >= 1.0:
        raise ValueError(
            f"{rounds} rounds leave the gossip error factor at {es:.3g} >= 1; "
            "increase rounds"
        )
    den = 2.0 * eps * (1.0 + es) ** 2 - 8.0 * phi * es
    if den <= 0.0:
        raise ValueError(
            f"{rounds} rounds are insufficient for phi={phi}, eps={eps}; "
            "no finite width exists"
        )
    return math.ceil(E * (1.0 - es * es) / den)


def min_rounds(phi: float, eps: float, delta_g: float, p_star: float) -> int:
    """Fewest rounds after which a finite width meets tolerance eps."""
    _check_phi_eps(phi, eps)
    _check_delta_g(delta_g)
    _check_p_star(p_star)
    root = 2.0 * phi - eps - 2.0 * math.sqrt(phi * phi - eps * phi)
    bound = (math.log(delta_g) + 2.0 * math.log(root / (eps * p_star))) / math.log(
        GAMMA
    )
    return math.floor(bound) + 1


def min_width(eps: float) -> int:
    """Smallest width achieving tolerance eps in the fully-converged limit."""
    if not 0 < eps < 1:
        raise ValueError("tolerance eps must lie in (0, 1)")
    return math.floor(E / (2.0 * eps)) + 1


def _eps_star_for_min_width(phi: float, eps: float) -> float:
    w = min_width(eps)
    num = 2.0 * w * (2.0 * phi - eps) - math.sqrt(
        16.0 * phi * w * w * (phi - eps) + E * E
    )
    return num / (E + 2.0 * eps * w)


def rounds_for_min_width(
    phi: float, eps: float, delta_g: float, p_star: float
) -> int:
    """Rounds needed so that the minimal width still meets tolerance eps."""
    _check_phi_eps(phi, eps)
    _check_delta_g(delta_g)
    _check_p_star(p_star)
    es = _eps_star_for_min_width(phi, eps)
    if not 0 < es < 1:
        raise ValueError(
            f"no achievable gossip error factor for phi={phi}, eps={eps}"
        )
    bound = (
        2.0 * math.log(es) - 2.0 * math.log(p_star) + math.log(delta_g)
    ) / math.log(GAMMA)
    return math.floor(bound) + 1


def min_depth(delta: float, delta_g: float) -> int:
    """Rows needed for overall failure probability delta, given delta_g."""
    _check_delta_g(delta_g)
    if not delta_g < delta < 1:
        raise ValueError("delta must lie in (delta_g, 1)")
    return max(1, math.ceil(math.log((1.0 - delta_g) / (delta - delta_g))))


def predicted_tolerance(width: int, eps_star: float, phi: float) -> float:
    """Tolerance actually achieved by a width at a given gossip error factor."""
    if width < 1:
        raise ValueError("width must be at least 1")
    if not 0 <= eps_star < 1:
        raise ValueError("eps_star must lie in [0, 1)")
    if not 0 < phi < 1:
        raise ValueError("phi must lie in (0, 1)")
    return (
        4.0 * eps_star * phi / (1.0 + eps_star) ** 2
        + (E / (2.0 * width)) * (1.0 - eps_star) / (1.0 + eps_star)
    )


def _false_negative_dominant(width: int, eps_star: float, phi: float) -> bool:
    return width > (E / (2.0 * phi)) * (1.0 + eps_star) / (1.0 - eps_star)


@dataclass(frozen=True)
class Plan:
    strategy: str
    depth: int
    width: int
    rounds: int
    eps_star: float
    predicted_tolerance: float

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "depth": self.depth,
            "width": self.width,
            "rounds": self.rounds,
            "eps_star": self.eps_star,
            "predicted_tolerance": self.predicted_tolerance,
        }


def make_plan(
    phi: float,
    eps: float,
    delta: float,
    delta_g: float,
    p_star: float,
    strategy: str = "time_dominant",
) -> Plan:
    """Pick (depth, width, rounds) for a target threshold and tolerance.

    ``time_dominant`` runs as few rounds as possible and pays in width;
    ``space_dominant`` uses the minimal width and pays in rounds.
    """
    if strategy == "time_dominant":
        rounds = min_rounds(phi, eps, delta_g, p_star)
        width = width_for_rounds(phi, eps, rounds, p_star, delta_g)
    elif strategy == "space_dominant":
        width = min_width(eps)
        rounds = rounds_for_min_width(phi, eps, delta_g, p_star)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    depth = min_depth(delta, delta_g)
    es = gossip_error_factor(p_star, delta_g, rounds)
    predicted = predicted_tolerance(width, es, phi)
    if not _false_negative_dominant(width, es, phi):
        raise ValueError(
            "degenerate plan: width too small for false negatives to dominate"
        )
    return Plan(
        strategy=strategy,
        depth=depth,
        width=width,
        rounds=rounds,
        eps_star=es,
        predicted_tolerance=predicted,
    )

"""Straight-line reference implementations used as independent oracles.

The sketch here is a plain Python structure of per-cell slot lists with
big-int modular hashing, written directly from the update/merge/query
rules with no shared code beyond the hash parameter derivation.  It is
deliberately slow and obvious.
"""

from __future__ import annotations

import math

from tfhh.fdcmss import HASH_PRIME, hash_params


class RefSketch:
    def __init__(self, depth: int, width: int, hash_seed: int):
        ha, hb = hash_params(hash_seed, depth)
        self.a = [int(v) for v in ha]
        self.b = [int(v) for v in hb]
        self.depth = depth
        self.width = width
        # cell = [slot0, slot1], slot = None or [item, freq]
        self.cells = [
            [[None, None] for _ in range(width)] for _ in range(depth)
        ]

    def col(self, row: int, item: int) -> int:
        return ((self.a[row] * item + self.b[row]) % HASH_PRIME) % self.width

    def update(self, item: int, x: float) -> None:
        for j in range(self.depth):
            cell = self.cells[j][self.col(j, item)]
            for slot in cell:
                if slot is not None and slot[0] == item:
                    slot[1] += x
                    break
            else:
                if x == 0.0:
                    continue
                if cell[0] is None:
                    cell[0] = [item, x]
                elif cell[1] is None:
                    cell[1] = [item, x]
                else:
                    c = 0 if cell[0][1] <= cell[1][1] else 1
                    cell[c][1] += x
                    cell[c][0] = item

    def raw_total(self) -> float:
        return sum(
            slot[1]
            for cell in self.cells[0]
            for slot in cell
            if slot is not None
        )

    def raw_point_estimate(self, item: int) -> float:
        vals = []
        for j in range(self.depth):
            cell = self.cells[j][self.col(j, item)]
            monitored = None
            for slot in cell:
                if slot is not None and slot[0] == item:
                    monitored = slot[1]
            if monitored is not None:
                vals.append(monitored)
            else:
                vals.append(
                    min(slot[1] if slot is not None else 0.0 for slot in cell)
                )
        return min(vals)

    def query(self, phi: float, eps_star: float, g_now: float) -> dict[int, float]:
        total = self.raw_total() / g_now
        tau = phi * total * (1.0 - eps_star) / (1.0 + eps_star)
        out: dict[int, float] = {}
        for j in range(self.depth):
            for cell in self.cells[j]:
                occupied = [slot for slot in cell if slot is not None]
                if not occupied:
                    continue
                cm = occupied[0]
                if len(occupied) == 2 and occupied[1][1] > occupied[0][1]:
                    cm = occupied[1]
                if cm[1] / g_now > tau:
                    est = self.raw_point_estimate(cm[0]) / g_now
                    if est > tau:
                        out[cm[0]] = est
        return out


def ref_merge_cell(cell_a: list, cell_b: list) -> list:
    """Merge two 2-slot cells per the published rule (pure reference)."""

    def freq(slot):
        return slot[1] if slot is not None else 0.0

    min_a = min(freq(cell_a[0]), freq(cell_a[1]))
    min_b = min(freq(cell_b[0]), freq(cell_b[1]))
    cands: dict[int, float] = {}
    b_items = {slot[0]: slot[1] for slot in cell_b if slot is not None}
    for slot in cell_a:
        if slot is None:
            continue
        item, f = slot
        if item in b_items:
            cands[item] = f + b_items.pop(item)
        else:
            cands[item] = f + min_b
    for item, f in b_items.items():
        cands[item] = f + min_a
    ranked = sorted(cands.items(), key=lambda kv: (-kv[1], kv[0]))[:2]
    out = [None, None]
    for i, (item, f) in enumerate(ranked):
        out[i] = [item, f]
    return out


def ceiled_pareto2_mean(mu: float, beta: float, alpha: float) -> float:
    """E[max(1, ceil(X))] for X ~ ParetoII(mu, beta, alpha), via tail sums."""
    # E[max(1, ceil X)] = 1 + sum_{k>=1} P(X > k); survival (1 + (k-mu)/beta)^-alpha
    total = 1.0
    k = 1
    while True:
        s = (1.0 + (k - mu) / beta) ** (-alpha)
        total += s
        if s < 1e-13 and k > 10:
            break
        k += 1
        if k > 10_000_000:
            break
    return total


def ceiled_exponential_mean(mean: float) -> float:
    """E[max(1, ceil(X))] for X ~ Exponential(mean)."""
    r = math.exp(-1.0 / mean)
    return 1.0 + r / (1.0 - r)

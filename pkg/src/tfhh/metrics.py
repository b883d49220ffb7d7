"""Scoring of reported heavy hitters and cross-peer aggregation.

Recall and precision follow the usual set conventions (both defined as
1 when their denominator is empty).  The average relative error runs
over the reported items only; reporting an item the oracle never saw is
a hard error, since it means the sketch produced mass out of thin air.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .workload import ExactAnswer

CSV_COLUMNS = [
    "config_hash",
    "rep",
    "peer",
    "recall",
    "precision",
    "are",
    "reported",
    "rounds",
    "churn_kind",
    "topology",
]

SUMMARY_COLUMNS = ["config_hash", "metric", "mean", "ci95_half", "peers"]


class OracleMismatchError(RuntimeError):
    """A reported item has true decayed frequency zero."""


@dataclass(frozen=True)
class MetricsRecord:
    config_hash: str
    rep: int
    peer: int
    recall: float
    precision: float
    are: float
    reported: int
    rounds: int
    churn_kind: str
    topology: str

    def row(self) -> list:
        return [getattr(self, col) for col in CSV_COLUMNS]


def score(
    reported: dict[int, float], exact: ExactAnswer, phi: float
) -> tuple[float, float, float]:
    """(recall, precision, average relative error) of one peer's answer."""
    truth = exact.heavy_hitters(phi)
    hits = sum(1 for item in reported if item in truth)
    recall = hits / len(truth) if truth else 1.0
    precision = hits / len(reported) if reported else 1.0
    if reported:
        errs = []
        for item, est in reported.items():
            f = exact.frequency(item)
            if f <= 0.0:
                raise OracleMismatchError(
                    f"item {item} was reported but never occurred"
                )
            errs.append(abs(est - f) / f)
        are = float(np.mean(errs))
    else:
        are = 0.0
    return recall, precision, are


@dataclass(frozen=True)
class AggregateStat:
    metric: str
    mean: float
    ci95_half: float
    peers: int


def aggregate(records: list[MetricsRecord]) -> dict[str, AggregateStat]:
    """Per-peer means over repetitions, then mean with a 95% CI across peers."""
    if not records:
        raise ValueError("no records to aggregate (did every peer fail?)")
    by_peer: dict[int, list[MetricsRecord]] = {}
    for r in records:
        by_peer.setdefault(r.peer, []).append(r)
    out: dict[str, AggregateStat] = {}
    for metric in ("recall", "precision", "are", "reported"):
        peer_means = [
            float(np.mean([getattr(r, metric) for r in recs]))
            for _, recs in sorted(by_peer.items())
        ]
        k = len(peer_means)
        mean = float(np.mean(peer_means))
        if k >= 2:
            s = float(np.std(peer_means, ddof=1))
            half = 1.96 * s / math.sqrt(k)
        else:
            half = 0.0
        out[metric] = AggregateStat(metric=metric, mean=mean, ci95_half=half, peers=k)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(records: list[MetricsRecord], path) -> None:
    """Rows sorted by (rep, peer); floats at full precision for determinism."""
    rows = sorted(records, key=lambda r: (r.rep, r.peer))
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(v) for v in r.row()])


def write_summary_csv(
    aggregates: dict[str, AggregateStat], config_hash: str, path
) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for metric in ("recall", "precision", "are", "reported"):
            a = aggregates[metric]
            writer.writerow(
                [config_hash, a.metric, _fmt(a.mean), _fmt(a.ci95_half), a.peers]
            )


def decay_ratios(sigma2: list[float]) -> list[float]:
    """Round-to-round variance ratios of a convergence curve."""
    return [
        sigma2[i + 1] / sigma2[i] if sigma2[i] > 0 else float("nan")
        for i in range(len(sigma2) - 1)
    ]

"""Command-line front end: run experiments, size sketches, dump inputs.

Subcommands:

``run``   drive repeated gossip simulations from a JSON config (with
          profile presets, dotted-path overrides and one-dimensional
          sweeps) and write per-peer metrics plus an aggregate summary
          as CSV.
``plan``  evaluate the closed-form sizing rules and print the chosen
          (depth, width, rounds) record as JSON or CSV.
``gen``   materialize a stream or a topology to a file.

Exit codes: 0 on success, 2 for configuration errors, 1 for runtime
failures.  ``TFHH_OUTPUT_DIR`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

from . import planner
from .fdcmss import DecaySpec
from .gossip import GossipParams, init_peer, query
from .metrics import (
    AggregateStat,
    MetricsRecord,
    aggregate,
    score,
    write_records_csv,
    write_summary_csv,
)
from .rng import child_seed, generator
from .simnet import (
    InvalidRunError,
    RoundReport,
    gen_barabasi_albert,
    gen_erdos_renyi,
    make_churn,
    run_round,
)
from .workload import StreamSpec, exact_oracle, gen_stream, partition, save_stream

OUTPUT_DIR_ENV = "TFHH_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StreamConfig:
    length: int = 1_000_000
    universe: int = 100_000
    skew: float = 1.2


@dataclass(frozen=True)
class SketchConfig:
    depth: int = 4
    width: int = 2500


@dataclass(frozen=True)
class TopologyConfig:
    kind: str = "er"
    edge_prob: float | None = None  # None: 2 ln(p) / p
    m_attach: int = 3


@dataclass(frozen=True)
class DecayConfig:
    kind: str = "polynomial"
    degree: float = 2.0
    rate: float = 1.0
    landmark: int = 0


@dataclass(frozen=True)
class ChurnConfig:
    kind: str = "none"
    fail_prob: float = 0.0
    lifetime_kind: str = "pareto"


@dataclass(frozen=True)
class ExperimentConfig:
    peers: int = 5000
    rounds: int = 24
    fan_out: int = 1
    phi: float = 0.02
    p_star: float | None = None  # None: use the peer count
    delta_g: float = 0.05
    repetitions: int = 10
    master_seed: int = 1
    output_dir: str | None = None
    stream: StreamConfig = field(default_factory=StreamConfig)
    sketch: SketchConfig = field(default_factory=SketchConfig)
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    decay: DecayConfig = field(default_factory=DecayConfig)
    churn: ChurnConfig = field(default_factory=ChurnConfig)


# the two built-in profiles: "full" is the large-scale default above;
# "desk" is a laptop-sized configuration with the same dynamics
PROFILES: dict[str, dict] = {
    "full": {},
    "desk": {
        "peers": 100,
        "stream": {"length": 1_000_000, "universe": 100_000},
        "sketch": {"depth": 4, "width": 600},
        "rounds": 24,
        "fan_out": 1,
    },
}

# one-dimensional sweep grids commonly used together
SWEEP_GRID: dict[str, list] = {
    "stream.skew": [0.9, 1.1, 1.3, 1.5],
    "phi": [0.01, 0.02, 0.03, 0.04],
    "peers": [1000, 5000, 10000, 15000],
    "sketch.width": [1500, 2500, 3500, 4500],
    "rounds": [21, 24, 27],
    "fan_out": [1, 2, 3],
}

_SECTIONS = {
    "stream": StreamConfig,
    "sketch": SketchConfig,
    "topology": TopologyConfig,
    "decay": DecayConfig,
    "churn": ChurnConfig,
}


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown field {key!r}")
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            if not isinstance(value, dict):
                raise ConfigError(f"field {key!r} must be an object")
            sub_known = {f.name for f in dataclasses.fields(cls)}
            for sub in value:
                if sub not in sub_known:
                    raise ConfigError(f"unknown field {key}.{sub!r}")
            try:
                kwargs[key] = cls(**value)
            except TypeError as exc:
                raise ConfigError(f"bad section {key!r}: {exc}") from exc
        else:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def validate_config(cfg: ExperimentConfig) -> None:
    def need(cond: bool, what: str) -> None:
        if not cond:
            raise ConfigError(what)

    need(cfg.peers >= 1, "peers must be at least 1")
    need(cfg.rounds >= 1, "rounds must be at least 1")
    need(cfg.fan_out >= 1, "fan_out must be at least 1")
    need(0 < cfg.phi < 1, "phi must lie in (0, 1)")
    need(cfg.p_star is None or cfg.p_star >= 1, "p_star must be at least 1")
    need(0 < cfg.delta_g < 1, "delta_g must lie in (0, 1)")
    need(cfg.repetitions >= 1, "repetitions must be at least 1")
    need(cfg.master_seed >= 0, "master_seed must be non-negative")
    need(cfg.stream.length >= 1, "stream.length must be at least 1")
    need(cfg.stream.universe >= 1, "stream.universe must be at least 1")
    need(cfg.stream.skew > 0, "stream.skew must be positive")
    need(cfg.sketch.depth >= 1, "sketch.depth must be at least 1")
    need(cfg.sketch.width >= 1, "sketch.width must be at least 1")
    need(cfg.topology.kind in ("er", "ba"), "topology.kind must be 'er' or 'ba'")
    if cfg.topology.edge_prob is not None:
        need(0 <= cfg.topology.edge_prob <= 1, "topology.edge_prob must lie in [0, 1]")
    need(cfg.topology.m_attach >= 1, "topology.m_attach must be at least 1")
    if cfg.topology.kind == "ba":
        need(cfg.topology.m_attach < max(cfg.peers, 2), "topology.m_attach must be below peers")
    need(
        cfg.decay.kind in ("polynomial", "exponential"),
        "decay.kind must be 'polynomial' or 'exponential'",
    )
    if cfg.decay.kind == "polynomial":
        need(cfg.decay.degree > 0, "decay.degree must be positive")
    else:
        need(cfg.decay.rate > 0, "decay.rate must be positive")
    need(
        cfg.churn.kind in ("none", "fail_stop", "yao"),
        "churn.kind must be 'none', 'fail_stop' or 'yao'",
    )
    need(0 <= cfg.churn.fail_prob <= 1, "churn.fail_prob must lie in [0, 1]")
    need(
        cfg.churn.lifetime_kind in ("pareto", "exponential"),
        "churn.lifetime_kind must be 'pareto' or 'exponential'",
    )


def config_hash(cfg: ExperimentConfig) -> str:
    data = config_to_dict(cfg)
    data.pop("output_dir", None)  # where results land is not part of identity
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def render_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(data)


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _set_path(data: dict, path: str, value) -> None:
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown field {path!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown field {path!r}")
    node[parts[-1]] = value


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    config_hash: str
    records: list[MetricsRecord]
    aggregates: dict[str, AggregateStat]
    metrics_path: str | None = None
    summary_path: str | None = None
    report: RoundReport | None = None


def _decay_from_config(cfg: ExperimentConfig) -> DecaySpec:
    d = cfg.decay
    if d.kind == "polynomial":
        return DecaySpec.polynomial(d.degree, d.landmark)
    return DecaySpec.exponential(d.rate, d.landmark)


def _topology_for(cfg: ExperimentConfig, seed: int):
    t = cfg.topology
    if t.kind == "er":
        return gen_erdos_renyi(cfg.peers, t.edge_prob, seed)
    return gen_barabasi_albert(cfg.peers, t.m_attach, seed)


def _attempt_rep(
    cfg: ExperimentConfig, chash: str, rep: int, attempt: int, report: RoundReport
) -> list[MetricsRecord]:
    seed = cfg.master_seed
    decay = _decay_from_config(cfg)
    spec = StreamSpec(
        length=cfg.stream.length,
        universe=cfg.stream.universe,
        skew=cfg.stream.skew,
        seed=child_seed(seed, "stream", rep, attempt),
    )
    stream = gen_stream(spec)
    parts = partition(stream, cfg.peers)
    topo = _topology_for(cfg, child_seed(seed, "topology", rep, attempt))
    hash_seed = child_seed(seed, "hash", rep, attempt)
    params = GossipParams(
        p_star=cfg.p_star if cfg.p_star is not None else cfg.peers,
        delta_g=cfg.delta_g,
        fan_out=cfg.fan_out,
        rounds=cfg.rounds,
        phi=cfg.phi,
    )
    states = [
        init_peer(l, parts[l - 1], cfg.sketch.depth, cfg.sketch.width, hash_seed, decay)
        for l in range(1, cfg.peers + 1)
    ]
    churn = make_churn(
        cfg.churn.kind,
        cfg.peers,
        fail_prob=cfg.churn.fail_prob,
        lifetime_kind=cfg.churn.lifetime_kind,
        rng=generator(seed, "churn-init", rep, attempt),
    )
    g_rng = generator(seed, "gossip", rep, attempt)
    for _ in range(cfg.rounds):
        states = run_round(topo, states, params, churn, g_rng, report)
    now = cfg.stream.length  # maximum timestamp
    exact = exact_oracle(stream, decay, now, cfg.phi)
    records = []
    for s in states:
        if not (s.alive and s.online and s.q > 0):
            continue
        answer = query(s, params, now, decay)
        recall, precision, are = score(answer, exact, cfg.phi)
        records.append(
            MetricsRecord(
                config_hash=chash,
                rep=rep,
                peer=s.peer_id,
                recall=recall,
                precision=precision,
                are=are,
                reported=len(answer),
                rounds=s.round,
                churn_kind=cfg.churn.kind,
                topology=cfg.topology.kind,
            )
        )
    return records


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | None = None, write: bool = True
) -> ExperimentResult:
    """Run all repetitions and (optionally) write metrics/summary CSVs.

    A repetition is re-derived on a fresh attempt sub-seed if churn
    removes the q-seeding peer before its first exchange.
    """
    validate_config(cfg)
    chash = config_hash(cfg)
    report = RoundReport()
    records: list[MetricsRecord] = []
    for rep in range(cfg.repetitions):
        for attempt in range(100):
            try:
                records.extend(_attempt_rep(cfg, chash, rep, attempt, report))
                break
            except InvalidRunError:
                continue
        else:
            raise RuntimeError(f"repetition {rep} kept losing the q seed; giving up")
    aggs = aggregate(records)
    result = ExperimentResult(
        config=cfg,
        config_hash=chash,
        records=records,
        aggregates=aggs,
        report=report,
    )
    if write:
        base = out_dir or cfg.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "tfhh-out"
        os.makedirs(base, exist_ok=True)
        result.metrics_path = os.path.join(base, "metrics.csv")
        result.summary_path = os.path.join(base, "summary.csv")
        write_records_csv(records, result.metrics_path)
        write_summary_csv(aggs, chash, result.summary_path)
        with open(os.path.join(base, "config.json"), "w") as fh:
            fh.write(render_config(cfg))
    return result


def _print_block(result: ExperimentResult, label: str | None, file) -> None:
    cfg = result.config
    if label:
        print(f"== {label} ==", file=file)
    print(
        f"config {result.config_hash}: peers={cfg.peers} rounds={cfg.rounds} "
        f"reps={cfg.repetitions} phi={cfg.phi} topology={cfg.topology.kind} "
        f"churn={cfg.churn.kind}",
        file=file,
    )
    for name in ("recall", "precision", "are", "reported"):
        a = result.aggregates[name]
        print(
            f"  {name:<9} {a.mean:.6g} +- {a.ci95_half:.3g} ({a.peers} peers)",
            file=file,
        )
    if result.metrics_path:
        print(f"  wrote {result.metrics_path}", file=file)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _build_config(args) -> dict:
    data = config_to_dict(ExperimentConfig())
    if args.profile:
        data = _deep_merge(data, PROFILES[args.profile])
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("configuration must be a JSON object")
        data = _deep_merge(data, loaded)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        path, _, raw = item.partition("=")
        _set_path(data, path.strip(), _parse_value(raw.strip()))
    for flag in ("peers", "rounds", "repetitions", "master_seed", "output_dir"):
        value = getattr(args, flag, None)
        if value is not None:
            data[flag] = value
    return data


def cmd_run(args) -> int:
    data = _build_config(args)
    sweeps: list[tuple[str | None, dict]] = [(None, data)]
    if args.sweep:
        path, _, raw = args.sweep.partition("=")
        path = path.strip()
        if raw:
            values = [_parse_value(tok) for tok in raw.split(",") if tok.strip()]
        elif path in SWEEP_GRID:
            values = SWEEP_GRID[path]
        else:
            raise ConfigError(f"--sweep {path!r} needs =v1,v2,... values")
        if not values:
            raise ConfigError("--sweep got an empty value list")
        sweeps = []
        for v in values:
            d = copy.deepcopy(data)
            _set_path(d, path, v)
            sweeps.append((f"{path}={v}", d))
    base_out = args.output_dir or data.get("output_dir") or os.environ.get(
        OUTPUT_DIR_ENV
    ) or "tfhh-out"
    for label, d in sweeps:
        cfg = config_from_dict(d)
        validate_config(cfg)
        out = base_out if label is None else os.path.join(
            base_out, label.replace(".", "-").replace("=", "-")
        )
        result = run_experiment(cfg, out_dir=out)
        _print_block(result, label, sys.stdout)
    return 0


def cmd_plan(args) -> int:
    plan = planner.make_plan(
        phi=args.phi,
        eps=args.tolerance,
        delta=args.delta,
        delta_g=args.delta_g,
        p_star=args.p_star,
        strategy=args.strategy,
    )
    record = plan.as_dict()
    if args.format == "json":
        print(json.dumps(record))
    else:
        keys = list(record)
        print(",".join(keys))
        print(",".join(str(record[k]) for k in keys))
    if args.curve:
        start = planner.min_rounds(args.phi, args.tolerance, args.delta_g, args.p_star)
        with open(args.curve, "w") as fh:
            fh.write("rounds,width\n")
            for r in range(start, start + args.curve_points):
                w = planner.width_for_rounds(
                    args.phi, args.tolerance, r, args.p_star, args.delta_g
                )
                fh.write(f"{r},{w}\n")
        print(f"wrote {args.curve}")
    return 0


def cmd_gen_stream(args) -> int:
    spec = StreamSpec(
        length=args.length, universe=args.universe, skew=args.skew, seed=args.seed
    )
    stream = gen_stream(spec)
    save_stream(args.out, stream)
    print(f"wrote {args.out} ({len(stream)} records)")
    return 0


def cmd_gen_topology(args) -> int:
    if args.kind == "er":
        topo = gen_erdos_renyi(args.peers, args.edge_prob, args.seed)
    elif args.kind == "ba":
        topo = gen_barabasi_albert(args.peers, args.m_attach, args.seed)
    else:
        raise ConfigError(f"unknown topology kind {args.kind!r}")
    from .simnet import save_edge_list

    save_edge_list(topo, args.out)
    print(f"wrote {args.out} ({topo.num_edges} edges)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfhh",
        description="Gossip-based mining of time-faded heavy hitters (simulation toolkit)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulated experiment")
    p_run.add_argument("--config", help="JSON configuration file")
    p_run.add_argument(
        "--profile", choices=sorted(PROFILES), help="start from a built-in profile"
    )
    p_run.add_argument(
        "--set",
        action="append",
        metavar="PATH=VALUE",
        help="override a config field by dotted path (repeatable)",
    )
    p_run.add_argument(
        "--sweep",
        metavar="PATH[=V1,V2,...]",
        help="run once per value of one swept field",
    )
    p_run.add_argument("--peers", type=int)
    p_run.add_argument("--rounds", type=int)
    p_run.add_argument("--repetitions", type=int)
    p_run.add_argument("--master-seed", dest="master_seed", type=int)
    p_run.add_argument("--output-dir", dest="output_dir")
    p_run.set_defaults(func=cmd_run)

    p_plan = sub.add_parser("plan", help="size the sketch and round count")
    p_plan.add_argument("--phi", type=float, required=True)
    p_plan.add_argument(
        "--tolerance", "--eps", dest="tolerance", type=float, required=True
    )
    p_plan.add_argument("--delta", type=float, default=0.02)
    p_plan.add_argument("--delta-g", dest="delta_g", type=float, default=0.01)
    p_plan.add_argument("--p-star", dest="p_star", type=float, required=True)
    p_plan.add_argument(
        "--strategy",
        choices=["time_dominant", "space_dominant"],
        default="time_dominant",
    )
    p_plan.add_argument("--format", choices=["json", "csv"], default="json")
    p_plan.add_argument("--curve", help="also write a rounds,width CSV curve here")
    p_plan.add_argument("--curve-points", type=int, default=20)
    p_plan.set_defaults(func=cmd_plan)

    p_gen = sub.add_parser("gen", help="materialize inputs")
    gen_sub = p_gen.add_subparsers(dest="what", required=True)

    p_gs = gen_sub.add_parser("stream", help="write a binary stream file")
    p_gs.add_argument("--length", type=int, required=True)
    p_gs.add_argument("--universe", type=int, default=100_000)
    p_gs.add_argument("--skew", type=float, default=1.2)
    p_gs.add_argument("--seed", type=int, default=0)
    p_gs.add_argument("--out", required=True)
    p_gs.set_defaults(func=cmd_gen_stream)

    p_gt = gen_sub.add_parser("topology", help="write an edge-list file")
    p_gt.add_argument("--peers", type=int, required=True)
    p_gt.add_argument("--kind", choices=["er", "ba"], default="er")
    p_gt.add_argument("--edge-prob", dest="edge_prob", type=float)
    p_gt.add_argument("--m-attach", dest="m_attach", type=int, default=3)
    p_gt.add_argument("--seed", type=int, default=0)
    p_gt.add_argument("--out", required=True)
    p_gt.set_defaults(func=cmd_gen_topology)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

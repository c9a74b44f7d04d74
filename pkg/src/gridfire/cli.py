"""Command-line front end.

Verbs: ``run`` (one simulation), ``sweep`` (parameter sweep), ``adapt``
(periodic re-exploration against a changing fire), ``serve`` / ``agent``
(networked mode), ``reward`` (reward field from a PPM image). Every verb
accepts ``--config``; without it the standard scenario applies. Data files
are CSV and byte-stable for a given master seed.

Exit codes: 0 success, 1 usage, 2 config, 3 runtime, 4 network.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import signal
import sys
import threading
import time

from . import __version__
from .config import ConfigError, ExperimentConfig, default_config, dump_config, load_config
from .engine import CoverageTimeout
from .harness import run_adapt, run_single, run_sweep, validate_adapt
from .metrics import fire_time_fraction, write_sweep_csv
from .netstore import StoreClient, StoreError, StoreServer, server_seed
from .rewards import FireClassifier, field_from_image, read_ppm, write_field_csv
from .seeds import MASK64

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_NETWORK = 4

RUN_CSV_HEADER = ["n_agents", "steps", "total_agent_steps", "fire_steps", "fire_fraction", "coverage_step"]
ADAPT_CSV_HEADER = ["period_index", "start_step", "mean_fire_fraction", "std_fire_fraction", "n_runs"]
EVENTS_CSV_HEADER = ["step", "agent", "state", "action", "reward", "next_state"]


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridfire", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gridfire {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH", help="experiment config file")
        p.add_argument("--seed", type=int, metavar="U64", help="master seed override")
        p.add_argument("--out", metavar="DIR", help="output directory for data files")
        p.add_argument("--agents", type=int, metavar="N", help="agent count override")
        p.add_argument("--steps", type=int, metavar="N", help="step count override")

    p = sub.add_parser("run", help="run one simulation, write metrics and the final Q-table")
    common(p)
    p.add_argument("--events", action="store_true", help="also write the per-step event stream")

    p = sub.add_parser("sweep", help="run a parameter sweep, write one aggregated row per point")
    common(p)

    p = sub.add_parser("adapt", help="run periodic re-exploration, write per-period fractions")
    common(p)

    p = sub.add_parser("serve", help="serve the shared Q-table for agent processes")
    common(p)
    p.add_argument("--bind", default="127.0.0.1:0", metavar="HOST:PORT", help="listen address")
    p.add_argument("--wal", metavar="PATH", help="stream the write-ahead log to a file")

    p = sub.add_parser("agent", help="drive one agent against a running server")
    common(p)
    p.add_argument("--address", required=True, metavar="HOST:PORT", help="server address")
    p.add_argument("--timeout", type=float, default=10.0, metavar="SEC")

    p = sub.add_parser("reward", help="compute a reward field from a PPM image")
    common(p)
    p.add_argument("image", metavar="IMAGE", help="binary PPM (P6) file")
    p.add_argument("--grid", nargs=2, type=int, required=True, metavar=("M", "N"),
                   help="tile grid: M columns, N rows")
    p.add_argument("--zoom", type=float, default=1.0, metavar="Z", help="zoom factor (>= 1)")
    p.add_argument("--thresholds", nargs=3, type=int, metavar=("MIN_R", "MAX_G", "MAX_B"),
                   help="fire-pixel thresholds (default 200 120 80)")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        if not 0 <= args.seed <= MASK64:
            raise ConfigError(f"--seed must be a 64-bit unsigned integer, got {args.seed}")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.agents is not None:
        if args.agents < 1:
            raise ConfigError(f"--agents must be >= 1, got {args.agents}")
        cfg = dataclasses.replace(cfg, num_agents=args.agents)
    if args.steps is not None:
        if args.steps < 1:
            raise ConfigError(f"--steps must be >= 1, got {args.steps}")
        cfg = dataclasses.replace(cfg, total_steps=args.steps)
    return cfg


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_resolved(cfg: ExperimentConfig, out: str) -> None:
    with open(os.path.join(out, "config_resolved.ini"), "w") as f:
        f.write(dump_config(cfg))


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    _write_resolved(cfg, out)

    events = []
    observers = [lambda *e: events.append(e)] if args.events else []
    engine, metrics = run_single(cfg, observers=observers)
    fraction = fire_time_fraction(metrics)

    with open(os.path.join(out, "metrics.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RUN_CSV_HEADER)
        w.writerow([
            cfg.num_agents,
            cfg.total_steps,
            metrics.total_agent_steps,
            metrics.fire_steps,
            _fmt(fraction),
            "" if metrics.coverage_step is None else metrics.coverage_step,
        ])
    engine.qtable.save_csv(os.path.join(out, "qtable.csv"))
    if args.events:
        with open(os.path.join(out, "events.csv"), "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(EVENTS_CSV_HEADER)
            for step, agent, s, a, r, s_next in events:
                w.writerow([step, agent, s, a.name, _fmt(r), s_next])

    coverage = "incomplete" if metrics.coverage_step is None else str(metrics.coverage_step)
    print(
        f"run: agents={cfg.num_agents} steps={cfg.total_steps} "
        f"fire_fraction={fraction:.4f} coverage_step={coverage}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep is None:
        raise ConfigError("sweep: config has no [sweep] section")
    out = _outdir(args)
    _write_resolved(cfg, out)
    rows = run_sweep(cfg)
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as f:
        write_sweep_csv(f, rows)
    for row in rows:
        s = row.summary
        print(
            f"sweep {row.param_name}={row.param_value:g}: agents={row.n_agents} steps={row.steps} "
            f"fire_fraction={s.mean_fire_fraction:.4f}±{s.std_fire_fraction:.4f} "
            f"coverage={s.mean_coverage_steps:.1f}±{s.std_coverage_steps:.1f} (n={s.n_runs})"
        )
    return EXIT_OK


def cmd_adapt(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    try:
        warnings = validate_adapt(cfg)
    except ValueError as e:
        raise ConfigError(f"adapt: {e}") from None
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    _write_resolved(cfg, out)
    rows = run_adapt(cfg)
    with open(os.path.join(out, "periods.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ADAPT_CSV_HEADER)
        for row in rows:
            w.writerow([
                row.period_index,
                row.start_step,
                _fmt(row.mean_fire_fraction),
                _fmt(row.std_fire_fraction),
                row.n_runs,
            ])
    for row in rows:
        print(
            f"period {row.period_index} (from step {row.start_step}): "
            f"fire_fraction={row.mean_fire_fraction:.4f}±{row.std_fire_fraction:.4f} (n={row.n_runs})"
        )
    return EXIT_OK


def _parse_hostport(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"address must be HOST:PORT, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(f"bad port in {text!r}") from None


def cmd_serve(args) -> int:
    cfg = _load(args)
    host, port = _parse_hostport(args.bind)
    wal_file = open(args.wal, "w") if args.wal else None
    try:
        server = StoreServer(
            cfg.grid, cfg.params, seed=server_seed(cfg.seed), host=host, port=port, wal_file=wal_file
        )
    except OSError as e:
        raise StoreError(f"cannot bind {args.bind}: {e}") from None

    stop = threading.Event()

    def handle(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, handle)
    signal.signal(signal.SIGTERM, handle)

    bound = server.address
    print(f"LISTENING {bound[0]} {bound[1]}", flush=True)
    server.start()
    try:
        while not stop.is_set():
            time.sleep(0.1)
    finally:
        server.shutdown()
        if args.out:
            out = _outdir(args)
            server.qtable.save_csv(os.path.join(out, "qtable.csv"))
            if not args.wal:
                with open(os.path.join(out, "wal.log"), "w") as f:
                    for entry in server.log_entries():
                        f.write(entry.line() + "\n")
        if wal_file is not None:
            wal_file.close()
    return EXIT_OK


def cmd_agent(args) -> int:
    cfg = _load(args)
    host, port = _parse_hostport(args.address)
    next_index = _transition_table(cfg)

    client = StoreClient(host, port, timeout=args.timeout)
    agent_id = client.hello()
    state = cfg.start_index
    fire_steps = 0
    completed = 0
    try:
        for k in range(cfg.total_steps):
            action = client.direct(state)
            r = cfg.schedule.field_at(k).value_at(state)
            s_next = next_index[state][action]
            client.update(state, action, r, s_next)
            if r > 0:
                fire_steps += 1
            state = s_next
            completed += 1
        client.bye()
    except StoreError as e:
        print(
            f"agent {agent_id}: partial run, {completed}/{cfg.total_steps} steps done: {e}",
            file=sys.stderr,
        )
        raise
    print(f"agent {agent_id}: steps={completed} fire_fraction={fire_steps / completed:.4f}")
    return EXIT_OK


def _transition_table(cfg: ExperimentConfig) -> list[list[int]]:
    from .mdp import Action, cell_at, state_index, step

    return [
        [state_index(cfg.grid, step(cfg.grid, cell_at(cfg.grid, s), a)) for a in Action]
        for s in range(cfg.grid.num_states)
    ]


def cmd_reward(args) -> int:
    out = _outdir(args)
    cols, rows = args.grid
    if args.thresholds:
        clf = FireClassifier(*args.thresholds)
    else:
        clf = FireClassifier()
    pixels = read_ppm(args.image)
    field = field_from_image(pixels, cols, rows, args.zoom, clf)
    with open(os.path.join(out, "field.csv"), "w", newline="") as f:
        write_field_csv(f, field)
    print(f"reward: {cols}x{rows} grid, fire states {field.fire_indices()}")
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "adapt": cmd_adapt,
    "serve": cmd_serve,
    "agent": cmd_agent,
    "reward": cmd_reward,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StoreError as e:
        print(f"network error: {e}", file=sys.stderr)
        return EXIT_NETWORK
    except CoverageTimeout as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

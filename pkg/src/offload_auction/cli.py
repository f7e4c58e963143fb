"""Command-line entry point.

Exit codes: 0 ok, 2 usage/config error, 3 runtime error, 4 audit violation.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import audit
from .config import ConfigError, load_config
from .engine import run_experiment
from .money import fmt
from .tightness import StrategyParams, offered_bid, preference
from .topology import TopologyError, generate_geometric

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_AUDIT = 4


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _linspace(lo: Fraction, hi: Fraction, n: int) -> list[Fraction]:
    return [lo + (hi - lo) * Fraction(k, n - 1) for k in range(n)]


def _num(x: Fraction) -> str:
    return repr(float(x))


def bid_curve_rows(budget, fine, steepness: Sequence, samples: int) -> list[tuple]:
    rows = []
    for a in steepness:
        for c in _linspace(Fraction(0), Fraction(2), samples):
            rows.append((a, c, offered_bid(budget, fine, Fraction(str(a)), c)))
    return rows


def preference_rows(budget, c_max, params: StrategyParams, grid: int) -> list[tuple]:
    b, cm = Fraction(str(budget)), Fraction(str(c_max))
    return [
        (op, c, preference(op, c, b, cm, params))
        for op in _linspace(Fraction(0), b, grid)
        for c in _linspace(Fraction(0), cm, grid)
    ]


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        topo = config.topology.build(config.seed)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (TopologyError, OSError) as exc:
        _err(f"topology: {exc}")
        return EXIT_CONFIG
    try:
        result = run_experiment(config, topo, parallel=args.parallel)
        result.write(args.out, traces=args.traces)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report anything else as a runtime failure
        _err(f"runtime: {exc}")
        return EXIT_RUNTIME
    if not args.quiet:
        m = result.metrics
        print(f"games: {m.total}  delivered: {m.delivered}  delivery ratio: {m.delivery_ratio:.4f}")
        handhelds = sorted(
            ((v, k) for k, v in m.balances.items() if k in set(topo.handhelds)),
            key=lambda vk: (-vk[0], vk[1]),
        )
        for v, k in handhelds[: args.top]:
            print(f"  node {k}: {fmt(v)}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        config = load_config(args.config)
        topo = config.topology.build(config.seed)
        for node in config.node_strategies:
            if node not in topo:
                raise ConfigError("strategies.nodes", f"node {node} is not in the topology")
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (TopologyError, OSError) as exc:
        _err(f"topology: {exc}")
        return EXIT_CONFIG
    if not args.quiet:
        print(f"ok: {topo!r}")
    return EXIT_OK


def cmd_gen_topology(args) -> int:
    try:
        topo = generate_geometric(args.handhelds, args.aps, args.radius, args.seed, args.max_attempts)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except TopologyError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    text = json.dumps(topo.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bid_curve(args) -> int:
    if args.fine > args.budget or args.fine < 0:
        _err("fine must satisfy 0 <= fine <= budget")
        return EXIT_CONFIG
    if any(a < 0 for a in args.steepness):
        _err("steepness must be non-negative")
        return EXIT_CONFIG
    if args.samples < 2:
        _err("samples must be >= 2")
        return EXIT_CONFIG
    w = _writer(sys.stdout)
    w.writerow(["steepness", "relative_tightness", "bid"])
    for a, c, o in bid_curve_rows(args.budget, args.fine, args.steepness, args.samples):
        w.writerow([a, _num(c), fmt(o)])
    return EXIT_OK


def cmd_preference_grid(args) -> int:
    try:
        params = StrategyParams(k1=args.k1, k2=args.k2)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if args.c_max <= 0 or args.budget <= 0 or args.grid < 2:
        _err("need budget > 0, c_max > 0 and grid >= 2")
        return EXIT_CONFIG
    w = _writer(sys.stdout)
    w.writerow(["offered_price", "relative_tightness", "preference"])
    for op, c, p in preference_rows(args.budget, args.c_max, params, args.grid):
        w.writerow([_num(op), _num(c), _num(p)])
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        violations = audit.audit_file(args.trace)
    except audit.AuditError as exc:
        print(f"violation: {exc}")
        return EXIT_AUDIT
    except (OSError, TopologyError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if violations:
        shown = violations if args.all else violations[:1]
        for v in shown:
            print(f"violation: {v}")
        return EXIT_AUDIT
    if not args.quiet:
        print("ok: all rules hold")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="offload-auction", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment and write CSV/JSON outputs")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--parallel", action="store_true")
    r.add_argument("--traces", action="store_true", help="also write traces.jsonl")
    r.add_argument("--top", type=int, default=5)
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a scenario config")
    v.add_argument("--config", required=True)
    v.add_argument("--quiet", action="store_true")
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("gen-topology", help="write a random geometric topology")
    g.add_argument("--handhelds", type=int, required=True)
    g.add_argument("--aps", type=int, default=2)
    g.add_argument("--radius", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-attempts", type=int, default=1000)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_topology)

    b = sub.add_parser("bid-curve", help="CSV of offered bid against relative tightness")
    b.add_argument("--budget", type=float, default=200.0)
    b.add_argument("--fine", type=float, default=80.0)
    b.add_argument("--steepness", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    b.add_argument("--samples", type=int, default=21)
    b.set_defaults(func=cmd_bid_curve)

    q = sub.add_parser("preference-grid", help="CSV of the winner preference plane")
    q.add_argument("--budget", type=float, default=20.0)
    q.add_argument("--c-max", type=float, default=3.0)
    q.add_argument("--k1", type=float, default=2.0)
    q.add_argument("--k2", type=float, default=3.0)
    q.add_argument("--grid", type=int, default=5)
    q.set_defaults(func=cmd_preference_grid)

    y = sub.add_parser("replay", help="audit a traces.jsonl file")
    y.add_argument("trace")
    y.add_argument("--all", action="store_true", help="list every violation")
    y.add_argument("--quiet", action="store_true")
    y.set_defaults(func=cmd_replay)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

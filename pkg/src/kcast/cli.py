"""Command line entry point.

Exit codes: 0 when every expectation holds, 1 when a run contradicts the
threshold (a real bug), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .adversary import (
    ChainAdversary,
    ChainError,
    GuardError,
    SilentStrategy,
    build_chain,
    enumerate_adversaries,
    ring_feasible,
)
from .protocol import BudgetError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


def _run_args(p):
    p.add_argument("--config", help="JSON file whose keys mirror the flags")
    p.add_argument("--k", type=int)
    p.add_argument("--h", type=int)
    p.add_argument("--f", type=int)
    p.add_argument("--input", default="1", help="sender input as a bit string")
    p.add_argument("--adversary", default="none", choices=harness.ADVERSARY_CLASSES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pair", type=int, help="chain: compliant adjacent pair (default: try all)")
    p.add_argument("--corrupt", help="silent: comma separated corrupt parties")
    p.add_argument("--trace", help="write the JSON-lines trace here")
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--override-guard", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kcast", description="Byzantine agreement over k-cast channels")
    sub = parser.add_subparsers(dest="command", required=True)

    _run_args(sub.add_parser("run", help="run the protocol once (or over a whole adversary class)"))

    sw = sub.add_parser("sweep", help="compare predicted and observed outcomes over a parameter grid")
    sw.add_argument("--config")
    sw.add_argument("--max-k", type=int, default=2)
    sw.add_argument("--max-h", type=int, default=3)
    sw.add_argument("--max-f", type=int, default=3)
    sw.add_argument("--max-n", type=int, default=5, help="skip rows with h+f above this")
    sw.add_argument("--exhaustive-max-n", type=int, default=4)
    sw.add_argument("--adversary", action="append", choices=harness.ADVERSARY_CLASSES,
                    help="adversary class, repeatable (default: all)")
    sw.add_argument("--seeds", type=int, default=50)
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--out", help="write the table here instead of stdout")
    sw.add_argument("--delimiter", default=",")

    th = sub.add_parser("check-threshold", help="classify (k,h,f) by 2f < kh")
    th.add_argument("--k", type=int, required=True)
    th.add_argument("--h", type=int, required=True)
    th.add_argument("--f", type=int, required=True)

    rp = sub.add_parser("replay", help="re-derive the verdict of a trace")
    rp.add_argument("trace")
    rp.add_argument("--rerun", action="store_true", help="also re-execute and compare bytes")
    return parser


def parse(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            overrides = {key.replace("-", "_"): v for key, v in json.load(fh).items()}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def _summary(cfg, verdict, label) -> str:
    return (f"k={cfg.k} h={cfg.h} f={cfg.f} n={cfg.n} adversary={label}: "
            f"agreement={verdict.agreement} validity={verdict.validity} "
            f"anomalies={len(verdict.anomalies)} casts={verdict.casts} time={verdict.wall_time:.3f}s")


def cmd_run(args) -> int:
    if args.k is None or args.h is None or args.f is None:
        raise harness.UsageError("run needs --k, --h and --f")
    cfg = harness.RunConfig(args.k, args.h, args.f, args.input, {"kind": args.adversary},
                            args.seed, args.trace, args.max_n, args.override_guard)
    print(harness.check_threshold(cfg.k, cfg.h, cfg.f))
    kind = args.adversary
    if kind == "random":
        cfg.adversary = {"kind": "random", "seed": args.seed}
    if kind == "silent":
        corrupt = [int(x) for x in args.corrupt.split(",")] if args.corrupt else list(range(cfg.f))
        cfg.adversary = SilentStrategy(corrupt).descriptor()
    if kind in ("none", "random", "silent") or (kind == "chain" and args.pair is not None):
        if kind == "chain":
            cfg.adversary = {"kind": "chain", "pair": args.pair}
        verdict, _ = harness.run(cfg)
        print(_summary(cfg, verdict, json.dumps(cfg.adversary)))
        return EXIT_VIOLATION if verdict.violation else EXIT_OK

    # whole adversary class: keep the trace of the first interesting run
    if kind == "chain":
        if not ring_feasible(cfg.k, cfg.h, cfg.f):
            raise harness.UsageError(f"no ({cfg.k},{cfg.h})-chain over {cfg.n} parties: 2f < kh")
        chain = build_chain(cfg.k, cfg.h, cfg.f)
        strategies = [ChainAdversary(chain, j) for j in range(len(chain.clusters) - 1)]
        print("chain clusters:", " | ".join(",".join(map(str, c)) for c in chain.clusters))
    else:
        strategies = list(enumerate_adversaries(cfg.top, max_n=cfg.max_n, override_guard=cfg.override_guard))
    trace, chosen, defeated, violations = cfg.trace, None, 0, 0
    cfg.trace = None
    for st in strategies:
        verdict, transcript = harness.run_strategy(cfg, st)
        defeated += verdict.defeated
        violations += verdict.violation
        if kind == "chain":
            print(f"  pair {st.pair}: {'defeated' if verdict.defeated else 'agree'}")
        if chosen is None and verdict.defeated:
            chosen = transcript
    if trace:
        (chosen or transcript).write(trace)
    print(f"{kind}: {len(strategies)} strategies, {defeated} defeated, {violations} violations")
    if kind == "chain":
        return EXIT_OK if defeated else EXIT_VIOLATION
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_sweep(args) -> int:
    classes = tuple(args.adversary) if args.adversary else harness.ADVERSARY_CLASSES
    rows = harness.sweep(args.max_k, args.max_h, args.max_f, classes, args.seeds,
                         args.max_n, args.exhaustive_max_n, args.jobs)
    table = harness.sweep_table(rows, classes, args.delimiter)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    failed = [r for r in rows if r.result == "FAIL"]
    print(f"{len(rows)} rows, {len(failed)} FAIL", file=sys.stderr)
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_check(args) -> int:
    print(harness.check_threshold(args.k, args.h, args.f))
    return EXIT_OK


def cmd_replay(args) -> int:
    res = harness.replay(args.trace, args.rerun)
    print(f"derived: {json.dumps(res.derived)}")
    print(f"recorded: agreement={res.recorded['agreement']} validity={res.recorded['validity']}")
    if res.bytes_match is not None:
        print(f"rerun bytes match: {res.bytes_match}")
    return EXIT_OK if res.ok else EXIT_VIOLATION


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "check-threshold": cmd_check, "replay": cmd_replay}


def main(argv=None) -> int:
    try:
        args = parse(argv)
        return COMMANDS[args.command](args)
    except (harness.UsageError, GuardError, ChainError, BudgetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

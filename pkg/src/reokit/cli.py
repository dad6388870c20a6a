"""Command-line front end.

Exit codes are part of the contract: 0 means success with no findings,
1 means the tool ran fine but found something (deadlocks, failures,
warnings, order violations), 2 means usage or parse errors. Structured
output is JSON with sorted keys; human-readable notes go to stderr so
scripts can consume stdout directly.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import dsl, rescue
from .analysis import analyze
from .automata import automaton_to_dot, automaton_to_json, compile_circuit
from .circuit import PORT_IN, PORT_OUT, export_dot, validate_circuit
from .semlog import ComplianceEngine, ORIGIN_SCRIPT, ORIGIN_TRACE
from .sim import (
    EnvMismatchError,
    Firing,
    SimConfig,
    enabled,
    round_rng,
    simulate,
    step,
    trace_from_json,
)

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


class ToolError(Exception):
    """Tool-level failure: reported on stderr, exit status 2."""


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ToolError(f"cannot read {path}: {exc.strerror}")


def _note(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_parse(args) -> int:
    c = dsl.parse_circuit(_read(args.path))
    report = validate_circuit(c)
    print(report.render())
    if args.dot:
        sys.stdout.write(export_dot(c))
    return EXIT_OK if report.ok else EXIT_USAGE


def cmd_compile(args) -> int:
    c = dsl.parse_circuit(_read(args.path))
    auto = compile_circuit(c)
    if args.stats:
        print(f"states: {auto.n_states}")
        print(f"transitions: {len(auto.transitions)}")
        print(f"names: {', '.join(sorted(auto.names))}")
    if args.dot:
        sys.stdout.write(automaton_to_dot(auto))
    elif args.json or not args.stats:
        sys.stdout.write(automaton_to_json(auto))
    return EXIT_OK


def cmd_simulate(args) -> int:
    c = dsl.parse_circuit(_read(args.path))
    env = dsl.parse_env(_read(args.env), c)
    auto = compile_circuit(c)
    ins = frozenset(p.name for p in c.ports if p.kind == PORT_IN)
    outs = frozenset(p.name for p in c.ports if p.kind == PORT_OUT)
    cfg = SimConfig(seed=args.seed, max_rounds=args.rounds)
    trace = simulate(auto, env, cfg, inputs=ins, outputs=outs, circuit_name=c.name)
    _emit(trace.to_json(auto), args.trace)
    fired = len(trace.firings())
    _note(args, f"{len(trace.steps)} rounds, {fired} firings")
    return EXIT_OK


def cmd_check(args) -> int:
    c = dsl.parse_circuit(_read(args.path))
    auto = compile_circuit(c)
    report = analyze(auto)
    if args.json:
        sys.stdout.write(report.to_json())
        _note(args, report.render())
    else:
        print(report.render())
    return EXIT_FINDINGS if report.deadlock_states else EXIT_OK


def cmd_comply(args) -> int:
    rules = dsl.parse_rulebase(_read(args.rules))
    if bool(args.events) == bool(args.trace):
        raise ToolError("exactly one of --events or --trace/--map is required")
    if args.trace and not args.map:
        raise ToolError("--trace requires --map")
    engine = ComplianceEngine(rules, max_depth=args.max_depth)
    if args.events:
        script = dsl.parse_events(_read(args.events))
        for term in script.terms():
            engine.ingest(term, origin=ORIGIN_SCRIPT)
    else:
        trace = trace_from_json(_read(args.trace))
        mapping = dsl.parse_map(_read(args.map))
        for event in rescue.map_trace(trace, mapping):
            engine.ingest(event, origin=ORIGIN_TRACE)
    verdict = engine.verdict()
    sys.stdout.write(verdict.to_json())
    if args.explain:
        for term, _ in verdict.failures + verdict.warnings:
            _note(args, engine.explain(term).render())
    return EXIT_OK if verdict.clean else EXIT_FINDINGS


def cmd_scenario(args) -> int:
    env = dsl.parse_env(_read(args.env), rescue.builtin_circuit()) if args.env else None
    extra = dsl.parse_events(_read(args.events)) if args.events else None
    report = rescue.run_rescue(
        seed=args.seed,
        rounds=args.rounds,
        env=env,
        extra_events=extra,
        max_depth=args.max_depth,
    )
    _emit(report.to_json(), args.json_out)
    _note(
        args,
        f"{len(report.trace.firings())} firings, "
        f"{len(report.events)} events, "
        f"{'clean' if report.verdict.clean else 'findings'}",
    )
    return EXIT_OK if report.verdict.clean else EXIT_FINDINGS


def cmd_repl(args) -> int:
    c = dsl.parse_circuit(_read(args.path))
    auto = compile_circuit(c)
    ins = {p.name for p in c.ports if p.kind == PORT_IN}
    outs = {p.name for p in c.ports if p.kind == PORT_OUT}
    state = auto.initial
    round_no = 1
    offers: dict[str, str] = {}
    ready: set[str] = set()
    print(f"circuit {c.name}: {auto.n_states} states; commands: "
          "offer p=tok | ready p[,p]* | enabled | state | fire | quit")
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            cmd, _, rest = line.partition(" ")
            if cmd == "quit":
                break
            elif cmd == "offer":
                port, _, tok = rest.replace(" ", "").partition("=")
                if port not in ins:
                    print(f"unknown boundary-in port {port!r}")
                elif tok not in c.alphabet:
                    print(f"unknown data item {tok!r}")
                else:
                    offers[port] = tok
            elif cmd == "ready":
                ports = [p.strip() for p in rest.split(",") if p.strip()]
                bad = [p for p in ports if p not in outs]
                if bad:
                    print(f"unknown boundary-out ports {bad}")
                else:
                    ready.update(ports)
            elif cmd == "state":
                print(f"state {auto.labels[state]} (round {round_no})")
            elif cmd == "enabled":
                options = enabled(auto, state, offers, frozenset(ready))
                if not options:
                    print("nothing enabled")
                for t, assignment in options:
                    data = ",".join(f"{k}={v}" for k, v in sorted(assignment.items()))
                    print(f"{{{','.join(sorted(t.sync))}}} {data}")
            elif cmd == "fire":
                outcome = step(
                    auto, state, round_no, offers, frozenset(ready),
                    round_rng(args.seed, round_no),
                )
                if isinstance(outcome, Firing):
                    data = ",".join(f"{k}={v}" for k, v in sorted(outcome.assignment))
                    print(f"fired {{{','.join(sorted(outcome.sync))}}} {data}")
                    state = outcome.state_after
                else:
                    print("stall")
                round_no += 1
                offers.clear()
                ready.clear()
            else:
                print(f"unknown command {cmd!r}")
        except Exception as exc:  # keep the session alive
            print(f"error: {exc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="simulation seed")
    common.add_argument("--max-depth", type=int, default=8, dest="max_depth",
                        help="maximum stored fact depth")
    common.add_argument("--quiet", action="store_true", help="suppress notes on stderr")

    parser = argparse.ArgumentParser(
        prog="reokit",
        description="coordination circuits: parse, compile, analyze, simulate, comply",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse and validate a circuit")
    p.add_argument("path")
    p.add_argument("--dot", action="store_true", help="also print the circuit as DOT")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("compile", parents=[common], help="compile a circuit to an automaton")
    p.add_argument("path")
    p.add_argument("--json", action="store_true", help="emit automaton JSON (default)")
    p.add_argument("--dot", action="store_true", help="emit automaton DOT")
    p.add_argument("--stats", action="store_true", help="print state/transition counts")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("simulate", parents=[common], help="run a circuit against an env script")
    p.add_argument("path")
    p.add_argument("--env", required=True, help="environment script")
    p.add_argument("--rounds", type=int, default=2**31, help="round cap")
    p.add_argument("--trace", help="write trace JSON here instead of stdout")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("check", parents=[common], help="reachability and deadlock analysis")
    p.add_argument("path")
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("comply", parents=[common], help="judge an event stream against rules")
    p.add_argument("--rules", required=True)
    p.add_argument("--events", help="event script (one ground term per line)")
    p.add_argument("--trace", help="trace JSON (needs --map)")
    p.add_argument("--map", help="event map for --trace")
    p.add_argument("--explain", action="store_true",
                   help="print derivation trees for findings on stderr")
    p.set_defaults(fn=cmd_comply)

    p = sub.add_parser("scenario", parents=[common], help="run the built-in rescue scenario")
    p.add_argument("--env", help="override the canned environment")
    p.add_argument("--events", help="extra scripted compliance events")
    p.add_argument("--rounds", type=int, default=12)
    p.add_argument("--json", dest="json_out", help="write the report here instead of stdout")
    p.set_defaults(fn=cmd_scenario)

    p = sub.add_parser("repl", parents=[common], help="interactive stepper for a circuit")
    p.add_argument("path")
    p.set_defaults(fn=cmd_repl)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except dsl.ParseFailure as exc:
        for err in exc.errors:
            print(err.render(), file=sys.stderr)
        return EXIT_USAGE
    except (ToolError, EnvMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

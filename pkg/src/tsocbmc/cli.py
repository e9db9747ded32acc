"""Command-line front end.

Subcommands: parse (canonicalize a model file), check (context-bounded
reachability through the abstraction), simulate (bounded concrete search,
plain or context-bounded), gen (emit generated programs), selftest (the
randomized differential suites).  Exit codes: 0 for unreachable or plain
success, 1 for reachable, 2 for usage or parse errors, 3 when a search gave
up on a resource bound.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .abmachine import ab_machine
from .dsl import (
    ParseError, parse_dfa, parse_dlcs, parse_program_with_target, render_dfa,
    render_dlcs, render_program, validate_dfa, validate_dlcs,
)
from .engine import ConcretizationError, check_reach, concretize_witness
from .generators import gen_bakery, gen_dlcs_reduction, gen_intersection
from .model import (
    InvalidProgramError, Program, Target, program_index, validate,
)
from .selftest import run_suites
from .tso import Bounds, cb_reach_bounded, tso_reach_bounded
from .verdict import BOUND_EXHAUSTED, Verdict


class UsageError(Exception):
    pass


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}")


def _write_out(path: Optional[str], text: str) -> None:
    if path:
        try:
            with open(path, "w", encoding="utf-8") as f:
                f.write(text)
        except OSError as e:
            raise UsageError(f"cannot write {path}: {e}")
    else:
        sys.stdout.write(text)


def _sniff_kind(text: str) -> str:
    for line in text.splitlines():
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        word = body.split()[0]
        return word if word in ("dfa", "dlcs") else "program"
    return "program"


def _load_program(path: str) -> tuple[Program, Optional[Target]]:
    program, inline = parse_program_with_target(_read_text(path))
    diags = validate(program)
    if diags:
        raise UsageError(f"{path}: " + "; ".join(diags))
    return program, inline


def _resolve_target(args, program: Program, inline: Optional[Target]) -> Target:
    if getattr(args, "target", None):
        spec = args.target
        if ":" not in spec:
            raise UsageError("--target expects THREAD:STATE")
        t, s = spec.split(":", 1)
        target = Target(t.strip(), s.strip())
    elif inline is not None:
        target = inline
    else:
        raise UsageError("no target: add a 'target' line to the file or pass --target")
    try:
        program_index(program).target_idx(target)
    except KeyError as e:
        raise UsageError(str(e.args[0]) if e.args else str(e))
    return target


def _exit_for(verdict: Verdict) -> int:
    if verdict.reachable:
        return 1
    if verdict.status == BOUND_EXHAUSTED:
        return 3
    return 0


def _report(verdict: Verdict, k: Optional[int], target: Target,
            witness_steps: list[dict]) -> dict:
    return {
        "reachable": verdict.reachable,
        "k": k,
        "target": {"thread": target.thread, "state": target.state},
        "witness": witness_steps,
        "stats": {
            "states_explored": verdict.stats.states_explored,
            "peak_frontier": verdict.stats.peak_frontier,
            "wall_ms": int(round(verdict.stats.wall_ms)),
        },
    }


def _cmd_parse(args) -> int:
    text = _read_text(args.file)
    kind = _sniff_kind(text)
    if kind == "dfa":
        d = parse_dfa(text)
        diags = validate_dfa(d)
        if diags:
            raise UsageError(f"{args.file}: " + "; ".join(diags))
        out = render_dfa(d)
    elif kind == "dlcs":
        m = parse_dlcs(text)
        diags = validate_dlcs(m)
        if diags:
            raise UsageError(f"{args.file}: " + "; ".join(diags))
        out = render_dlcs(m)
    else:
        program, inline = parse_program_with_target(text)
        diags = validate(program)
        if diags:
            raise UsageError(f"{args.file}: " + "; ".join(diags))
        if inline is not None:
            try:
                program_index(program).target_idx(inline)
            except KeyError as e:
                raise UsageError(str(e.args[0]) if e.args else str(e))
        out = render_program(program, inline)
    _write_out(args.out, out)
    return 0


def _cmd_check(args) -> int:
    if args.k < 1:
        raise UsageError("--k expects a positive context count")
    program, inline = _load_program(args.file)
    target = _resolve_target(args, program, inline)
    if args.threads != 1:
        print("note: the search runs on a single thread; --threads ignored",
              file=sys.stderr)
    max_mb = None
    env = os.environ.get("TSOCBMC_MAX_MB")
    if env:
        try:
            max_mb = float(env)
        except ValueError:
            raise UsageError(f"TSOCBMC_MAX_MB must be a number, got {env!r}")
    verdict = check_reach(program, target, args.k,
                          max_states=args.max_states, max_mb=max_mb)
    steps_json: list[dict] = []
    if verdict.reachable:
        run = concretize_witness(program, verdict.witness)
        m = ab_machine(program, verdict.witness.k)
        for ab_step, c_step in zip(verdict.witness.steps, run.steps):
            steps_json.append({
                "thread": c_step.label.thread,
                "label": c_step.label.render(),
                "effects": [e.render() for e in ab_step.effects],
                "values": {v.render(): val for v, val
                           in m.values_public(c_step.values).items()},
            })
        if args.witness:
            for entry in steps_json:
                print("  " + entry["label"])
    print(f"{verdict.status}: target {target.thread}:{target.state} k={args.k} "
          f"({verdict.stats.states_explored} states explored)")
    if args.out:
        _write_out(args.out, json.dumps(_report(verdict, args.k, target,
                                                steps_json), indent=2) + "\n")
    return _exit_for(verdict)


def _cmd_simulate(args) -> int:
    program, inline = _load_program(args.file)
    target = _resolve_target(args, program, inline)
    try:
        b = Bounds(args.buffer_bound, args.domain_bound, args.depth)
    except ValueError as e:
        raise UsageError(str(e))
    if args.cb is not None:
        if args.cb < 1:
            raise UsageError("--cb expects a positive context count")
        verdict = cb_reach_bounded(program, target, args.cb, b,
                                   max_states=args.max_states)
    else:
        verdict = tso_reach_bounded(program, target, b,
                                    max_states=args.max_states)
    steps_json: list[dict] = []
    if verdict.reachable:
        for label, _cfg in verdict.witness.steps:
            steps_json.append({"thread": label.thread, "label": label.render(),
                               "effects": [], "values": {}})
        if args.witness:
            for entry in steps_json:
                print("  " + entry["label"])
    print(f"{verdict.status}: target {target.thread}:{target.state} "
          f"({verdict.stats.states_explored} states explored)")
    if args.out:
        _write_out(args.out, json.dumps(_report(verdict, args.cb, target,
                                                steps_json), indent=2) + "\n")
    return _exit_for(verdict)


def _cmd_gen(args) -> int:
    if args.kind == "bakery":
        if args.n < 1:
            raise UsageError("--n must be at least 1")
        g = gen_bakery(args.n)
    elif args.kind == "intersection":
        dfas = []
        for path in args.files:
            d = parse_dfa(_read_text(path))
            diags = validate_dfa(d)
            if diags:
                raise UsageError(f"{path}: " + "; ".join(diags))
            dfas.append(d)
        try:
            g = gen_intersection(dfas)
        except ValueError as e:
            raise UsageError(str(e))
    else:
        m = parse_dlcs(_read_text(args.file))
        diags = validate_dlcs(m)
        if diags:
            raise UsageError(f"{args.file}: " + "; ".join(diags))
        try:
            g = gen_dlcs_reduction(m)
        except ValueError as e:
            raise UsageError(str(e))
    _write_out(args.out, f"# suggested contexts: k={g.k_hint}\n" + g.to_text())
    return 0


def _cmd_selftest(args) -> int:
    try:
        results = run_suites(seed=args.seed, scale=args.scale, only=args.suite)
    except ValueError as e:
        raise UsageError(str(e))
    for res in results:
        print(res.line())
        for f in res.failures[:10]:
            print(f"    {f}")
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsocbmc",
        description="Context-bounded reachability for store-buffer programs "
                    "over an infinite data domain.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a model file and print it back "
                                     "in canonical form")
    p.add_argument("file")
    p.add_argument("--out", help="write the canonical form here instead of stdout")
    p.set_defaults(fn=_cmd_parse)

    p = sub.add_parser("check", help="context-bounded reachability through "
                                     "the abstraction")
    p.add_argument("file")
    p.add_argument("--k", type=int, required=True,
                   help="number of contexts to explore")
    p.add_argument("--target", help="THREAD:STATE, overrides the file's target")
    p.add_argument("--witness", action="store_true",
                   help="print the witness steps when reachable")
    p.add_argument("--max-states", type=int, default=2_000_000)
    p.add_argument("--threads", type=int, default=1,
                   help="search worker count (only 1 is used)")
    p.add_argument("--out", help="write a JSON report here")
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("simulate", help="bounded concrete search, for "
                                        "cross-checking")
    p.add_argument("file")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--tso", action="store_true",
                      help="plain bounded search, no context bound")
    mode.add_argument("--cb", type=int, metavar="K",
                      help="context-bounded search with K contexts")
    p.add_argument("--target", help="THREAD:STATE, overrides the file's target")
    p.add_argument("--buffer-bound", type=int, default=2)
    p.add_argument("--domain-bound", type=int, default=3,
                   help="values range over 0..N")
    p.add_argument("--depth", type=int, default=300)
    p.add_argument("--witness", action="store_true")
    p.add_argument("--max-states", type=int, default=1_000_000)
    p.add_argument("--out", help="write a JSON report here")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("gen", help="emit a generated program")
    gsub = p.add_subparsers(dest="kind", required=True)
    g = gsub.add_parser("bakery", help="ticket mutual exclusion with a "
                                       "violation monitor")
    g.add_argument("--n", type=int, required=True, help="number of contenders")
    g.add_argument("--out")
    g = gsub.add_parser("intersection", help="single-thread program whose "
                                             "target is reachable iff the "
                                             "given automata accept a common "
                                             "word")
    g.add_argument("files", nargs="+", metavar="DFA_FILE")
    g.add_argument("--out")
    g = gsub.add_parser("dlcs", help="two-thread program simulating a lossy "
                                     "channel system")
    g.add_argument("file", metavar="DLCS_FILE")
    g.add_argument("--out")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("selftest", help="run the randomized differential suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=0.25,
                   help="multiplier on the per-suite case counts")
    p.add_argument("--suite", help="run a single suite by name")
    p.set_defaults(fn=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return args.fn(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 2
    except InvalidProgramError as e:
        for d in e.diagnostics:
            print(d, file=sys.stderr)
        return 2
    except ConcretizationError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

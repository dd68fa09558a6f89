"""Command-line entry point: check, run, trace and automaton."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .kernel import format_term
from .prelude import TypedProgram, load_program
from .runtime import DEFAULT_MAX_STEPS, POLICIES, make_policy, read_trace, run, trace_records, write_trace
from .syntax import GLPError, parse_goal
from .verifier import contravariance_violations, covariance_violations, sample_semantics, verify_preservation
from .welltyping import check_program, moded_listing

SEED_ENV = "TGLP_SEED"


def _default_seed() -> int:
    try:
        return int(os.environ.get(SEED_ENV, "0"))
    except ValueError:
        return 0


def _emit(args, record: dict, text: str) -> None:
    if args.format == "jsonl":
        print(json.dumps(record, ensure_ascii=False))
    else:
        print(text)


def _load(path: str) -> TypedProgram:
    return load_program(Path(path).read_text(encoding="utf-8"))


def _goals(text: str):
    return parse_goal(text)


def cmd_check(args) -> int:
    p = _load(args.file)
    report = check_program(p, subtyping=not args.strict_duality)
    for d in report.diagnostics:
        print(d.format(args.file), file=sys.stderr)
    for g in report.coverage_gaps:
        decl = p.decls.get(g.procedure)
        line, col = (decl.line or 0, decl.col or 0) if decl else (0, 0)
        where = f"{g.procedure[0]}/{g.procedure[1]}"
        print(f"{args.file}:{line}:{col}: {where}: {g} (path {g.path})", file=sys.stderr)
    if args.dump_moded:
        for line in moded_listing(p, report):
            print(line)
    _emit(args, {"kind": "verdict", "file": args.file, "verdict": report.verdict,
                 "diagnostics": len(report.diagnostics), "coverage_gaps": len(report.coverage_gaps)},
          report.verdict)
    return 0 if report.well_typed else 1


def cmd_run(args) -> int:
    p = _load(args.file)
    goals = _goals(args.goal)
    policy = make_policy(args.policy, args.seed)
    result = run(p, goals, policy, max_steps=args.max_steps, trace=bool(args.trace))
    if args.trace:
        header = {"program": str(Path(args.file).resolve()), "goal": args.goal, "policy": args.policy,
                  "seed": args.seed, "max_steps": args.max_steps}
        write_trace(args.trace, trace_records(result, header))
    final = trace_records(result, {})[-1]
    record = {"kind": "final", "status": result.status, "steps": result.steps,
              "sigma": final["sigma"], "resolvent": final["resolvent"]}
    text = [f"status: {result.status} after {result.steps} steps"]
    text += [f"  {name} := {value}" for name, value in final["sigma"].items()]
    if result.resolvent:
        text.append("resolvent: " + ", ".join(final["resolvent"]))
    if result.failed_goal is not None:
        record["failed_goal"] = format_term(result.failed_goal)
        text.append(f"failed goal: {record['failed_goal']}")
    _emit(args, record, "\n".join(text))
    return 1 if result.status == "failure" else 0


def cmd_trace(args) -> int:
    if args.verify:
        return _trace_verify(args)
    if args.sample is not None:
        return _trace_sample(args)
    print("trace: give --verify TRACE or --sample N", file=sys.stderr)
    return 2


def _trace_verify(args) -> int:
    records = read_trace(args.verify)
    if not records or records[0].get("kind") != "header":
        print(f"{args.verify}: trace has no header line", file=sys.stderr)
        return 2
    h = records[0]
    p = _load(args.file or h["program"])
    goals = _goals(h["goal"])
    rep = verify_preservation(p, goals, make_policy(h["policy"], h["seed"]), max_steps=h["max_steps"],
                              stop_at_first=False)
    if rep.verdict == "ill-typed-initial-goal":
        _emit(args, {"kind": "verdict", "verdict": rep.verdict}, "initial goal is not well-typed")
        return 1
    for v in rep.steps:
        _emit(args, {"kind": "step", "step": v.step, "ok": v.ok, "path": str(v.path) if v.path else None,
                     "part": v.part or None}, str(v))
    _emit(args, {"kind": "verdict", "verdict": rep.verdict, "steps": len(rep.steps)}, f"verdict: {rep.verdict}")
    return 0 if rep.ok else 1


def _trace_sample(args) -> int:
    p = _load(args.file)
    keys = p.user_procedures if not args.procedure else [_procedure_key(args.procedure)]
    bad = 0
    for key in keys:
        if key not in p.decls:
            continue
        proj = sample_semantics(p, key, args.sample, args.depth, seed=args.seed)
        cov = covariance_violations(proj, key, p.automaton)
        con = contravariance_violations(proj, key, p.automaton, args.depth)
        bad += len(cov) + len(con)
        name = f"{key[0]}/{key[1]}"
        _emit(args, {"kind": "sample", "procedure": name, "runs": args.sample, "depth": args.depth,
                     "output_paths": len(proj.outputs), "input_paths": len(proj.inputs),
                     "covariance_violations": [str(x) for x in cov],
                     "contravariance_violations": [str(x) for x in con]},
              f"{name}: {len(proj.outputs)} output paths, {len(proj.inputs)} input paths, "
              f"{len(cov)} covariance violations, {len(con)} contravariance violations")
        if args.format == "text":
            for x in cov:
                print(f"  uncovered output {x}")
            for x in con:
                print(f"  unsampled input {x}")
    return 0 if bad == 0 else 1


def _procedure_key(text: str) -> tuple:
    name, _, arity = text.rpartition("/")
    if not name or not arity.isdigit():
        raise GLPError(f"procedure must be name/arity, got {text!r}")
    return (name, int(arity))


def cmd_automaton(args) -> int:
    p = _load(args.file)
    for line in p.automaton.dump_lines(args.type):
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tglp", description="Type checker and interpreter for typed GLP programs.")
    ap.add_argument("--format", choices=("text", "jsonl"), default="text", help="output format")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="check that a program is well-typed")
    c.add_argument("file")
    c.add_argument("--strict-duality", action="store_true", help="require exact duality between body goals")
    c.add_argument("--dump-moded", action="store_true", help="print the moded clauses")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="run a goal")
    r.add_argument("file")
    r.add_argument("--goal", required=True)
    r.add_argument("--policy", choices=POLICIES, default="round-robin")
    r.add_argument("--seed", type=int, default=_default_seed())
    r.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    r.add_argument("--trace", metavar="PATH")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("trace", help="re-check a recorded run or sample the semantics")
    t.add_argument("file", nargs="?", help="program; defaults to the one named in the trace header")
    t.add_argument("--verify", metavar="TRACE")
    t.add_argument("--sample", type=int, metavar="N")
    t.add_argument("--depth", type=int, default=4, metavar="D")
    t.add_argument("--procedure", metavar="NAME/ARITY")
    t.add_argument("--seed", type=int, default=_default_seed())
    t.set_defaults(func=cmd_trace)

    a = sub.add_parser("automaton", help="dump type automaton transitions")
    a.add_argument("file")
    a.add_argument("--type", metavar="STATE")
    a.set_defaults(func=cmd_automaton)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and 2
    if args.command == "trace" and args.sample is not None and not args.file:
        ap.print_usage(sys.stderr)
        print("tglp trace: --sample needs a program file", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except GLPError as e:
        print(e.format(getattr(args, "file", None) or "<input>"), file=sys.stderr)
        return 2
    except OSError as e:
        print(f"tglp: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

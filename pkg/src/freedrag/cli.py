"""Batch command-line interface.

Subcommands:
    run        execute one instruction file; writes trace.csv, renders, report
    suite      run an instruction suite forward+reverse; writes report files
    ablate     run the built-in standard suite under config overrides
    make-suite write the built-in instruction families to JSON
    serve      start the interactive session service
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from pathlib import Path

from .core import DragTrace
from .engine import RunStatus
from .evaluation import run_suite, write_reports
from .instructions import load_instruction, load_suite, save_suite
from .rendering import write_render
from .session import make_engine
from . import suites

TRACE_COLUMNS = ["k", "point_index", "hx", "hy", "L_in", "L_en", "lambda",
                 "case", "loss", "substeps"]


def write_trace_csv(trace: DragTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for r in trace.rows:
            writer.writerow([r.k, r.point_index, repr(r.hx), repr(r.hy),
                             repr(r.L_in), repr(r.L_en), repr(r.lam),
                             r.case, repr(r.loss), r.substeps])


def cmd_run(args: argparse.Namespace) -> int:
    inst = load_instruction(args.instruction)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    engine = make_engine(inst)
    write_render(engine.backend.generate(engine.state.latent), out / "initial.png")
    status = engine.run()
    write_trace_csv(engine.state.trace, out / "trace.csv")
    write_render(engine.backend.generate(engine.state.latent), out / "final.png")
    report = {
        "name": inst.name, "method": inst.method, "status": status.value,
        "drags": engine.state.drag_index,
        "substeps": engine.state.substeps_total,
        "points": [{"current": [p.current.x, p.current.y],
                    "status": p.status.value} for p in engine.state.points],
        "case_counts": dict(Counter(r.case for r in engine.state.trace.rows)),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"{inst.name or args.instruction}: {status.value} after "
          f"{engine.state.substeps_total} substeps -> {out}")
    return 0 if status is not RunStatus.DIVERGED else 1


def cmd_suite(args: argparse.Namespace) -> int:
    instructions = load_suite(args.instructions)
    reports = run_suite(instructions)
    write_reports(reports, args.out)
    for r in reports:
        md = "-" if r.mean_distance is None else f"{r.mean_distance:.3f}"
        print(f"{r.name}: ccsd={r.ccsd:.5f} md={md} steps={r.steps_used} "
              f"fwd={r.forward_status} rev={r.reverse_status}")
    failed = sum(1 for r in reports if r.error)
    print(f"{len(reports)} instructions, {failed} errors -> {args.out}")
    return 0 if failed == 0 else 1


def cmd_ablate(args: argparse.Namespace) -> int:
    config = {}
    if args.l is not None:
        config["l"] = args.l
    if args.d is not None:
        config["d"] = args.d
    if args.no_template_update:
        config["adaptive_template"] = False
    if args.no_backtracking:
        config["backtracking"] = False
    instructions = suites.standard_suite(args.instances, config=config)
    reports = run_suite(instructions)
    out = Path(args.out)
    write_reports(reports, out)

    case_counts: Counter = Counter()
    statuses: Counter = Counter()
    for inst in instructions:
        engine = make_engine(inst)
        status = engine.run()
        statuses[status.value] += 1
        case_counts.update(r.case for r in engine.state.trace.rows)
    total_cases = sum(case_counts.values()) or 1
    valid = [r.ccsd for r in reports if not r.error]
    stats = {
        "config": config,
        "instances": args.instances,
        "mean_ccsd": sum(valid) / len(valid) if valid else None,
        "case_counts": dict(case_counts),
        "case_fractions": {c: n / total_cases for c, n in sorted(case_counts.items())},
        "statuses": dict(statuses),
    }
    (out / "ablate_stats.json").write_text(json.dumps(stats, indent=2) + "\n")
    print(json.dumps(stats, indent=2))
    return 0


def cmd_make_suite(args: argparse.Namespace) -> int:
    family = {
        "standard": suites.standard_suite,
        "adversarial": suites.adversarial_suite,
        "convergence": suites.convergence_suite,
    }[args.family]
    instructions = family(args.instances, method=args.method)
    save_suite(instructions, args.out)
    print(f"wrote {len(instructions)} {args.family} instructions -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve
    serve(port=args.port, host=args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freedrag",
                                     description="feature dragging on synthetic backends")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one instruction file")
    p.add_argument("--instruction", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run an instruction suite with the symmetric metric")
    p.add_argument("--instructions", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("ablate", help="run the built-in standard suite under overrides")
    p.add_argument("--out", required=True)
    p.add_argument("--l", type=float, default=None)
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--no-template-update", action="store_true")
    p.add_argument("--no-backtracking", action="store_true")
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("make-suite", help="write built-in instruction families to JSON")
    p.add_argument("--family", choices=["standard", "adversarial", "convergence"],
                   required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--method", choices=["freedrag", "pointdrag"], default="freedrag")
    p.set_defaults(func=cmd_make_suite)

    p = sub.add_parser("serve", help="start the session service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line surface: run, replay, check and validate-trace."""

from __future__ import annotations

import argparse
import os
import sys
from typing import TextIO

from .compiler import MonitorPlan, check_line, compile
from .errors import CompileError, ConstraintError, DumpError, MaskError, SourceSyntaxError
from .events import PartialTraceError, validate_grammar
from .mtl import parse_program
from .postmortem import evaluate_postmortem
from .rules import check_types, parse_rules
from .runtime import run_session
from .semantics import Report
from .tracefile import read_dump
from .viz import plot_name, render_csv, render_svg

EXIT_OK = 0
EXIT_FAILS = 1
EXIT_USAGE = 2
EXIT_TARGET = 3


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise _Usage(f"{self.prog}: {message}")


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise _Usage(f"can not read {path}: {e.strerror}") from None


def _load_plan(path: str) -> MonitorPlan:
    return compile(parse_rules(_read(path)))


def _write_plots(report: Report, plot_dir: str | None) -> None:
    if not plot_dir:
        return
    os.makedirs(plot_dir, exist_ok=True)
    for plan, series, spec in report.plots:
        base = os.path.join(plot_dir, plot_name(plan.rule, plan.index))
        render_svg(series, spec, base + ".svg")
        render_csv(series, base + ".csv")


def _print_stats(report: Report, err: TextIO) -> None:
    st = report.stats
    err.write(f"stats events_observed={st.get('events_observed', 0)} "
              f"signals_processed={st.get('signals_processed', 0)}\n")
    for name, r in st.get("rules", {}).items():
        err.write(f"stats rule {name}: " + " ".join(f"{k}={v}" for k, v in r.items()) + "\n")


def _finish(report: Report, args, monitor: TextIO, err: TextIO) -> int:
    for line in report.verdict_lines():
        monitor.write(line + "\n")
    for d in report.diagnostics:
        err.write(f"diagnostic: {d}\n")
    _write_plots(report, args.plot_dir)
    if getattr(args, "stats", False):
        _print_stats(report, err)
    return EXIT_FAILS if args.strict and report.any_fails else EXIT_OK


def cmd_run(args, out: TextIO, err: TextIO) -> int:
    plan = _load_plan(args.rules)
    program = parse_program(_read(args.program))
    if args.input is not None and not os.path.exists(args.input):
        raise _Usage(f"can not read {args.input}: no such file")
    report_fh = open(args.report, "w", encoding="utf-8", newline="\n") if args.report else None
    trace_fh = open(args.trace_out, "w", encoding="utf-8", newline="\n") if args.trace_out else None
    monitor = report_fh or out
    try:
        def on_say(text: str) -> None:
            monitor.write(text + "\n")
        report = run_session(program, plan, args.input, out=out, on_say=on_say,
                             trace_out=trace_fh, full_mask=args.full_mask,
                             logical_clock=args.logical_clock)
        for d in report.target_diagnostics:
            err.write(f"target: {d}\n")
        code = _finish(report, args, monitor, err)
    finally:
        if report_fh:
            report_fh.close()
        if trace_fh:
            trace_fh.close()
    status = report.exit
    if status is not None and not status.ok:
        where = f" at line {status.line}" if status.line else ""
        err.write(f"runtime error{where}: {status.message}\n")
        return EXIT_TARGET
    return code


def cmd_replay(args, out: TextIO, err: TextIO) -> int:
    plan = _load_plan(args.rules)
    report = evaluate_postmortem(read_dump(args.trace), plan)
    monitor = open(args.report, "w", encoding="utf-8", newline="\n") if args.report else out
    try:
        for line in report.says:
            monitor.write(line + "\n")
        return _finish(report, args, monitor, err)
    finally:
        if monitor is not out:
            monitor.close()


def cmd_check(args, out: TextIO, err: TextIO) -> int:
    ruleset = parse_rules(_read(args.rules))
    diags = check_types(ruleset)
    if diags:
        for d in diags:
            err.write(f"{d}\n")
        return EXIT_USAGE
    for entry in compile(ruleset, check=False).entries:
        out.write(check_line(entry) + "\n")
    return EXIT_OK


def cmd_validate_trace(args, out: TextIO, err: TextIO) -> int:
    dump = read_dump(args.trace)
    try:
        violations = validate_grammar(dump.store)
    except PartialTraceError as e:
        raise _Usage(f"{args.trace}: {e}") from None
    for v in violations:
        out.write(f"{v}\n")
    return EXIT_FAILS if violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ufomon", description="Rule-based monitoring of MTL programs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a program under a monitor")
    r.add_argument("--rules", required=True)
    r.add_argument("--program", required=True)
    r.add_argument("--input")
    r.add_argument("--trace-out")
    r.add_argument("--plot-dir")
    r.add_argument("--report", help="write monitor lines here instead of stdout")
    r.add_argument("--full-mask", action="store_true")
    r.add_argument("--strict", action="store_true")
    r.add_argument("--stats", action="store_true")
    r.add_argument("--logical-clock", action="store_true",
                   help="time attributes read the event counter instead of the wall clock")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="evaluate rules post-mortem over a trace dump")
    rp.add_argument("--rules", required=True)
    rp.add_argument("--trace", required=True)
    rp.add_argument("--plot-dir")
    rp.add_argument("--report")
    rp.add_argument("--strict", action="store_true")
    rp.set_defaults(func=cmd_replay)

    c = sub.add_parser("check", help="classify rules and print their event masks")
    c.add_argument("--rules", required=True)
    c.set_defaults(func=cmd_check)

    v = sub.add_parser("validate-trace", help="check a full-mask dump against the event grammar")
    v.add_argument("trace")
    v.set_defaults(func=cmd_validate_trace)
    return p


def main(argv: list[str] | None = None, out: TextIO | None = None,
         err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out, err)
    except _Usage as e:
        err.write(f"{e}\n")
    except (SourceSyntaxError, ConstraintError, CompileError, DumpError, MaskError) as e:
        err.write(f"error: {e}\n")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

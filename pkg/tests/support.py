"""Helpers shared by the corpus-driven tests and the acceptance suite."""

from __future__ import annotations

import fnmatch
import io
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from ufomon.compiler import MonitorPlan, compile
from ufomon.mtl import Program, parse_program
from ufomon.postmortem import evaluate_postmortem
from ufomon.rules import parse_rules
from ufomon.runtime import run_session
from ufomon.semantics import Report
from ufomon.tracefile import parse_dump

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


@lru_cache(maxsize=None)
def manifest() -> dict:
    return json.loads((CORPUS / "manifest.json").read_text())


def triples() -> list[tuple[str, str, str | None]]:
    return [tuple(t) for t in manifest()["triples"]]


@lru_cache(maxsize=None)
def program(name: str) -> Program:
    return parse_program((CORPUS / name).read_text())


@lru_cache(maxsize=None)
def plan(name: str) -> MonitorPlan:
    return compile(parse_rules((CORPUS / name).read_text()))


def corpus_programs() -> list[str]:
    return sorted(p.name for p in CORPUS.glob("*.mtl"))


@dataclass
class Run:
    report: Report
    out: str
    dump: str


def run(prog: str, rules: str, inp: str | None = None, *, full_mask: bool = False,
        dump: bool = False, retain_all: bool = False) -> Run:
    out = io.StringIO()
    trace = io.StringIO() if dump else None
    rep = run_session(program(prog), plan(rules), str(CORPUS / inp) if inp else None,
                      out=out, trace_out=trace, full_mask=full_mask, retain_all=retain_all,
                      logical_clock=True)
    return Run(rep, out.getvalue(), trace.getvalue() if trace else "")


def replay(dump_text: str, rules: str) -> Report:
    return evaluate_postmortem(parse_dump(io.StringIO(dump_text)), plan(rules))


def expected_lines(path: str) -> list[str]:
    lines = (CORPUS / path).read_text().split("\n")
    return [ln for ln in lines if ln and not ln.startswith("#")]


def match_counts(reported: list[str], expected: list[str]) -> tuple[int, int, int]:
    """(true positives, false positives, false negatives) under a one-to-one
    matching of reported lines to glob patterns."""
    left = list(reported)
    tp = 0
    for pat in expected:
        for i, line in enumerate(left):
            if fnmatch.fnmatchcase(line, pat):
                del left[i]
                tp += 1
                break
    return tp, len(left), len(expected) - tp

"""Hybrid monitoring session: one loop over the live signal stream.

Category I rules are decided inline.  Category II keeps a stack of open A
events and a B-list that is destroyed whenever the stack empties; Category
III retains its B-list for the session; Category IV accumulates A and B
lists and runs its nested loops once the program has finished.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, TextIO

from .compiler import MonitorPlan, RulePlan, ShowPlan, Site
from .events import FUNC_CALL, Event, descendants_of
from .mtl.ast import Program
from .mtl.interp import EventMask, Interpreter, Signal
from .mtl.values import snapshot
from .rules.evaluate import MonitorError, evaluate, truthy
from .semantics import SESSION_END, Recorder, Report, RuleEval, _Ctx
from .tracefile import DumpHeader, DumpWriter
from .viz import SeriesBuilder, plot_spec


@dataclass
class _RuleState:
    plan: RulePlan
    ev: RuleEval
    a_types: frozenset[str]
    b_types: frozenset[str]
    scope_key: tuple[str, ...] | None
    a_stack: list[Event] = field(default_factory=list)
    # (event, eids of the A events open when it ended)
    b_list: list[tuple[Event, frozenset[int]]] = field(default_factory=list)
    a_list: list[Event] = field(default_factory=list)
    b_total: int = 0
    peak_stack: int = 0
    peak_b: int = 0
    peak_a: int = 0


@dataclass
class _ShowState:
    plan: ShowPlan
    builder: SeriesBuilder
    types: frozenset[str]
    scope_key: tuple[str, ...] | None


def _types(p) -> frozenset[str]:
    return descendants_of(p.etype) if p is not None else frozenset()


class Session:
    def __init__(self, program: Program, plan: MonitorPlan, input_file: str | None = None, *,
                 out: TextIO | None = None, on_say: Callable[[str], None] | None = None,
                 on_diag: Callable[[str], None] | None = None, trace_out: TextIO | None = None,
                 full_mask: bool = False, retain_all: bool = False, logical_clock: bool = False,
                 input_lines: list[str] | None = None):
        self.plan = plan
        self.retain_all = retain_all
        self.rec = Recorder(on_say, on_diag)
        mask = plan.mask
        if full_mask:
            mask = EventMask.everything(mask.at_exprs)
        self.mask = mask
        self.interp = Interpreter(program, mask, input_file, self._sink, out, input_lines,
                                  logical_clock=logical_clock)
        self.rules = [_RuleState(r, RuleEval(r, plan.site_ids, self.rec), _types(r.outer),
                                 _types(r.inner), r.scope) for r in plan.rules]
        self.shows = [_ShowState(s, SeriesBuilder(s.rule, _Ctx(s.index, plan.site_ids),
                                                  self._show_diag(s)), _types(s.rule.source),
                                 s.scope) for s in plan.shows]
        order = {id(r.plan): r.plan.index for r in self.rules}
        order.update({id(s.plan): s.plan.index for s in self.shows})
        self.entries: list[_RuleState | _ShowState] = sorted(
            self.rules + self.shows, key=lambda e: order[id(e.plan)])
        self.scopes = sorted({e.scope_key for e in self.entries if e.scope_key})
        self.scope_open = {s: 0 for s in self.scopes}
        self.open: dict[int, Event] = {}
        self.sites_begin = [s for s in plan.sites if s.edge == "BEGIN"]
        self.sites_end = [s for s in plan.sites if s.edge == "END"]
        self.site_types = {s.id: descendants_of(s.etype) for s in plan.sites}
        self.events_observed = 0
        self.signals = 0
        self.writer = None
        if trace_out is not None:
            header = DumpHeader(full=mask.full,
                                types=tuple(sorted(mask.types)),
                                attrs={t: tuple(sorted(a)) for t, a in
                                       sorted(mask.attr_demand.items())},
                                sites={s.id: (s.edge, s.etype, s.text) for s in plan.sites})
            self.writer = DumpWriter(trace_out, header)

    # --- helpers ------------------------------------------------------------------
    def _show_diag(self, plan: ShowPlan) -> Callable[[Event, str], None]:
        def diag(ev: Event, text: str) -> None:
            self.rec.diag(ev.end, plan.index, f"show {plan.name}: {text}")
        return diag

    def _within(self, scope) -> bool:
        return not scope or self.scope_open[scope] > 0

    def _run_sites(self, sites: list[Site], ev: Event) -> None:
        for s in sites:
            if ev.etype not in self.site_types[s.id] or not self._within(s.scope):
                continue
            env = {s.metavar: ev}
            ok = True
            for c in s.prefilter:
                try:
                    if not truthy(evaluate(c, env, _NoCtx)):
                        ok = False
                        break
                except MonitorError:
                    ok = False
                    break
            if ok:
                ev.at[s.id] = snapshot(self.interp.eval_in_context(s.node, env))

    # --- the signal loop ---------------------------------------------------------------
    def _sink(self, sig: Signal, interp: Interpreter) -> None:
        self.signals += 1
        if sig.kind == "B":
            self._begin(sig)
        else:
            self._end(sig)

    def _begin(self, sig: Signal) -> None:
        self.events_observed += 1
        ev = Event(sig.eid, sig.etype, sig.counter, sig.parent, attrs=dict(sig.attrs))
        self.open[ev.eid] = ev
        self._run_sites(self.sites_begin, ev)
        if self.writer:
            self.writer.begin(ev.eid, ev.etype, ev.begin, ev.parent, sig.attrs, ev.at)
        for r in self.rules:
            if r.plan.category == "II" and ev.etype in r.a_types and self._within(r.scope_key):
                r.a_stack.append(ev)
                r.peak_stack = max(r.peak_stack, len(r.a_stack))
        if ev.etype == FUNC_CALL or ev.etype in ("input", "output"):
            name = ev.attrs.get("func_name")
            for s in self.scopes:
                if name in s:
                    self.scope_open[s] += 1

    def _end(self, sig: Signal) -> None:
        ev = self.open.pop(sig.eid)
        before = set(ev.at)
        ev.end = sig.counter
        ev.attrs.update(sig.attrs)
        if ev.etype == FUNC_CALL or ev.etype in ("input", "output"):
            name = ev.attrs.get("func_name")
            for s in self.scopes:
                if name in s:
                    self.scope_open[s] -= 1
        self._run_sites(self.sites_end, ev)
        if self.writer:
            self.writer.end(ev.eid, ev.end, sig.attrs,
                            {k: v for k, v in ev.at.items() if k not in before})
        for e in self.entries:
            if isinstance(e, _ShowState):
                if ev.etype in e.types and self._within(e.scope_key):
                    e.builder.add(ev)
            else:
                self._rule_end(e, ev)

    def _rule_end(self, r: _RuleState, ev: Event) -> None:
        cat = r.plan.category
        within = self._within(r.scope_key)
        is_a = ev.etype in r.a_types and within
        is_b = ev.etype in r.b_types and within
        if cat == "I":
            if r.plan.outer is None:
                if is_b:
                    r.b_total += 1
                    r.ev.aggregate_event(ev, ev.end)
            elif is_a:
                r.ev.binding(ev, None, ev.end)
            return
        if is_b:
            r.b_total += 1
        if cat == "II":
            if is_b and self._admit(r, ev):
                anc = frozenset(a.eid for a in r.a_stack if a is not ev)
                if anc:
                    r.b_list.append((ev, anc))
                    r.peak_b = max(r.peak_b, len(r.b_list))
            if is_a and r.a_stack and r.a_stack[-1] is ev:
                r.a_stack.pop()
                cands = [b for b, anc in r.b_list if ev.eid in anc]
                r.ev.binding(ev, cands, ev.end)
                if not r.a_stack and not self.retain_all:
                    r.b_list.clear()  # stack of A is empty: destroy the B-list
        elif cat == "III":
            if is_b and self._admit(r, ev):
                r.b_list.append((ev, frozenset()))
                r.peak_b = max(r.peak_b, len(r.b_list))
            if is_a:
                cands = [b for b, _ in r.b_list if b.end < ev.begin]
                r.ev.binding(ev, cands, ev.end)
        else:
            if is_b and self._admit(r, ev):
                r.b_list.append((ev, frozenset()))
                r.peak_b = max(r.peak_b, len(r.b_list))
            if is_a:
                r.a_list.append(ev)
                r.peak_a = max(r.peak_a, len(r.a_list))

    def _admit(self, r: _RuleState, b: Event) -> bool:
        """Inner-pattern conjuncts that only look at b decide admission early."""
        env = {r.plan.inner.metavar: b}
        for c in r.plan.inner_prefilter:
            try:
                if not truthy(evaluate(c, env, _NoCtx)):
                    return False
            except MonitorError:
                return True  # keep it; full evaluation will report the error
        return True

    # --- session end ----------------------------------------------------------------
    def _finish(self) -> None:
        for e in self.entries:
            if isinstance(e, _ShowState):
                continue
            if e.plan.category == "IV":
                rng = e.plan.inner_range
                for a in e.a_list:
                    if rng.kind == "FOLLOWING_PATH":
                        cands = [b for b, _ in e.b_list if b.begin > a.end]
                    else:
                        cands = [b for b, _ in e.b_list]
                    e.ev.binding(a, cands, SESSION_END)
            e.ev.finish()

    def run(self) -> Report:
        status = self.interp.run()
        self._finish()
        stats = {
            "events_observed": self.events_observed,
            "signals_processed": self.signals,
            "rules": {r.plan.name: {"category": r.plan.category, "b_events": r.b_total,
                                    "peak_a_stack": r.peak_stack, "peak_b_list": r.peak_b,
                                    "peak_a_list": r.peak_a} for r in self.rules},
        }
        plots = []
        for s in self.shows:
            series = s.builder.series
            plots.append((s.plan, series, plot_spec(s.plan.rule, series)))
        report = Report(self.rec.say_lines(), [(r.plan.name, r.ev.verdict) for r in self.rules],
                        self.rec.diag_lines(), stats, plots, status)
        # at-expression errors happen on the target side, so they are not part of
        # the monitor report that a replay reproduces
        report.target_diagnostics = list(self.interp.diagnostics)
        return report


class _NoCtxType:
    def at_value(self, node, ev) -> Any:
        raise MonitorError("at-expression inside a prefilter")

    def aggregate(self, node, env) -> Any:
        raise MonitorError("aggregate inside a prefilter")


_NoCtx = _NoCtxType()


def run_session(program: Program, plan: MonitorPlan, input_file: str | None = None,
                **kwargs) -> Report:
    return Session(program, plan, input_file, **kwargs).run()


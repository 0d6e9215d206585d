"""Post-mortem reference evaluation over a complete trace dump.

Nothing here is incremental: the whole DAG is materialized and every
binding is enumerated by brute force from the trace relations.
"""

from __future__ import annotations

from .compiler import MonitorPlan, compile
from .errors import MaskError
from .events import Event, TraceStore, includes, lineage, precedes, subtype_of
from .rules.ast import Pattern, Range, RuleSet
from .semantics import SESSION_END, Recorder, Report, RuleEval, _Ctx, in_scope
from .tracefile import Dump, read_dump
from .viz import SeriesBuilder, plot_spec


def check_mask(dump: Dump, plan: MonitorPlan) -> None:
    h = dump.header
    missing: list[str] = []
    for s in plan.sites:
        if h.sites.get(s.id) != (s.edge, s.etype, s.text):
            missing.append(f"at-expression site {s.id} ({s.edge} {s.etype} {s.text!r})")
    if not h.full:
        for t in sorted(plan.mask.types):
            if not any(subtype_of(t, u) for u in h.types):
                missing.append(f"event type {t}")
        for t, attrs in sorted(plan.mask.attr_demand.items()):
            have = set()
            for u in lineage(t):
                have.update(h.attrs.get(u, ()))
            for a in sorted(attrs - have):
                missing.append(f"attribute {a} of {t}")
    if missing:
        raise MaskError("trace dump lacks " + ", ".join(missing))


def _in_range(store: TraceStore, rng: Range, a: Event, b: Event) -> bool:
    if rng.kind == "PROG_EX":
        return True
    if rng.kind == "IN":
        return includes(store, a, b)
    if rng.kind == "PREV_PATH":
        return precedes(b, a)
    return b.begin > a.end


def evaluate_postmortem(dump: Dump | str, ruleset: RuleSet | MonitorPlan) -> Report:
    if isinstance(dump, str):
        dump = read_dump(dump)
    plan = ruleset if isinstance(ruleset, MonitorPlan) else compile(ruleset)
    check_mask(dump, plan)
    store = dump.store
    by_end = sorted(store.events, key=lambda e: e.end)

    def parent_of(eid: int) -> Event | None:
        return store.by_eid.get(eid)

    def matches(p: Pattern, scope) -> list[Event]:
        return [e for e in by_end if subtype_of(e.etype, p.etype) and in_scope(e, parent_of, scope)]

    rec = Recorder()
    verdicts = []
    plots = []
    for entry in plan.entries:
        if hasattr(entry, "category"):
            r = RuleEval(entry, plan.site_ids, rec)
            if entry.outer is None:
                if entry.aggregate is not None:
                    for b in matches(entry.inner, entry.scope):
                        r.aggregate_event(b, b.end)
            else:
                inner = matches(entry.inner, entry.scope) if entry.inner is not None else None
                for a in matches(entry.outer, entry.scope):
                    cands = None
                    if inner is not None:
                        cands = [b for b in inner if _in_range(store, entry.inner_range, a, b)]
                    key = SESSION_END if entry.deferred else a.end
                    r.binding(a, cands, key)
            verdicts.append((entry.name, r.finish()))
        else:
            def diag(ev, text, entry=entry):
                rec.diag(ev.end, entry.index, f"show {entry.name}: {text}")
            b = SeriesBuilder(entry.rule, _Ctx(entry.index, plan.site_ids), diag)
            for ev in matches(entry.rule.source, entry.scope):
                b.add(ev)
            plots.append((entry, b.series, plot_spec(entry.rule, b.series)))
    stats = {"events_observed": len(store), "signals_processed": dump.signals}
    return Report(rec.say_lines(), verdicts, rec.diag_lines(), stats, plots)

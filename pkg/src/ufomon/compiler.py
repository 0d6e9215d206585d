"""Monitor compiler: classifies rules, derives the event mask and builds the
plan executed by the single-loop runtime."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import CompileError
from .events import BEGIN_ATTRS, FUNC_CALL, PROG_EX, canonical_attr
from .mtl.ast import Node as MtlNode
from .mtl.interp import AtSite, EventMask
from .rules.ast import (Aggregate, AssertionRule, AtValue, Attr, Expr, MetaRef, Pattern, Range,
                        Reduction, RuleSet, ShowRule, aggregates, conjuncts, metavars_used,
                        rule_exprs, walk)
from .rules.checker import at_expression, check_types, field_refs, rule_name
from .rules.printer import expr_text, range_text

CATEGORIES = ("I", "II", "III", "IV")
POLICIES = {"I": "none", "II": "B-list-with-disposal", "III": "B-list-retained",
            "IV": "A-and-B-retained"}
_RANGE_CATEGORY = {"IN": "II", "PREV_PATH": "III", "FOLLOWING_PATH": "IV", "PROG_EX": "IV"}


def _inner(rule: AssertionRule) -> tuple[str | None, Pattern | None, Range | None, Aggregate | None]:
    """The nested binding of a rule: a second quantifier or an aggregate under one."""
    aggs = aggregates(rule)
    if len(rule.quantifiers) == 2:
        q = rule.quantifiers[1]
        return "quantifier", q.pattern, q.range, None
    if aggs:
        a = aggs[0]
        return "aggregate", a.pattern, a.range, a
    return None, None, None, None


def classify(rule: AssertionRule) -> str:
    kind, _pat, rng, _agg = _inner(rule)
    if kind is None or not rule.quantifiers:
        return "I"
    return _RANGE_CATEGORY[rng.kind]


# --- sites -------------------------------------------------------------------

@dataclass(frozen=True)
class Site:
    """An at-expression evaluated by the runtime at one edge of a pattern's
    events.  ``prefilter`` holds the guard conjuncts decidable at that edge."""
    id: int
    rule: int
    metavar: str
    edge: str
    etype: str
    text: str
    prefilter: tuple[Expr, ...]
    scope: tuple[str, ...] | None

    @property
    def node(self) -> MtlNode:
        return at_expression(self.text)

    def at_site(self) -> AtSite:
        return AtSite(self.id, self.edge, self.etype, self.text)


def edge_prefilter(p: Pattern, edge: str) -> tuple[Expr, ...]:
    out = []
    for c in conjuncts(p.guard):
        if metavars_used(c) - {p.metavar}:
            continue
        nodes = list(walk(c))
        if any(isinstance(x, (AtValue, Aggregate, Reduction)) for x in nodes):
            continue
        if edge == "BEGIN" and any(isinstance(x, Attr) and x.attr not in BEGIN_ATTRS
                                   for x in nodes):
            continue
        out.append(c)
    return tuple(out)


def _patterns(rule) -> list[Pattern]:
    if isinstance(rule, ShowRule):
        return [rule.source]
    out = [q.pattern for q in rule.quantifiers]
    out += [a.pattern for a in aggregates(rule)]
    return out


def _show_exprs(rule: ShowRule) -> list[Expr]:
    out = [rule.source.guard] if rule.source.guard is not None else []
    axes = [rule.x_axis] + [a for s in rule.sets for a in (s.x_axis, s.y_axis)]
    out += [a.expr for a in axes if a is not None]
    return out


def _exprs(rule) -> list[Expr]:
    if isinstance(rule, ShowRule):
        return _show_exprs(rule)
    out = list(rule_exprs(rule))
    return out


# --- mask derivation -----------------------------------------------------------

@dataclass
class _Demand:
    types: list[str] = field(default_factory=list)
    by_type: dict[str, list[str]] = field(default_factory=dict)
    flat: list[str] = field(default_factory=list)

    def add_type(self, t: str) -> None:
        if t not in self.types:
            self.types.append(t)

    def add(self, t: str, attr: str) -> None:
        lst = self.by_type.setdefault(t, [])
        if attr not in lst:
            lst.append(attr)
        if attr not in self.flat:
            self.flat.append(attr)


def _rule_demand(rule, scope: tuple[str, ...] | None) -> _Demand:
    d = _Demand()
    pats = _patterns(rule)
    types = {p.metavar: p.etype for p in pats}
    for p in pats:
        d.add_type(p.etype)

    def visit(e: Expr) -> None:
        for x in walk(e):
            if isinstance(x, Attr) and x.metavar in types:
                d.add(types[x.metavar], x.attr)
            elif isinstance(x, AtValue) and x.metavar in types:
                for f in field_refs(x.text):
                    a = canonical_attr(f.attr)
                    if a is not None and f.obj in types:
                        d.add(types[f.obj], a)
            elif isinstance(x, Aggregate) and x.reducer == "SUM" and x.apply is None:
                d.add(x.pattern.etype, "value")

    for e in _exprs(rule):
        visit(e)
    say_items = [] if isinstance(rule, ShowRule) else [
        i for s in rule.on_success + rule.on_fail for i in s.items]
    for item in say_items:
        # an event rendered in a SAY line shows its location
        if isinstance(item, MetaRef) and item.name in types:
            d.add(types[item.name], "line_num")
            d.add(types[item.name], "col_num")
    if scope:
        d.add_type(FUNC_CALL)
        d.add(FUNC_CALL, "func_name")
    return d


def derive_event_mask(ruleset: RuleSet) -> EventMask:
    return compile(ruleset, check=False).mask


# --- plans -------------------------------------------------------------------------

@dataclass
class RulePlan:
    index: int
    name: str
    rule: AssertionRule
    scope: tuple[str, ...] | None
    category: str
    outer: Pattern | None
    inner_kind: str | None  # "quantifier" | "aggregate" | None
    inner: Pattern | None
    inner_range: Range | None
    aggregate: Aggregate | None
    types: tuple[str, ...]
    attrs: tuple[str, ...]
    sites: tuple[Site, ...]
    # guard conjuncts of the inner pattern that only need the inner event
    inner_prefilter: tuple[Expr, ...] = ()

    @property
    def policy(self) -> str:
        return POLICIES[self.category]

    @property
    def deferred(self) -> bool:
        """Per-binding work waits for the end of the session."""
        return self.category == "IV"

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule": self.name, "index": self.index, "category": self.category,
            "policy": self.policy, "scope": list(self.scope) if self.scope else None,
            "outer": _pat_dict(self.outer), "inner_kind": self.inner_kind,
            "inner": _pat_dict(self.inner),
            "inner_range": range_text(self.inner_range) if self.inner_range else None,
            "types": list(self.types), "attrs": list(self.attrs),
            "sites": [_site_dict(s) for s in self.sites],
            "postmortem": self.deferred,
        }


@dataclass
class ShowPlan:
    index: int
    name: str
    rule: ShowRule
    scope: tuple[str, ...] | None
    types: tuple[str, ...]
    attrs: tuple[str, ...]
    sites: tuple[Site, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"show": self.name, "index": self.index, "kind": self.rule.kind,
                "scope": list(self.scope) if self.scope else None,
                "source": _pat_dict(self.rule.source), "types": list(self.types),
                "attrs": list(self.attrs), "sites": [_site_dict(s) for s in self.sites]}


def _pat_dict(p: Pattern | None) -> dict | None:
    if p is None:
        return None
    return {"metavar": p.metavar, "etype": p.etype,
            "guard": expr_text(p.guard) if p.guard is not None else None}


def _site_dict(s: Site) -> dict:
    return {"id": s.id, "metavar": s.metavar, "edge": s.edge, "etype": s.etype, "text": s.text}


@dataclass
class MonitorPlan:
    ruleset: RuleSet
    rules: list[RulePlan]
    shows: list[ShowPlan]
    sites: tuple[Site, ...]
    mask: EventMask
    # name of each site-owning AtValue, keyed by (rule index, metavar, edge, text)
    site_ids: dict[tuple[int, str, str, str], int]

    @property
    def entries(self) -> list[RulePlan | ShowPlan]:
        return sorted(self.rules + self.shows, key=lambda p: p.index)

    def to_dict(self) -> dict[str, Any]:
        m = self.mask
        return {
            "entries": [p.to_dict() for p in self.entries],
            "mask": {"types": sorted(m.types),
                     "attrs": {t: sorted(a) for t, a in sorted(m.attr_demand.items())},
                     "sites": [s.id for s in self.sites]},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def _sites_for(rule, index: int, scope, next_id: int) -> list[Site]:
    pats = {p.metavar: p for p in _patterns(rule)}
    out: list[Site] = []
    seen: set[tuple[str, str, str]] = set()
    for e in _exprs(rule):
        for x in walk(e):
            if isinstance(x, AtValue) and x.metavar in pats:
                key = (x.metavar, x.edge, x.text)
                if key in seen:
                    continue
                seen.add(key)
                p = pats[x.metavar]
                out.append(Site(next_id + len(out), index, x.metavar, x.edge, p.etype, x.text,
                                edge_prefilter(p, x.edge), scope))
    return out


def check_line(plan: RulePlan | ShowPlan) -> str:
    types = ",".join(plan.types)
    attrs = ",".join(plan.attrs)
    if isinstance(plan, ShowPlan):
        return f"show {plan.name}: types={{{types}}} attrs={{{attrs}}}"
    return f"rule {plan.name}: category={plan.category} types={{{types}}} attrs={{{attrs}}}"


def compile(ruleset: RuleSet, check: bool = True) -> MonitorPlan:  # noqa: A001
    if check:
        diags = check_types(ruleset)
        if diags:
            raise CompileError("; ".join(str(d) for d in diags))
    rules: list[RulePlan] = []
    shows: list[ShowPlan] = []
    sites: list[Site] = []
    session = _Demand()
    for k, (rule, scope) in enumerate(ruleset.flat(), 1):
        d = _rule_demand(rule, scope)
        for t in d.types:
            session.add_type(t)
        for t, attrs in d.by_type.items():
            for a in attrs:
                session.add(t, a)
        rsites = _sites_for(rule, k, scope, len(sites) + 1)
        sites += rsites
        name = rule_name(rule, k)
        if isinstance(rule, ShowRule):
            shows.append(ShowPlan(k, name, rule, scope, tuple(d.types), tuple(d.flat),
                                  tuple(rsites)))
            continue
        kind, inner, rng, agg = _inner(rule)
        outer = rule.quantifiers[0].pattern if rule.quantifiers else None
        if outer is None and kind == "aggregate":
            # a lone aggregate binds its events the way a single quantifier would
            kind, inner, rng = "aggregate", agg.pattern, agg.range
        rules.append(RulePlan(
            k, name, rule, scope, classify(rule), outer, kind, inner, rng, agg,
            tuple(d.types), tuple(d.flat), tuple(rsites),
            edge_prefilter(inner, "END") if inner is not None else ()))
    for r in rules:
        if r.category not in CATEGORIES:
            raise CompileError(f"rule {r.name}: no category")
        if r.category != "I" and r.outer is None:
            raise CompileError(f"rule {r.name}: nested range without an outer quantifier")
    mask = EventMask(frozenset(session.types) | {PROG_EX},
                     {t: frozenset(a) for t, a in session.by_type.items()},
                     tuple(s.at_site() for s in sites))
    site_ids = {(s.rule, s.metavar, s.edge, s.text): s.id for s in sites}
    return MonitorPlan(ruleset, rules, shows, tuple(sites), mask, site_ids)

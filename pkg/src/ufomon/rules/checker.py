"""Static checks: attribute compatibility, metavariable scoping, functions."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

from ..events import attrs_for, canonical_attr
from ..mtl import ast as mtl
from ..mtl.parser import parse_expression
from .ast import (Aggregate, AssertionRule, AtValue, Attr, Axis, Call, Expr, MetaRef, Pattern,
                  RuleSet, ShowRule, children, metavars_used)

FUNCTIONS = {"abs": 1, "sqrt": 1}


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: rule {self.rule}: {self.message}"


@lru_cache(maxsize=None)
def at_expression(text: str) -> mtl.Node:
    return parse_expression(text)


def mtl_nodes(n: mtl.Node) -> Iterator[mtl.Node]:
    yield n
    for f in dataclasses.fields(n):
        v = getattr(n, f.name)
        if isinstance(v, mtl.Node):
            yield from mtl_nodes(v)
        elif isinstance(v, tuple):
            for x in v:
                if isinstance(x, mtl.Node):
                    yield from mtl_nodes(x)


def field_refs(text: str) -> list[mtl.Field]:
    """``name.attr`` references inside an at-expression."""
    return [x for x in mtl_nodes(at_expression(text)) if isinstance(x, mtl.Field)]


def rule_name(rule, k: int) -> str:
    return rule.label or f"<anon-{k}>"


class _Checker:
    def __init__(self, name: str):
        self.name = name
        self.out: list[Diagnostic] = []

    def diag(self, node, msg: str) -> None:
        self.out.append(Diagnostic(self.name, getattr(node, "line", 0), getattr(node, "col", 0), msg))

    def attr_ok(self, node, metavar: str, attr: str, scope: dict[str, str]) -> None:
        etype = scope[metavar]
        if attr not in attrs_for(etype):
            self.diag(node, f"attribute {attr.upper()} is not defined for {etype} events "
                            f"(metavariable {metavar})")

    def expr(self, e: Expr | None, scope: dict[str, str]) -> None:
        if e is None:
            return
        match e:
            case MetaRef(name=n):
                if n not in scope:
                    self.diag(e, f"unbound metavariable {n!r}")
                return
            case Attr(metavar=m, attr=a):
                if m not in scope:
                    self.diag(e, f"unbound metavariable {m!r}")
                else:
                    self.attr_ok(e, m, a, scope)
                return
            case AtValue(metavar=m, text=t):
                if m not in scope:
                    self.diag(e, f"unbound metavariable {m!r}")
                for f in field_refs(t):
                    attr = canonical_attr(f.attr)
                    if f.obj != m:
                        # it runs at an edge of m, when other bindings are not yet known
                        self.diag(e, f"at-expression of {m} can only refer to {m}, not {f.obj!r}")
                    elif attr is None:
                        self.diag(e, f"at-expression uses unknown attribute {f.attr!r}")
                    else:
                        self.attr_ok(e, f.obj, attr, scope)
                return
            case Call(name=n, args=args):
                if n not in FUNCTIONS:
                    self.diag(e, f"unknown function {n!r}")
                elif len(args) != FUNCTIONS[n]:
                    self.diag(e, f"{n}() takes {FUNCTIONS[n]} argument(s), got {len(args)}")
            case Aggregate(pattern=p, range=r, apply=ap):
                self.range(e, r, scope)
                inner = self.pattern(p, scope)
                self.expr(ap, inner)
                if e.reducer == "SUM" and ap is None:
                    # a bare SUM adds up the matched events' values
                    self.attr_ok(e, p.metavar, "value", inner)
                return
        for c in children(e):
            self.expr(c, scope)

    def range(self, node, r, scope: dict[str, str]) -> None:
        if r.kind != "PROG_EX" and r.metavar not in scope:
            self.diag(node, f"range refers to unbound metavariable {r.metavar!r}")

    def pattern(self, p: Pattern, scope: dict[str, str]) -> dict[str, str]:
        inner = {**scope, p.metavar: p.etype}
        self.expr(p.guard, inner)
        return inner


def _check_assertion(rule: AssertionRule, c: _Checker) -> None:
    scope: dict[str, str] = {}
    for q in rule.quantifiers:
        c.range(q.pattern, q.range, scope)
        scope = c.pattern(q.pattern, scope)
    c.expr(rule.body, scope)
    foreach_success = (rule.success_explicit and rule.quantifiers
                       and rule.quantifiers[0].kind == "FOREACH")
    for say in rule.on_success:
        for item in say.items:
            if foreach_success:
                bound = {m for m in metavars_used(item) if m in scope}
                outer = {m for m in bound if not _inside_aggregate(item, m)}
                if outer:
                    c.diag(item, "WHEN SUCCEEDS of FOREACH can not refer to metavariable "
                                 f"{sorted(outer)[0]!r}: no single binding is distinguished")
                    continue
            c.expr(item, scope)
    for say in rule.on_fail:
        for item in say.items:
            c.expr(item, scope)


def _inside_aggregate(e: Expr, m: str) -> bool:
    """True when every use of ``m`` in ``e`` is bound by an aggregate inside it."""
    match e:
        case Aggregate(pattern=p) if p.metavar == m:
            return True
        case MetaRef(name=n) if n == m:
            return False
        case Attr(metavar=x) | AtValue(metavar=x) if x == m:
            return False
    return all(_inside_aggregate(ch, m) for ch in children(e))


def _check_axis(a: Axis | None, scope: dict[str, str], c: _Checker, show: ShowRule) -> None:
    if a is None:
        return
    if a.kind == "ORD":
        if not (isinstance(a.expr, MetaRef) and a.expr.name == show.source.metavar):
            c.diag(show, "ORD() takes the SOURCE metavariable")
        return
    c.expr(a.expr, scope)


def _check_show(rule: ShowRule, c: _Checker) -> None:
    scope = c.pattern(rule.source, {})
    _check_axis(rule.x_axis, scope, c, rule)
    for s in rule.sets:
        _check_axis(s.x_axis, scope, c, rule)
        _check_axis(s.y_axis, scope, c, rule)
    for side, name in ((rule.x_side, "X"), (rule.y_side, "Y")):
        if (side.interval_begin is not None and side.interval_end is not None
                and side.interval_end <= side.interval_begin):
            c.diag(rule, f"{name}_SIDEBAR interval is empty")


def check_types(ruleset: RuleSet) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for k, (rule, _scope) in enumerate(ruleset.flat(), 1):
        c = _Checker(rule_name(rule, k))
        if isinstance(rule, ShowRule):
            _check_show(rule, c)
        else:
            _check_assertion(rule, c)
        out.extend(c.out)
    return out

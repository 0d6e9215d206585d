"""AST for the rule language.

Nodes compare structurally; source positions are carried but excluded from
equality so a pretty-printed and re-parsed rule set compares equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Union

_pos = dict(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    value: Any
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class MetaRef:
    """A bare name: a metavariable when bound by a pattern, else an error."""
    name: str
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class Attr:
    metavar: str
    attr: str  # canonical stored name, e.g. "func_name", "paramlist"
    index: int | None = None
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class AtValue:
    """``m.VALUE_AT_BEGIN(expr)`` / ``m.VALUE_AT_END(expr)``; ``text`` is the
    canonical rendering of the embedded target-language expression."""
    metavar: str
    edge: str  # "BEGIN" | "END"
    text: str
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class Unary:
    op: str  # "-" | "NOT"
    operand: "Expr"
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / DIV MOD
    left: "Expr"
    right: "Expr"
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class Compare:
    op: str  # == ~= < <= > >=
    left: "Expr"
    right: "Expr"
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class BoolOp:
    op: str  # AND | OR
    left: "Expr"
    right: "Expr"
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class Range:
    kind: str  # PROG_EX | IN | PREV_PATH | FOLLOWING_PATH
    metavar: str | None = None


PROG_EX_RANGE = Range("PROG_EX")


@dataclass(frozen=True)
class Pattern:
    metavar: str
    etype: str
    guard: "Expr | None" = None
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class Aggregate:
    reducer: str  # CARD | SUM
    pattern: Pattern
    range: Range = PROG_EX_RANGE
    apply: "Expr | None" = None
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class Reduction:
    """Desugared fold: AND/OR/+ of ``apply`` over the bindings of a pattern."""
    op: str  # AND | OR | +
    pattern: Pattern
    range: Range
    apply: "Expr"


Expr = Union[Const, MetaRef, Attr, AtValue, Unary, BinOp, Compare, BoolOp, Call, Aggregate,
             Reduction]


@dataclass(frozen=True)
class Quantifier:
    kind: str  # FOREACH | FIND
    pattern: Pattern
    range: Range = PROG_EX_RANGE


@dataclass(frozen=True)
class Say:
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class AssertionRule:
    label: str | None
    quantifiers: tuple[Quantifier, ...]
    body: Expr | None
    on_success: tuple[Say, ...] = ()
    on_fail: tuple[Say, ...] = ()
    # WHEN SUCCEEDS written out, as opposed to bare SAY clauses
    success_explicit: bool = False
    line: int = field(**_pos)
    col: int = field(**_pos)


@dataclass(frozen=True)
class Sidebar:
    scaling: str = "linear"
    ticknum: int = 5
    moving: str = "rescale"
    interval_begin: float | None = None
    interval_end: float | None = None
    text_label: str | None = None


@dataclass(frozen=True)
class Axis:
    kind: str  # ORD | ADD | EXPR
    expr: Expr


@dataclass(frozen=True)
class SetSpec:
    y_axis: Axis
    color: str | None = None
    foreground_color: str | None = None
    shape: str | None = None
    x_axis: Axis | None = None
    connected: bool | None = None
    # order in which COLOR / FOREGROUND_COLOR appeared; the last one wins
    color_last: str | None = None

    @property
    def mark_color(self) -> str:
        if self.color_last == "foreground_color" and self.foreground_color:
            return self.foreground_color
        return self.color or self.foreground_color or "black"


@dataclass(frozen=True)
class ShowRule:
    label: str | None
    kind: str  # POINT_PLOT | BAR_CHART
    title: str
    window: tuple[int, int] | None
    x_side: Sidebar
    y_side: Sidebar
    source: Pattern
    x_axis: Axis | None
    sets: tuple[SetSpec, ...]
    line: int = field(**_pos)
    col: int = field(**_pos)


Rule = Union[AssertionRule, ShowRule]


@dataclass(frozen=True)
class WithinGroup:
    procs: tuple[str, ...]
    rules: tuple[Rule, ...]


@dataclass(frozen=True)
class RuleSet:
    items: tuple[Rule | WithinGroup, ...] = ()

    def flat(self) -> list[tuple[Rule, tuple[str, ...] | None]]:
        """Every rule in order, with the WITHIN scope that applies to it."""
        out: list[tuple[Rule, tuple[str, ...] | None]] = []
        for item in self.items:
            if isinstance(item, WithinGroup):
                out.extend((r, item.procs) for r in item.rules)
            else:
                out.append((item, None))
        return out


# --- traversal helpers ----------------------------------------------------

def children(e: Expr) -> Iterator[Expr]:
    match e:
        case Unary(operand=x):
            yield x
        case BinOp(left=l, right=r) | Compare(left=l, right=r) | BoolOp(left=l, right=r):
            yield l
            yield r
        case Call(args=args):
            yield from args
        case Aggregate(pattern=p, apply=a) | Reduction(pattern=p, apply=a):
            if p.guard is not None:
                yield p.guard
            if a is not None:
                yield a


def walk(e: Expr | None) -> Iterator[Expr]:
    if e is None:
        return
    stack = [e]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(reversed(list(children(x))))


def rule_exprs(rule: AssertionRule) -> Iterator[Expr]:
    """Top-level expressions of an assertion rule (guards, body, SAY items)."""
    for q in rule.quantifiers:
        if q.pattern.guard is not None:
            yield q.pattern.guard
    if rule.body is not None:
        yield rule.body
    for say in rule.on_success + rule.on_fail:
        yield from say.items


def aggregates(rule: AssertionRule) -> list[Aggregate]:
    return [x for e in rule_exprs(rule) for x in walk(e) if isinstance(x, Aggregate)]


def conjuncts(e: Expr | None) -> list[Expr]:
    if e is None:
        return []
    if isinstance(e, BoolOp) and e.op == "AND":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def metavars_used(e: Expr | None) -> set[str]:
    out = set()
    for x in walk(e):
        if isinstance(x, (Attr, AtValue)):
            out.add(x.metavar)
        elif isinstance(x, MetaRef):
            out.add(x.name)
    return out

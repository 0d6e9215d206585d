"""Rewrite quantifiers and aggregates into explicit reductions.

FOREACH folds with AND, FIND with OR, CARD and SUM with ``+``.  The unit of
each fold (TRUE, FALSE, 0) is its value over an empty binding set.
"""

from __future__ import annotations

from dataclasses import replace

from .ast import (Aggregate, AssertionRule, Attr, BinOp, BoolOp, Call, Compare, Const, Expr,
                  Pattern, Reduction, Unary)

QUANTIFIER_OPS = {"FOREACH": "AND", "FIND": "OR"}
UNITS = {"AND": True, "OR": False, "+": 0}


def desugar_expr(e: Expr | None) -> Expr | None:
    match e:
        case None:
            return None
        case Aggregate(reducer=red, pattern=p, range=r, apply=ap):
            if red == "CARD":
                body: Expr = Const(1)  # CARD counts matches; any APPLY is ignored
            elif ap is None:
                body = Attr(p.metavar, "value")
            else:
                body = desugar_expr(ap)
            return Reduction("+", _pattern(p), r, body)
        case Reduction(pattern=p, apply=ap):
            return replace(e, pattern=_pattern(p), apply=desugar_expr(ap))
        case Unary(operand=x):
            return replace(e, operand=desugar_expr(x))
        case BinOp(left=l, right=r) | Compare(left=l, right=r) | BoolOp(left=l, right=r):
            return replace(e, left=desugar_expr(l), right=desugar_expr(r))
        case Call(args=args):
            return replace(e, args=tuple(desugar_expr(a) for a in args))
    return e


def _pattern(p: Pattern) -> Pattern:
    return replace(p, guard=desugar_expr(p.guard)) if p.guard is not None else p


def desugar(rule: AssertionRule | Expr) -> Expr:
    """The reduction form of a rule; applying it to a reduction form is a no-op."""
    if not isinstance(rule, AssertionRule):
        return desugar_expr(rule)
    form: Expr = desugar_expr(rule.body) if rule.body is not None else Const(True)
    for q in reversed(rule.quantifiers):
        form = Reduction(QUANTIFIER_OPS[q.kind], _pattern(q.pattern), q.range, form)
    return form

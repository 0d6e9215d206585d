"""Evaluation of rule expressions against bound events.

The binding machinery (which events an aggregate ranges over, where
at-expression results live) is supplied by the caller through a
``Context``, so the hybrid runtime and the post-mortem oracle share the same
expression semantics.
"""

from __future__ import annotations

import math
from typing import Any, Protocol

from ..events import Event
from ..mtl.values import FAIL, values_equal
from .ast import (Aggregate, AtValue, Attr, BinOp, BoolOp, Call, Compare, Const, Expr, MetaRef,
                  Reduction, Unary)


class MonitorError(Exception):
    """A rule expression could not be evaluated (type error, bad division...)."""


class Context(Protocol):
    def at_value(self, node: AtValue, ev: Event) -> Any: ...

    def aggregate(self, node: Aggregate | Reduction, env: dict[str, Event]) -> Any: ...


def truthy(v: Any) -> bool:
    return v is not FAIL and v is not False


def _num(v: Any, what: str) -> int | float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MonitorError(f"{what}: numeric operand expected, got {_kind(v)}")
    return v


def _kind(v: Any) -> str:
    if v is None:
        return "null"
    if isinstance(v, Event):
        return "event"
    return type(v).__name__


def _idiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _arith(op: str, a: Any, b: Any) -> Any:
    x, y = _num(a, op), _num(b, op)
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    if y == 0:
        raise MonitorError(f"{op}: division by zero")
    ints = isinstance(x, int) and isinstance(y, int)
    if op in ("/", "DIV"):
        if ints:
            return _idiv(x, y)
        return x / y if op == "/" else float(math.trunc(x / y))
    # MOD
    if ints:
        return x - y * _idiv(x, y)
    return math.fmod(x, y)


def _equal(a: Any, b: Any) -> bool:
    if isinstance(a, Event) or isinstance(b, Event):
        return a is b
    return values_equal(a, b)


def _order(op: str, a: Any, b: Any) -> bool:
    if isinstance(a, str) and isinstance(b, str):
        pass
    elif (isinstance(a, (int, float)) and isinstance(b, (int, float))
          and not isinstance(a, bool) and not isinstance(b, bool)):
        pass
    else:
        raise MonitorError(f"{op}: can not order {_kind(a)} and {_kind(b)}")
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]


def evaluate(e: Expr, env: dict[str, Event], ctx: Context) -> Any:
    match e:
        case Const(value=v):
            return v
        case MetaRef(name=n):
            if n not in env:
                raise MonitorError(f"unbound metavariable {n!r}")
            return env[n]
        case Attr(metavar=m, attr=a, index=i):
            if m not in env:
                raise MonitorError(f"unbound metavariable {m!r}")
            v = env[m].get(a)
            if i is None:
                return v
            if not isinstance(v, list):
                raise MonitorError(f"{a.upper()}[{i}]: no parameter list")
            return v[i - 1] if 1 <= i <= len(v) else FAIL
        case AtValue(metavar=m):
            if m not in env:
                raise MonitorError(f"unbound metavariable {m!r}")
            return ctx.at_value(e, env[m])
        case Unary(op="NOT", operand=x):
            return not truthy(evaluate(x, env, ctx))
        case Unary(operand=x):
            v = evaluate(x, env, ctx)
            return FAIL if v is FAIL else -_num(v, "-")
        case BinOp(op=op, left=l, right=r):
            a = evaluate(l, env, ctx)
            b = evaluate(r, env, ctx)
            if a is FAIL or b is FAIL:
                return FAIL
            return _arith(op, a, b)
        case Compare(op=op, left=l, right=r):
            a = evaluate(l, env, ctx)
            b = evaluate(r, env, ctx)
            if a is FAIL or b is FAIL:
                return False
            if op == "==":
                return _equal(a, b)
            if op == "~=":
                return not _equal(a, b)
            return _order(op, a, b)
        case BoolOp(op="AND", left=l, right=r):
            return truthy(evaluate(l, env, ctx)) and truthy(evaluate(r, env, ctx))
        case BoolOp(op="OR", left=l, right=r):
            return truthy(evaluate(l, env, ctx)) or truthy(evaluate(r, env, ctx))
        case Call(name=n, args=args):
            vals = [evaluate(a, env, ctx) for a in args]
            if any(v is FAIL for v in vals):
                return FAIL
            if n == "abs":
                return abs(_num(vals[0], "abs"))
            if n == "sqrt":
                x = _num(vals[0], "sqrt")
                if x < 0:
                    raise MonitorError("sqrt of a negative number")
                return math.sqrt(x)
            raise MonitorError(f"unknown function {n!r}")
        case Aggregate() | Reduction():
            return ctx.aggregate(e, env)
    raise MonitorError(f"can not evaluate {e!r}")


def fold(op: str, values) -> Any:
    """Fold already-evaluated apply results with a reduction operator."""
    if op == "+":
        total: Any = 0
        for v in values:
            if v is FAIL:
                continue
            total = total + _num(v, "+")
        return total
    if op == "AND":
        return all(truthy(v) for v in values)
    return any(truthy(v) for v in values)

"""Pretty printer for rule sets; output re-parses to an equal AST."""

from __future__ import annotations

from ..mtl.ast import quote
from .ast import (Aggregate, AssertionRule, AtValue, Attr, Axis, BinOp, BoolOp, Call, Compare,
                  Const, Expr, MetaRef, Pattern, Range, Reduction, RuleSet, Say, SetSpec,
                  ShowRule, Sidebar, Unary, WithinGroup)

_PREC = {"OR": 1, "AND": 2, "NOT": 3, "cmp": 4, "+": 5, "-": 5, "*": 6, "/": 6, "DIV": 6,
         "MOD": 6, "neg": 7}
_ATOM = 8


def _num(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _prec(e: Expr) -> int:
    match e:
        case BoolOp(op=op):
            return _PREC[op]
        case Unary(op="NOT"):
            return _PREC["NOT"]
        case Unary():
            return _PREC["neg"]
        case Compare():
            return _PREC["cmp"]
        case BinOp(op=op):
            return _PREC[op]
        case Const(value=v) if isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0:
            return _PREC["neg"]
    return _ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = expr_text(e)
    return f"({s})" if _prec(e) < min_prec else s


def range_text(r: Range) -> str:
    if r.kind == "PROG_EX":
        return "PROG_EX"
    if r.kind == "IN":
        return r.metavar or "?"
    return f"{r.metavar}.{r.kind}"


def pattern_text(p: Pattern) -> str:
    s = f"{p.metavar}: {p.etype}"
    if p.guard is not None:
        s += f" & {expr_text(p.guard)}"
    return s


def expr_text(e: Expr) -> str:
    match e:
        case Const(value=True):
            return "TRUE"
        case Const(value=False):
            return "FALSE"
        case Const(value=str() as s):
            return quote(s)
        case Const(value=v):
            return _num(v)
        case MetaRef(name=n):
            return n
        case Attr(metavar=m, attr=a, index=None):
            return f"{m}.{a.upper()}"
        case Attr(metavar=m, attr=a, index=i):
            return f"{m}.{a.upper()}[{i}]"
        case AtValue(metavar=m, edge=edge, text=t):
            return f"{m}.VALUE_AT_{edge}({t})"
        case Unary(op="NOT", operand=x):
            return f"NOT {_wrap(x, _PREC['NOT'])}"
        case Unary(op=op, operand=x):
            return f"{op}{_wrap(x, _ATOM)}"
        case BoolOp(op=op, left=l, right=r):
            p = _PREC[op]
            return f"{_wrap(l, p)} {op} {_wrap(r, p + 1)}"
        case Compare(op=op, left=l, right=r):
            return f"{_wrap(l, 5)} {op} {_wrap(r, 5)}"
        case BinOp(op=op, left=l, right=r):
            p = _PREC[op]
            return f"{_wrap(l, p)} {op} {_wrap(r, p + 1)}"
        case Call(name=n, args=args):
            return f"{n}({', '.join(expr_text(a) for a in args)})"
        case Aggregate(reducer=red, pattern=p, range=rng, apply=ap):
            s = f"{red}[{pattern_text(p)} FROM {range_text(rng)}"
            if ap is not None:
                s += f" APPLY {expr_text(ap)}"
            return s + "]"
        case Reduction(op=op, pattern=p, range=rng, apply=ap):
            # not part of the surface syntax; shown for diagnostics only
            return f"{op}/[{pattern_text(p)} FROM {range_text(rng)} APPLY {expr_text(ap)}]"
    raise TypeError(f"not a rule expression: {e!r}")


def say_text(say: Say) -> str:
    parts: list[str] = []
    for item in say.items:
        s = _wrap(item, 5)
        if s.startswith("-"):
            s = f"({s})"
        if parts:
            parts.append(", " if s.startswith(("(", "[")) else " ")
        parts.append(s)
    return f"SAY({''.join(parts)})"


def assertion_text(rule: AssertionRule, indent: str = "") -> str:
    lines = []
    head = f"{rule.label}: " if rule.label else ""
    for q in rule.quantifiers:
        lines.append(f"{q.kind} {pattern_text(q.pattern)} FROM {range_text(q.range)}")
    if rule.body is not None:
        lines.append(expr_text(rule.body))
    if rule.on_success:
        says = " ".join(say_text(s) for s in rule.on_success)
        lines.append(f"WHEN SUCCEEDS {says}" if rule.success_explicit else says)
    if rule.on_fail:
        lines.append("WHEN FAILS " + " ".join(say_text(s) for s in rule.on_fail))
    if not lines:
        lines.append("TRUE")
    return indent + head + f"\n{indent}  ".join(lines)


def _sidebar(axis: str, sb: Sidebar, indent: str) -> list[str]:
    out = [f"{indent}{axis}_SIDEBAR", f"{indent}  SCALING {sb.scaling}",
           f"{indent}  TICKNUM {sb.ticknum}", f"{indent}  MOVING {sb.moving}"]
    if sb.interval_begin is not None:
        out.append(f"{indent}  INTERVAL_BEGIN {_num(sb.interval_begin)}")
    if sb.interval_end is not None:
        out.append(f"{indent}  INTERVAL_END {_num(sb.interval_end)}")
    if sb.text_label is not None:
        out.append(f"{indent}  TEXT_LABEL {quote(sb.text_label)}")
    return out


def _axis(a: Axis) -> str:
    if a.kind == "EXPR":
        return expr_text(a.expr)
    return f"{a.kind}({expr_text(a.expr)})"


def _set(s: SetSpec, indent: str) -> list[str]:
    out = [f"{indent}SET"]
    colors = [("COLOR", s.color), ("FOREGROUND_COLOR", s.foreground_color)]
    if s.color_last == "color":
        colors.reverse()
    for kw, c in colors:
        if c is not None:
            out.append(f"{indent}  {kw} {c}")
    if s.shape is not None:
        out.append(f"{indent}  SHAPE {s.shape}")
    if s.x_axis is not None:
        out.append(f"{indent}  X_AXIS {_axis(s.x_axis)}")
    out.append(f"{indent}  Y_AXIS {_axis(s.y_axis)}")
    if s.connected is not None:
        out.append(f"{indent}  {'connected' if s.connected else 'disconnected'}")
    return out


def show_text(rule: ShowRule, indent: str = "") -> str:
    head = f"{rule.label}: " if rule.label else ""
    inner = indent + "  "
    out = [f"{indent}{head}SHOW {rule.kind} (", f"{inner}TITLE {quote(rule.title)}"]
    if rule.window is not None:
        out.append(f"{inner}WINDOW_SIZE {rule.window[0]} {rule.window[1]}")
    out += _sidebar("X", rule.x_side, inner)
    out += _sidebar("Y", rule.y_side, inner)
    out.append(f"{inner}SOURCE {pattern_text(rule.source)}")
    if rule.x_axis is not None:
        out.append(f"{inner}X_AXIS {_axis(rule.x_axis)}")
    for s in rule.sets:
        out += _set(s, inner)
    out.append(f"{indent})")
    return "\n".join(out)


def rule_text(rule, indent: str = "") -> str:
    if isinstance(rule, ShowRule):
        return show_text(rule, indent)
    return assertion_text(rule, indent)


def format_rules(rs: RuleSet) -> str:
    chunks = []
    for item in rs.items:
        if isinstance(item, WithinGroup):
            body = ";\n".join(rule_text(r, "  ") for r in item.rules)
            chunks.append(f"WITHIN {', '.join(item.procs)} DO\n{body}\nEND_WITHIN")
        else:
            chunks.append(rule_text(item))
    return "".join(c + ";\n" for c in chunks)

"""Lexer and recursive-descent parser for rule files (.ufo)."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ConstraintError, SourceSyntaxError
from ..events import EVENT_TYPES, PROG_EX, canonical_attr
from ..mtl.ast import render as render_mtl
from ..mtl.parser import parse_expression
from .ast import (PROG_EX_RANGE, Aggregate, AssertionRule, AtValue, Attr, Axis, BinOp, BoolOp,
                  Call, Compare, Const, Expr, MetaRef, Pattern, Quantifier, Range, Rule,
                  RuleSet, Say, SetSpec, ShowRule, Sidebar, Unary, WithinGroup, aggregates, walk)

RESERVED = {
    "FOREACH", "FIND", "FROM", "PROG_EX", "SUCH", "THAT", "WHEN", "SUCCEEDS", "FAILS", "SAY",
    "AND", "OR", "NOT", "CARD", "SUM", "APPLY", "WITHIN", "DO", "END_WITHIN", "SHOW", "DIV",
    "MOD", "TRUE", "FALSE",
}

_AT_NAMES = {"value_at_begin": "BEGIN", "value_at_end": "END",
             "eval_at_begin": "BEGIN", "eval_at_end": "END"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|~=|!=|<=|>=|\+/|[-+*/<>=()\[\],;:.&])
""", re.VERBOSE)

_ESC = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


@dataclass(frozen=True, slots=True)
class Tok:
    kind: str  # int real str ident op raw eof
    value: str
    line: int
    col: int

    @property
    def upper(self) -> str:
        return self.value.upper() if self.kind == "ident" else ""


def _string_value(raw: str) -> str:
    body = raw[1:-1]
    # a literal broken across lines reads as single-spaced text
    body = re.sub(r"[ \t]*\r?\n[ \t]*", " ", body)
    out = []
    i = 0
    while i < len(body):
        if body[i] == "\\" and i + 1 < len(body):
            out.append(_ESC.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(body[i])
            i += 1
    return "".join(out)


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise SourceSyntaxError(line, col, f"unexpected character {text[pos]!r}")
        kind, val = m.lastgroup, m.group()
        pos = m.end()
        if kind == "nl":
            line += 1
            line_start = pos
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "str":
            nls = val.count("\n")
            toks.append(Tok("str", _string_value(val), line, col))
            if nls:
                line += nls
                line_start = m.start() + val.rfind("\n") + 1
            continue
        toks.append(Tok(kind, val, line, col))
        if (kind == "ident" and val.lower() in _AT_NAMES and len(toks) >= 2
                and toks[-2].kind == "op" and toks[-2].value in (".", ":")):
            # capture the embedded target-language expression verbatim
            while pos < n and text[pos] in " \t\r\n":
                if text[pos] == "\n":
                    line += 1
                    line_start = pos + 1
                pos += 1
            if pos >= n or text[pos] != "(":
                raise SourceSyntaxError(line, pos - line_start + 1, f"expected '(' after {val}")
            start = pos + 1
            depth, i, in_str = 1, start, False
            while i < n and depth:
                ch = text[i]
                if in_str:
                    if ch == "\\":
                        i += 1
                    elif ch == '"':
                        in_str = False
                elif ch == '"':
                    in_str = True
                elif ch == "(":
                    depth += 1
                elif ch == ")":
                    depth -= 1
                i += 1
            if depth:
                raise SourceSyntaxError(line, start - line_start, "unbalanced parentheses")
            raw = text[start:i - 1]
            toks.append(Tok("raw", raw, line, start - line_start + 1))
            line_nl = raw.count("\n")
            if line_nl:
                line += line_nl
                line_start = start + raw.rfind("\n") + 1
            pos = i
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


_RELOPS = {"=": "==", "==": "==", "~=": "~=", "!=": "~=", "<": "<", "<=": "<=", ">": ">",
           ">=": ">="}


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Tok | None = None) -> SourceSyntaxError:
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.value)
        return SourceSyntaxError(t.line, t.col, f"{msg} (found {found})")

    def advance(self) -> Tok:
        t = self.tok
        self.i += 1
        return t

    def is_kw(self, *words: str) -> bool:
        return self.tok.upper in words

    def is_op(self, *vals: str) -> bool:
        return self.tok.kind == "op" and self.tok.value in vals

    def expect_kw(self, word: str) -> Tok:
        if not self.is_kw(word):
            raise self.error(f"expected {word}")
        return self.advance()

    def expect_op(self, val: str) -> Tok:
        if not self.is_op(val):
            raise self.error(f"expected {val!r}")
        return self.advance()

    def name(self, what: str = "metavariable") -> Tok:
        t = self.tok
        if t.kind != "ident" or t.upper in RESERVED:
            raise self.error(f"expected {what}")
        return self.advance()

    def number(self) -> int | float:
        sign = 1
        if self.is_op("-"):
            self.advance()
            sign = -1
        t = self.tok
        if t.kind == "int":
            self.advance()
            return sign * int(t.value)
        if t.kind == "real":
            self.advance()
            return sign * float(t.value)
        raise self.error("expected number")

    def string(self) -> str:
        if self.tok.kind != "str":
            raise self.error("expected string")
        return self.advance().value

    # --- rule set ------------------------------------------------------------
    def ruleset(self) -> RuleSet:
        items: list[Rule | WithinGroup] = []
        while True:
            while self.is_op(";"):
                self.advance()
            if self.tok.kind == "eof":
                return RuleSet(tuple(items))
            if self.is_kw("WITHIN"):
                items.append(self.within())
            else:
                items.append(self.rule())
            if self.tok.kind != "eof":
                self.expect_op(";")

    def within(self) -> WithinGroup:
        self.expect_kw("WITHIN")
        procs = [self.name("procedure name").value]
        while self.is_op(","):
            self.advance()
            procs.append(self.name("procedure name").value)
        self.expect_kw("DO")
        rules: list[Rule] = []
        while True:
            while self.is_op(";"):
                self.advance()
            if self.is_kw("END_WITHIN"):
                break
            if self.tok.kind == "eof":
                raise self.error("expected END_WITHIN")
            rules.append(self.rule())
            if not self.is_kw("END_WITHIN"):
                self.expect_op(";")
        if not rules:
            raise self.error("WITHIN group needs at least one rule")
        self.expect_kw("END_WITHIN")
        return WithinGroup(tuple(procs), tuple(rules))

    def rule(self) -> Rule:
        start = self.tok
        label = None
        if (self.tok.kind == "ident" and self.tok.upper not in RESERVED
                and self.peek().kind == "op" and self.peek().value == ":"):
            label = self.advance().value
            self.advance()
        if self.is_kw("SHOW"):
            return self.show(label, start)
        quants: list[Quantifier] = []
        while self.is_kw("FOREACH", "FIND"):
            if len(quants) == 2:
                raise self.error("at most two nested quantifiers are supported")
            kind = self.advance().upper
            pat = self.pattern()
            rng = PROG_EX_RANGE
            if self.is_kw("FROM"):
                self.advance()
                rng = self.range()
            quants.append(Quantifier(kind, pat, rng))
        if self.is_kw("SUCH"):
            self.advance()
            self.expect_kw("THAT")
        body = None
        if self.starts_expr():
            body = self.bool_expr()
        on_success: list[Say] = []
        on_fail: list[Say] = []
        explicit = False
        while self.is_kw("WHEN", "SAY"):
            if self.is_kw("SAY"):
                if on_success or on_fail:
                    raise self.error("SAY clauses without WHEN must come first")
                on_success.extend(self.says())
            else:
                self.advance()
                if self.is_kw("SUCCEEDS"):
                    self.advance()
                    if explicit or on_success:
                        raise self.error("duplicate WHEN SUCCEEDS")
                    explicit = True
                    on_success.extend(self.says())
                elif self.is_kw("FAILS"):
                    self.advance()
                    if on_fail:
                        raise self.error("duplicate WHEN FAILS")
                    on_fail.extend(self.says())
                else:
                    raise self.error("expected SUCCEEDS or FAILS")
        if not quants and body is None and not on_success and not on_fail:
            raise self.error("expected a rule")
        rule = AssertionRule(label, tuple(quants), body, tuple(on_success), tuple(on_fail),
                             explicit, start.line, start.col)
        check_constraints(rule)
        return rule

    def says(self) -> list[Say]:
        out = [self.say()]
        while self.is_kw("SAY"):
            out.append(self.say())
        return out

    def say(self) -> Say:
        self.expect_kw("SAY")
        self.expect_op("(")
        items: list[Expr] = []
        while not self.is_op(")"):
            if self.is_op(","):
                self.advance()
                continue
            if self.tok.kind == "eof":
                raise self.error("unterminated SAY")
            items.append(self.arith())
        self.advance()
        return Say(tuple(items))

    def pattern(self) -> Pattern:
        mv = self.name()
        self.expect_op(":")
        t = self.tok
        if t.kind != "ident" or t.value.lower() not in EVENT_TYPES or t.value.lower() == PROG_EX:
            raise self.error("expected event type")
        self.advance()
        guard = None
        if self.is_op("&"):
            self.advance()
            guard = self.bool_expr()
        return Pattern(mv.value, t.value.lower(), guard, mv.line, mv.col)

    def range(self) -> Range:
        if self.is_kw("PROG_EX"):
            self.advance()
            return PROG_EX_RANGE
        mv = self.name().value
        if self.is_op(".", ":") and self.peek().upper in ("PREV_PATH", "FOLLOWING_PATH"):
            self.advance()
            return Range(self.advance().upper, mv)
        return Range("IN", mv)

    # --- expressions -----------------------------------------------------------
    def starts_expr(self) -> bool:
        t = self.tok
        if t.kind in ("int", "real", "str"):
            return True
        if t.kind == "op":
            return t.value in ("(", "-", "[", "+/")
        if t.kind == "ident":
            return t.upper not in RESERVED or t.upper in ("NOT", "CARD", "SUM", "TRUE", "FALSE")
        return False

    def bool_expr(self) -> Expr:
        left = self.bool_and()
        while self.is_kw("OR"):
            t = self.advance()
            left = BoolOp("OR", left, self.bool_and(), t.line, t.col)
        return left

    def bool_and(self) -> Expr:
        left = self.bool_not()
        while self.is_kw("AND"):
            t = self.advance()
            left = BoolOp("AND", left, self.bool_not(), t.line, t.col)
        return left

    def bool_not(self) -> Expr:
        if self.is_kw("NOT"):
            t = self.advance()
            return Unary("NOT", self.bool_not(), t.line, t.col)
        left = self.arith()
        if self.tok.kind == "op" and self.tok.value in _RELOPS:
            t = self.advance()
            return Compare(_RELOPS[t.value], left, self.arith(), t.line, t.col)
        return left

    def arith(self) -> Expr:
        left = self.term()
        while self.is_op("+", "-"):
            t = self.advance()
            left = BinOp(t.value, left, self.term(), t.line, t.col)
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.is_op("*", "/") or self.is_kw("DIV", "MOD"):
            t = self.advance()
            op = t.value if t.kind == "op" else t.upper
            left = BinOp(op, left, self.unary(), t.line, t.col)
        return left

    def unary(self) -> Expr:
        if self.is_op("-"):
            t = self.advance()
            x = self.unary()
            if isinstance(x, Const) and isinstance(x.value, (int, float)) and not isinstance(x.value, bool):
                return Const(-x.value, t.line, t.col)
            return Unary("-", x, t.line, t.col)
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return Const(int(t.value), t.line, t.col)
        if t.kind == "real":
            self.advance()
            return Const(float(t.value), t.line, t.col)
        if t.kind == "str":
            self.advance()
            return Const(t.value, t.line, t.col)
        if self.is_op("("):
            self.advance()
            e = self.bool_expr()
            self.expect_op(")")
            return e
        if self.is_kw("CARD", "SUM") or self.is_op("[", "+/"):
            return self.aggregate()
        if self.is_kw("TRUE", "FALSE"):
            self.advance()
            return Const(t.upper == "TRUE", t.line, t.col)
        if t.kind == "ident" and t.upper not in RESERVED:
            self.advance()
            if self.is_op("("):
                self.advance()
                args: list[Expr] = []
                if not self.is_op(")"):
                    args.append(self.bool_expr())
                    while self.is_op(","):
                        self.advance()
                        args.append(self.bool_expr())
                self.expect_op(")")
                return Call(t.value.lower(), tuple(args), t.line, t.col)
            if self.is_op("."):
                self.advance()
                return self.attribute(t)
            return MetaRef(t.value, t.line, t.col)
        raise self.error("expected expression")

    def attribute(self, mv: Tok) -> Expr:
        a = self.tok
        if a.kind != "ident":
            raise self.error("expected attribute name")
        self.advance()
        low = a.value.lower()
        if low in _AT_NAMES:
            raw = self.advance()
            try:
                node = parse_expression(raw.value, raw.line, raw.col)
            except SourceSyntaxError as e:
                raise SourceSyntaxError(e.line, e.col, f"in {a.value}(): {e.message}") from None
            return AtValue(mv.value, _AT_NAMES[low], render_mtl(node), mv.line, mv.col)
        attr = canonical_attr(low)
        if attr is None:
            raise self.error("unknown attribute", a)
        if attr == "paramlist":
            if not self.is_op("["):
                raise self.error("PARAMLIST needs an index")
            self.advance()
            idx = self.tok
            if idx.kind != "int":
                raise self.error("expected integer index")
            self.advance()
            self.expect_op("]")
            return Attr(mv.value, attr, int(idx.value), mv.line, mv.col)
        return Attr(mv.value, attr, None, mv.line, mv.col)

    def aggregate(self) -> Aggregate:
        t = self.tok
        reducer = "SUM"
        if self.is_kw("CARD", "SUM"):
            reducer = self.advance().upper
        elif self.is_op("+/"):
            self.advance()
        self.expect_op("[")
        pat = self.pattern()
        rng = PROG_EX_RANGE
        if self.is_kw("FROM"):
            self.advance()
            rng = self.range()
        apply = None
        if self.is_kw("APPLY"):
            self.advance()
            apply = self.bool_expr()
        self.expect_op("]")
        return Aggregate(reducer, pat, rng, apply, t.line, t.col)

    # --- SHOW rules ------------------------------------------------------------
    def show(self, label: str | None, start: Tok) -> ShowRule:
        self.expect_kw("SHOW")
        if not self.is_kw("POINT_PLOT", "BAR_CHART"):
            raise self.error("expected POINT_PLOT or BAR_CHART")
        kind = self.advance().upper
        paren = False
        if self.is_op("("):
            self.advance()
            paren = True
        self.expect_kw("TITLE")
        title = self.string()
        window = None
        if self.is_kw("WINDOW_SIZE"):
            self.advance()
            window = (int(self.number()), int(self.number()))
        x_side = self.sidebar("X")
        y_side = self.sidebar("Y")
        self.expect_kw("SOURCE")
        source = self.pattern()
        x_axis = None
        if self.is_kw("X_AXIS"):
            self.advance()
            x_axis = self.axis()
        sets: list[SetSpec] = []
        while self.is_kw("SET"):
            sets.append(self.set_spec())
        if not sets:
            raise self.error("SHOW rule needs at least one SET")
        if x_axis is None and any(s.x_axis is None for s in sets):
            raise self.error("X_AXIS missing")
        if paren:
            self.expect_op(")")
        return ShowRule(label, kind, title, window, x_side, y_side, source, x_axis, tuple(sets),
                        start.line, start.col)

    def sidebar(self, axis: str) -> Sidebar:
        if self.is_kw(f"{axis}_SIDEBAR"):
            self.advance()
        elif self.is_kw(f"{axis}_SIDE") and self.peek().upper == "BAR":
            self.advance()
            self.advance()
        else:
            raise self.error(f"expected {axis}_SIDEBAR")
        opts: dict = {}
        while True:
            if self.is_kw("SCALING"):
                self.advance()
                opts["scaling"] = self.choice("linear", "exponential", "logarithmic")
            elif self.is_kw("TICKNUM"):
                self.advance()
                opts["ticknum"] = int(self.number())
            elif self.is_kw("MOVING"):
                self.advance()
                opts["moving"] = self.choice("scroll", "rescale", "fixed")
            elif self.is_kw("INTERVAL_BEGIN"):
                self.advance()
                opts["interval_begin"] = self.number()
            elif self.is_kw("INTERVAL_END"):
                self.advance()
                opts["interval_end"] = self.number()
            elif self.is_kw("TEXT_LABEL"):
                self.advance()
                opts["text_label"] = self.string()
            else:
                return Sidebar(**opts)

    def choice(self, *options: str) -> str:
        t = self.tok
        if t.kind != "ident" or t.value.lower() not in options:
            raise self.error(f"expected one of {', '.join(options)}")
        self.advance()
        return t.value.lower()

    def axis(self) -> Axis:
        if self.is_kw("ORD", "ADD") and self.peek().kind == "op" and self.peek().value == "(":
            kind = self.advance().upper
            self.advance()
            e = self.arith()
            self.expect_op(")")
            return Axis(kind, e)
        return Axis("EXPR", self.arith())

    def set_spec(self) -> SetSpec:
        self.expect_kw("SET")
        opts: dict = {}
        while True:
            if self.is_kw("FOREGROUND_COLOR"):
                self.advance()
                opts["foreground_color"] = self.name("color name").value.lower()
                opts["color_last"] = "foreground_color"
            elif self.is_kw("COLOR"):
                self.advance()
                opts["color"] = self.name("color name").value.lower()
                opts["color_last"] = "color"
            elif self.is_kw("SHAPE"):
                self.advance()
                opts["shape"] = self.choice("square", "circle", "triangle")
            elif self.is_kw("X_AXIS"):
                self.advance()
                opts["x_axis"] = self.axis()
            elif self.is_kw("Y_AXIS"):
                self.advance()
                opts["y_axis"] = self.axis()
            elif self.is_kw("CONNECTED", "DISCONNECTED"):
                opts["connected"] = self.advance().upper == "CONNECTED"
            else:
                break
        if "y_axis" not in opts:
            raise self.error("SET needs Y_AXIS")
        return SetSpec(**opts)


def check_constraints(rule: AssertionRule) -> None:
    aggs = aggregates(rule)
    for a in aggs:
        inner = [x for e in (a.pattern.guard, a.apply) for x in walk(e)
                 if isinstance(x, Aggregate)]
        if inner:
            raise ConstraintError(4, "aggregate operations can not be nested", a.line, a.col)
    if len(aggs) > 1:
        b = aggs[1]
        raise ConstraintError(1, "maximum one aggregate operation per assertion", b.line, b.col)
    if aggs and len(rule.quantifiers) == 2:
        a = aggs[0]
        raise ConstraintError(1, "no aggregate operations in assertions with two quantifiers",
                              a.line, a.col)
    seen: set[str] = set()
    pats = [q.pattern for q in rule.quantifiers] + [a.pattern for a in aggs]
    for p in pats:
        if p.metavar in seen:
            raise ConstraintError(2, f"metavariable {p.metavar!r} is not unique", p.line, p.col)
        seen.add(p.metavar)


def parse_rules(text: str) -> RuleSet:
    return Parser(text).ruleset()

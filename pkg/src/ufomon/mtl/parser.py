"""Lexer and recursive-descent parser for MTL source."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import SourceSyntaxError
from .ast import (Assign, Binary, Block, Call, Field, If, Index, ListLit, Node, Num,
                  Paren, Procedure, Program, Return, Str, Unary, Var, While)

KEYWORDS = {"procedure", "end", "if", "then", "else", "while", "do", "return", "global", "not"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>:=|<=|>=|~=|==|!=|\|\||[-+*/%<>=()\[\]{},;.])
""", re.VERBOSE)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\", "r": "\r"}


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # int real str ident kw op eof
    value: str
    line: int
    col: int


def unescape(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Token]:
    toks: list[Token] = []
    pos = 0
    line_start = pos - (col - 1)
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SourceSyntaxError(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        val = m.group()
        c = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ws", "comment"):
            pass
        elif kind == "ident" and val in KEYWORDS:
            toks.append(Token("kw", val, line, c))
        else:
            toks.append(Token(kind, val, line, c))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


_RELOPS = {"<", "<=", ">", ">=", "=", "==", "~=", "!="}


class Parser:
    def __init__(self, text: str, line: int = 1, col: int = 1):
        self.toks = tokenize(text, line, col)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> SourceSyntaxError:
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.value)
        return SourceSyntaxError(t.line, t.col, f"{msg} (found {found})")

    def is_op(self, *vals: str) -> bool:
        return self.tok.kind == "op" and self.tok.value in vals

    def is_kw(self, *vals: str) -> bool:
        return self.tok.kind == "kw" and self.tok.value in vals

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect_op(self, val: str) -> Token:
        if not self.is_op(val):
            raise self.error(f"expected {val!r}")
        return self.advance()

    def expect_kw(self, val: str) -> Token:
        if not self.is_kw(val):
            raise self.error(f"expected {val!r}")
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("expected identifier")
        return self.advance()

    # -- program structure
    def program(self) -> Program:
        procs: dict[str, Procedure] = {}
        globs: list[str] = []
        while self.tok.kind != "eof":
            if self.is_kw("global"):
                self.advance()
                globs.append(self.expect_ident().value)
                while self.is_op(","):
                    self.advance()
                    globs.append(self.expect_ident().value)
            elif self.is_kw("procedure"):
                p = self.procedure()
                if p.name in procs:
                    raise SourceSyntaxError(p.line, p.col, f"duplicate procedure {p.name!r}")
                procs[p.name] = p
            elif self.is_op(";"):
                self.advance()
            else:
                raise self.error("expected 'procedure' or 'global'")
        if "main" not in procs:
            t = self.tok
            raise SourceSyntaxError(t.line, t.col, "program has no procedure main")
        return Program(procs, tuple(globs))

    def procedure(self) -> Procedure:
        start = self.expect_kw("procedure")
        name = self.expect_ident().value
        self.expect_op("(")
        params: list[str] = []
        if not self.is_op(")"):
            params.append(self.expect_ident().value)
            while self.is_op(","):
                self.advance()
                params.append(self.expect_ident().value)
        self.expect_op(")")
        body = self.statements("end")
        self.expect_kw("end")
        return Procedure(start.line, start.col, name, tuple(params), tuple(body))

    def statements(self, closer: str) -> list[Node]:
        out = []
        while True:
            while self.is_op(";"):
                self.advance()
            if (closer == "end" and self.is_kw("end")) or (closer == "}" and self.is_op("}")):
                return out
            if self.tok.kind == "eof":
                raise self.error(f"expected {closer!r}")
            out.append(self.statement())

    def statement(self) -> Node:
        t = self.tok
        if self.is_kw("if"):
            self.advance()
            cond = self.expr()
            self.expect_kw("then")
            then = self.statement()
            orelse = None
            if self.is_kw("else"):
                self.advance()
                orelse = self.statement()
            return If(t.line, t.col, cond, then, orelse)
        if self.is_kw("while"):
            self.advance()
            cond = self.expr()
            self.expect_kw("do")
            return While(t.line, t.col, cond, self.statement())
        if self.is_op("{"):
            self.advance()
            body = self.statements("}")
            self.expect_op("}")
            return Block(t.line, t.col, tuple(body))
        if self.is_kw("return"):
            self.advance()
            value = None
            if self.tok.line == t.line and self.starts_expr():
                value = self.expr()
            return Return(t.line, t.col, value)
        return self.expr()

    def starts_expr(self) -> bool:
        t = self.tok
        return (t.kind in ("int", "real", "str", "ident")
                or (t.kind == "op" and t.value in ("(", "[", "-", "*"))
                or (t.kind == "kw" and t.value == "not"))

    # -- expressions
    def expr(self) -> Node:
        left = self.compare()
        if self.is_op(":="):
            t = self.advance()
            if not isinstance(left, (Var, Index)):
                raise SourceSyntaxError(t.line, t.col, "assignment target must be a variable or index")
            right = self.expr()
            return Assign(left.line, left.col, left, right)
        return left

    def compare(self) -> Node:
        left = self.concat()
        while self.tok.kind == "op" and self.tok.value in _RELOPS:
            op = self.advance().value
            right = self.concat()
            left = Binary(left.line, left.col, op, left, right)
        return left

    def concat(self) -> Node:
        left = self.additive()
        while self.is_op("||"):
            self.advance()
            right = self.additive()
            left = Binary(left.line, left.col, "||", left, right)
        return left

    def additive(self) -> Node:
        left = self.term()
        while self.is_op("+", "-"):
            op = self.advance().value
            right = self.term()
            left = Binary(left.line, left.col, op, left, right)
        return left

    def term(self) -> Node:
        left = self.unary()
        while self.is_op("*", "/", "%"):
            op = self.advance().value
            right = self.unary()
            left = Binary(left.line, left.col, op, left, right)
        return left

    def unary(self) -> Node:
        t = self.tok
        if self.is_op("-", "*") or self.is_kw("not"):
            self.advance()
            return Unary(t.line, t.col, t.value, self.unary())
        return self.postfix()

    def postfix(self) -> Node:
        node = self.primary()
        while True:
            if self.is_op("["):
                self.advance()
                idx = self.expr()
                self.expect_op("]")
                node = Index(node.line, node.col, node, idx)
            else:
                return node

    def primary(self) -> Node:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return Num(t.line, t.col, int(t.value))
        if t.kind == "real":
            self.advance()
            return Num(t.line, t.col, float(t.value))
        if t.kind == "str":
            self.advance()
            return Str(t.line, t.col, unescape(t.value[1:-1]))
        if t.kind == "ident":
            self.advance()
            if self.is_op("("):
                self.advance()
                args: list[Node] = []
                if not self.is_op(")"):
                    args.append(self.expr())
                    while self.is_op(","):
                        self.advance()
                        args.append(self.expr())
                self.expect_op(")")
                return Call(t.line, t.col, t.value, tuple(args))
            if self.is_op(".") and self.peek().kind == "ident":
                self.advance()
                attr = self.advance().value
                return Field(t.line, t.col, t.value, attr)
            return Var(t.line, t.col, t.value)
        if self.is_op("["):
            self.advance()
            items: list[Node] = []
            if not self.is_op("]"):
                items.append(self.expr())
                while self.is_op(","):
                    self.advance()
                    items.append(self.expr())
            self.expect_op("]")
            return ListLit(t.line, t.col, tuple(items))
        if self.is_op("("):
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return Paren(t.line, t.col, inner)
        raise self.error("expected expression")


def parse_program(text: str) -> Program:
    prog = Parser(text).program()
    return Program(prog.procedures, prog.globals, text)


def parse_expression(text: str, line: int = 1, col: int = 1) -> Node:
    """Parse a standalone MTL expression (used for monitor at-expressions)."""
    p = Parser(text, line, col)
    node = p.expr()
    if p.tok.kind != "eof":
        raise p.error("unexpected trailing input")
    return node

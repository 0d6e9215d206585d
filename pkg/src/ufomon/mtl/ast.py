"""AST for MTL, the small Icon-flavoured target language.

Every node carries its source position; ``text`` renders the canonical,
single-spaced source form used for the source_text attribute.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property


@dataclass(frozen=True, eq=False)
class Node:
    line: int
    col: int

    @cached_property
    def text(self) -> str:
        return render(self)


@dataclass(frozen=True, eq=False)
class Num(Node):
    value: int | float


@dataclass(frozen=True, eq=False)
class Str(Node):
    value: str


@dataclass(frozen=True, eq=False)
class Var(Node):
    name: str


@dataclass(frozen=True, eq=False)
class ListLit(Node):
    items: tuple[Node, ...]


@dataclass(frozen=True, eq=False)
class Paren(Node):
    inner: Node


@dataclass(frozen=True, eq=False)
class Index(Node):
    target: Node
    index: Node


@dataclass(frozen=True, eq=False)
class Field(Node):
    """``name.attr``: only meaningful inside monitor at-expressions."""
    obj: str
    attr: str


@dataclass(frozen=True, eq=False)
class Unary(Node):
    op: str
    operand: Node


@dataclass(frozen=True, eq=False)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True, eq=False)
class Call(Node):
    name: str
    args: tuple[Node, ...]


@dataclass(frozen=True, eq=False)
class Assign(Node):
    target: Node
    value: Node


@dataclass(frozen=True, eq=False)
class If(Node):
    cond: Node
    then: Node
    orelse: Node | None


@dataclass(frozen=True, eq=False)
class While(Node):
    cond: Node
    body: Node


@dataclass(frozen=True, eq=False)
class Block(Node):
    body: tuple[Node, ...]


@dataclass(frozen=True, eq=False)
class Return(Node):
    value: Node | None


@dataclass(frozen=True, eq=False)
class Procedure(Node):
    name: str
    params: tuple[str, ...]
    body: tuple[Node, ...]


@dataclass(frozen=True, eq=False)
class Program:
    procedures: dict[str, Procedure]
    globals: tuple[str, ...] = ()
    source: str = ""

    @property
    def main(self) -> Procedure:
        return self.procedures["main"]

    def statements(self) -> list[Node]:
        """All statement nodes, procedure by procedure, in source order."""
        out: list[Node] = []

        def walk(stmts):
            for s in stmts:
                if isinstance(s, Block):
                    walk(s.body)
                    continue
                out.append(s)
                if isinstance(s, If):
                    walk([s.then] + ([s.orelse] if s.orelse is not None else []))
                elif isinstance(s, While):
                    walk([s.body])

        for p in self.procedures.values():
            walk(p.body)
        return out


def quote(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def render(n: Node) -> str:
    match n:
        case Num(value=v):
            return repr(v)
        case Str(value=v):
            return quote(v)
        case Var(name=name):
            return name
        case ListLit(items=items):
            return "[" + ", ".join(render(i) for i in items) + "]"
        case Paren(inner=inner):
            return "(" + render(inner) + ")"
        case Index(target=t, index=i):
            return f"{render(t)}[{render(i)}]"
        case Field(obj=o, attr=a):
            return f"{o}.{a}"
        case Unary(op=op, operand=x):
            sep = " " if op == "not" else ""
            return f"{op}{sep}{render(x)}"
        case Binary(op=op, left=l, right=r):
            return f"{render(l)} {op} {render(r)}"
        case Call(name=name, args=args):
            return f"{name}(" + ", ".join(render(a) for a in args) + ")"
        case Assign(target=t, value=v):
            return f"{render(t)} := {render(v)}"
        case If(cond=c, then=t, orelse=e):
            s = f"if {render(c)} then {render(t)}"
            return s if e is None else f"{s} else {render(e)}"
        case While(cond=c, body=b):
            return f"while {render(c)} do {render(b)}"
        case Block(body=body):
            return "{ " + "; ".join(render(s) for s in body) + " }" if body else "{ }"
        case Return(value=v):
            return "return" if v is None else f"return {render(v)}"
        case Procedure(name=name, params=params, body=body):
            inner = "; ".join(render(s) for s in body)
            return f"procedure {name}({', '.join(params)}) {inner} end"
    raise TypeError(f"cannot render {n!r}")

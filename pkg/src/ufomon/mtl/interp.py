"""Instrumented tree-walking interpreter for MTL.

The interpreter numbers every event and advances the logical counter at
every begin and end edge whether or not the event is selected by the mask,
so masked runs see exactly the counters and eids of a full run.  Selected
edges are pushed to the sink as :class:`Signal` objects; while the sink runs
the interpreter is suspended at that edge and monitor code may call
:meth:`Interpreter.eval_in_context`.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, TextIO

from .. import events as ev
from ..events import (CLAUSE, EXPR_EVAL, FUNC_CALL, INPUT, ITERATION, LHP, LITERAL, OUTPUT,
                      PROG_EX, RHP, TEST, VARIABLE)
from .ast import (Assign, Binary, Block, Call, Field, If, Index, ListLit, Node, Num, Paren,
                  Procedure, Program, Return, Str, Unary, Var, While)
from .parser import parse_expression
from .values import FAIL, MList, image, snapshot, text_of, type_name, values_equal


class MTLRuntimeError(Exception):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}")
        self.message = message
        self.line = line


class _Return(Exception):
    def __init__(self, value: Any):
        self.value = value


@dataclass(frozen=True)
class AtSite:
    """An at-expression attached to a pattern site: evaluated at the BEGIN or
    END edge of events of ``etype`` (or a subtype)."""
    site: int
    edge: str  # "BEGIN" | "END"
    etype: str
    text: str


@dataclass(frozen=True)
class EventMask:
    types: frozenset[str]
    attr_demand: dict[str, frozenset[str]] = field(default_factory=dict)
    at_exprs: tuple[AtSite, ...] = ()
    full: bool = False

    @classmethod
    def everything(cls, at_exprs: tuple[AtSite, ...] = ()) -> "EventMask":
        return cls(ev.EVENT_TYPES,
                   {t: frozenset(ev.attrs_for(t)) for t in ev.EVENT_TYPES}, at_exprs, True)

    def emitted_types(self) -> frozenset[str]:
        if self.full:
            return ev.EVENT_TYPES
        # prog_ex names the session event itself; a mask asks for everything
        # below it by naming expr_eval
        out = {PROG_EX}
        for t in self.types - {PROG_EX}:
            out |= ev.descendants_of(t)
        return frozenset(out)

    def demand_for(self, etype: str) -> frozenset[str]:
        """Attribute names demanded for a concrete emitted type."""
        out: set[str] = set()
        for t in ev.lineage(etype):
            out |= self.attr_demand.get(t, frozenset())
        return frozenset(out)

    def capture_for(self, etype: str) -> frozenset[str]:
        return ev.capture_fields(self.demand_for(etype))


@dataclass(slots=True)
class Signal:
    kind: str  # "B" | "E"
    eid: int
    etype: str
    counter: int
    parent: int | None
    attrs: dict[str, Any]


@dataclass(frozen=True)
class ExitStatus:
    kind: str  # "NORMAL" | "RUNTIME_ERROR"
    message: str = ""
    line: int = 0

    @property
    def ok(self) -> bool:
        return self.kind == "NORMAL"


class _Open:
    __slots__ = ("eid", "etype", "parent", "proj", "emit", "node", "capture")

    def __init__(self, eid, etype, parent, proj, emit, node, capture):
        self.eid = eid
        self.etype = etype
        self.parent = parent
        self.proj = proj
        self.emit = emit
        self.node = node
        self.capture = capture


class _Frame:
    __slots__ = ("fid", "locals")

    def __init__(self, fid: int, locals_: dict[str, Any]):
        self.fid = fid
        self.locals = locals_


Sink = Callable[[Signal, "Interpreter"], None]

BUILTINS = frozenset({"write", "read", "pop", "push", "put", "list", "abs", "sqrt", "integer"})
_NUMERIC_OPS = {"+", "-", "*", "/", "%"}
_ORDER_OPS = {"<", "<=", ">", ">="}


def _count_time() -> int:
    return time.perf_counter_ns() // 1_000_000


class Interpreter:
    def __init__(self, program: Program, mask: EventMask | None = None,
                 input_file: str | None = None, sink: Sink | None = None,
                 out: TextIO | None = None, input_lines: list[str] | None = None,
                 logical_clock: bool = False):
        self.program = program
        self.mask = mask or EventMask(frozenset())
        self.sink = sink if sink is not None else (lambda sig, interp: None)
        self.out = out if out is not None else sys.stdout
        self.input_file = input_file
        if input_lines is not None:
            self._input = list(input_lines)
        elif input_file is not None:
            try:
                with open(input_file, encoding="utf-8") as fh:
                    self._input = fh.read().splitlines()
            except OSError:
                self._input = []
        else:
            self._input = []
        self._in_pos = 0
        self._emit = self.mask.emitted_types()
        self._capture = {t: self.mask.capture_for(t) for t in self._emit}
        self.counter = 0
        self.next_eid = 0
        self.cur: _Open | None = None
        self.quiet = False
        self.globals: dict[str, Any] = {}
        self.global_names = frozenset(program.globals)
        self.frame = _Frame(0, {})
        self._fids = 0
        self._lids = 0
        # a logical clock makes timing attributes reproducible (they read the counter)
        self.logical_clock = logical_clock
        self._t0 = _count_time()
        self.diagnostics: list[str] = []
        self._dispatch = {
            Num: self._eval_literal, Str: self._eval_literal, Var: self._eval_var,
            ListLit: self._eval_list, Paren: self._eval_paren, Index: self._eval_index,
            Unary: self._eval_unary, Binary: self._eval_binary, Call: self._eval_call,
            Assign: self._eval_assign, Field: self._eval_field,
        }
        self._env: dict[str, Any] | None = None

    # --- event edges -------------------------------------------------------
    def _now(self) -> int:
        if self.logical_clock:
            return self.counter
        return _count_time() - self._t0

    def _begin(self, etype: str, node: Node | None, **extra: Any) -> _Open | None:
        if self.quiet:
            return None
        self.counter += 1
        self.next_eid += 1
        parent = self.cur
        emit = etype in self._emit
        pproj = parent.proj if parent is not None else None
        o = _Open(self.next_eid, etype, parent, self.next_eid if emit else pproj, emit, node,
                  self._capture.get(etype) if emit else None)
        self.cur = o
        if emit:
            cap = o.capture
            attrs: dict[str, Any] = {}
            if cap:
                if "source_text" in cap:
                    attrs["source_text"] = node.text if node is not None else ""
                if "line_num" in cap:
                    attrs["line_num"] = node.line if node is not None else 0
                if "col_num" in cap:
                    attrs["col_num"] = node.col if node is not None else 0
                if "time_at_begin" in cap:
                    attrs["time_at_begin"] = self._now()
                for k, v in extra.items():
                    if k in cap:
                        attrs[k] = snapshot(v)
            self.sink(Signal("B", o.eid, etype, self.counter, pproj, attrs), self)
        return o

    def _end(self, o: _Open | None, value: Any = None, **extra: Any) -> None:
        if o is None:
            return
        self.counter += 1
        self.cur = o.parent
        if o.emit:
            cap = o.capture
            attrs: dict[str, Any] = {}
            if cap:
                failed = value is FAIL
                if "value" in cap:
                    attrs["value"] = None if failed else snapshot(value)
                if "type" in cap:
                    attrs["type"] = "null" if failed else type_name(value)
                if "failure_p" in cap:
                    attrs["failure_p"] = failed
                if "time_at_end" in cap:
                    attrs["time_at_end"] = self._now()
                for k, v in extra.items():
                    if k in cap:
                        attrs[k] = snapshot(v)
            self.sink(Signal("E", o.eid, o.etype, self.counter,
                             o.parent.proj if o.parent is not None else None, attrs), self)

    def _abort(self, o: _Open | None, exc: BaseException) -> None:
        # unwinding: runtime errors close events as failed, returns as null
        if o is None:
            return
        self._end(o, None if isinstance(exc, _Return) else FAIL)

    # --- entry points --------------------------------------------------------
    def run(self) -> ExitStatus:
        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, 20000))
        main = self.program.main
        self.frame = self._new_frame(main, [])
        root = self._begin(PROG_EX, None)
        status = ExitStatus("NORMAL")
        try:
            self._exec_body(main.body)
        except _Return:
            pass
        except MTLRuntimeError as e:
            status = ExitStatus("RUNTIME_ERROR", e.message, e.line)
        except RecursionError:
            status = ExitStatus("RUNTIME_ERROR", "recursion too deep", 0)
        finally:
            sys.setrecursionlimit(old_limit)
        # close anything left open by an error (the root included)
        while self.cur is not None and self.cur is not root:
            self._end(self.cur, FAIL)
        self._end(root, None if status.ok else FAIL)
        return status

    def eval_in_context(self, expr: Node | str, env: dict[str, Any] | None = None) -> Any:
        """Evaluate an expression at the current edge without instrumentation.

        Names resolve in the innermost procedure frame, then globals.  ``env``
        maps metavariable names to events for ``name.attr`` references.  A
        runtime error aborts only this expression: it is recorded in
        ``diagnostics`` and the result is FAIL.
        """
        if isinstance(expr, str):
            expr = parse_expression(expr)
        saved = (self.quiet, self._env)
        self.quiet = True
        self._env = env
        try:
            return self._eval(expr)
        except MTLRuntimeError as e:
            self.diagnostics.append(f"monitor expression error: {e}")
            return FAIL
        except _Return as r:
            return r.value
        finally:
            self.quiet, self._env = saved

    # --- statements ------------------------------------------------------------
    def _exec_body(self, stmts) -> None:
        for s in stmts:
            self._exec(s)

    def _exec(self, s: Node) -> None:
        if isinstance(s, Block):
            self._exec_body(s.body)
        elif isinstance(s, If):
            self._exec_if(s)
        elif isinstance(s, While):
            self._exec_while(s)
        elif isinstance(s, Return):
            self._exec_return(s)
        else:
            self._eval(s)

    def _exec_if(self, s: If) -> Any:
        o = self._begin(EXPR_EVAL, s, operator="if")
        try:
            t = self._begin(TEST, s.cond)
            try:
                cv = self._eval(s.cond)
            except BaseException as exc:
                self._abort(t, exc)
                raise
            self._end(t, cv)
            branch = s.then if cv is not FAIL else s.orelse
            result = FAIL if branch is None else None
            if branch is not None:
                c = self._begin(CLAUSE, branch)
                try:
                    self._exec(branch)
                except BaseException as exc:
                    self._abort(c, exc)
                    raise
                self._end(c, None)
        except BaseException as exc:
            self._abort(o, exc)
            raise
        self._end(o, result)
        return result

    def _exec_while(self, s: While) -> None:
        o = self._begin(EXPR_EVAL, s, operator="while")
        try:
            while True:
                it = self._begin(ITERATION, s)
                try:
                    t = self._begin(TEST, s.cond)
                    try:
                        cv = self._eval(s.cond)
                    except BaseException as exc:
                        self._abort(t, exc)
                        raise
                    self._end(t, cv)
                    if cv is FAIL:
                        self._end(it, None)
                        break
                    self._exec(s.body)
                except BaseException as exc:
                    self._abort(it, exc)
                    raise
                self._end(it, None)
        except BaseException as exc:
            self._abort(o, exc)
            raise
        self._end(o, None)

    def _exec_return(self, s: Return) -> None:
        o = self._begin(EXPR_EVAL, s, operator="return")
        try:
            v = None if s.value is None else self._eval(s.value)
        except BaseException as exc:
            self._abort(o, exc)
            raise
        self._end(o, v)
        raise _Return(v)

    # --- expressions -----------------------------------------------------------
    def _eval(self, n: Node) -> Any:
        if isinstance(n, (If, While, Block, Return)):
            if isinstance(n, If):
                return self._exec_if(n)
            self._exec(n)
            return None
        return self._dispatch[type(n)](n)

    def _eval_literal(self, n: Num | Str) -> Any:
        o = self._begin(LITERAL, n)
        self._end(o, n.value)
        return n.value

    def _lookup(self, name: str) -> Any:
        if name in self.frame.locals:
            return self.frame.locals[name]
        return self.globals.get(name)

    def _eval_var(self, n: Var) -> Any:
        o = self._begin(VARIABLE, n)
        v = self._lookup(n.name)
        self._end(o, v)
        return v

    def _eval_paren(self, n: Paren) -> Any:
        return self._eval(n.inner)

    def _eval_field(self, n: Field) -> Any:
        from ..events import canonical_attr
        if self._env is None or n.obj not in self._env:
            raise MTLRuntimeError(f"no event bound to {n.obj!r}", n.line)
        attr = canonical_attr(n.attr)
        if attr is None:
            raise MTLRuntimeError(f"unknown attribute {n.attr!r}", n.line)
        return self._env[n.obj].get(attr)

    def _new_list(self, items) -> MList:
        self._lids += 1
        return MList(items, lid=self._lids)

    def _eval_list(self, n: ListLit) -> Any:
        o = self._begin(EXPR_EVAL, n, operator="[]")
        try:
            items = []
            result: Any = None
            for it in n.items:
                v = self._eval(it)
                if v is FAIL:
                    result = FAIL
                    break
                items.append(v)
            if result is not FAIL:
                result = self._new_list(items)
        except BaseException as exc:
            self._abort(o, exc)
            raise
        self._end(o, result)
        return result

    def _index_value(self, target: Any, idx: Any, line: int) -> Any:
        if not isinstance(target, (list, str)):
            raise MTLRuntimeError(f"cannot index {type_name(target)}", line)
        i = self._as_int(idx, line)
        k = self._slot(len(target), i)
        return FAIL if k is None else target[k]

    @staticmethod
    def _slot(size: int, i: int) -> int | None:
        k = i - 1 if i > 0 else size + i
        return k if 0 <= k < size and i != 0 else None

    def _as_int(self, v: Any, line: int) -> int:
        if isinstance(v, bool):
            raise MTLRuntimeError("boolean used as integer", line)
        if isinstance(v, int):
            return v
        if isinstance(v, float) and v.is_integer():
            return int(v)
        if isinstance(v, str):
            try:
                return int(v.strip())
            except ValueError:
                pass
        raise MTLRuntimeError(f"integer expected, got {type_name(v)}", line)

    def _eval_index(self, n: Index) -> Any:
        o = self._begin(EXPR_EVAL, n, operator="[]")
        try:
            t = self._eval(n.target)
            i = FAIL if t is FAIL else self._eval(n.index)
            result = FAIL if i is FAIL else self._index_value(t, i, n.line)
        except BaseException as exc:
            self._abort(o, exc)
            raise
        self._end(o, result)
        return result

    def _num(self, v: Any, line: int) -> int | float:
        if isinstance(v, bool):
            raise MTLRuntimeError("boolean in arithmetic", line)
        if isinstance(v, (int, float)):
            return v
        if isinstance(v, str):
            s = v.strip()
            try:
                return int(s)
            except ValueError:
                try:
                    return float(s)
                except ValueError:
                    pass
        raise MTLRuntimeError(f"numeric operand expected, got {type_name(v)}", line)

    def _eval_unary(self, n: Unary) -> Any:
        o = self._begin(EXPR_EVAL, n, operator=n.op)
        try:
            v = self._eval(n.operand)
            if n.op == "not":
                result = None if v is FAIL else FAIL
            elif v is FAIL:
                result = FAIL
            elif n.op == "-":
                result = -self._num(v, n.line)
            else:
                if not isinstance(v, (list, str)):
                    raise MTLRuntimeError(f"size of {type_name(v)}", n.line)
                result = len(v)
        except BaseException as exc:
            self._abort(o, exc)
            raise
        self._end(o, result)
        return result

    def _eval_binary(self, n: Binary) -> Any:
        o = self._begin(EXPR_EVAL, n, operator=n.op)
        try:
            left = self._eval(n.left)
            right = FAIL if left is FAIL else self._eval(n.right)
            result = FAIL if right is FAIL else binop(n.op, left, right, n.line)
        except BaseException as exc:
            self._abort(o, exc)
            raise
        self._end(o, result)
        return result

    def _eval_assign(self, n: Assign) -> Any:
        a = self._begin(EXPR_EVAL, n, operator=":=")
        lhp = rhp = None
        lhp_open = rhp_open = False
        value: Any = FAIL
        try:
            tgt = n.target
            lhp = self._begin(LHP, tgt)
            lhp_open = lhp is not None
            container: Any = None
            key: Any = None
            ok = True
            if isinstance(tgt, Index):
                container = self._eval(tgt.target)
                key = FAIL if container is FAIL else self._eval(tgt.index)
                ok = key is not FAIL
            if a is not None:
                # rhp is a child of the assignment, not of the lhp
                self.cur = a
            rhp = self._begin(RHP, n.value)
            rhp_open = rhp is not None
            value = self._eval(n.value) if ok else FAIL
            rhp_open = False
            self._end(rhp, value)
            if lhp is not None:
                self.cur = lhp
            address = None
            if ok and value is not FAIL:
                address = self._store(tgt, container, key, value)
                if address is None:
                    value = FAIL
            else:
                value = FAIL
            lhp_open = False
            self._end(lhp, value, address=address)
        except BaseException as exc:
            if rhp_open:
                self.cur = rhp
                self._abort(rhp, exc)
            if lhp_open:
                self.cur = lhp
                self._abort(lhp, exc)
            self._abort(a, exc)
            raise
        self._end(a, value)
        return value

    def _store(self, tgt: Node, container: Any, key: Any, value: Any) -> str | None:
        if isinstance(tgt, Var):
            name = tgt.name
            if name in self.frame.locals or name not in self.global_names:
                self.frame.locals[name] = value
                return f"f{self.frame.fid}:{name}"
            self.globals[name] = value
            return f"g:{name}"
        if not isinstance(container, MList):
            raise MTLRuntimeError(f"cannot assign into {type_name(container)}", tgt.line)
        i = self._as_int(key, tgt.line)
        k = self._slot(len(container), i)
        if k is None:
            return None
        container[k] = value
        return f"list-{container.lid}[{k + 1}]"

    def _new_frame(self, proc: Procedure, args: list[Any]) -> _Frame:
        self._fids += 1
        locals_ = {p: (args[i] if i < len(args) else None) for i, p in enumerate(proc.params)}
        return _Frame(self._fids, locals_)

    def _eval_call(self, n: Call) -> Any:
        args: list[Any] = []
        for a in n.args:
            v = self._eval(a)
            if v is FAIL:
                return FAIL
            args.append(v)
        proc = self.program.procedures.get(n.name)
        if proc is not None:
            return self._call_user(n, proc, args)
        if n.name not in BUILTINS:
            raise MTLRuntimeError(f"undefined procedure {n.name!r}", n.line)
        if n.name == "write":
            o = self._begin(OUTPUT, n, func_name=n.name, paramlist=args, file="stdout")
        elif n.name == "read":
            o = self._begin(INPUT, n, func_name=n.name, paramlist=args, file=self.input_file)
        else:
            o = self._begin(FUNC_CALL, n, func_name=n.name, paramlist=args)
        try:
            result = self._builtin(n, args)
        except BaseException as exc:
            self._abort(o, exc)
            raise
        self._end(o, result)
        return result

    def _call_user(self, n: Call, proc: Procedure, args: list[Any]) -> Any:
        saved = self.frame
        self.frame = self._new_frame(proc, args)
        try:
            o = self._begin(FUNC_CALL, n, func_name=n.name, paramlist=args)
            try:
                result = FAIL
                try:
                    self._exec_body(proc.body)
                except _Return as r:
                    result = r.value
            except BaseException as exc:
                self._abort(o, exc)
                raise
            self._end(o, result)
        finally:
            self.frame = saved
        return result

    def _builtin(self, n: Call, args: list[Any]) -> Any:
        name = n.name
        if name == "write":
            self.out.write("".join(text_of(a) for a in args) + "\n")
            return args[-1] if args else None
        if name == "read":
            if self._in_pos >= len(self._input):
                return FAIL
            self._in_pos += 1
            return self._input[self._in_pos - 1]
        if name in ("pop", "push", "put"):
            if not args or not isinstance(args[0], list):
                raise MTLRuntimeError(f"{name}() needs a list", n.line)
            lst = args[0]
            if name == "pop":
                return lst.pop(0) if lst else FAIL
            if name == "push":
                for x in args[1:]:
                    lst.insert(0, x)
            else:
                lst.extend(args[1:])
            return lst
        if name == "list":
            size = self._as_int(args[0], n.line) if args else 0
            return self._new_list([args[1] if len(args) > 1 else None] * max(size, 0))
        if name == "abs":
            return abs(self._num(args[0] if args else None, n.line))
        if name == "sqrt":
            x = self._num(args[0] if args else None, n.line)
            if x < 0:
                raise MTLRuntimeError(f"sqrt of negative number {image(x)}", n.line)
            return math.sqrt(x)
        if name == "integer":
            v = args[0] if args else None
            try:
                return int(v.strip()) if isinstance(v, str) else int(v)
            except (TypeError, ValueError):
                return FAIL
        raise MTLRuntimeError(f"undefined procedure {name!r}", n.line)


def _idiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def binop(op: str, left: Any, right: Any, line: int = 0) -> Any:
    """Apply an MTL binary operator (comparisons yield the right operand or FAIL)."""
    if op in _NUMERIC_OPS:
        a = _to_num(left, line)
        b = _to_num(right, line)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if b == 0:
            raise MTLRuntimeError("division by zero", line)
        if isinstance(a, int) and isinstance(b, int):
            return _idiv(a, b) if op == "/" else a - b * _idiv(a, b)
        return a / b if op == "/" else math.fmod(a, b)
    if op == "||":
        if left is None or right is None:
            raise MTLRuntimeError("concatenation of null", line)
        return text_of(left) + text_of(right)
    if op in ("=", "=="):
        return right if values_equal(left, right) else FAIL
    if op in ("~=", "!="):
        return FAIL if values_equal(left, right) else right
    if op in _ORDER_OPS:
        if isinstance(left, str) and isinstance(right, str):
            a, b = left, right
        else:
            a, b = _to_num(left, line), _to_num(right, line)
        ok = {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
        return right if ok else FAIL
    raise MTLRuntimeError(f"unknown operator {op!r}", line)


def _to_num(v: Any, line: int) -> int | float:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise MTLRuntimeError(f"numeric operand expected, got {type_name(v)}", line)
    if isinstance(v, str):
        s = v.strip()
        try:
            return int(s)
        except ValueError:
            try:
                return float(s)
            except ValueError:
                raise MTLRuntimeError(f"numeric operand expected, got string {v!r}", line) from None
    return v


def run(program: Program, mask: EventMask | None = None, input_file: str | None = None,
        sink: Sink | None = None, out: TextIO | None = None,
        logical_clock: bool = False) -> ExitStatus:
    return Interpreter(program, mask, input_file, sink, out, logical_clock=logical_clock).run()

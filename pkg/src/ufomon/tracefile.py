"""Trace dump files: one line per signal, plus a header naming the mask.

    #ufo-trace 1
    #mask full                       (or #types ... and #attrs type:a,b ...)
    #site 1 END expr_eval "mid"
    B <eid> <etype> <counter> <parent|-> {attr=value ... @site=value}
    E <eid> <counter> {attr=value ...}
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, TextIO

from .errors import DumpError
from .events import BEGIN_ATTRS, EVENT_TYPES, Event, TraceStore
from .mtl.ast import quote
from .mtl.values import FAIL

MAGIC = "#ufo-trace 1"


def format_value(v: Any) -> str:
    if v is None:
        return "null"
    if v is FAIL:
        return "fail"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return quote(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(format_value(x) for x in v) + "]"
    raise DumpError(f"can not serialize {type(v).__name__} value")


_NUM = re.compile(r"-?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|inf|nan|\d+)")
_WORD = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_ESC = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


class _Scanner:
    def __init__(self, text: str, lineno: int):
        self.s = text
        self.i = 0
        self.lineno = lineno

    def error(self, msg: str) -> DumpError:
        return DumpError(f"line {self.lineno}: {msg}")

    def ws(self) -> None:
        while self.i < len(self.s) and self.s[self.i] == " ":
            self.i += 1

    def value(self) -> Any:
        s, i = self.s, self.i
        if i >= len(s):
            raise self.error("value expected")
        ch = s[i]
        if ch == '"':
            out = []
            i += 1
            while i < len(s) and s[i] != '"':
                if s[i] == "\\":
                    if i + 1 >= len(s) or s[i + 1] not in _ESC:
                        raise self.error("bad escape in string")
                    out.append(_ESC[s[i + 1]])
                    i += 2
                else:
                    out.append(s[i])
                    i += 1
            if i >= len(s):
                raise self.error("unterminated string")
            self.i = i + 1
            return "".join(out)
        if ch == "[":
            self.i += 1
            items = []
            if self.s.startswith("]", self.i):
                self.i += 1
                return items
            while True:
                items.append(self.value())
                if self.s.startswith(",", self.i):
                    self.i += 1
                elif self.s.startswith("]", self.i):
                    self.i += 1
                    return items
                else:
                    raise self.error("',' or ']' expected in list")
        m = _NUM.match(s, i)
        if m:
            self.i = m.end()
            t = m.group()
            return int(t) if re.fullmatch(r"-?\d+", t) else float(t)
        m = _WORD.match(s, i)
        if m:
            self.i = m.end()
            words = {"null": None, "true": True, "false": False, "fail": FAIL}
            if m.group() not in words:
                raise self.error(f"unknown value {m.group()!r}")
            return words[m.group()]
        raise self.error(f"bad value at column {i + 1}")

    def fields(self) -> tuple[dict[str, Any], dict[int, Any]]:
        self.ws()
        if not self.s.startswith("{", self.i):
            raise self.error("'{' expected")
        self.i += 1
        attrs: dict[str, Any] = {}
        at: dict[int, Any] = {}
        while True:
            self.ws()
            if self.s.startswith("}", self.i):
                self.i += 1
                break
            m = re.compile(r"@(\d+)=|([a-z_]+)=").match(self.s, self.i)
            if not m:
                raise self.error("attribute expected")
            self.i = m.end()
            v = self.value()
            if m.group(1) is not None:
                at[int(m.group(1))] = v
            else:
                attrs[m.group(2)] = v
        self.ws()
        if self.i != len(self.s):
            raise self.error("trailing characters")
        return attrs, at


def format_fields(attrs: dict[str, Any], at: dict[int, Any] | None = None) -> str:
    parts = [f"{k}={format_value(v)}" for k, v in attrs.items()]
    parts += [f"@{k}={format_value(v)}" for k, v in (at or {}).items()]
    return "{" + " ".join(parts) + "}"


@dataclass
class DumpHeader:
    full: bool = True
    types: tuple[str, ...] = ()
    attrs: dict[str, tuple[str, ...]] = field(default_factory=dict)
    # site id -> (edge, etype, text)
    sites: dict[int, tuple[str, str, str]] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [MAGIC]
        if self.full:
            out.append("#mask full")
        else:
            out.append("#types " + " ".join(self.types))
            out.append("#attrs " + " ".join(f"{t}:{','.join(a)}" for t, a in self.attrs.items()))
        for sid, (edge, etype, text) in sorted(self.sites.items()):
            out.append(f"#site {sid} {edge} {etype} {quote(text)}")
        return out


class DumpWriter:
    def __init__(self, fh: TextIO, header: DumpHeader):
        self.fh = fh
        for line in header.lines():
            fh.write(line + "\n")

    def begin(self, eid: int, etype: str, counter: int, parent: int | None,
              attrs: dict[str, Any], at: dict[int, Any]) -> None:
        p = "-" if parent is None else str(parent)
        self.fh.write(f"B {eid} {etype} {counter} {p} {format_fields(attrs, at)}\n")

    def end(self, eid: int, counter: int, attrs: dict[str, Any], at: dict[int, Any]) -> None:
        self.fh.write(f"E {eid} {counter} {format_fields(attrs, at)}\n")


@dataclass
class Dump:
    header: DumpHeader
    store: TraceStore
    signals: int


def _header_line(h: DumpHeader, line: str, lineno: int) -> None:
    if line == "#mask full":
        h.full = True
        return
    if line.startswith("#types"):
        h.full = False
        h.types = tuple(line.split()[1:])
        bad = [t for t in h.types if t not in EVENT_TYPES]
        if bad:
            raise DumpError(f"line {lineno}: unknown event type {bad[0]!r}")
        return
    if line.startswith("#attrs"):
        for part in line.split()[1:]:
            t, _, names = part.partition(":")
            h.attrs[t] = tuple(n for n in names.split(",") if n)
        return
    if line.startswith("#site"):
        m = re.fullmatch(r"#site (\d+) (BEGIN|END) ([a-z_]+) (\".*\")", line)
        if not m:
            raise DumpError(f"line {lineno}: malformed site header")
        text = _Scanner(m.group(4), lineno).value()
        h.sites[int(m.group(1))] = (m.group(2), m.group(3), text)
        return
    raise DumpError(f"line {lineno}: unknown header {line.split()[0]!r}")


def parse_dump(lines: Iterable[str]) -> Dump:
    it = iter(lines)
    header = DumpHeader()
    store = TraceStore()
    open_: dict[int, Event] = {}
    last = 0
    signals = 0
    first = True
    for lineno, raw in enumerate(it, 1):
        line = raw.rstrip("\n")
        if first:
            if line != MAGIC:
                raise DumpError("not a trace dump (missing #ufo-trace header)")
            first = False
            continue
        if not line.strip():
            continue
        if line.startswith("#"):
            if signals:
                raise DumpError(f"line {lineno}: header after records")
            _header_line(header, line, lineno)
            continue
        sc = _Scanner(line, lineno)
        m = re.compile(r"B (\d+) ([a-z_]+) (\d+) (-|\d+) ").match(line)
        if m:
            eid, etype, counter = int(m.group(1)), m.group(2), int(m.group(3))
            if etype not in EVENT_TYPES:
                raise DumpError(f"line {lineno}: unknown event type {etype!r}")
            parent = None if m.group(4) == "-" else int(m.group(4))
            if parent is not None and parent not in store.by_eid:
                raise DumpError(f"line {lineno}: parent {parent} not seen")
            sc.i = m.end() - 1
            attrs, at = sc.fields()
            if counter <= last:
                raise DumpError(f"line {lineno}: counter does not increase")
            if eid in store.by_eid:
                raise DumpError(f"line {lineno}: duplicate eid {eid}")
            ev = Event(eid, etype, counter, parent, attrs=attrs, at=at)
            store.add(ev)
            open_[eid] = ev
        else:
            m = re.compile(r"E (\d+) (\d+) ").match(line)
            if not m:
                raise DumpError(f"line {lineno}: malformed record")
            eid, counter = int(m.group(1)), int(m.group(2))
            sc.i = m.end() - 1
            attrs, at = sc.fields()
            if counter <= last:
                raise DumpError(f"line {lineno}: counter does not increase")
            ev = open_.pop(eid, None)
            if ev is None:
                raise DumpError(f"line {lineno}: END of unknown or closed event {eid}")
            ev.end = counter
            ev.attrs.update(attrs)
            ev.at.update(at)
        last = counter
        signals += 1
    if first:
        raise DumpError("empty trace dump")
    if open_:
        raise DumpError(f"truncated dump: {len(open_)} event(s) never end "
                        f"(first eid {min(open_)})")
    store.closed = True
    store.full_mask = header.full
    return Dump(header, store, signals)


def read_dump(path: str) -> Dump:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_dump(fh)
    except OSError as e:
        raise DumpError(f"can not read {path}: {e.strerror}") from None


def write_store(fh: TextIO, store: TraceStore, header: DumpHeader) -> None:
    """Serialize a closed store, interleaving BEGIN and END records by counter."""
    w = DumpWriter(fh, header)
    edges = []
    for e in store.events:
        edges.append((e.begin, 0, e))
        if e.end is not None:
            edges.append((e.end, 1, e))
    edges.sort(key=lambda x: x[0])
    for _c, kind, e in edges:
        # attributes are split back onto the edge where they become known
        battrs = {k: v for k, v in e.attrs.items() if k in BEGIN_ATTRS or k == "time_at_begin"}
        eattrs = {k: v for k, v in e.attrs.items() if k not in battrs}
        if kind == 0:
            w.begin(e.eid, e.etype, e.begin, e.parent, battrs, {})
        else:
            w.end(e.eid, e.end, eattrs, e.at)

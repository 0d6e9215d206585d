"""Event trace model: event types, the precedence and inclusion relations,
path sets and event-grammar validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

PROG_EX = "prog_ex"
EXPR_EVAL = "expr_eval"
FUNC_CALL = "func_call"
INPUT = "input"
OUTPUT = "output"
VARIABLE = "variable"
LITERAL = "literal"
LHP = "lhp"
RHP = "rhp"
CLAUSE = "clause"
TEST = "test"
ITERATION = "iteration"

# child -> parent in the type hierarchy
TYPE_PARENT: dict[str, str | None] = {
    PROG_EX: None,
    EXPR_EVAL: PROG_EX,
    FUNC_CALL: EXPR_EVAL,
    VARIABLE: EXPR_EVAL,
    LITERAL: EXPR_EVAL,
    CLAUSE: EXPR_EVAL,
    ITERATION: EXPR_EVAL,
    TEST: EXPR_EVAL,
    LHP: EXPR_EVAL,
    RHP: EXPR_EVAL,
    INPUT: FUNC_CALL,
    OUTPUT: FUNC_CALL,
}

EVENT_TYPES = frozenset(TYPE_PARENT)

# Event types that stand for a plain expression evaluation in grammar axioms.
GENERAL_TYPES = frozenset({EXPR_EVAL, FUNC_CALL, INPUT, OUTPUT, VARIABLE, LITERAL})


class OpenEventError(ValueError):
    """A relation that needs both interval ends was asked of an open event."""


class TraceOpenError(ValueError):
    """following_path was requested before the trace was complete."""


def subtype_of(t1: str, t2: str) -> bool:
    if t1 not in TYPE_PARENT or t2 not in TYPE_PARENT:
        raise ValueError(f"unknown event type: {t1 if t1 not in TYPE_PARENT else t2}")
    t: str | None = t1
    while t is not None:
        if t == t2:
            return True
        t = TYPE_PARENT[t]
    return False


def lineage(t: str) -> list[str]:
    """`t` followed by its ancestors up to the root."""
    out = []
    cur: str | None = t
    while cur is not None:
        out.append(cur)
        cur = TYPE_PARENT[cur]
    return out


def descendants_of(t: str) -> frozenset[str]:
    return frozenset(x for x in EVENT_TYPES if subtype_of(x, t))


@dataclass(slots=True, eq=False)
class Event:
    eid: int
    etype: str
    begin: int
    parent: int | None = None
    end: int | None = None
    attrs: dict[str, Any] = field(default_factory=dict)
    # at-expression results keyed by site id
    at: dict[int, Any] = field(default_factory=dict)

    @property
    def closed(self) -> bool:
        return self.end is not None

    def get(self, name: str) -> Any:
        if name == "counter_at_begin":
            return self.begin
        if name == "counter_at_end":
            return self.end
        if name == "duration":
            t0, t1 = self.attrs.get("time_at_begin"), self.attrs.get("time_at_end")
            if t0 is None or t1 is None:
                return None
            return t1 - t0
        return self.attrs.get(name)

    def __repr__(self) -> str:
        return f"Event({self.etype}#{self.eid} [{self.begin},{self.end}])"


def precedes(a: Event, b: Event) -> bool:
    if a.end is None or b.end is None:
        raise OpenEventError(f"precedes() on open event: {a if a.end is None else b}")
    return a.end < b.begin


class TraceStore:
    """A (possibly projected) event trace: events in begin order plus the
    structural parent links."""

    def __init__(self) -> None:
        self.events: list[Event] = []
        self.by_eid: dict[int, Event] = {}
        self.children: dict[int, list[int]] = {}
        self.closed = False
        self.full_mask = True

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, eid: int) -> Event:
        return self.by_eid[eid]

    def add(self, ev: Event) -> Event:
        if self.events and ev.begin <= self.events[-1].begin:
            raise ValueError("events must be appended in begin-counter order")
        if ev.eid in self.by_eid:
            raise ValueError(f"duplicate eid {ev.eid}")
        self.events.append(ev)
        self.by_eid[ev.eid] = ev
        if ev.parent is not None:
            self.children.setdefault(ev.parent, []).append(ev.eid)
        return ev

    def roots(self) -> list[Event]:
        return [e for e in self.events if e.parent is None]

    def kids(self, e: Event) -> list[Event]:
        return [self.by_eid[c] for c in self.children.get(e.eid, ())]

    def ancestors(self, e: Event) -> list[Event]:
        out = []
        p = e.parent
        while p is not None:
            pe = self.by_eid[p]
            out.append(pe)
            p = pe.parent
        return out

    def descendants(self, e: Event) -> list[Event]:
        out: list[Event] = []
        stack = list(reversed(self.children.get(e.eid, ())))
        while stack:
            x = self.by_eid[stack.pop()]
            out.append(x)
            stack.extend(reversed(self.children.get(x.eid, ())))
        return out


def includes(store: TraceStore, a: Event, b: Event) -> bool:
    p = b.parent
    while p is not None:
        if p == a.eid:
            return True
        p = store.by_eid[p].parent
    return False


def prev_path(store: TraceStore, e: Event) -> list[Event]:
    return [x for x in store.events if x.end is not None and x.end < e.begin]


def following_path(store: TraceStore, e: Event) -> list[Event]:
    if not store.closed:
        raise TraceOpenError("following_path needs a complete trace")
    if e.end is None:
        raise OpenEventError(f"following_path() of open event {e}")
    return [x for x in store.events if x.begin > e.end]


# --- grammar validation ---------------------------------------------------


@dataclass(frozen=True)
class Violation:
    eid: int | None
    axiom: str
    message: str

    def __str__(self) -> str:
        where = "-" if self.eid is None else str(self.eid)
        return f"violation eid={where} axiom={self.axiom}: {self.message}"


class PartialTraceError(ValueError):
    """Grammar axioms are only checkable on a full-mask, closed trace."""


def _general(es: Iterable[Event]) -> bool:
    return all(e.etype in GENERAL_TYPES for e in es)


def validate_grammar(store: TraceStore) -> list[Violation]:
    if not store.full_mask:
        raise PartialTraceError("trace was recorded with a partial event mask")
    if not store.closed:
        raise PartialTraceError("trace is not closed")
    out: list[Violation] = []
    roots = store.roots()
    if len(roots) != 1 or roots[0].etype != PROG_EX:
        out.append(Violation(roots[1].eid if len(roots) > 1 else None, "single-root",
                             f"expected one prog_ex root, found {[r.etype for r in roots]}"))
    for e in store.events:
        if e.end is None or e.end <= e.begin:
            out.append(Violation(e.eid, "interval", "event is open or has end <= begin"))
            continue
        if e.etype == PROG_EX and e.parent is not None:
            out.append(Violation(e.eid, "single-root", "prog_ex nested inside another event"))
        kids = store.kids(e)
        for k in kids:
            if k.end is None or not (e.begin < k.begin and k.end < e.end):
                out.append(Violation(k.eid, "nesting", f"not enclosed by parent {e.eid}"))
        out.extend(_check_sibling_order(kids))
        v = _check_children(e, kids)
        if v is not None:
            out.append(v)
    return out


def _check_sibling_order(kids: list[Event]) -> list[Violation]:
    out = []
    for prev, nxt in zip(kids, kids[1:]):
        if prev.end is None or nxt.end is None:
            continue
        if prev.etype == LHP and nxt.etype == RHP:
            if not (prev.begin < nxt.begin and nxt.end < prev.end):
                out.append(Violation(nxt.eid, "assignment",
                                     "rhp must begin after and end before its lhp"))
        elif not prev.end < nxt.begin:
            out.append(Violation(nxt.eid, "precedence",
                                 f"sibling overlaps preceding sibling {prev.eid}"))
    return out


def _check_children(e: Event, kids: list[Event]) -> Violation | None:
    types = [k.etype for k in kids]
    if e.etype == PROG_EX:
        if not _general(kids):
            return Violation(e.eid, "prog_ex", f"prog_ex children must be expressions: {types}")
        return None
    if e.etype in (VARIABLE, LITERAL):
        if kids:
            return Violation(e.eid, "leaf", f"{e.etype} events have no sub-events")
        return None
    if e.etype == ITERATION:
        inner = types
        if inner and inner[0] == TEST:
            inner = inner[1:]
        elif inner and inner[-1] == TEST:
            inner = inner[:-1]
        if not all(t in GENERAL_TYPES for t in inner):
            return Violation(e.eid, "iteration",
                             f"iteration must be (test expr_eval*) | (expr_eval* test) | (expr_eval*): {types}")
        return None
    # remaining types are all expr_eval alternatives
    if LHP in types or RHP in types:
        if types != [LHP, RHP]:
            return Violation(e.eid, "assignment", f"assignment must include exactly {{lhp, rhp}}: {types}")
        return None
    if TEST in types or CLAUSE in types:
        if types not in ([TEST], [TEST, CLAUSE]):
            return Violation(e.eid, "conditional", f"conditional must be (test clause): {types}")
        return None
    if ITERATION in types:
        if any(t != ITERATION for t in types):
            return Violation(e.eid, "loop", f"loop must include only iterations: {types}")
        return None
    if not _general(kids):
        return Violation(e.eid, "expr_eval", f"unexpected sub-events {types}")
    return None


# --- attribute tables -----------------------------------------------------

UNIVERSAL_ATTRS = ("source_text", "line_num", "col_num", "time_at_begin", "time_at_end",
                   "counter_at_begin", "counter_at_end", "duration")

TYPE_ATTRS: dict[str, tuple[str, ...]] = {
    EXPR_EVAL: ("value", "operator", "type", "failure_p"),
    FUNC_CALL: ("func_name", "paramlist"),
    INPUT: ("file",),
    OUTPUT: ("file",),
    LHP: ("address",),
}

# attributes known when an event begins; the rest arrive with its end
BEGIN_ATTRS = frozenset({"source_text", "line_num", "col_num", "time_at_begin", "counter_at_begin",
                         "operator", "func_name", "paramlist", "file"})


def attrs_for(etype: str) -> tuple[str, ...]:
    out = list(UNIVERSAL_ATTRS)
    for t in reversed(lineage(etype)):
        out.extend(TYPE_ATTRS.get(t, ()))
    return tuple(out)


def capture_fields(attrs) -> frozenset[str]:
    """Stored attribute fields needed to answer the given attribute names."""
    out = set()
    for a in attrs:
        if a == "duration":
            out.update(("time_at_begin", "time_at_end"))
        elif a not in ("counter_at_begin", "counter_at_end"):
            out.add(a)
    return frozenset(out)


# rule-language attribute spellings -> stored attribute name
ATTR_ALIASES = {
    "source_text": "source_text", "line_num": "line_num", "col_num": "col_num",
    "time_at_begin": "time_at_begin", "time_at_end": "time_at_end",
    "counter_at_begin": "counter_at_begin", "counter_at_end": "counter_at_end",
    "duration": "duration", "value": "value", "operator": "operator", "type": "type",
    "failure": "failure_p", "failure_p": "failure_p", "func_name": "func_name",
    "paramlist": "paramlist", "param_names": "paramlist", "file_name": "file",
    "filename": "file", "file": "file", "address": "address",
}


def canonical_attr(name: str) -> str | None:
    return ATTR_ALIASES.get(name.lower())

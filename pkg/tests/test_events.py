import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ufomon.events import (EVENT_TYPES, Event, OpenEventError, PartialTraceError, TraceOpenError,
                           TraceStore, attrs_for, canonical_attr, descendants_of, following_path,
                           includes, precedes, prev_path, subtype_of, validate_grammar)


def build(spec, store=None, parent=None, counter=None):
    """spec is (etype, [children]); counters are assigned depth first."""
    store = store if store is not None else TraceStore()
    counter = counter if counter is not None else [0]
    etype, kids = spec
    counter[0] += 1
    ev = store.add(Event(len(store) + 1, etype, counter[0], parent))
    for k in kids:
        build(k, store, ev.eid, counter)
    counter[0] += 1
    ev.end = counter[0]
    return store


def closed(spec):
    s = build(spec)
    s.closed = True
    return s


def assign(kid_of_rhp=()):
    return ("expr_eval", [("lhp", []), ("rhp", list(kid_of_rhp))])


def assignment_store():
    """x := 1 by hand: the rhp nests inside the lhp interval."""
    s = TraceStore()
    s.add(Event(1, "prog_ex", 1, None, 10))
    s.add(Event(2, "expr_eval", 2, 1, 9))
    s.add(Event(3, "lhp", 3, 2, 8))
    s.add(Event(4, "rhp", 4, 2, 7))
    s.add(Event(5, "literal", 5, 4, 6))
    s.closed = True
    return s


def test_subtype_examples():
    assert subtype_of("input", "func_call")
    assert subtype_of("expr_eval", "expr_eval")
    assert not subtype_of("lhp", "func_call")
    assert all(subtype_of(t, "prog_ex") for t in EVENT_TYPES)
    with pytest.raises(ValueError):
        subtype_of("statement", "expr_eval")


def test_descendants():
    assert descendants_of("func_call") == {"func_call", "input", "output"}
    assert descendants_of("lhp") == {"lhp"}


def test_attribute_inheritance():
    assert "func_name" in attrs_for("input")
    assert "file" in attrs_for("input")
    assert "value" in attrs_for("lhp")
    assert "func_name" not in attrs_for("variable")
    assert canonical_attr("FAILURE") == "failure_p"
    assert canonical_attr("PARAM_NAMES") == "paramlist"
    assert canonical_attr("nonsense") is None


def test_precedes_examples():
    a = Event(1, "expr_eval", 3, None, 5)
    b = Event(2, "expr_eval", 6, None, 9)
    assert precedes(a, b)
    assert not precedes(a, a)
    s = assignment_store()
    lhp, rhp = s[3], s[4]
    assert not precedes(lhp, rhp) and not precedes(rhp, lhp)
    with pytest.raises(OpenEventError):
        precedes(a, Event(3, "expr_eval", 10))


def test_includes_examples():
    s = assignment_store()
    root = s[1]
    assert all(includes(s, root, e) for e in s if e is not root)
    assert not includes(s, s[2], s[2])
    assert includes(s, s[2], s[3])
    assert not includes(s, s[3], s[4])


def two_statements():
    return closed(("prog_ex", [assign([("literal", [])]), assign([("literal", [])])]))


def test_prev_and_following_path():
    s = two_statements()
    first, second = s[2], s[6]
    assert prev_path(s, s[2]) == []
    assert {e.eid for e in prev_path(s, second)} == {2, 3, 4, 5}
    assert {e.eid for e in following_path(s, first)} == {6, 7, 8, 9}
    last = s.events[-1]
    assert following_path(s, s[6]) == []
    assert last not in following_path(s, last)
    s.closed = False
    with pytest.raises(TraceOpenError):
        following_path(s, first)


def test_grammar_accepts_assignment():
    assert validate_grammar(assignment_store()) == []


def test_grammar_clause_without_test():
    s = closed(("prog_ex", [("expr_eval", [("expr_eval", []), ("clause", [("expr_eval", [])])])]))
    v = validate_grammar(s)
    assert len(v) == 1 and v[0].axiom == "conditional" and v[0].eid == 2


def test_grammar_two_roots():
    s = TraceStore()
    s.add(Event(1, "prog_ex", 1, None, 2))
    s.add(Event(2, "prog_ex", 3, None, 4))
    s.closed = True
    v = validate_grammar(s)
    assert len(v) == 1 and v[0].axiom == "single-root"


def test_grammar_iteration_shapes():
    ok = ("prog_ex", [("expr_eval", [("iteration", [("test", []), ("expr_eval", [])]),
                                     ("iteration", [("expr_eval", []), ("test", [])]),
                                     ("iteration", [])])])
    assert validate_grammar(closed(ok)) == []
    bad = ("prog_ex", [("expr_eval", [("iteration", [("test", []), ("test", [])])])])
    assert [v.axiom for v in validate_grammar(closed(bad))] == ["iteration"]


def test_grammar_leaf_and_loop():
    leaf = ("prog_ex", [("variable", [("literal", [])])])
    assert [v.axiom for v in validate_grammar(closed(leaf))] == ["leaf"]
    loop = ("prog_ex", [("expr_eval", [("iteration", []), ("expr_eval", [])])])
    assert [v.axiom for v in validate_grammar(closed(loop))] == ["loop"]


def test_grammar_sibling_overlap():
    s = TraceStore()
    s.add(Event(1, "prog_ex", 1, None, 10))
    s.add(Event(2, "expr_eval", 2, 1, 5))
    s.add(Event(3, "expr_eval", 3, 1, 6))
    s.closed = True
    axioms = {v.axiom for v in validate_grammar(s)}
    assert "precedence" in axioms


def test_grammar_needs_full_closed_store():
    s = assignment_store()
    s.full_mask = False
    with pytest.raises(PartialTraceError):
        validate_grammar(s)
    s = assignment_store()
    s.closed = False
    with pytest.raises(PartialTraceError):
        validate_grammar(s)


def test_store_append_order():
    s = TraceStore()
    s.add(Event(1, "prog_ex", 5))
    with pytest.raises(ValueError):
        s.add(Event(2, "expr_eval", 3, 1))
    with pytest.raises(ValueError):
        s.add(Event(1, "expr_eval", 7, 1))


def test_event_derived_attributes():
    e = Event(1, "expr_eval", 3, None, 8, {"time_at_begin": 10, "time_at_end": 14})
    assert e.get("duration") == 4
    assert e.get("counter_at_begin") == 3 and e.get("counter_at_end") == 8
    assert Event(2, "expr_eval", 1).get("duration") is None


# --- properties over generated stores ------------------------------------------

trees = st.recursive(st.just(("expr_eval", [])),
                     lambda kids: st.tuples(st.just("expr_eval"), st.lists(kids, max_size=3)),
                     max_leaves=12)
stores = trees.map(lambda t: closed(("prog_ex", [t])))


@settings(max_examples=150, deadline=None)
@given(stores)
def test_precedes_is_a_strict_order(s):
    evs = s.events
    for a in evs:
        assert not precedes(a, a)
        for b in evs:
            if precedes(a, b):
                assert not precedes(b, a)
                assert not includes(s, a, b) and not includes(s, b, a)
                for c in evs:
                    if precedes(b, c):
                        assert precedes(a, c)


@settings(max_examples=150, deadline=None)
@given(stores)
def test_paths_partition_the_store(s):
    for e in s.events:
        before = {x.eid for x in prev_path(s, e)}
        after = {x.eid for x in following_path(s, e)}
        assert not before & after
        rest = {x.eid for x in s.ancestors(e)} | {x.eid for x in s.descendants(e)} | {e.eid}
        assert before | after | rest == {x.eid for x in s.events}


@settings(max_examples=100, deadline=None)
@given(stores)
def test_generated_stores_are_grammatical(s):
    assert validate_grammar(s) == []

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from support import CORPUS, corpus_programs
from ufomon.errors import SourceSyntaxError
from ufomon.events import EVENT_TYPES, Event, TraceStore, validate_grammar
from ufomon.mtl import FAIL, EventMask, Interpreter, parse_expression, parse_program, run
from ufomon.mtl.ast import Assign


def signals(src, mask=None, input_lines=None, **kw):
    got = []
    out = io.StringIO()
    prog = parse_program(src)
    it = Interpreter(prog, mask or EventMask.everything(), None,
                     lambda s, i: got.append(s), out, input_lines, logical_clock=True)
    status = it.run()
    return got, out.getvalue(), status


def to_store(sigs):
    s = TraceStore()
    for sig in sigs:
        if sig.kind == "B":
            s.add(Event(sig.eid, sig.etype, sig.counter, sig.parent, attrs=dict(sig.attrs)))
        else:
            s[sig.eid].end = sig.counter
            s[sig.eid].attrs.update(sig.attrs)
    s.closed = True
    return s


def main(body):
    return "procedure main ()\n" + body + "\nend\n"


def test_parse_minimal():
    p = parse_program("procedure main() x := 1 end")
    (stmt,) = p.statements()
    assert isinstance(stmt, Assign)
    assert (stmt.line, stmt.col) == (1, 18)
    assert stmt.text == "x := 1"


def test_parse_bsearch():
    # fourteen statements; the listing has seventeen non-blank lines
    p = parse_program((CORPUS / "bsearch_buggy.mtl").read_text())
    assert len(p.statements()) == 14
    assert list(p.procedures) == ["main"]


def test_canonical_source_text():
    p = parse_program(main("y  :=   ( a+b )*  2"))
    assert p.statements()[0].text == "y := (a + b) * 2"


@pytest.mark.parametrize("src", [
    "procedure main( x :=",
    "procedure f() end",
    "procedure main() end procedure main() end",
    "procedure main() x := $ end",
])
def test_syntax_errors(src):
    with pytest.raises(SourceSyntaxError) as ei:
        parse_program(src)
    assert ei.value.line >= 1 and ei.value.col >= 1


def test_assignment_signal_sequence():
    sigs, _, _ = signals("procedure main() x := 1 end")
    assert [(s.kind, s.etype) for s in sigs] == [
        ("B", "prog_ex"), ("B", "expr_eval"), ("B", "lhp"), ("B", "rhp"), ("B", "literal"),
        ("E", "literal"), ("E", "rhp"), ("E", "lhp"), ("E", "expr_eval"), ("E", "prog_ex")]
    counters = [s.counter for s in sigs]
    assert counters == sorted(counters) and len(set(counters)) == len(counters)
    b_assign = sigs[1]
    assert b_assign.attrs["operator"] == ":=" and b_assign.attrs["source_text"] == "x := 1"
    e_lhp = sigs[7]
    assert e_lhp.attrs["value"] == 1 and e_lhp.attrs["address"].endswith(":x")


def test_bsearch_outputs():
    for name, want in (("bsearch_buggy.mtl", "found= 0\n"), ("bsearch_fixed.mtl", "found= 1\n")):
        out = io.StringIO()
        status = run(parse_program((CORPUS / name).read_text()), out=out)
        assert status.ok and out.getvalue() == want


def test_pop_of_empty_list_fails_silently():
    sigs, out, status = signals(main("y := pop([])\nwrite(\"y=\", y)"))
    assert status.ok and out == "y=\n"
    pop_end = [s for s in sigs if s.kind == "E" and s.etype == "func_call"][0]
    assert pop_end.attrs["failure_p"] is True
    assert not any(s.etype == "lhp" and s.kind == "E" and s.attrs.get("value") is not None
                   for s in sigs)


def test_comparison_yields_right_operand():
    _, out, _ = signals(main('write(1 < 2)\nif 2 < 1 then write("no") else write("fail")'))
    assert out == "2\nfail\n"


def test_runtime_error_closes_open_events():
    sigs, _, status = signals(main("x := 1 / 0"))
    assert status.kind == "RUNTIME_ERROR" and status.line == 2
    opened = {s.eid for s in sigs if s.kind == "B"}
    ended = {s.eid for s in sigs if s.kind == "E"}
    assert opened == ended
    assert sigs[-1].etype == "prog_ex"
    assign_end = [s for s in sigs if s.kind == "E" and s.eid == 2][0]
    assert assign_end.attrs["failure_p"] is True


def test_null_arithmetic_and_negative_sqrt_are_errors():
    assert signals(main("y := x + 1"))[2].kind == "RUNTIME_ERROR"
    assert signals(main("y := sqrt(-1)"))[2].kind == "RUNTIME_ERROR"
    assert signals(main("y := sqrt(9.0)"))[2].ok


def test_integer_division_truncates():
    _, out, _ = signals(main("write(7 / 2, \" \", -7 / 2, \" \", 7.0 / 2)"))
    assert out == "3 -3 3.5\n"


def test_read_until_exhausted():
    _, out, status = signals(main("while l := read() do write(\"[\", l, \"]\")"),
                             input_lines=["a", "b"])
    assert status.ok and out == "[a]\n[b]\n"
    _, out, status = signals(main('if read() then write("got") else write("none")'))
    assert out == "none\n"


def test_input_and_output_events():
    sigs, _, _ = signals(main('write("hi")\nx := read()'), input_lines=["1"])
    kinds = [(s.etype, s.attrs.get("func_name")) for s in sigs if s.kind == "B"]
    assert ("output", "write") in kinds and ("input", "read") in kinds


def test_eval_in_context_at_end_of_assignment():
    seen = []
    prog = parse_program(main("mid := 7"))

    def sink(sig, interp):
        if sig.kind == "E" and sig.etype == "expr_eval":
            seen.append(interp.eval_in_context("mid"))
    Interpreter(prog, EventMask.everything(), sink=sink, out=io.StringIO()).run()
    assert seen == [7]


def test_eval_in_context_write_and_size():
    out = io.StringIO()
    results = []
    prog = parse_program(main("L := []\nX := 5\nf(L)") + "procedure f(p)\n return 0\nend\n")

    def sink(sig, interp):
        if sig.kind == "B" and sig.etype == "func_call":
            results.append(interp.eval_in_context('write("entering, X is:", X)'))
            results.append(interp.eval_in_context("*p = 0"))
            results.append(interp.eval_in_context("1 / 0"))
    it = Interpreter(prog, EventMask.everything(), sink=sink, out=out)
    it.run()
    assert out.getvalue() == "entering, X is:\n"  # X is local to main, not visible in f
    assert results[0] is None
    assert results[1] == 0
    assert results[2] is FAIL and it.diagnostics


def test_global_visible_in_at_expression():
    out = io.StringIO()
    prog = parse_program("global X\n" + main("X := 5\nf()") + "procedure f()\n return 0\nend\n")

    def sink(sig, interp):
        if sig.kind == "B" and sig.etype == "func_call":
            interp.eval_in_context('write("X is ", X)')
    Interpreter(prog, EventMask.everything(), sink=sink, out=out).run()
    assert out.getvalue() == "X is 5\n"


def test_parse_expression_errors():
    assert parse_expression("a + 1").text == "a + 1"
    with pytest.raises(SourceSyntaxError):
        parse_expression("a +")


@pytest.mark.parametrize("name", corpus_programs())
def test_corpus_full_traces_are_grammatical(name):
    inp = ["4", "8", "15"] if name == "read_sum.mtl" else None
    src = (CORPUS / name).read_text()
    if name == "loop10k.mtl":
        src = src.replace("10000", "300")
    sigs, _, _ = signals(src, input_lines=inp)
    assert validate_grammar(to_store(sigs)) == []


def restrict(sigs, mask):
    emitted = mask.emitted_types()
    out = []
    for s in sigs:
        if s.etype not in emitted:
            continue
        cap = mask.capture_for(s.etype)
        out.append((s.kind, s.etype, {k: v for k, v in s.attrs.items() if k in cap}))
    return out


PROGRAMS = ["bsearch_buggy.mtl", "empty_pop.mtl", "profile.mtl", "trace_calls.mtl", "uninit.mtl"]
TYPES = sorted(EVENT_TYPES - {"prog_ex"})


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(PROGRAMS), st.sets(st.sampled_from(TYPES), max_size=4),
       st.sets(st.sampled_from(["value", "line_num", "source_text", "func_name", "operator"])))
def test_mask_monotonicity(name, types, attrs):
    """Under a smaller mask the signals are the restriction of the full run."""
    src = (CORPUS / name).read_text()
    full, out_full, _ = signals(src)
    mask = EventMask(frozenset(types) | {"prog_ex"},
                     {t: frozenset(attrs) for t in types})
    part, out_part, _ = signals(src, mask)
    assert out_part == out_full
    got = [(s.kind, s.etype, s.attrs) for s in part]
    assert got == restrict(full, mask)


def test_determinism_of_signals():
    src = (CORPUS / "profile.mtl").read_text()
    a, _, _ = signals(src)
    b, _, _ = signals(src)
    assert a == b


@settings(max_examples=200, deadline=None)
@given(st.integers(-50, 50), st.integers(-50, 50),
       st.sampled_from(["<", "<=", ">", ">=", "=", "~="]))
def test_comparisons_match_reference(a, b, op):
    import operator
    ref = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
           "=": operator.eq, "~=": operator.ne}[op]
    _, out, _ = signals(main(f'x := "unset"\nx := ({a}) {op} ({b})\nwrite(x)'), EventMask(frozenset()))
    assert out == (f"{b}\n" if ref(a, b) else "unset\n")

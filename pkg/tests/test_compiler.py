import pytest

from rule_texts import EXAMPLES
from support import CORPUS
from ufomon.compiler import check_line, classify, compile, derive_event_mask
from ufomon.errors import CompileError
from ufomon.rules import parse_rules


def rule(text):
    return parse_rules(text).items[0]


@pytest.mark.parametrize("text,cat", [
    ('FOREACH A: func_call & A.func_name == "f" A.value > 0', "I"),
    ("SAY(CARD[r: input])", "I"),
    ("FOREACH A: func_call FOREACH B: expr_eval FROM A B.value > 0", "II"),
    ("FOREACH A: iteration CARD[e: lhp FROM A] > 0", "II"),
    ("FOREACH V: variable FIND D: lhp FROM V.prev_path D.value > 0", "III"),
    ("FOREACH A: lhp FIND B: variable FROM A.following_path B.value > 0", "IV"),
    ("FOREACH A: lhp FIND B: variable FROM prog_ex B.value > 0", "IV"),
])
def test_classify(text, cat):
    assert classify(rule(text)) == cat


def test_classify_examples():
    assert classify(rule(EXAMPLES[4])) == "III"
    for n in (1, 3, 5):
        assert classify(rule(EXAMPLES[n])) == "I"
    for r in parse_rules(EXAMPLES[2]).items:
        assert classify(r) == "I"


def test_classification_ignores_labels_and_say():
    a = rule("FOREACH V: variable FIND D: lhp FROM V.prev_path D.value > 0")
    b = rule('other: FOREACH V: variable FIND D: lhp FROM V.prev_path D.value > 0 '
             'WHEN FAILS SAY("x" V)')
    assert classify(a) == classify(b)


def test_example_1_mask():
    m = derive_event_mask(parse_rules(EXAMPLES[1]))
    assert m.types - {"prog_ex"} == {"func_call"}
    assert m.attr_demand == {"func_call": {"func_name"}}
    assert [(s.edge, s.etype) for s in m.at_exprs] == [("BEGIN", "func_call"), ("END", "func_call")]


def test_example_7_mask():
    m = derive_event_mask(parse_rules(EXAMPLES[7]))
    assert m.types - {"prog_ex"} == {"func_call"}
    assert m.attr_demand == {"func_call": {"func_name", "duration"}}
    assert m.capture_for("func_call") >= {"time_at_begin", "time_at_end"}


def test_empty_ruleset_mask():
    m = derive_event_mask(parse_rules(""))
    assert m.types == {"prog_ex"} and m.attr_demand == {} and m.at_exprs == ()
    assert m.emitted_types() == {"prog_ex"}


def test_mask_keys_are_types():
    for p in CORPUS.glob("*.ufo"):
        m = derive_event_mask(parse_rules(p.read_text()))
        assert set(m.attr_demand) <= m.types, p.name


def test_check_line_example_4():
    plan = compile(parse_rules(EXAMPLES[4]))
    assert [check_line(e) for e in plan.entries] == [
        "rule <anon-1>: category=III types={variable,lhp} attrs={source_text}"]


def test_check_line_show():
    plan = compile(parse_rules(EXAMPLES[7]))
    assert check_line(plan.entries[0]) == "show <anon-1>: types={func_call} attrs={func_name,duration}"


def test_plans_per_category():
    plan = compile(parse_rules(EXAMPLES[5] + ";\n" + EXAMPLES[4]))
    pop, uninit = plan.rules
    assert (pop.category, pop.policy) == ("I", "none")
    assert [(s.edge, s.etype) for s in pop.sites] == [("BEGIN", "func_call")]
    assert (uninit.category, uninit.policy) == ("III", "B-list-retained")
    assert uninit.inner.etype == "lhp" and not uninit.deferred
    iv = compile(parse_rules((CORPUS / "dead_store.ufo").read_text())).rules[0]
    assert iv.policy == "A-and-B-retained" and iv.deferred


def test_within_attaches_scope():
    plan = compile(parse_rules("WITHIN f DO\n" + EXAMPLES[1] + "\nEND_WITHIN"))
    (r,) = plan.rules
    assert r.scope == ("f",)
    assert "func_name" in plan.mask.attr_demand["func_call"]


def test_compile_is_deterministic():
    text = (CORPUS / "scoped.ufo").read_text() + ";\n" + EXAMPLES[4] + ";\n" + EXAMPLES[6]
    assert compile(parse_rules(text)).to_json() == compile(parse_rules(text)).to_json()


def test_compile_rejects_checker_diagnostics():
    with pytest.raises(CompileError):
        compile(parse_rules('FOREACH v: variable v.FUNC_NAME == "f"'))


def test_sites_are_shared_within_a_rule():
    plan = compile(parse_rules(
        "FOREACH a: expr_eval a.value_at_end(mid) > 1 OR a.value_at_end(mid) < 0;\n"
        "FOREACH b: expr_eval b.value_at_end(mid) > 1"))
    assert len(plan.sites) == 2
    assert sorted(plan.site_ids.values()) == [1, 2]

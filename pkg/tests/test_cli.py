import io
import subprocess
import sys

import pytest

from rule_texts import EXAMPLE_4, EXAMPLE_5
from support import CORPUS
from ufomon.cli import main


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p
    return write


def test_bare_say_rule_has_no_verdict(files):
    rules = files("pop.ufo", EXAMPLE_5)
    prog = files("pop.mtl", "procedure main()\n  L := []\n  pop(L)\n  write(\"done\")\nend\n")
    for extra in ((), ("--strict",)):
        code, out, _ = cli("run", "--rules", rules, "--program", prog, *extra)
        assert code == 0
        lines = out.splitlines()
        assert sum(ln.startswith("Popping from empty list") for ln in lines) == 1
        assert lines == [lines[0], "done", "verdict <anon-1>: N/A"]


def test_unknown_flag():
    code, _, err = cli("run", "--rules", "x", "--program", "y", "--bogus")
    assert code == 2 and "unrecognized arguments: --bogus" in err
    assert cli()[0] == 2


def test_missing_files(tmp_path):
    code, _, err = cli("run", "--rules", tmp_path / "nope.ufo", "--program", "p")
    assert code == 2 and "can not read" in err


def test_strict_fails(files):
    rules = files("u.ufo", EXAMPLE_4)
    code, out, _ = cli("run", "--rules", rules, "--program", CORPUS / "uninit.mtl", "--strict")
    assert code == 1 and "verdict <anon-1>: FAILS" in out
    code, _, _ = cli("run", "--rules", rules, "--program", CORPUS / "uninit.mtl")
    assert code == 0


def test_target_runtime_error(files):
    prog = files("bad.mtl", "procedure main()\n  x := 1 / 0\nend\n")
    code, out, err = cli("run", "--rules", CORPUS / "uninit.ufo", "--program", prog)
    assert code == 3 and "runtime error at line 2:" in err
    assert "verdict <anon-1>: SUCCEEDS" in out


def test_compile_errors(files):
    prog = files("bad.mtl", "procedure main( x :=")
    assert cli("run", "--rules", CORPUS / "uninit.ufo", "--program", prog)[0] == 2
    rules = files("bad.ufo", "FOREACH a: func_call a.nosuch > 1")
    assert cli("run", "--rules", rules, "--program", CORPUS / "uninit.mtl")[0] == 2


def test_report_and_stats(files, tmp_path):
    report = tmp_path / "r.txt"
    code, out, err = cli("run", "--rules", CORPUS / "uninit.ufo", "--program",
                         CORPUS / "uninit.mtl", "--report", report, "--stats")
    assert code == 0
    assert "uninitialized" not in out and "total 6 count" in out
    assert report.read_text().splitlines()[-1] == "verdict <anon-1>: FAILS"
    assert err.startswith("stats events_observed=")
    assert "stats rule <anon-1>: category=III" in err


def test_replay_matches_live(tmp_path):
    dump = tmp_path / "d.evt"
    code, live, _ = cli("run", "--rules", CORPUS / "dead_store.ufo", "--program",
                        CORPUS / "dead_store.mtl", "--trace-out", dump, "--logical-clock")
    code2, again, _ = cli("replay", "--rules", CORPUS / "dead_store.ufo", "--trace", dump,
                          "--strict")
    assert code == 0 and code2 == 1
    monitor = [ln for ln in live.splitlines() if ln in again.splitlines()]
    assert monitor == again.splitlines() and "FAILS" in again


def test_replay_mask_shortfall(tmp_path, files):
    dump = tmp_path / "d.evt"
    cli("run", "--rules", CORPUS / "empty_pop.ufo", "--program", CORPUS / "empty_pop.mtl",
        "--trace-out", dump)
    code, _, err = cli("replay", "--rules", files("u.ufo", EXAMPLE_4), "--trace", dump)
    assert code == 2 and "trace dump lacks" in err
    code, out, _ = cli("replay", "--rules", CORPUS / "empty_pop.ufo", "--trace", dump)
    assert code == 0 and out.count("Popping from empty list") == 3


def test_replay_malformed(files):
    code, _, err = cli("replay", "--rules", CORPUS / "uninit.ufo", "--trace",
                       files("x.evt", "hello\n"))
    assert code == 2 and "not a trace dump" in err


def test_check(files):
    code, out, _ = cli("check", "--rules", files("u.ufo", EXAMPLE_4))
    assert (code, out) == (0, "rule <anon-1>: category=III types={variable,lhp} "
                              "attrs={source_text}\n")
    code, out, err = cli("check", "--rules", files(
        "c1.ufo", "FOREACH a: func_call FOREACH b: lhp FROM a CARD[c: lhp] > 1"))
    assert code == 2 and out == "" and "constraint 1" in err
    code, out, err = cli("check", "--rules", files("bad.ufo", "FOREACH v: variable v.FUNC_NAME"))
    assert code == 2 and "not defined for variable" in err
    assert cli("check", "--rules", files("empty.ufo", "")) == (0, "", "")


@pytest.fixture
def full_dump(tmp_path):
    dump = tmp_path / "u.evt"
    cli("run", "--rules", CORPUS / "uninit.ufo", "--program", CORPUS / "uninit.mtl",
        "--full-mask", "--trace-out", dump, "--logical-clock")
    return dump


def corrupt(dump, edit):
    text = dump.read_text()
    new = edit(text)
    assert new != text
    dump.with_name("bad.evt").write_text(new)
    return dump.with_name("bad.evt")


def retype(eid, old, new):
    return lambda t: t.replace(f"\nB {eid} {old} ", f"\nB {eid} {new} ", 1)


def test_validate_ok(full_dump):
    assert cli("validate-trace", full_dump) == (0, "", "")


@pytest.mark.parametrize("edit,axiom", [
    (retype(73, "test", "expr_eval"), "conditional"),   # clause without a test
    (lambda t: t.replace("\nB 3 lhp ", "\nB 3 rhp ", 1).replace("\nB 4 rhp ", "\nB 4 lhp ", 1),
     "assignment"),
    (retype(2, "expr_eval", "prog_ex"), "single-root"),
])
def test_validate_seeded_corruption(full_dump, edit, axiom):
    code, out, _ = cli("validate-trace", corrupt(full_dump, edit))
    assert code == 1
    assert any(f"axiom={axiom}:" in ln for ln in out.splitlines())


def test_validate_one_violation(full_dump):
    code, out, _ = cli("validate-trace", corrupt(full_dump, retype(73, "test", "expr_eval")))
    assert code == 1 and len(out.splitlines()) == 1


@pytest.mark.parametrize("edit,fragment", [
    (lambda t: t.rstrip("\n").rsplit("\n", 1)[0] + "\n", "truncated dump"),
    (lambda t: t.replace("\nB 3 lhp 3 ", "\nB 3 lhp 1 ", 1), "counter does not increase"),
])
def test_validate_malformed(full_dump, edit, fragment):
    code, _, err = cli("validate-trace", corrupt(full_dump, edit))
    assert code == 2 and fragment in err


def test_validate_needs_full_mask(tmp_path):
    dump = tmp_path / "p.evt"
    cli("run", "--rules", CORPUS / "uninit.ufo", "--program", CORPUS / "uninit.mtl",
        "--trace-out", dump)
    assert cli("validate-trace", dump)[0] == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ufomon.cli", "check", "--rules",
                        str(CORPUS / "uninit.ufo")], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("rule <anon-1>: category=III")

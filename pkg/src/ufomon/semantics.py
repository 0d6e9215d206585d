"""Per-binding rule semantics shared by the live runtime and the oracle.

Both drivers hand this module the outer bindings and, for nested rules, the
candidate inner events in END order.  Where those candidates come from is
what differs: projection templates at run time, brute force post mortem.
Output lines are keyed by the counter at which they were decided so both
drivers produce the same sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .compiler import RulePlan
from .events import Event
from .mtl.values import FAIL, image
from .rules.ast import Aggregate, AtValue, Reduction, Say, walk
from .rules.evaluate import MonitorError, evaluate, truthy

SESSION_END = float("inf")

SUCCEEDS, FAILS, NA = "SUCCEEDS", "FAILS", "N/A"


def event_image(ev: Event) -> str:
    return f"{ev.etype}@{ev.get('line_num')}:{ev.get('col_num')}#{ev.eid}"


@dataclass
class Recorder:
    """Collects SAY and diagnostic lines under their ordering keys."""
    on_say: Callable[[str], None] | None = None
    on_diag: Callable[[str], None] | None = None
    says: list[tuple[Any, int, int, str]] = field(default_factory=list)
    diags: list[tuple[Any, int, int, str]] = field(default_factory=list)
    _seq: int = 0

    def say(self, key, rule: int, text: str) -> None:
        self._seq += 1
        self.says.append((key, rule, self._seq, text))
        if self.on_say:
            self.on_say(text)

    def diag(self, key, rule: int, text: str) -> None:
        self._seq += 1
        self.diags.append((key, rule, self._seq, text))
        if self.on_diag:
            self.on_diag(text)

    def say_lines(self) -> list[str]:
        return [t for *_k, t in sorted(self.says, key=lambda e: e[:3])]

    def diag_lines(self) -> list[str]:
        return [t for *_k, t in sorted(self.diags, key=lambda e: e[:3])]


class _Ctx:
    def __init__(self, rule_index: int, site_ids: dict):
        self.rule_index = rule_index
        self.site_ids = site_ids
        self.agg_value: Any = None
        self.agg_ready = False

    def at_value(self, node: AtValue, ev: Event) -> Any:
        sid = self.site_ids.get((self.rule_index, node.metavar, node.edge, node.text))
        if sid is None:
            raise MonitorError(f"no at-expression site for {node.text!r}")
        return ev.at.get(sid, FAIL)

    def aggregate(self, node: Aggregate | Reduction, env) -> Any:
        if not self.agg_ready:
            raise MonitorError("aggregate value is not available here")
        return self.agg_value


def render_say(say: Say, env: dict[str, Event], ctx, problems: list[str]) -> str:
    parts = []
    for item in say.items:
        try:
            v = evaluate(item, env, ctx)
        except MonitorError as e:
            problems.append(str(e))
            parts.append("<?>")
            continue
        parts.append(event_image(v) if isinstance(v, Event) else image(v))
    return "".join(parts)


class RuleEval:
    def __init__(self, plan: RulePlan, site_ids: dict, rec: Recorder):
        self.plan = plan
        self.rule = plan.rule
        self.rec = rec
        self.ctx = _Ctx(plan.index, site_ids)
        self.errored = False
        self.bindings = 0
        self.failures = 0
        self.witness: dict[str, Event] | None = None
        self.witness_agg: Any = None
        self.kind = self.rule.quantifiers[0].kind if self.rule.quantifiers else None
        self.verdict: str | None = None
        # lone aggregate accumulation
        self.acc: Any = 0

    # --- helpers ---------------------------------------------------------------
    def _diag(self, key, msg: str, ev: Event | None) -> None:
        where = f" [{ev.etype}#{ev.eid}]" if ev is not None else ""
        self.rec.diag(key, self.plan.index, f"rule {self.plan.name}: {msg}{where}")

    def _eval(self, e, env, key, ev, default=False) -> Any:
        try:
            return evaluate(e, env, self.ctx)
        except MonitorError as err:
            self.errored = True
            self._diag(key, str(err), ev)
            return default

    def _test(self, e, env, key, ev) -> bool:
        if e is None:
            return True
        return truthy(self._eval(e, env, key, ev))

    def _say_all(self, says: tuple[Say, ...], env, key) -> None:
        for s in says:
            problems: list[str] = []
            text = render_say(s, env, self.ctx, problems)
            for p in problems:
                self._diag(key, f"SAY: {p}", None)
            self.rec.say(key, self.plan.index, text)

    def _fold_aggregate(self, env: dict[str, Event], cands: list[Event], key) -> Any:
        agg = self.plan.aggregate
        total: Any = 0
        for b in cands:
            benv = {**env, agg.pattern.metavar: b}
            if not self._test(agg.pattern.guard, benv, key, b):
                continue
            total = self._accumulate(total, agg, benv, key, b)
        return total

    def _accumulate(self, total, agg: Aggregate, benv, key, b) -> Any:
        if agg.reducer == "CARD":
            return total + 1
        if agg.apply is None:
            v = b.get("value")
        else:
            v = self._eval(agg.apply, benv, key, b, FAIL)
        if v is FAIL:
            return total
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.errored = True
            self._diag(key, f"SUM over a non-numeric value {image(v)}", b)
            return total
        return total + v

    # --- driver entry points -------------------------------------------------------
    def aggregate_event(self, b: Event, key) -> None:
        """A rule with a lone aggregate folds each matching event as it ends."""
        agg = self.plan.aggregate
        benv = {agg.pattern.metavar: b}
        if self._test(agg.pattern.guard, benv, key, b):
            self.acc = self._accumulate(self.acc, agg, benv, key, b)

    def binding(self, a: Event, cands: list[Event] | None, key) -> None:
        outer = self.plan.outer
        env = {outer.metavar: a}
        agg = self.plan.aggregate
        agg_in_guard = agg is not None and outer.guard is not None and any(
            x is agg for x in walk(outer.guard))
        if agg is not None and agg_in_guard:
            self._set_agg(self._fold_aggregate(env, cands or [], key))
        if not self._test(outer.guard, env, key, a):
            return
        self.bindings += 1
        say_env = dict(env)
        if self.plan.inner_kind == "quantifier":
            t, extra = self._inner_quantifier(env, cands or [], key)
            say_env.update(extra)
        else:
            if agg is not None and not agg_in_guard:
                self._set_agg(self._fold_aggregate(env, cands or [], key))
            t = self._test(self.rule.body, env, key, a)
        if not t:
            self.failures += 1
        if self.kind == "FOREACH":
            if not t:
                self._say_all(self.rule.on_fail, say_env, key)
            elif not self.rule.success_explicit:
                self._say_all(self.rule.on_success, say_env, key)
        elif t and self.witness is None:
            self.witness = say_env
            self.witness_agg = self.ctx.agg_value

    def _set_agg(self, v) -> None:
        self.ctx.agg_value = v
        self.ctx.agg_ready = True

    def _inner_quantifier(self, env, cands: list[Event], key) -> tuple[bool, dict]:
        q = self.rule.quantifiers[1]
        m = q.pattern.metavar
        results = []
        for b in cands:
            benv = {**env, m: b}
            if not self._test(q.pattern.guard, benv, key, b):
                continue
            results.append((b, self._test(self.rule.body, benv, key, b)))
        if q.kind == "FOREACH":
            bad = next((b for b, r in results if not r), None)
            return bad is None, ({} if bad is None else {m: bad})
        good = next((b for b, r in results if r), None)
        return good is not None, ({} if good is None else {m: good})

    def finish(self) -> str:
        key = SESSION_END
        rule = self.rule
        if self.kind is None:
            if self.plan.aggregate is not None:
                self._set_agg(self.acc)
            ok = self._test(rule.body, {}, key, None)
            if ok and not self.errored:
                self._say_all(rule.on_success, {}, key)
            else:
                self._say_all(rule.on_fail, {}, key)
            if self.errored or not ok:
                v = FAILS
            else:
                v = NA if rule.body is None else SUCCEEDS
        elif self.kind == "FOREACH":
            trivial = rule.body is None and all(q.kind == "FOREACH" for q in rule.quantifiers)
            if self.errored or self.failures:
                v = FAILS
            else:
                v = NA if trivial else SUCCEEDS
                if rule.success_explicit:
                    self.ctx.agg_ready = False
                    self._say_all(rule.on_success, {}, key)
        else:
            if self.witness is not None and not self.errored:
                v = SUCCEEDS
                self._set_agg(self.witness_agg)
                self._say_all(rule.on_success, self.witness, key)
            else:
                v = FAILS
                self.ctx.agg_ready = False
                self._say_all(rule.on_fail, {}, key)
        self.verdict = v
        return v


def in_scope(ev: Event, parent_of: Callable[[int], Event | None], scope) -> bool:
    """WITHIN: some enclosing call is to one of the named procedures."""
    if not scope:
        return True
    p = parent_of(ev.parent) if ev.parent is not None else None
    while p is not None:
        if p.etype == "func_call" and p.get("func_name") in scope:
            return True
        p = parent_of(p.parent) if p.parent is not None else None
    return False


@dataclass
class Report:
    says: list[str]
    verdicts: list[tuple[str, str]]
    diagnostics: list[str]
    stats: dict[str, Any] = field(default_factory=dict)
    plots: list = field(default_factory=list)
    exit: Any = None
    target_diagnostics: list[str] = field(default_factory=list)

    def verdict_lines(self) -> list[str]:
        return [f"verdict {name}: {v}" for name, v in self.verdicts]

    def monitor_lines(self) -> list[str]:
        return self.says + self.verdict_lines()

    def text(self, diagnostics: bool = True) -> str:
        lines = self.monitor_lines()
        if diagnostics:
            lines = lines + [f"diagnostic: {d}" for d in self.diagnostics]
        return "".join(line + "\n" for line in lines)

    @property
    def any_fails(self) -> bool:
        return any(v == FAILS for _n, v in self.verdicts)

"""SHOW rules: data series, axis resolution and static SVG / CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .events import Event
from .mtl.values import FAIL, image
from .rules.ast import Axis, ShowRule, Sidebar
from .rules.evaluate import MonitorError, evaluate, truthy

DEFAULT_WINDOW = (640, 480)


@dataclass
class SetSeries:
    index: int  # 1-based
    label: str
    color: str
    shape: str
    connected: bool
    points: list[tuple[Any, Any]] = field(default_factory=list)
    # BAR_CHART: x key -> accumulated y, in order of first appearance
    bars: dict[Any, Any] = field(default_factory=dict)

    def rows(self, kind: str) -> list[tuple[Any, Any]]:
        return list(self.bars.items()) if kind == "BAR_CHART" else list(self.points)


@dataclass
class DataSeries:
    kind: str
    sets: list[SetSeries]
    matched: int = 0
    diagnostics: list[str] = field(default_factory=list)


def _num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _key(v: Any) -> Any:
    return v if isinstance(v, (str, int, float)) and not isinstance(v, bool) else image(v)


class SeriesBuilder:
    """Feeds matched SOURCE events, in END order, into a DataSeries."""

    def __init__(self, rule: ShowRule, ctx, diag: Callable[[Event, str], None] | None = None):
        self.rule = rule
        self.ctx = ctx
        self.diag_cb = diag
        self.ordinal = 0
        sets = []
        for i, s in enumerate(rule.sets, 1):
            shape = s.shape or "circle"
            sets.append(SetSeries(i, f"set {i} ({s.mark_color} {shape})", s.mark_color, shape,
                                  bool(s.connected)))
        self.series = DataSeries(rule.kind, sets)
        self._sums: dict[tuple[int, str], Any] = {}

    def _diag(self, ev: Event, msg: str) -> None:
        text = f"{msg} [{ev.etype}#{ev.eid}]"
        self.series.diagnostics.append(text)
        if self.diag_cb:
            self.diag_cb(ev, text)

    def _value(self, e, env, ev) -> Any:
        try:
            return evaluate(e, env, self.ctx)
        except MonitorError as err:
            self._diag(ev, f"axis expression: {err}")
            return FAIL

    def add(self, ev: Event) -> None:
        m = self.rule.source.metavar
        env = {m: ev}
        if self.rule.source.guard is not None:
            ok = self._value(self.rule.source.guard, env, ev)
            if not truthy(ok):
                return
        self.ordinal += 1
        self.series.matched += 1
        for spec, st in zip(self.rule.sets, self.series.sets):
            xa = spec.x_axis or self.rule.x_axis
            if self.rule.kind == "BAR_CHART":
                self._bar(st, xa, spec.y_axis, env, ev)
            else:
                self._point(st, xa, spec.y_axis, env, ev)

    def _axis(self, st: SetSeries, which: str, ax: Axis, env, ev) -> Any:
        if ax.kind == "ORD":
            return self.ordinal
        v = self._value(ax.expr, env, ev)
        if ax.kind == "ADD":
            if not _num(v):
                return FAIL
            k = (st.index, which)
            self._sums[k] = self._sums.get(k, 0) + v
            return self._sums[k]
        return v

    def _point(self, st: SetSeries, xa: Axis, ya: Axis, env, ev) -> None:
        x = self._axis(st, "x", xa, env, ev)
        y = self._axis(st, "y", ya, env, ev)
        if not (_num(x) and _num(y)):
            self._diag(ev, f"set {st.index}: datum skipped (x={image(x)}, y={image(y)})")
            return
        st.points.append((x, y))

    def _bar(self, st: SetSeries, xa: Axis, ya: Axis, env, ev) -> None:
        xv = self._axis(st, "x", xa, env, ev) if xa.kind != "ORD" else self.ordinal
        if xv is FAIL:
            self._diag(ev, f"set {st.index}: bar skipped (x failed)")
            return
        x = _key(xv)
        if ya.kind == "ORD":
            st.bars[x] = st.bars.get(x, 0) + 1
            return
        v = self._value(ya.expr, env, ev)
        if not _num(v):
            self._diag(ev, f"set {st.index}: bar value skipped (y={image(v)})")
            return
        if ya.kind == "ADD":
            st.bars[x] = st.bars.get(x, 0) + v
        else:
            st.bars[x] = v


def evaluate_show(rule: ShowRule, events: Iterable[Event], ctx) -> DataSeries:
    b = SeriesBuilder(rule, ctx)
    for ev in events:
        b.add(ev)
    return b.series


# --- axis resolution ---------------------------------------------------------------

@dataclass(frozen=True)
class AxisRange:
    lo: float
    hi: float
    scaling: str
    ticknum: int
    label: str

    def fraction(self, v: float) -> float | None:
        """Position of ``v`` along the axis in [0, 1], or None if unmappable."""
        lo, hi = self.lo, self.hi
        if self.scaling == "logarithmic":
            if v <= 0 or lo <= 0:
                return None
            u = (math.log10(v) - math.log10(lo)) / (math.log10(hi) - math.log10(lo))
        else:
            u = (v - lo) / (hi - lo)
            if self.scaling == "exponential":
                u = (10 ** u - 1) / 9
        return u

    def ticks(self) -> list[float]:
        n = max(self.ticknum, 2)
        if self.scaling == "logarithmic" and self.lo > 0:
            a, b = math.log10(self.lo), math.log10(self.hi)
            return [10 ** (a + (b - a) * i / (n - 1)) for i in range(n)]
        if self.scaling == "exponential":
            # evenly spaced on screen
            return [self.lo + (self.hi - self.lo) * math.log10(1 + 9 * i / (n - 1))
                    for i in range(n)]
        return [self.lo + (self.hi - self.lo) * i / (n - 1) for i in range(n)]


def resolve_axis(side: Sidebar, values: list[float], diag: list[str], name: str) -> AxisRange:
    label = side.text_label or ""
    vals = [v for v in values if _num(v)]
    if side.scaling == "logarithmic":
        bad = [v for v in vals if v <= 0]
        if bad:
            diag.append(f"{name} axis: {len(bad)} non-positive value(s) skipped on a log scale")
        vals = [v for v in vals if v > 0]
    ib, ie = side.interval_begin, side.interval_end
    has_interval = ib is not None and ie is not None and ie > ib
    if side.moving == "fixed" and has_interval:
        lo, hi = float(ib), float(ie)
        out = [v for v in vals if v < lo or v > hi]
        if out:
            diag.append(f"{name} axis: {len(out)} value(s) outside the fixed interval "
                        f"[{ib}, {ie}] clipped")
    elif side.moving == "scroll" and has_interval and vals:
        hi = float(max(vals))
        lo = hi - (ie - ib)
    elif vals:
        lo, hi = float(min(vals)), float(max(vals))
    elif has_interval:
        lo, hi = float(ib), float(ie)
    else:
        lo, hi = 0.0, 1.0
    if hi <= lo:
        lo, hi = (lo / 2, lo * 2) if side.scaling == "logarithmic" and lo > 0 else (lo - 1, hi + 1)
    if side.scaling == "logarithmic" and lo <= 0:
        pos = [v for v in vals if v > 0]
        lo = min(pos) if pos else 1.0
        if hi <= lo:
            hi = lo * 10
    return AxisRange(lo, hi, side.scaling, side.ticknum, label)


@dataclass
class PlotSpec:
    rule: ShowRule
    width: int
    height: int
    x: AxisRange | None  # None for categorical bar charts
    y: AxisRange
    categories: list[Any]
    diagnostics: list[str] = field(default_factory=list)


def plot_spec(rule: ShowRule, series: DataSeries) -> PlotSpec:
    diag: list[str] = []
    w, h = rule.window or DEFAULT_WINDOW
    if rule.kind == "BAR_CHART":
        cats: list[Any] = []
        for st in series.sets:
            for k in st.bars:
                if k not in cats:
                    cats.append(k)
        ys = [v for st in series.sets for v in st.bars.values()]
        # bars grow from zero
        y = resolve_axis(rule.y_side, ys + ([0] if rule.y_side.scaling != "logarithmic" else []),
                         diag, "y")
        return PlotSpec(rule, w, h, None, y, cats, diag)
    xs = [p[0] for st in series.sets for p in st.points]
    ys = [p[1] for st in series.sets for p in st.points]
    return PlotSpec(rule, w, h, resolve_axis(rule.x_side, xs, diag, "x"),
                    resolve_axis(rule.y_side, ys, diag, "y"), [], diag)


# --- rendering -------------------------------------------------------------------------

_M_LEFT, _M_RIGHT, _M_TOP, _M_BOTTOM = 64, 24, 44, 56


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _mark(shape: str, x: float, y: float, color: str, r: float = 3.5) -> str:
    if shape == "square":
        return (f'<rect x="{_f(x - r)}" y="{_f(y - r)}" width="{_f(2 * r)}" height="{_f(2 * r)}" '
                f'fill="{color}"/>')
    if shape == "triangle":
        pts = f"{_f(x)},{_f(y - r)} {_f(x - r)},{_f(y + r)} {_f(x + r)},{_f(y + r)}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    return f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{color}"/>'


def svg_text(series: DataSeries, spec: PlotSpec) -> str:
    w, h = spec.width, spec.height
    x0, x1 = _M_LEFT, w - _M_RIGHT
    y0, y1 = h - _M_BOTTOM, _M_TOP  # screen y grows downwards
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f"<title>{_esc(spec.rule.title)}</title>",
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<text x="{_f(w / 2)}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{_esc(spec.rule.title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]

    def sy(v: float) -> float | None:
        u = spec.y.fraction(v)
        return None if u is None else y0 + (y1 - y0) * u

    for t in spec.y.ticks():
        py = sy(t)
        if py is None:
            continue
        out.append(f'<line x1="{x0 - 4}" y1="{_f(py)}" x2="{x0}" y2="{_f(py)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 6}" y="{_f(py + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{_tick_label(t)}</text>')
    if spec.y.label:
        out.append(f'<text x="14" y="{_f((y0 + y1) / 2)}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11" transform="rotate(-90 14 '
                   f'{_f((y0 + y1) / 2)})">{_esc(spec.y.label)}</text>')
    xlabel = spec.rule.x_side.text_label
    if xlabel:
        out.append(f'<text x="{_f((x0 + x1) / 2)}" y="{h - 12}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_esc(xlabel)}</text>')

    if spec.x is None:
        out += _bars(series, spec, x0, x1, y0, sy)
    else:
        out += _points(series, spec, x0, x1, y0, y1, sy)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _points(series, spec, x0, x1, y0, y1, sy) -> list[str]:
    out = []

    def sx(v: float) -> float | None:
        u = spec.x.fraction(v)
        return None if u is None else x0 + (x1 - x0) * u

    for t in spec.x.ticks():
        px = sx(t)
        if px is None:
            continue
        out.append(f'<line x1="{_f(px)}" y1="{y0}" x2="{_f(px)}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{_f(px)}" y="{y0 + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{_tick_label(t)}</text>')
    for st in series.sets:
        pts = []
        for x, y in st.points:
            px, py = sx(x), sy(y)
            if px is None or py is None:
                continue
            if not (x0 - 0.01 <= px <= x1 + 0.01 and y1 - 0.01 <= py <= y0 + 0.01):
                continue  # clipped by a fixed axis
            pts.append((px, py))
        out.append(f'<g id="set{st.index}">')
        if st.connected and len(pts) > 1:
            coords = " ".join(f"{_f(px)},{_f(py)}" for px, py in pts)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{st.color}"/>')
        out += [_mark(st.shape, px, py, st.color) for px, py in pts]
        out.append("</g>")
    return out


def _bars(series, spec, x0, x1, y0, sy) -> list[str]:
    out = []
    cats = spec.categories
    nsets = max(len(series.sets), 1)
    slot = (x1 - x0) / max(len(cats), 1)
    bw = slot * 0.8 / nsets
    base = sy(max(spec.y.lo, 0)) if spec.y.scaling != "logarithmic" else y0
    base = y0 if base is None else min(base, y0)
    for i, c in enumerate(cats):
        cx = x0 + slot * (i + 0.5)
        out.append(f'<text x="{_f(cx)}" y="{y0 + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{_esc(image(c))}</text>')
    for j, st in enumerate(series.sets):
        out.append(f'<g id="set{st.index}">')
        for i, c in enumerate(cats):
            if c not in st.bars:
                continue
            py = sy(st.bars[c])
            if py is None:
                continue
            left = x0 + slot * i + slot * 0.1 + bw * j
            top, bottom = min(py, base), max(py, base)
            out.append(f'<rect x="{_f(left)}" y="{_f(top)}" width="{_f(bw)}" '
                       f'height="{_f(bottom - top)}" fill="{st.color}" stroke="black"/>')
        out.append("</g>")
    return out


def render_svg(series: DataSeries, spec: PlotSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg_text(series, spec))


def csv_text(series: DataSeries) -> str:
    buf = io.StringIO()
    buf.write("set,x,y\n")
    w = csv.writer(buf, quoting=csv.QUOTE_NONNUMERIC, lineterminator="\n")
    for st in series.sets:
        for x, y in st.rows(series.kind):
            w.writerow([st.index, x, y])
    return buf.getvalue()


def render_csv(series: DataSeries, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(series))


def plot_name(rule: ShowRule, ordinal: int) -> str:
    return rule.label or str(ordinal)


__all__ = ["AxisRange", "DataSeries", "PlotSpec", "SeriesBuilder", "SetSeries", "csv_text",
           "evaluate_show", "plot_name", "plot_spec", "render_csv", "render_svg",
           "resolve_axis", "svg_text"]

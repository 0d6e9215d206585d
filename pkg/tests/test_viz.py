import re

from rule_texts import EXAMPLE_7
from support import run
from test_runtime import live, main
from ufomon.rules import parse_rules
from ufomon.rules.ast import Sidebar
from ufomon.viz import (AxisRange, DataSeries, SetSeries, csv_text, plot_name, plot_spec,
                        resolve_axis, svg_text)

FG = main("f()\nf()\ng()\nf()\ng()\nf()",
          "procedure f()\n x := 1\nend\nprocedure g()\n y := 2\nend\n")


def plots(rep):
    return [(series, spec) for _plan, series, spec in rep.plots]


def plot_rule(body, header=""):
    return f"SHOW POINT_PLOT (TITLE \"t\" X_SIDEBAR Y_SIDEBAR {header} SOURCE a: lhp X_AXIS ORD(a) SET Y_AXIS {body})"


def test_bsearch_mid_series():
    ((series, spec),) = plots(run("bsearch_buggy.mtl", "bsearch_plot.ufo").report)
    mid, top, bottom = series.sets
    assert [y for _x, y in mid.points][-1] == 8
    assert [x for x, _y in mid.points] == list(range(1, series.matched + 1))
    assert csv_text(series).splitlines()[0] == "set,x,y"
    ((series, _),) = plots(run("bsearch_fixed.mtl", "bsearch_plot.ufo").report)
    assert [r for r in csv_text(series).splitlines() if r.startswith("1,")][-1].endswith(",7")


def test_example_6_svg_header():
    ((series, spec),) = plots(run("bsearch_buggy.mtl", "bsearch_plot.ufo").report)
    svg = svg_text(series, spec)
    assert (spec.width, spec.height) == (500, 500)
    assert re.search(r'<svg [^>]*width="500" height="500"', svg)
    assert "<title>History of: bottom (magenta), mid (green), top(blue)</title>" in svg
    assert svg.count("<polyline") == 3
    assert (spec.x.lo, spec.x.hi) == (0, 30)


def test_default_window():
    rep, _ = live(main("x := 1"), plot_rule("a.value"))
    ((_series, spec),) = plots(rep)
    assert (spec.width, spec.height) == (640, 480)


def test_bar_chart_ord_rows():
    rep, _ = live(FG, EXAMPLE_7)
    ((series, _spec),) = plots(rep)
    rows = csv_text(series).splitlines()
    assert rows[:3] == ["set,x,y", '1,"f",4', '1,"g",2']


def test_bar_add_equals_sum_rule():
    rules = (EXAMPLE_7 + ';\nSAY(SUM[a: func_call & a.func_name == "f" APPLY a.DURATION]);\n'
             'SAY(SUM[a: func_call & a.func_name == "g" APPLY a.DURATION])')
    rep, _ = live(FG, rules)
    ((series, _spec),) = plots(rep)
    add = series.sets[1].bars
    assert [str(add["f"]), str(add["g"])] == rep.says


def test_empty_source():
    rep, _ = live(main("write(1)"), plot_rule("a.value"))
    ((series, spec),) = plots(rep)
    assert series.matched == 0 and csv_text(series) == "set,x,y\n"
    assert svg_text(series, spec).startswith("<?xml")


def test_failed_axis_skips_datum():
    rep, _ = live(main("x := 1\ny := \"s\"\nz := 3"), plot_rule("a.value + 1"))
    ((series, _),) = plots(rep)
    assert series.sets[0].points == [(1, 2), (3, 4)]
    assert "axis expression" in rep.diagnostics[0] and "datum skipped" in rep.diagnostics[1]


def test_fixed_axis_clipping():
    diag = []
    ax = resolve_axis(Sidebar(moving="fixed", interval_begin=0, interval_end=10), [3, 12, -1],
                      diag, "y")
    assert (ax.lo, ax.hi) == (0, 10)
    assert diag == ["y axis: 2 value(s) outside the fixed interval [0, 10] clipped"]


def test_log_scale_skips_non_positive():
    diag = []
    ax = resolve_axis(Sidebar(scaling="logarithmic"), [0, -2, 10, 100], diag, "y")
    assert ax.lo > 0 and "2 non-positive value(s) skipped" in diag[0]
    assert ax.fraction(-2) is None


def test_rescale_and_scroll():
    ax = resolve_axis(Sidebar(moving="rescale", ticknum=5), [2, 9], [], "y")
    assert ax.lo <= 2 and ax.hi >= 9 and len(ax.ticks()) == 5
    ax = resolve_axis(Sidebar(moving="scroll", interval_begin=0, interval_end=5), [1, 20], [], "x")
    assert (ax.lo, ax.hi) == (15, 20)


def test_origin_maps_to_corner():
    ax = AxisRange(0, 1, "linear", 2, "")
    assert ax.fraction(0) == 0 and ax.fraction(1) == 1
    rule = parse_rules("SHOW POINT_PLOT (TITLE \"o\" X_SIDE BAR MOVING fixed INTERVAL_BEGIN 0 INTERVAL_END 1 "
                       "Y_SIDE BAR MOVING fixed INTERVAL_BEGIN 0 INTERVAL_END 1 "
                       "SOURCE a: lhp X_AXIS a.value SET Y_AXIS a.value)").items[0]
    series = DataSeries("POINT_PLOT", [SetSeries(1, "s", "black", "circle", False, [(0, 0)])])
    spec = plot_spec(rule, series)
    svg = svg_text(series, spec)
    # the axes meet at the bottom-left corner of the plot area
    assert '<line x1="64" y1="424" x2="616" y2="424"' in svg
    assert '<circle cx="64.00" cy="424.00"' in svg


def test_svg_is_deterministic():
    a = [svg_text(s, p) for s, p in plots(run("profile.mtl", "profile.ufo").report)]
    b = [svg_text(s, p) for s, p in plots(run("profile.mtl", "profile.ufo").report)]
    assert a == b and a[0].endswith("</svg>\n")


def test_plot_names():
    rs = parse_rules("chart: " + EXAMPLE_7 + ";\n" + EXAMPLE_7)
    assert [plot_name(r, i) for i, r in enumerate(rs.items, 1)] == ["chart", "2"]


def test_profile_bars_count_calls():
    ((series, _),) = plots(run("profile.mtl", "profile.ufo").report)
    assert dict(series.sets[0].bars) == {"square": 6, "sum_squares": 2, "write": 3, "abs": 1}

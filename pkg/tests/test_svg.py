import math
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from sfgm.svg import Axes, Series, emit_svg

GOLDEN = Path(__file__).parent / "golden" / "tiny.svg"
NS = "{http://www.w3.org/2000/svg}"

TINY = [
    Series("fgm-css3", [1, 2, 3, 4], [1.0, 0.1, 0.02, 0.001]),
    Series("sfgm-last", [1, 2, 3], [0.5, 0.01, 1e-4]),
]


def test_golden_file():
    assert emit_svg(TINY, Axes(ylabel="gap", title="tiny")) == GOLDEN.read_text(encoding="utf-8")


def test_deterministic_and_well_formed():
    a, b = emit_svg(TINY), emit_svg(TINY)
    assert a == b
    root = ET.fromstring(a.encode())
    assert root.tag == NS + "svg" and root.get("version") == "1.1"
    assert "href" not in a  # no external assets


def test_polylines_and_legend_order():
    root = ET.fromstring(emit_svg(TINY).encode())
    assert len(root.findall(NS + "polyline")) == 2
    labels = [t.text for t in root.findall(NS + "text")]
    assert labels.index("fgm-css3") < labels.index("sfgm-last")


def test_log_axis():
    root = ET.fromstring(emit_svg(TINY).encode())
    ys = [float(p.split(",")[1]) for p in root.find(NS + "polyline").get("points").split()]
    # equal ratios in y map to equal pixel steps
    steps = [ys[1] - ys[0]]
    assert steps[0] == pytest.approx((ys[3] - ys[2]) / math.log10(20), rel=1e-3)


def test_single_point_is_marker():
    root = ET.fromstring(emit_svg([Series("one", [0], [1e-3])]).encode())
    assert len(root.findall(NS + "circle")) == 1 and not root.findall(NS + "polyline")


def test_nonpositive_values_skipped():
    svg = emit_svg([Series("a", [0, 1, 2], [1.0, 0.0, float("nan")])])
    assert "<circle" in svg


def test_all_empty_rejected():
    with pytest.raises(ValueError):
        emit_svg([Series("a", [], []), Series("b", [1], [0.0])])
    with pytest.raises(ValueError):
        emit_svg([])


def test_labels_escaped():
    svg = emit_svg([Series("a<b&c", [0, 1], [1, 2])])
    assert "a&lt;b&amp;c" in svg
    ET.fromstring(svg.encode())

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamshape.export import (
    HistoryRow,
    export_energy_csv,
    export_shape_svg,
    read_coefficients,
    read_energy_csv,
    write_coefficients,
)
from hamshape.geometry import ObstacleCircle
from hamshape.spline_geometry import ShapeParams, shape_from_params

SVG = "{http://www.w3.org/2000/svg}"


def test_svg_contract(tmp_path):
    mesh = shape_from_params(ShapeParams(np.full(5, 0.1), np.full(5, 0.2)), 41, 7)
    circle = ObstacleCircle((0.5, 0.26), 0.05)
    path = export_shape_svg(mesh, circle, tmp_path / "rod.svg", scale=400.0)
    root = ET.parse(path).getroot()
    polys = root.findall(f"{SVG}polyline")
    circles = root.findall(f"{SVG}circle")
    assert len(polys) == 1 and len(circles) == 1
    pts = np.array([[float(v) for v in p.split(",")] for p in polys[0].get("points").split()])
    np.testing.assert_allclose(pts[0], pts[-1])  # closed
    assert len(pts) == 2 * 41 + 2 * 7 - 4 + 1
    # equal aspect: width and height in user units match the model extents
    w = pts[:, 0].max() - pts[:, 0].min()
    h = pts[:, 1].max() - pts[:, 1].min()
    assert w == pytest.approx(400.0 * 1.0, abs=1e-2)
    assert h == pytest.approx(400.0 * 0.2, abs=1e-2)
    assert float(circles[0].get("r")) == pytest.approx(0.05 * 400.0, abs=1e-3)
    vb = [float(v) for v in root.get("viewBox").split()]
    assert vb[2] == pytest.approx(float(root.get("width"))) and vb[3] == pytest.approx(float(root.get("height")))


def test_svg_mesh_edges(tmp_path):
    mesh = shape_from_params(ShapeParams(np.full(5, 0.1), np.full(5, 0.2)), 5, 3)
    root = ET.parse(export_shape_svg(mesh, None, tmp_path / "m.svg", mesh_edges=True)).getroot()
    d = root.find(f"{SVG}path").get("d")
    # edges of a 5x3 grid split into triangles: 4*3 + 5*2 + 4*2 diagonals
    assert d.count("M") == 4 * 3 + 5 * 2 + 8


def test_unwritable_path(tmp_path):
    mesh = shape_from_params(ShapeParams(np.full(5, 0.1), np.full(5, 0.2)), 5, 3)
    with pytest.raises(OSError):
        export_shape_svg(mesh, None, tmp_path / "missing" / "x.svg")


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(finite, finite, finite, finite, finite, finite, finite), min_size=1, max_size=30))
def test_csv_round_trip(tmp_path_factory, rows):
    hist = [HistoryRow(k, *vals) for k, vals in enumerate(rows)]
    path = tmp_path_factory.mktemp("csv") / "e.csv"
    export_energy_csv(hist, path)
    assert read_energy_csv(path) == hist
    lines = path.read_text().splitlines()
    assert lines[0] == "k,t,e_pot,e_kin,e_tot,j1,j2,j3"
    assert len(lines) == len(hist) + 1


def test_251_steps_252_lines(tmp_path):
    hist = [HistoryRow(k, k / 250, 1.0, 0.0, 1.0, 0.1, 0.2, 0.0) for k in range(251)]
    export_energy_csv(hist, tmp_path / "e.csv")
    assert len((tmp_path / "e.csv").read_text().splitlines()) == 252


def test_coefficients_round_trip(tmp_path, rng):
    p = ShapeParams(rng.random(5), 0.1 + rng.random(5))
    back = read_coefficients(write_coefficients(p, tmp_path / "c.json"))
    np.testing.assert_array_equal(back.q_ml, p.q_ml)
    np.testing.assert_array_equal(back.q_th, p.q_th)
    np.testing.assert_array_equal(back.free_mask, p.free_mask)
    (tmp_path / "bad.json").write_text(json.dumps({"q_ml": [1, 2]}))
    with pytest.raises(ValueError):
        read_coefficients(tmp_path / "bad.json")

"""Artifact writers: SVG shapes, CSV histories and fronts, coefficients, manifest."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import ObstacleCircle
from .spline_geometry import MeshGrid, ShapeParams

ENERGY_COLUMNS = ("k", "t", "e_pot", "e_kin", "e_tot", "j1", "j2", "j3")
FRONT_COLUMNS = ("weight", "j1", "j2", "converged", "residual", "n_iter")


@dataclass(frozen=True)
class HistoryRow:
    k: int
    t: float
    e_pot: float
    e_kin: float
    e_tot: float
    j1: float
    j2: float
    j3: float


def history_rows(energies, objectives) -> list[HistoryRow]:
    """Zip energy records with the per-step objective values."""
    if len(energies) != len(objectives):
        raise ValueError(f"{len(energies)} energy records but {len(objectives)} objective values")
    return [
        HistoryRow(e.k, e.t, e.e_pot, e.e_kin, e.e_tot, v.j1, v.j2, v.j3)
        for e, v in zip(energies, objectives)
    ]


def _fmt(v) -> str:
    # repr of a float round-trips exactly
    return repr(float(v)) if not isinstance(v, (int, np.integer, bool)) else str(int(v))


def export_energy_csv(history, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENERGY_COLUMNS)
        for row in history:
            w.writerow([_fmt(getattr(row, c)) for c in ENERGY_COLUMNS])
    return path


def read_energy_csv(path) -> list[HistoryRow]:
    with Path(path).open(newline="") as fh:
        r = csv.DictReader(fh)
        if tuple(r.fieldnames or ()) != ENERGY_COLUMNS:
            raise ValueError(f"unexpected header {r.fieldnames}")
        return [HistoryRow(int(d["k"]), *(float(d[c]) for c in ENERGY_COLUMNS[1:])) for d in r]


def export_objectives_csv(rows, path, index_name: str = "iteration") -> Path:
    """``rows``: iterable of (index, ObjectiveValue)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((index_name, "j1", "j2", "j3", "j_lambda"))
        for k, v in rows:
            w.writerow((int(k), _fmt(v.j1), _fmt(v.j2), _fmt(v.j3), _fmt(v.j_lambda)))
    return path


def export_front_csv(front, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRONT_COLUMNS)
        for p in front:
            w.writerow((_fmt(p.weight), _fmt(p.j1), _fmt(p.j2), int(p.converged), _fmt(p.residual), p.n_iter))
    return path


def export_shape_svg(
    mesh: MeshGrid,
    circle: ObstacleCircle | None,
    path,
    scale: float = 500.0,
    margin: float = 0.05,
    mesh_edges: bool = False,
) -> Path:
    """Shape outline (and optionally the mesh) with the obstacle, equal aspect.

    One user unit per ``1/scale`` model units in both directions, so the
    circle radius is drawn as ``r * scale``.
    """
    pts = mesh.nodes
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if circle is not None:
        c = np.asarray(circle.midpoint)
        lo = np.minimum(lo, c - circle.radius)
        hi = np.maximum(hi, c + circle.radius)
    lo = lo - margin
    hi = hi + margin
    width, height = (hi - lo) * scale

    def tx(p):
        # flip y: SVG grows downwards
        return (p[..., 0] - lo[0]) * scale, (hi[1] - p[..., 1]) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.3f}" height="{height:.3f}" '
        f'viewBox="0 0 {width:.3f} {height:.3f}">',
    ]
    if mesh_edges:
        x, y = tx(pts)
        segs = set()
        for tri in mesh.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                segs.add((min(a, b), max(a, b)))
        d = " ".join(f"M{x[a]:.3f},{y[a]:.3f}L{x[b]:.3f},{y[b]:.3f}" for a, b in sorted(segs))
        out.append(f'<path class="mesh" d="{d}" fill="none" stroke="#999999" stroke-width="0.5"/>')
    ox, oy = tx(mesh.outline())
    coords = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(ox, oy))
    out.append(f'<polyline class="outline" points="{coords} {ox[0]:.3f},{oy[0]:.3f}" '
               'fill="#c6dbef" fill-opacity="0.6" stroke="#08306b" stroke-width="1"/>')
    if circle is not None:
        cx, cy = tx(np.asarray(circle.midpoint))
        out.append(f'<circle class="obstacle" cx="{cx:.3f}" cy="{cy:.3f}" r="{circle.radius * scale:.3f}" '
                   'fill="none" stroke="#cb181d" stroke-width="1"/>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def write_coefficients(params: ShapeParams, path) -> Path:
    """All spline coefficients plus the free mask, as JSON."""
    data = {
        "q_ml": [float(v) for v in params.q_ml],
        "q_th": [float(v) for v in params.q_th],
        "free_mask": np.asarray(params.free_mask, dtype=int).tolist(),
    }
    path = Path(path)
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


def read_coefficients(path) -> ShapeParams:
    data = json.loads(Path(path).read_text())
    try:
        mask = np.asarray(data["free_mask"], dtype=bool) if "free_mask" in data else None
        return ShapeParams(np.asarray(data["q_ml"], float), np.asarray(data["q_th"], float), mask)
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc}") from exc


def write_manifest(data: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path

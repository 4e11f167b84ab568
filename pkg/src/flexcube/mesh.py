"""Mesh export of 3-D polytopes: OFF files and JSON records.

Vertices are written in lexicographic order and facets are fan-triangulated
from their lowest-index vertex, so identical polytopes always produce
identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from flexcube.polytope import EmptyPolytope, Polytope, tolerance, to_vrep, vrep_to_hrep

AXIS_LABELS = ("rho", "pi", "eps")
AXIS_UNITS = ("MW/min", "MW", "MWh")


def fmt(value: float) -> str:
    """Locale-independent float text with 9 significant digits."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    out = f"{value:.9g}"
    return "0" if out == "-0" else out


def _order_polygon(points: np.ndarray, normal: np.ndarray, idx: list[int]) -> list[int]:
    c = points[idx].mean(axis=0)
    # in-plane orthonormal frame (u, w) with u x w = normal
    seed = np.eye(3)[int(np.argmin(np.abs(normal)))]
    u = np.cross(normal, seed)
    u /= np.linalg.norm(u)
    w = np.cross(normal, u)
    rel = points[idx] - c
    ang = np.arctan2(rel @ w, rel @ u)
    ordered = [idx[i] for i in np.argsort(ang, kind="stable")]
    start = ordered.index(min(ordered))
    return ordered[start:] + ordered[:start]


def triangulated_mesh(p: Polytope) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Vertices and outward-oriented triangles of a 3-D polytope.

    Flat polytopes yield both orientations of their polygon; segments and
    points yield no triangles.
    """
    if p.dim != 3:
        raise ValueError(f"mesh export needs a 3-D polytope, got dim {p.dim}")
    if isinstance(p, EmptyPolytope):
        return np.zeros((0, 3)), []
    v = to_vrep(p)
    V = np.asarray(v.vertices)
    if v.affine_dim < 2:
        return V, []
    h = vrep_to_hrep(v)
    tol = 10 * tolerance(h.offsets, V)
    tris: list[tuple[int, int, int]] = []
    for a, b in zip(h.normals, h.offsets):
        on = [i for i in range(len(V)) if abs(V[i] @ a - b) <= tol]
        if len(on) < 3:
            continue
        ring = _order_polygon(V, a, on)
        for j in range(1, len(ring) - 1):
            tris.append((ring[0], ring[j], ring[j + 1]))
    tris.sort()
    return V, tris


def off_text(p: Polytope) -> str:
    V, tris = triangulated_mesh(p)
    lines = ["OFF", f"{len(V)} {len(tris)} 0"]
    lines += [" ".join(fmt(c) for c in row) for row in V]
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    return "\n".join(lines) + "\n"


def write_off(path, p: Polytope) -> Path:
    path = Path(path)
    path.write_text(off_text(p), encoding="utf-8")
    return path


def mesh_record(p: Polytope, axis_labels=AXIS_LABELS, units=AXIS_UNITS) -> dict:
    """Structured-text form: ``{vertices, facets, axis_labels, units}``."""
    V, tris = triangulated_mesh(p)
    return {
        "vertices": [[float(fmt(c)) for c in row] for row in V],
        "facets": [list(t) for t in tris],
        "axis_labels": list(axis_labels),
        "units": list(units),
    }


def write_mesh_json(path, p: Polytope, axis_labels=AXIS_LABELS, units=AXIS_UNITS) -> Path:
    path = Path(path)
    path.write_text(json.dumps(mesh_record(p, axis_labels, units), indent=1, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def read_off(path) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Minimal OFF reader (used to check exports)."""
    tokens = Path(path).read_text(encoding="utf-8").split()
    if tokens[0] != "OFF":
        raise ValueError("not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    V = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        k = int(tokens[pos])
        faces.append(tuple(int(t) for t in tokens[pos + 1:pos + 1 + k]))
        pos += 1 + k
    return V, faces

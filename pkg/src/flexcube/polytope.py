"""Convex polytope algebra in low dimension.

Three concrete representations are supported and freely mixed:

* ``HPolytope``  -- halfspace form ``{x : A x <= b}``
* ``VPolytope``  -- convex hull of an irredundant vertex list
* ``Zonotope``   -- ``{c + G^T a : a in [-1, 1]^m}``

plus ``EmptyPolytope`` as an explicit empty value. All values are immutable;
every operation is a pure function. Lower-dimensional (flat) sets are
ordinary values: their H-representation carries paired opposing halfspaces
pinning the affine hull.

Geometric decisions use a single absolute tolerance ``EPS_GEOM`` (override
with the ``FLEXCUBE_EPS`` environment variable), scaled up by the magnitude
of the coordinates involved when those exceed 1.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from flexcube.errors import (
    DimensionMismatch,
    DimensionTooHigh,
    EmptyInput,
    Infeasible,
    Unbounded,
    UnboundedInDirection,
)

EPS_GEOM = float(os.environ.get("FLEXCUBE_EPS", "1e-9"))
MAX_DIM = 6
# batch size for combinatorial vertex enumeration
_CHUNK = 50_000


def _scale(*arrays) -> float:
    m = 1.0
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if a.size:
            m = max(m, float(np.max(np.abs(a))))
    return m


def tolerance(*arrays) -> float:
    """Geometric tolerance for data of the magnitude found in ``arrays``."""
    return EPS_GEOM * _scale(*arrays)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float) + 0.0  # no negative zeros
    a.flags.writeable = False
    return a


def _lexsorted(points: np.ndarray) -> np.ndarray:
    if len(points) <= 1:
        return points
    order = np.lexsort(points.T[::-1])
    return points[order]


def _unique_points(points: np.ndarray, tol: float) -> np.ndarray:
    """Merge points closer than ``tol`` (max-norm), keeping the first seen."""
    points = _lexsorted(points)
    keep: list[np.ndarray] = []
    for p in points:
        if keep:
            arr = np.asarray(keep)
            if np.any(np.max(np.abs(arr - p), axis=1) <= tol):
                continue
        keep.append(p)
    return np.asarray(keep).reshape(-1, points.shape[1])


def _merge_rows(A: np.ndarray, b: np.ndarray, tol: float):
    """Drop duplicate halfspaces (same unit normal and offset)."""
    if len(A) == 0:
        return A, b
    order = np.lexsort(np.column_stack([A, b]).T[::-1])
    A, b = A[order], b[order]
    keep = []
    for i in range(len(A)):
        dup = False
        for j in keep:
            if np.max(np.abs(A[i] - A[j])) <= 1e-9 and abs(b[i] - b[j]) <= tol:
                dup = True
                break
        if not dup:
            keep.append(i)
    return A[keep], b[keep]


# ---------------------------------------------------------------------------
# representations


@dataclass(frozen=True, eq=False)
class HPolytope:
    """The set ``{x : normals @ x <= offsets}``."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.asarray(self.offsets, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"{A.shape[0]} normals but {b.shape[0]} offsets")
        object.__setattr__(self, "normals", _readonly(A))
        object.__setattr__(self, "offsets", _readonly(b))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @classmethod
    def box(cls, lower, upper) -> "HPolytope":
        lo = np.asarray(lower, dtype=float).reshape(-1)
        hi = np.asarray(upper, dtype=float).reshape(-1)
        eye = np.eye(len(lo))
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @cached_property
    def bounded(self) -> bool:
        A, _ = _normalized_rows(self.normals, self.offsets)
        return _normals_positively_span(A)

    @cached_property
    def vertices(self) -> np.ndarray:
        return hrep_to_vrep(self).vertices

    def canonical(self) -> "HPolytope":
        """Irredundant form with unit normals (requires a bounded set)."""
        return vrep_to_hrep(hrep_to_vrep(self))

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, n_halfspaces={len(self.offsets)})"


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex hull of ``vertices``; redundant input points are discarded."""

    vertices: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        hull = _hull(pts)
        object.__setattr__(self, "vertices", _readonly(hull.vertices))
        object.__setattr__(self, "_hull", hull)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def affine_dim(self) -> int:
        return self._hull.rank

    @classmethod
    def box(cls, lower, upper) -> "VPolytope":
        lo = np.asarray(lower, dtype=float).reshape(-1)
        hi = np.asarray(upper, dtype=float).reshape(-1)
        corners = np.array(list(itertools.product(*zip(lo, hi))), dtype=float)
        return cls(corners)

    def __repr__(self):
        return f"VPolytope(dim={self.dim}, n_vertices={len(self.vertices)})"


@dataclass(frozen=True, eq=False)
class Zonotope:
    """Centrally symmetric polytope ``center + sum_i a_i g_i, a_i in [-1, 1]``."""

    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        G = np.asarray(self.generators, dtype=float).reshape(-1, len(c))
        object.__setattr__(self, "center", _readonly(c))
        object.__setattr__(self, "generators", _readonly(G))

    @property
    def dim(self) -> int:
        return len(self.center)

    @cached_property
    def vertices(self) -> np.ndarray:
        return to_vrep(self).vertices

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, n_generators={len(self.generators)})"


@dataclass(frozen=True)
class EmptyPolytope:
    """The empty set in ``dim`` dimensions (e.g. an infeasible erosion)."""

    dim: int

    @property
    def vertices(self) -> np.ndarray:
        return np.zeros((0, self.dim))


Polytope = Union[HPolytope, VPolytope, Zonotope, EmptyPolytope]


def is_empty(p: Polytope) -> bool:
    if isinstance(p, EmptyPolytope):
        return True
    if isinstance(p, HPolytope):
        try:
            hrep_to_vrep(p)
        except Infeasible:
            return True
    return False


# ---------------------------------------------------------------------------
# convex hull (V -> H) with support for flat point sets


@dataclass(frozen=True, eq=False)
class _HullData:
    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    rank: int


def _affine_rank(centered: np.ndarray, tol: float):
    if len(centered) < 2:
        d = centered.shape[1]
        return 0, np.zeros((d, 0)), np.eye(d)
    _, s, vt = np.linalg.svd(centered, full_matrices=True)
    rank = int(np.sum(s > tol * math.sqrt(len(centered))))
    return rank, vt[:rank].T, vt[rank:]


def _hull(points: np.ndarray) -> _HullData:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) == 0:
        raise EmptyInput("polytope needs at least one point")
    d = points.shape[1]
    if d > MAX_DIM:
        raise DimensionTooHigh(f"dimension {d} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(points)):
        raise ValueError("non-finite vertex coordinates")
    tol = tolerance(points)
    pts = _unique_points(points, tol)
    center = pts.mean(axis=0)
    centered = pts - center

    rank, basis, complement = _affine_rank(centered, tol)
    y = centered @ basis
    lat_A = np.zeros((0, rank))
    lat_b = np.zeros(0)
    if rank == 1:
        lat_A = np.array([[1.0], [-1.0]])
        lat_b = np.array([y.max(), -y.min()])
    elif rank >= 2:
        try:
            hull = ConvexHull(y)
        except QhullError:
            # nearly flat: retry with a coarser rank decision
            rank, basis, complement = _affine_rank(centered, tol * 1e3)
            return _hull_with_basis(pts, center, rank, basis, complement, tol)
        lat_A = hull.equations[:, :-1]
        lat_b = -hull.equations[:, -1]
        # keep only points qhull reports as vertices
        pts, centered, y = pts[hull.vertices], centered[hull.vertices], y[hull.vertices]
    return _finish_hull(pts, center, rank, basis, complement, lat_A, lat_b, y, tol)


def _hull_with_basis(pts, center, rank, basis, complement, tol):
    centered = pts - center
    y = centered @ basis
    if rank == 0:
        lat_A, lat_b = np.zeros((0, 0)), np.zeros(0)
    elif rank == 1:
        lat_A = np.array([[1.0], [-1.0]])
        lat_b = np.array([y.max(), -y.min()])
    else:
        hull = ConvexHull(y)
        lat_A = hull.equations[:, :-1]
        lat_b = -hull.equations[:, -1]
        pts, y = pts[hull.vertices], y[hull.vertices]
    return _finish_hull(pts, center, rank, basis, complement, lat_A, lat_b, y, tol)


def _finish_hull(pts, center, rank, basis, complement, lat_A, lat_b, y, tol):
    d = pts.shape[1]
    lat_A, lat_b = _merge_rows(lat_A, lat_b, tol)

    # a point is extreme iff its incident facet normals span the affine hull
    if rank == 0:
        vert = pts[:1]
    elif rank == 1:
        vert = pts[[int(np.argmin(y[:, 0])), int(np.argmax(y[:, 0]))]]
    else:
        resid = np.abs(y @ lat_A.T - lat_b)
        keep = []
        for i in range(len(pts)):
            inc = lat_A[resid[i] <= 10 * tol]
            if len(inc) >= rank and np.linalg.matrix_rank(inc, tol=1e-7) == rank:
                keep.append(i)
        vert = pts[keep]
        if 0 < len(keep) < len(pts):
            # near-coplanar points were dropped: rebuild facets from true extremes only,
            # so the halfspaces and the vertex list describe the same set
            return _hull(vert)

    A_full = lat_A @ basis.T if rank else np.zeros((0, d))
    b_full = lat_b + A_full @ center
    if len(complement):
        proj = vert @ complement.T
        A_eq = np.vstack([complement, -complement])
        b_eq = np.concatenate([proj.max(axis=0), -proj.min(axis=0)])
        A_full = np.vstack([A_full, A_eq])
        b_full = np.concatenate([b_full, b_eq])
    A_full, b_full = _merge_rows(A_full, b_full, tol)
    return _HullData(_lexsorted(vert), A_full, b_full, rank)


# ---------------------------------------------------------------------------
# conversions


def vrep_to_hrep(p) -> HPolytope:
    """Halfspace description of ``conv(p)``; accepts a polytope or a point array."""
    if isinstance(p, HPolytope):
        return p
    if isinstance(p, EmptyPolytope):
        raise EmptyInput("empty polytope has no halfspace description here")
    if isinstance(p, Zonotope):
        p = to_vrep(p)
    if isinstance(p, VPolytope):
        hull = p._hull
    else:
        hull = _hull(np.asarray(p, dtype=float))
    return HPolytope(hull.normals, hull.offsets)


def _normalized_rows(A, b):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    norms = np.linalg.norm(A, axis=1)
    zero = norms <= 1e-14
    if np.any(b[zero] < -tolerance(b)):
        raise Infeasible("a zero-normal halfspace has a negative offset")
    A, b, norms = A[~zero], b[~zero], norms[~zero]
    return A / norms[:, None], b / norms


def _normals_positively_span(A: np.ndarray) -> bool:
    """True iff the cone {y : A y <= 0} is trivial, i.e. the set is bounded."""
    d = A.shape[1]
    if len(A) <= d:
        return False
    hull = _hull(A)
    if hull.rank < d:
        return False
    return bool(np.all(hull.offsets > 1e-10))


def hrep_to_vrep(p) -> VPolytope:
    """Extreme points of a bounded H-polytope by halfspace-intersection enumeration."""
    if isinstance(p, VPolytope):
        return p
    if isinstance(p, Zonotope):
        return to_vrep(p)
    if isinstance(p, EmptyPolytope):
        raise Infeasible("empty polytope")
    cached = p.__dict__.get("_vrep")
    if cached is not None:
        return cached
    d = p.dim
    if d > MAX_DIM:
        raise DimensionTooHigh(f"dimension {d} exceeds {MAX_DIM}")
    A, b = _normalized_rows(p.normals, p.offsets)
    if len(A) == 0 or not _normals_positively_span(A):
        if _lp_feasible(A, b, d):
            raise Unbounded("halfspace set is unbounded")
        raise Infeasible("halfspace set is empty")
    A, b = _merge_rows(A, b, tolerance(b))
    tol = tolerance(b)
    found = _enumerate_vertices(A, b, tol)
    if len(found) == 0:
        raise Infeasible("halfspace set is empty")
    v = VPolytope(found)
    p.__dict__["_vrep"] = v
    return v


def _enumerate_vertices(A, b, tol):
    m, d = A.shape
    if d == 1:
        a = A[:, 0]
        hi = np.min(b[a > 0] / a[a > 0])
        lo = np.max(b[a < 0] / a[a < 0])
        if lo > hi + tol:
            return np.zeros((0, 1))
        if lo > hi:
            lo = hi = 0.5 * (lo + hi)
        return np.array([[lo], [hi]])
    out = []
    combos = itertools.combinations(range(m), d)
    while True:
        idx = np.array(list(itertools.islice(combos, _CHUNK)), dtype=int)
        if len(idx) == 0:
            break
        M = A[idx]
        ok = np.abs(np.linalg.det(M)) > 1e-10
        if not np.any(ok):
            continue
        X = np.linalg.solve(M[ok], b[idx[ok]][..., None])[..., 0]
        tol_x = tol * np.maximum(1.0, np.max(np.abs(X), axis=1))
        feas = np.all(X @ A.T <= b + tol_x[:, None], axis=1)
        out.append(X[feas])
    if not out:
        return np.zeros((0, d))
    pts = np.vstack(out)
    if len(pts) == 0:
        return pts
    pts = _unique_points(pts, tolerance(pts))
    # polish: re-solve each candidate on all rows active there, so a vertex reached
    # through an ill-conditioned subset (nearly parallel facets) lands on the same point
    act = np.abs(pts @ A.T - b) <= 10 * tol * np.maximum(1.0, np.abs(pts).max(axis=1))[:, None]
    polished = np.array([np.linalg.lstsq(A[a], b[a], rcond=None)[0] if a.sum() >= d else p
                         for p, a in zip(pts, act)])
    return _unique_points(polished, tolerance(polished))


def _lp_feasible(A, b, d) -> bool:
    if len(A) == 0:
        return True
    res = linprog(np.zeros(d), A_ub=A, b_ub=b + tolerance(b), bounds=[(None, None)] * d,
                  method="highs")
    return res.status in (0, 3)


def to_vrep(p: Polytope) -> VPolytope:
    """Any nonempty polytope as a VPolytope."""
    if isinstance(p, VPolytope):
        return p
    if isinstance(p, HPolytope):
        return hrep_to_vrep(p)
    if isinstance(p, Zonotope):
        G = p.generators
        if len(G) == 0:
            return VPolytope(p.center[None, :])
        if len(G) > 16:
            raise DimensionTooHigh(f"zonotope with {len(G)} generators is too large to enumerate")
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=len(G))))
        return VPolytope(p.center + signs @ G)
    raise Infeasible("empty polytope has no vertices")


def vertices_of(p: Polytope) -> np.ndarray:
    if isinstance(p, EmptyPolytope):
        return np.zeros((0, p.dim))
    return to_vrep(p).vertices


def halfspaces_of(p: Polytope) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(p, HPolytope):
        return p.normals, p.offsets
    h = vrep_to_hrep(p)
    return h.normals, h.offsets


def _check_dims(p, q):
    if p.dim != q.dim:
        raise DimensionMismatch(f"dimensions differ: {p.dim} vs {q.dim}")


# ---------------------------------------------------------------------------
# operations


def _axis_box(p) -> tuple[np.ndarray, np.ndarray] | None:
    """``(lo, hi)`` when ``p`` is an H-polytope made only of axis-aligned rows."""
    if not isinstance(p, HPolytope):
        return None
    A, b = p.normals, p.offsets
    if np.any(np.count_nonzero(A, axis=1) != 1):
        return None
    axis = np.argmax(A != 0, axis=1)
    sign = A[np.arange(len(A)), axis]
    if np.any(np.abs(sign) != 1.0):
        return None
    hi = np.full(p.dim, np.inf)
    lo = np.full(p.dim, -np.inf)
    np.minimum.at(hi, axis[sign > 0], b[sign > 0])
    np.maximum.at(lo, axis[sign < 0], -b[sign < 0])
    if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))) or np.any(lo > hi):
        return None
    return lo, hi


def support(p: Polytope, direction) -> float:
    """``max_{x in p} direction . x``."""
    d = np.asarray(direction, dtype=float).reshape(-1)
    if len(d) != p.dim:
        raise DimensionMismatch(f"direction has length {len(d)}, polytope dim {p.dim}")
    if not np.any(d):
        return 0.0
    if isinstance(p, EmptyPolytope):
        return -math.inf
    if isinstance(p, Zonotope):
        return float(p.center @ d + np.sum(np.abs(p.generators @ d)))
    box = _axis_box(p)
    if box is not None:
        # exact closed form: every coordinate at the bound favoured by d
        return float(np.sum(np.maximum(d * box[0], d * box[1])))
    if isinstance(p, HPolytope) and not p.bounded:
        res = linprog(-d, A_ub=p.normals, b_ub=p.offsets, bounds=[(None, None)] * p.dim,
                      method="highs")
        if res.status == 3:
            raise UnboundedInDirection(f"unbounded in direction {d}")
        if res.status != 0:
            raise Infeasible("halfspace set is empty")
        return float(-res.fun)
    return float(np.max(vertices_of(p) @ d))


def support_many(p: Polytope, directions) -> np.ndarray:
    """Support function evaluated on each row of ``directions``."""
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    box = _axis_box(p)
    if box is not None:
        return np.sum(np.maximum(D * box[0], D * box[1]), axis=1)
    if isinstance(p, HPolytope) and not p.bounded:
        return np.array([support(p, d) for d in D])
    V = vertices_of(p)
    out = np.max(V @ D.T, axis=0)
    out[~np.any(D, axis=1)] = 0.0
    return out


def minkowski_sum(p: Polytope, q: Polytope) -> Polytope:
    """``{a + b : a in p, b in q}``."""
    _check_dims(p, q)
    if isinstance(p, EmptyPolytope) or isinstance(q, EmptyPolytope):
        return EmptyPolytope(p.dim)
    if isinstance(p, Zonotope) and isinstance(q, Zonotope):
        return Zonotope(p.center + q.center, np.vstack([p.generators, q.generators]))
    Vp, Vq = vertices_of(p), vertices_of(q)
    sums = (Vp[:, None, :] + Vq[None, :, :]).reshape(-1, p.dim)
    return VPolytope(sums)


def pontryagin_diff(p: Polytope, q: Polytope) -> Union[HPolytope, EmptyPolytope]:
    """``{x : x + q subset of p}`` by shifting each halfspace of ``p`` inward."""
    _check_dims(p, q)
    if isinstance(p, EmptyPolytope):
        return EmptyPolytope(p.dim)
    if isinstance(q, EmptyPolytope):
        raise EmptyInput("cannot erode by the empty set")
    A, b = halfspaces_of(p)
    shrink = support_many(q, A)
    out = HPolytope(A, b - shrink)
    if is_empty(out):
        return EmptyPolytope(p.dim)
    return out


def contains(p: Polytope, q: Polytope) -> bool:
    """True iff every vertex of ``q`` satisfies every halfspace of ``p``."""
    _check_dims(p, q)
    if isinstance(q, EmptyPolytope):
        return True
    if isinstance(p, EmptyPolytope):
        return False
    V = vertices_of(q)
    A, b = halfspaces_of(p)
    return bool(np.all(V @ A.T <= b + tolerance(b, V)))


def contains_point(p: Polytope, x) -> bool:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return contains(p, VPolytope(x))


def equals(p: Polytope, q: Polytope) -> bool:
    """Set equality by two-sided containment."""
    return contains(p, q) and contains(q, p)


def volume(p: Polytope) -> float:
    """Lebesgue volume; flat (lower-dimensional) sets have volume 0."""
    if isinstance(p, EmptyPolytope):
        return 0.0
    if isinstance(p, HPolytope) and not p.bounded:
        raise Unbounded("volume of an unbounded set")
    v = to_vrep(p)
    if v.affine_dim < v.dim:
        return 0.0
    V = v.vertices
    if v.dim == 1:
        return float(V.max() - V.min())
    # fan of simplices from an interior point over the triangulated boundary
    hull = ConvexHull(V)
    c = V.mean(axis=0)
    simplices = V[hull.simplices] - c
    dets = np.abs(np.linalg.det(simplices))
    return float(dets.sum() / math.factorial(v.dim))


def affine_map(p: Polytope, M, t=None) -> Polytope:
    """Image ``{M x + t : x in p}``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if isinstance(p, EmptyPolytope):
        return EmptyPolytope(M.shape[0])
    t = np.zeros(M.shape[0]) if t is None else np.asarray(t, dtype=float)
    if isinstance(p, Zonotope):
        return Zonotope(M @ p.center + t, p.generators @ M.T)
    return VPolytope(vertices_of(p) @ M.T + t)


def project(p: Polytope, axes) -> Polytope:
    """Orthogonal projection onto the listed coordinate axes."""
    axes = list(axes)
    return affine_map(p, np.eye(p.dim)[axes])


def intersect(p: Polytope, q: Polytope) -> Union[HPolytope, EmptyPolytope]:
    _check_dims(p, q)
    if isinstance(p, EmptyPolytope) or isinstance(q, EmptyPolytope):
        return EmptyPolytope(p.dim)
    A1, b1 = halfspaces_of(p)
    A2, b2 = halfspaces_of(q)
    out = HPolytope(np.vstack([A1, A2]), np.concatenate([b1, b2]))
    if is_empty(out):
        return EmptyPolytope(p.dim)
    return out


def bounding_box(p: Polytope) -> tuple[np.ndarray, np.ndarray]:
    V = vertices_of(p)
    return V.min(axis=0), V.max(axis=0)


# ---------------------------------------------------------------------------
# distances


def _face_projections(A, b, V, X):
    """Candidate nearest points: projections of X onto the affine hulls of all faces."""
    n_pts, d = X.shape
    tol = tolerance(b, V)
    incident = np.abs(V @ A.T - b) <= 10 * tol  # (n_vertices, n_rows)
    cands = [np.broadcast_to(V, (n_pts,) + V.shape)]
    m = len(A)
    for size in range(1, d):
        subsets = []
        for J in itertools.combinations(range(m), size):
            shared = np.all(incident[:, J], axis=1)
            if np.count_nonzero(shared) >= 2:
                subsets.append(J)
        if not subsets:
            continue
        J = np.array(subsets)
        AJ, bJ = A[J], b[J]
        P = np.linalg.pinv(AJ)  # (K, d, size)
        resid = np.einsum("ksd,nd->nks", AJ, X) - bJ[None]
        proj = X[:, None, :] - np.einsum("kds,nks->nkd", P, resid)
        cands.append(proj)
    C = np.concatenate(cands, axis=1)
    feas = np.all(C @ A.T <= b + 10 * tol, axis=2)
    return C, feas


def distance_points(p: Polytope, X) -> np.ndarray:
    """Euclidean distance from each row of ``X`` to the polytope ``p``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = vertices_of(p)
    h = vrep_to_hrep(to_vrep(p))
    A, b = h.normals, h.offsets
    inside = np.all(X @ A.T <= b + tolerance(b, X), axis=1)
    out = np.zeros(len(X))
    if np.all(inside):
        return out
    Xo = X[~inside]
    C, feas = _face_projections(A, b, V, Xo)
    dist = np.linalg.norm(C - Xo[:, None, :], axis=2)
    dist[~feas] = np.inf
    out[~inside] = dist.min(axis=1)
    return out


def distance(p: Polytope, x) -> float:
    return float(distance_points(p, np.asarray(x, dtype=float).reshape(1, -1))[0])


def hausdorff(p: Polytope, q: Polytope) -> float:
    """Hausdorff distance; attained at vertices because distance to a convex set is convex."""
    _check_dims(p, q)
    d1 = distance_points(p, vertices_of(q)).max()
    d2 = distance_points(q, vertices_of(p)).max()
    return float(max(d1, d2))

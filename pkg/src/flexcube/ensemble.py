"""Pool-level flexibility: aggregation, needed envelopes, adequacy and remaining volume.

Grid constraints inside a pool are ignored: members are assumed to sit in one
zone whose internal transfer limits do not bind.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from flexcube import polytope as poly
from flexcube.errors import DimensionMismatch, EmptySeries, MixedHorizon, MixedTimeIndex
from flexcube.flexmetrics import FlexCube
from flexcube.polytope import EmptyPolytope, Polytope

MODELING_ASSUMPTIONS = ("grid constraints inside a pool are ignored",)
AXES = ("rho", "pi", "eps")


@dataclass(frozen=True)
class Pool:
    id: str
    members: tuple[str, ...]
    zone_label: str = ""

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError(f"pool {self.id!r} has no members")
        if len(set(members)) != len(members):
            raise ValueError(f"pool {self.id!r} lists a member twice")
        object.__setattr__(self, "members", members)


@dataclass(frozen=True)
class DisturbanceEnvelope:
    needed: FlexCube
    source_series: tuple[float, ...] = field(repr=False, default=())

    def to_polytope(self):
        return self.needed.to_polytope()


def aggregate_cubes(cubes: Sequence[FlexCube]) -> FlexCube:
    """Componentwise sums of the six extremes of all members."""
    if not cubes:
        raise ValueError("nothing to aggregate")
    ks = {c.time_index for c in cubes}
    if len(ks) > 1:
        raise MixedTimeIndex(f"cubes evaluated at different steps: {sorted(ks)}")
    hs = {c.horizon_T for c in cubes}
    if len(hs) > 1:
        raise MixedHorizon(f"cubes evaluated over different horizons: {sorted(hs)}")
    sums = [sum(vals) for vals in zip(*(c.as_row() for c in cubes))]
    return FlexCube(*sums, horizon_T=cubes[0].horizon_T, time_index=cubes[0].time_index)


def aggregate_polytopes(vols: Sequence[Polytope]) -> Polytope:
    """Minkowski sum of all member volumes."""
    if not vols:
        raise ValueError("nothing to aggregate")
    dims = {v.dim for v in vols}
    if len(dims) > 1:
        raise DimensionMismatch(f"member volumes have dimensions {sorted(dims)}")
    if len(vols) == 1:
        return vols[0]
    return reduce(poly.minkowski_sum, vols)


def needed_envelope(disturbance: Sequence[float], dt: float, horizon_T: float | None = None,
                    time_index: int = 0, initial: float = 0.0) -> DisturbanceEnvelope:
    """Tightest (rho, pi, eps) box covering a disturbance series.

    The series holds power deviations in MW, one value per step of ``dt``
    hours. The first ramp is measured from ``initial``, the value just before
    the window (zero for a series starting from the schedule). Level and
    energy are taken as they are, and the origin is always inside the
    envelope. Ramps are reported in MW/min.
    """
    x = np.asarray(disturbance, dtype=float).reshape(-1)
    if x.size == 0:
        raise EmptySeries("disturbance series is empty")
    if dt <= 0:
        raise ValueError("dt must be positive")
    padded = np.concatenate([[float(initial)], x])
    ramps = np.diff(padded) / (60.0 * dt)
    energy = np.concatenate([[0.0], np.cumsum(x * dt)])
    cube = FlexCube(
        rho_plus=max(0.0, float(ramps.max())), rho_minus=min(0.0, float(ramps.min())),
        pi_plus=max(0.0, float(x.max())), pi_minus=min(0.0, float(x.min())),
        eps_plus=float(energy.max()), eps_minus=float(energy.min()),
        horizon_T=float(horizon_T if horizon_T is not None else x.size * dt),
        time_index=time_index,
    )
    return DisturbanceEnvelope(cube, tuple(float(v) for v in x))


def _as_polytope(p):
    if isinstance(p, FlexCube):
        return p.to_polytope()
    if isinstance(p, DisturbanceEnvelope):
        return p.to_polytope()
    return p


@dataclass(frozen=True)
class Adequacy:
    covered: bool
    deficit_axes: tuple[str, ...]


def adequacy(available, needed) -> Adequacy:
    """Does the available volume envelope the needed one, and where does it fall short?"""
    A, N = _as_polytope(available), _as_polytope(needed)
    if A.dim != N.dim:
        raise DimensionMismatch(f"dimensions differ: {A.dim} vs {N.dim}")
    covered = poly.contains(A, N)
    deficits = []
    if not isinstance(N, EmptyPolytope):
        names = AXES if A.dim == 3 else tuple(f"x{i}" for i in range(A.dim))
        dirs = np.vstack([np.eye(A.dim), -np.eye(A.dim)])
        labels = [n + "+" for n in names] + [n + "-" for n in names]
        h_need = poly.support_many(N, dirs)
        h_avail = (poly.support_many(A, dirs) if not isinstance(A, EmptyPolytope)
                   else np.full(len(dirs), -np.inf))
        tol = poly.tolerance(h_need, h_avail[np.isfinite(h_avail)])
        deficits = [lab for lab, hn, ha in zip(labels, h_need, h_avail) if hn > ha + tol]
    return Adequacy(covered, tuple(deficits))


def remaining_flex(available, needed) -> Polytope:
    """Flexibility left after reserving the needed volume (may be empty)."""
    A, N = _as_polytope(available), _as_polytope(needed)
    if A.dim != N.dim:
        raise DimensionMismatch(f"dimensions differ: {A.dim} vs {N.dim}")
    return poly.pontryagin_diff(A, N)

"""Time-indexed reachable flexibility sets under box constraints.

The flexibility trinity is a discrete double integrator: the ramp ``rho``
is the input, power ``pi`` and energy ``eps`` are the state::

    pi[k+1]  = pi[k] + ramp_dt * rho[k]
    eps[k+1] = (1 - gamma * dt) * eps[k] + dt * pi[k]

Sets are propagated exactly in the 2-D (pi, eps) state plane and reported in
3-D by attaching to every state the slab of ramps that keeps the next power
inside its box.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from flexcube import polytope as poly
from flexcube.errors import EmptySet, Infeasible
from flexcube.flexmetrics import FlexCube
from flexcube.mesh import fmt, write_off
from flexcube.polytope import HPolytope, VPolytope


@dataclass(frozen=True)
class FlexDynamics:
    """Discrete double-integrator dynamics with input and state boxes.

    ``ramp_dt`` converts one step of ramp into power (defaults to ``dt``);
    ``dt`` integrates power into energy. Infinite state bounds are allowed.
    """

    dt: float
    input_box: tuple[float, float]
    state_box: tuple[tuple[float, float], tuple[float, float]]
    dissipation_gamma: float = 0.0
    ramp_dt: float | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dissipation_gamma < 0 or self.dissipation_gamma * self.dt >= 1:
            raise ValueError("need 0 <= gamma * dt < 1")
        object.__setattr__(self, "input_box", tuple(float(v) for v in self.input_box))
        object.__setattr__(self, "state_box",
                           tuple(tuple(float(v) for v in pair) for pair in self.state_box))
        if self.ramp_dt is None:
            object.__setattr__(self, "ramp_dt", float(self.dt))
        lo, hi = self.input_box
        if lo > hi:
            raise ValueError("input box is empty")
        for lo, hi in self.state_box:
            if lo > hi:
                raise ValueError("state box is empty")

    @classmethod
    def from_cube(cls, cube: FlexCube, dt: float, gamma: float = 0.0) -> "FlexDynamics":
        """Dynamics whose boxes are a unit's max cube; ``dt`` in hours, ramps in MW/min."""
        return cls(dt=dt,
                   input_box=(cube.rho_minus, cube.rho_plus),
                   state_box=((cube.pi_minus, cube.pi_plus), (cube.eps_minus, cube.eps_plus)),
                   dissipation_gamma=gamma,
                   ramp_dt=60.0 * dt)

    @property
    def A(self) -> np.ndarray:
        return np.array([[1.0, 0.0], [self.dt, 1.0 - self.dissipation_gamma * self.dt]])

    @property
    def B(self) -> np.ndarray:
        return np.array([self.ramp_dt, 0.0])

    def state_rows(self) -> tuple[np.ndarray, np.ndarray]:
        rows, offs = [], []
        for i, (lo, hi) in enumerate(self.state_box):
            e = np.eye(2)[i]
            if math.isfinite(hi):
                rows.append(e)
                offs.append(hi)
            if math.isfinite(lo):
                rows.append(-e)
                offs.append(-lo)
        return np.array(rows).reshape(-1, 2), np.array(offs)

    def cube_box(self) -> HPolytope:
        """The analytic max cube in (rho, pi, eps) space."""
        (p_lo, p_hi), (e_lo, e_hi) = self.state_box
        lo, hi = self.input_box
        return HPolytope.box([lo, p_lo, e_lo], [hi, p_hi, e_hi])

    def next_state(self, state, rho: float) -> np.ndarray:
        return self.A @ np.asarray(state, dtype=float) + self.B * rho


@dataclass(frozen=True, eq=False)
class ReachSet:
    step_k: int
    poly: VPolytope
    dynamics: FlexDynamics = field(repr=False)

    @property
    def state(self) -> VPolytope:
        """Projection onto the (pi, eps) state plane."""
        return poly.project(self.poly, [1, 2])

    @property
    def volume(self) -> float:
        return poly.volume(self.poly)


def lift(dynamics: FlexDynamics, state: VPolytope) -> VPolytope:
    """Attach the feasible next-step ramp slab to a (pi, eps) state set."""
    A2, b2 = poly.halfspaces_of(state)
    rows = [np.column_stack([np.zeros(len(A2)), A2])]
    offs = [b2]
    lo, hi = dynamics.input_box
    rows.append(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]))
    offs.append(np.array([hi, -lo]))
    p_lo, p_hi = dynamics.state_box[0]
    r = dynamics.ramp_dt
    if math.isfinite(p_hi):
        rows.append(np.array([[r, 1.0, 0.0]]))
        offs.append(np.array([p_hi]))
    if math.isfinite(p_lo):
        rows.append(np.array([[-r, -1.0, 0.0]]))
        offs.append(np.array([-p_lo]))
    H = HPolytope(np.vstack(rows), np.concatenate(offs))
    try:
        return poly.hrep_to_vrep(H)
    except Infeasible as err:
        raise EmptySet("no admissible ramp for this state set") from err


def initial_set(dynamics: FlexDynamics, start=(0.0, 0.0)) -> ReachSet:
    """Reach set at k = 0: the planned operating point (translated by ``start``)."""
    return ReachSet(0, lift(dynamics, VPolytope(np.asarray(start, dtype=float)[None, :])),
                    dynamics)


def propagate_state(dynamics: FlexDynamics, state: VPolytope) -> VPolytope:
    """One step of the (pi, eps) state set: affine image, input sweep, box clip."""
    img = state.vertices @ dynamics.A.T
    lo, hi = dynamics.input_box
    cand = np.vstack([img + dynamics.B * lo, img + dynamics.B * hi])
    Ah, bh = poly.halfspaces_of(VPolytope(cand))
    As, bs = dynamics.state_rows()
    H = HPolytope(np.vstack([Ah, As]), np.concatenate([bh, bs]))
    try:
        return poly.hrep_to_vrep(H)
    except Infeasible as err:
        raise EmptySet("state box and reachable image are disjoint") from err


def reach_step(r: ReachSet) -> ReachSet:
    nxt = propagate_state(r.dynamics, r.state)
    return ReachSet(r.step_k + 1, lift(r.dynamics, nxt), r.dynamics)


def reach_until(dynamics: FlexDynamics, k_max: int, start=(0.0, 0.0),
                stop_on_convergence: bool = True) -> list[ReachSet]:
    """Reach sets R_1 ... R_k_max from the planned operating point.

    With ``stop_on_convergence`` the sequence ends early once consecutive
    sets are within ``10 * EPS_GEOM`` in Hausdorff distance.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    r = initial_set(dynamics, start)
    out = []
    for _ in range(k_max):
        nxt = reach_step(r)
        out.append(nxt)
        if stop_on_convergence and len(out) > 1:
            gap = poly.hausdorff(r.poly, nxt.poly)
            if gap < 10 * poly.tolerance(nxt.poly.vertices):
                break
        r = nxt
    return out


def hausdorff_to_cube(r: ReachSet) -> float:
    return poly.hausdorff(r.poly, r.dynamics.cube_box())


@dataclass(frozen=True)
class GapRow:
    labels: tuple[str, str, str]
    vertex: tuple[float, float, float]
    distance: float
    reachable: bool


def cube_vertices(cube: FlexCube) -> list[tuple[tuple[str, str, str], np.ndarray]]:
    out = []
    for rs, r in (("-", cube.rho_minus), ("+", cube.rho_plus)):
        for ps, p in (("-", cube.pi_minus), ("+", cube.pi_plus)):
            for es, e in (("-", cube.eps_minus), ("+", cube.eps_plus)):
                out.append((("rho" + rs, "pi" + ps, "eps" + es), np.array([r, p, e])))
    return out


def gap_report(final: ReachSet, cube: FlexCube) -> list[GapRow]:
    """Distance from each of the 8 cube vertices to the reach set."""
    verts = cube_vertices(cube)
    V = np.array([v for _, v in verts])
    dist = poly.distance_points(final.poly, V)
    thresh = 10 * poly.tolerance(V)
    return [GapRow(labels, tuple(float(c) for c in v), float(d), bool(d <= thresh))
            for (labels, v), d in zip(verts, dist)]


def write_reach_series(out_dir, sets: list[ReachSet], cube: FlexCube | None = None,
                       prefix: str = "reach") -> dict:
    """OFF mesh per step plus a JSON index ``k -> {mesh, volume, hausdorff_to_cube}``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {"steps": []}
    for r in sets:
        name = f"{prefix}_k{r.step_k:03d}.off"
        write_off(out_dir / name, r.poly)
        index["steps"].append({
            "k": r.step_k,
            "mesh": name,
            "volume": float(fmt(r.volume)),
            "hausdorff_to_cube": float(fmt(hausdorff_to_cube(r))),
        })
    if cube is not None and sets:
        index["gap_report"] = [
            {"vertex": list(g.labels), "point": [float(fmt(c)) for c in g.vertex],
             "distance": float(fmt(g.distance)), "reachable": g.reachable}
            for g in gap_report(sets[-1], cube)
        ]
    (out_dir / f"{prefix}_index.json").write_text(
        json.dumps(index, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return index

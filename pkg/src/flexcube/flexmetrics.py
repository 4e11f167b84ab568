"""Analytic flexibility of a single unit: the {rho, pi, eps} max cube.

All metrics are deviations of the unit's net grid output
``g = u_gen - u_load`` from its nominal set-point, so positive values mean
more power delivered to (or less drawn from) the grid. Power ``pi`` is in
MW, ramp ``rho`` in MW/min, energy ``eps`` in MWh; step lengths ``dt`` and
horizons are in hours.

For one step the storage term ``D = C * dx / dt`` ranges over what the state
of charge window allows, the net external supply ``xi - w`` over what the
unit's controllability permits, and the converters over their power boxes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from flexcube.errors import InfeasibleNominal
from flexcube.polytope import HPolytope, VPolytope
from flexcube.powernode import (
    DEFAULT_DT,
    Controllability,
    Controls,
    NodeState,
    PowerNodeParams,
    Trajectory,
)

# relative tolerance on the nominal set-point feasibility test
_NOM_TOL = 1e-9
# substeps per scheduling step in the energy integration
FINE_STEPS = 100


@dataclass(frozen=True)
class FlexCube:
    """Six extreme deviations spanning a unit's maximum flexibility box."""

    rho_plus: float
    rho_minus: float
    pi_plus: float
    pi_minus: float
    eps_plus: float
    eps_minus: float
    horizon_T: float
    time_index: int = 0

    def __post_init__(self):
        tol = 1e-9
        for lo, hi, name in ((self.rho_minus, self.rho_plus, "rho"),
                             (self.pi_minus, self.pi_plus, "pi"),
                             (self.eps_minus, self.eps_plus, "eps")):
            if lo > tol or hi < -tol:
                raise ValueError(f"{name} extremes [{lo}, {hi}] must bracket 0")

    @property
    def delta_plus(self) -> float:
        """Ramp duration in minutes needed to reach ``pi_plus``."""
        if self.rho_plus > 0:
            return self.pi_plus / self.rho_plus
        return 0.0 if self.pi_plus == 0 else math.inf

    @property
    def delta_minus(self) -> float:
        if self.rho_minus < 0:
            return self.pi_minus / self.rho_minus
        return 0.0 if self.pi_minus == 0 else math.inf

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.rho_minus, self.pi_minus, self.eps_minus])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.rho_plus, self.pi_plus, self.eps_plus])

    def to_polytope(self) -> HPolytope:
        """The cube as an axis-aligned box in (rho, pi, eps) space."""
        return HPolytope.box(self.lower, self.upper)

    def to_vpolytope(self) -> VPolytope:
        return VPolytope.box(self.lower, self.upper)

    def contains_point(self, point, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def as_row(self) -> list[float]:
        return [self.rho_plus, self.rho_minus, self.pi_plus, self.pi_minus,
                self.eps_plus, self.eps_minus]


CSV_HEADER = ["k", "rho_plus", "rho_minus", "pi_plus", "pi_minus", "eps_plus", "eps_minus"]


@dataclass
class FlexTimeline:
    entries: list[FlexCube] = field(default_factory=list)
    unit_id: str = ""

    def __post_init__(self):
        ks = [c.time_index for c in self.entries]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("timeline time indices must be strictly increasing")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(c, name) for c in self.entries])

    def write_csv(self, path) -> Path:
        from flexcube.mesh import fmt

        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CSV_HEADER)
            for c in self.entries:
                wr.writerow([str(c.time_index)] + [fmt(v) for v in c.as_row()])
        return path


# ---------------------------------------------------------------------------
# one-step operating envelope


@dataclass(frozen=True)
class _Envelope:
    """Everything the converters see at one instant.

    The conversion balance reads ``u_gen / eta_g - eta_l * u_load = q`` with
    ``q = (xi - w) - v - D`` ranging over ``[q_min, q_max]``.
    """

    eta_g: float
    eta_l: float
    q_min: float
    q_max: float
    g_lo: float
    g_hi: float
    l_lo: float
    l_hi: float
    supply_min: float
    supply_max: float
    v: float
    D_min: float
    D_max: float


def _supply_range(params: PowerNodeParams, s: NodeState, k: int) -> tuple[float, float]:
    """Range of net external supply ``xi - w`` allowed by controllability."""
    if params.controllability is Controllability.FULLY_CONTROLLABLE:
        xi_lo, xi_hi = params.xi_bounds(k)
    else:
        xi_lo = xi_hi = s.xi
    # curtailment shares the sign of xi and never exceeds it
    return min(0.0, xi_lo), max(0.0, xi_hi)


def _nominal_storage_power(params: PowerNodeParams, s: NodeState) -> float:
    x = s.soc_x
    return (params.eta_load(x) * s.u_load - s.u_gen / params.eta_gen(x)
            + s.xi - s.w - params.dissipation_v(x))


def _envelope(params: PowerNodeParams, s: NodeState, k: int, dt: float,
              x: float | None = None) -> _Envelope:
    x = s.soc_x if x is None else x
    eta_g, eta_l, v = params.eta_gen(x), params.eta_load(x), params.dissipation_v(x)
    s_lo, s_hi = _supply_range(params, s, k)
    C = params.capacity_C
    if params.controllability is not Controllability.FULLY_CONTROLLABLE:
        D_min = D_max = _nominal_storage_power(params, s) if C > 0 else 0.0
    elif C > 0:
        D_min = C * (params.soc_min - x) / dt
        D_max = C * (params.soc_max - x) / dt
    else:
        D_min = D_max = 0.0
    return _Envelope(eta_g, eta_l, s_lo - v - D_max, s_hi - v - D_min,
                     params.u_gen_min, params.u_gen_max, params.u_load_min, params.u_load_max,
                     s_lo, s_hi, v, D_min, D_max)


def _tol(env: _Envelope) -> float:
    scale = max(1.0, abs(env.q_min), abs(env.q_max), env.g_hi, env.l_hi)
    return _NOM_TOL * scale


def _check_nominal(env: _Envelope, s: NodeState, k: int):
    tol = _tol(env)
    ug, ul = s.u_gen, s.u_load
    q = ug / env.eta_g - env.eta_l * ul
    ok = (env.g_lo - tol <= ug <= env.g_hi + tol and env.l_lo - tol <= ul <= env.l_hi + tol
          and env.q_min - tol <= q <= env.q_max + tol)
    if not ok:
        raise InfeasibleNominal(
            f"nominal set-point (u_gen={ug}, u_load={ul}) is not feasible at step {k}")


def _is_idle(params: PowerNodeParams) -> bool:
    return params.controllability is Controllability.NON_CONTROLLABLE


def _step_index(s: NodeState, k: int | None) -> int:
    return s.time_index if k is None else k


# ---------------------------------------------------------------------------
# power


def feasible_regulation_set(params: PowerNodeParams, s: NodeState, k: int | None = None,
                            dt: float = DEFAULT_DT) -> tuple[float, float]:
    """All feasible net-output deviations from the nominal set-point, as an interval.

    Built from the vertices of the feasible converter polygon: the box of
    ``(u_gen, u_load)`` cut by the balance slab ``q_min <= u_gen/eta_g -
    eta_l u_load <= q_max``.
    """
    k = _step_index(s, k)
    if _is_idle(params):
        return 0.0, 0.0
    env = _envelope(params, s, k, dt)
    _check_nominal(env, s, k)
    tol = _tol(env)
    cands = [(g, l) for g in (env.g_lo, env.g_hi) for l in (env.l_lo, env.l_hi)]
    for q in (env.q_min, env.q_max):
        for g in (env.g_lo, env.g_hi):
            cands.append((g, (g / env.eta_g - q) / env.eta_l))
        for l in (env.l_lo, env.l_hi):
            cands.append((env.eta_g * (q + env.eta_l * l), l))
    outputs = []
    for g, l in cands:
        q = g / env.eta_g - env.eta_l * l
        if (env.g_lo - tol <= g <= env.g_hi + tol and env.l_lo - tol <= l <= env.l_hi + tol
                and env.q_min - tol <= q <= env.q_max + tol):
            outputs.append(g - l)
    g0 = s.u_gen - s.u_load
    lo, hi = min(outputs) - g0, max(outputs) - g0
    return min(lo, 0.0), max(hi, 0.0)


def _extreme_controls(env: _Envelope, up: bool):
    """Converter set-points maximising (``up``) or minimising the net output."""
    # feasible load window: the balance slab must meet the generation box
    l_from_gen_min = (env.g_lo / env.eta_g - env.q_max) / env.eta_l
    l_from_gen_max = (env.g_hi / env.eta_g - env.q_min) / env.eta_l
    l_lo = max(env.l_lo, l_from_gen_min)
    l_hi = min(env.l_hi, l_from_gen_max)
    if l_lo > l_hi + _tol(env):
        return None
    if l_lo > l_hi:
        l_lo = l_hi = 0.5 * (l_lo + l_hi)
    if up:
        ul = l_lo
        ug = min(env.g_hi, env.eta_g * (env.q_max + env.eta_l * ul))
    else:
        ul = l_hi
        ug = max(env.g_lo, env.eta_g * (env.q_min + env.eta_l * ul))
    return ug, ul


def max_flex_pi(params: PowerNodeParams, s: NodeState, k: int | None = None,
                dt: float = DEFAULT_DT) -> tuple[float, float]:
    """Maximum up/down power regulation ``(pi_plus, pi_minus)``.

    Generation side::

        pi_plus  = min(eta_g (xi_max - w_min - v - D_fastest_discharge), u_gen_max) - u_gen0
        pi_minus = max(eta_g (xi_min - w_max - v - D_fastest_charge),   u_gen_min) - u_gen0

    with the load converter held at its least (for ``pi_plus``) or greatest
    (for ``pi_minus``) set-point compatible with the balance, which reduces to
    the mirrored formulas for pure loads.
    """
    k = _step_index(s, k)
    if _is_idle(params):
        return 0.0, 0.0
    env = _envelope(params, s, k, dt)
    _check_nominal(env, s, k)
    g0 = s.u_gen - s.u_load
    hi = _extreme_controls(env, up=True)
    lo = _extreme_controls(env, up=False)
    if hi is None or lo is None:
        raise InfeasibleNominal(f"no feasible operating point at step {k}")
    pi_plus = hi[0] - hi[1] - g0
    pi_minus = lo[0] - lo[1] - g0
    return max(pi_plus, 0.0), min(pi_minus, 0.0)


# ---------------------------------------------------------------------------
# ramp


def static_ramp_bounds(params: PowerNodeParams) -> tuple[float, float]:
    """Net-output ramp limits (MW/min) from the converter ramp constraints."""
    up = down = 0.0
    if params.has_gen:
        up += params.ramp_gen_max
        down += params.ramp_gen_min
    if params.has_load:
        up -= params.ramp_load_min
        down -= params.ramp_load_max
    return up, down


def max_flex_rho(params: PowerNodeParams, s: NodeState, k: int | None = None,
                 dt: float = DEFAULT_DT) -> tuple[float, float]:
    """Ramp extremes: static ramp bounds tightened by one-step power headroom."""
    if _is_idle(params):
        return 0.0, 0.0
    pi_plus, pi_minus = max_flex_pi(params, s, k, dt)
    up, down = static_ramp_bounds(params)
    minutes = 60.0 * dt
    rho_plus = max(0.0, min(up, pi_plus / minutes))
    rho_minus = min(0.0, max(down, pi_minus / minutes))
    return rho_plus, rho_minus


# ---------------------------------------------------------------------------
# energy


def _least_storage_controls(env: _Envelope, y: float, up: bool):
    """Converter set-points giving net output ``y`` with the gentlest storage use.

    Delivering (``up``) draws as little stored energy as possible: the load
    converter runs at its floor and all supply is taken. Absorbing fills the
    storage as slowly as possible by running the load converter high and
    taking the least supply. Returns ``(u_gen, u_load, D)`` with ``D`` the
    storage power before clipping to its window, or None when no split of
    ``y`` fits the converter boxes.
    """
    l_lo = max(env.l_lo, env.g_lo - y)
    l_hi = min(env.l_hi, env.g_hi - y)
    if l_lo > l_hi + _tol(env):
        return None
    ul = l_lo if up else max(l_lo, l_hi)
    ug = y + ul
    supply = env.supply_max if up else env.supply_min
    return ug, ul, env.eta_l * ul - ug / env.eta_g + supply - env.v


def _best_cap(params: PowerNodeParams, s: NodeState, k: int, horizon_T: float,
              up: bool, extreme: float) -> tuple[float, float]:
    """Deviation cap (MW) promising the most energy, and that promise (MWh).

    A constant deviation ``dev`` held until the storage window is exhausted
    (or the horizon ends) yields ``dev * min(T, room / drain(dev))``, judged
    with the balance at the initial state of charge. The drain is piecewise
    linear in ``dev`` and the score is monotone on every piece, so the best
    cap sits at a kink of the drain, at the cap that just lasts the horizon,
    or at the extreme itself.
    """
    env = _envelope(params, s, k, horizon_T)
    g0 = s.u_gen - s.u_load
    sign = 1.0 if up else -1.0
    room = params.capacity_C * ((s.soc_x - params.soc_min) if up else (params.soc_max - s.soc_x))

    def drain(dev: float):
        ctrl = _least_storage_controls(env, g0 + sign * dev, up)
        if ctrl is None:
            return None
        return -ctrl[2] if up else ctrl[2]

    def score(dev: float) -> float:
        d = drain(dev)
        if d is None:
            return -math.inf
        return dev * (horizon_T if d <= 0 else min(horizon_T, room / d))

    def lasts(dev: float) -> bool:
        d = drain(dev)
        return d is not None and d * horizon_T <= room

    # net outputs where the gentlest converter split changes regime
    kinks = (env.g_lo - env.l_lo, env.g_hi - env.l_hi, env.g_lo - env.l_hi, env.g_hi - env.l_lo)
    cands = [extreme] + [sign * (y - g0) for y in kinks if 0 < sign * (y - g0) < extreme]
    lo, hi = 0.0, extreme
    if lasts(lo) and not lasts(hi):
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if lasts(mid) else (lo, mid)
        cands.append(lo)
    scores = [score(c) for c in cands]
    i = int(np.argmax(scores))
    return float(cands[i]), float(scores[i])


def _excursion_energy(params: PowerNodeParams, s: NodeState, k: int, horizon_T: float,
                      dt: float, up: bool, fine_steps: int, cap: float = math.inf,
                      level_supply: bool = False) -> tuple[float, bool]:
    """Energy (MWh) delivered (``up``) or absorbed beyond nominal by one policy.

    The policy follows the extreme converter set-points, with the deviation
    from nominal limited to ``cap`` MW. External supply is taken at its
    extreme unless ``level_supply`` is set, in which case only as much is taken
    as keeps the storage from moving toward the bound the excursion does not
    use (supply never changes the net output). The balance is integrated on a
    grid of ``dt / fine_steps`` and the running extreme of the accumulated
    deviation is returned, so the excursion may stop whenever that is best,
    together with a flag telling whether the policy ran out of feasible
    set-points before the horizon.
    """
    C = params.capacity_C
    g0 = s.u_gen - s.u_load
    h_fine = dt / fine_steps
    sign = 1.0 if up else -1.0
    x, t, energy, best = s.soc_x, 0.0, 0.0, 0.0
    while t < horizon_T - 1e-12:
        h = min(h_fine, horizon_T - t)
        env = _envelope(params, s, k, h, x=x)
        ctrl = _extreme_controls(env, up)
        if ctrl is None:
            return sign * best, True
        ug, ul = ctrl
        if sign * (ug - ul - g0) > cap:
            capped = _least_storage_controls(env, g0 + sign * cap, up)
            if capped is not None and env.D_min <= capped[2] <= env.D_max:
                ug, ul = capped[:2]
        base = env.eta_l * ul - ug / env.eta_g - env.v
        D_lo, D_hi = base + env.supply_min, base + env.supply_max
        D = D_hi if up else D_lo
        if level_supply:
            D = min(D_hi, max(D_lo, 0.0)) if up else max(D_lo, min(D_hi, 0.0))
        D = min(max(D, env.D_min), env.D_max)
        rate = sign * (ug - ul - g0)
        x_new = min(max(x + D * h / C, params.soc_min), params.soc_max)
        energy += rate * h
        best = max(best, energy)
        t += h
        if x_new == x:
            # stationary: every later substep repeats this one
            if rate > 0:
                best = max(best, energy + rate * (horizon_T - t))
            break
        x = x_new
    return sign * best, False


def _best_excursion(params: PowerNodeParams, s: NodeState, k: int, horizon_T: float,
                    dt: float, up: bool, fine_steps: int, extreme: float) -> float:
    """Best energy over a small family of feasible excursion policies.

    Running at the extreme is not always best: when holding an exhausted
    storage costs more than it gains, a gentler constant deviation delivers
    more energy over the horizon, and when taking all supply drives the
    storage into a bound with no feasible set-point left, taking less keeps
    the excursion alive.
    """
    pick = max if up else min

    def run(cap: float = math.inf) -> float:
        value, stuck = _excursion_energy(params, s, k, horizon_T, dt, up, fine_steps, cap)
        if stuck:
            value = pick(value, _excursion_energy(params, s, k, horizon_T, dt, up, fine_steps,
                                                  cap, level_supply=True)[0])
        return value

    best = run()
    cap, promise = _best_cap(params, s, k, horizon_T, up, abs(extreme))
    if 0 < cap < abs(extreme) and promise > abs(best) * (1 + 1e-12):
        best = pick(best, run(cap))
    return best


def max_flex_eps(params: PowerNodeParams, s: NodeState, k: int | None = None,
                 horizon_T: float = 24.0, dt: float = DEFAULT_DT,
                 fine_steps: int = FINE_STEPS) -> tuple[float, float]:
    """Energy extremes ``(eps_plus, eps_minus)`` within ``horizon_T`` hours.

    Units without usable storage sustain their power extremes for the whole
    horizon, so ``eps = pi * horizon_T``; the horizon is the explicit cap on
    otherwise unlimited energy.
    """
    if horizon_T <= 0:
        raise ValueError("horizon_T must be positive")
    k = _step_index(s, k)
    if _is_idle(params):
        return 0.0, 0.0
    pi_plus, pi_minus = max_flex_pi(params, s, k, dt)
    storage_free = (params.capacity_C > 0
                    and params.controllability is Controllability.FULLY_CONTROLLABLE)
    if not storage_free:
        return pi_plus * horizon_T, pi_minus * horizon_T
    eps_plus = _best_excursion(params, s, k, horizon_T, dt, True, fine_steps, pi_plus)
    eps_minus = _best_excursion(params, s, k, horizon_T, dt, False, fine_steps, pi_minus)
    return max(eps_plus, 0.0), min(eps_minus, 0.0)


def flex_cube(params: PowerNodeParams, s: NodeState, k: int | None = None,
              horizon_T: float = 24.0, dt: float = DEFAULT_DT,
              fine_steps: int = FINE_STEPS) -> FlexCube:
    k = _step_index(s, k)
    rho = max_flex_rho(params, s, k, dt)
    pi = max_flex_pi(params, s, k, dt)
    eps = max_flex_eps(params, s, k, horizon_T, dt, fine_steps)
    return FlexCube(rho[0], rho[1], pi[0], pi[1], eps[0], eps[1], horizon_T, k)


def nominal_states(trajectory: Trajectory, schedule: Sequence | None = None,
                   xi_series: Sequence[float] | None = None) -> list[NodeState]:
    """Operating points for flexibility evaluation along a trajectory.

    At state ``j`` the nominal set-point is the control scheduled next
    (``schedule[j]``) when there is one, otherwise the realized set-point.
    """
    out = []
    for j, st in enumerate(trajectory.states):
        ug, ul, w, xi = st.u_gen, st.u_load, st.w, st.xi
        if schedule is not None and j < len(schedule):
            c = schedule[j]
            c = c if isinstance(c, Controls) else Controls(**c) if isinstance(c, dict) else Controls(*c)
            ug, ul, w = c.u_gen, c.u_load, c.w
        if xi_series is not None and j < len(xi_series):
            xi = float(xi_series[j])
        out.append(NodeState(st.soc_x, ug, ul, xi, w, st.time_index))
    return out


def flex_timeline(params: PowerNodeParams, trajectory: Trajectory, horizon_T: float = 24.0,
                  schedule: Sequence | None = None, xi_series: Sequence[float] | None = None,
                  unit_id: str = "", fine_steps: int = FINE_STEPS) -> FlexTimeline:
    """One FlexCube per trajectory state."""
    cubes = []
    for j, st in enumerate(nominal_states(trajectory, schedule, xi_series)):
        try:
            cubes.append(flex_cube(params, st, st.time_index, horizon_T, trajectory.dt, fine_steps))
        except InfeasibleNominal as err:
            raise InfeasibleNominal(f"trajectory step {j}: {err}") from err
    return FlexTimeline(cubes, unit_id)

"""Power Node unit models: parameters, state, constraint checks and stepping.

A unit stores energy ``C * x`` (capacity ``C`` in MWh, state of charge ``x``)
and exchanges power with the grid through a generation conversion
``u_gen`` (efficiency ``eta_gen``) and a load conversion ``u_load``
(efficiency ``eta_load``). An external process ``xi`` supplies (> 0) or
demands (< 0) power, ``w`` curtails it, and ``v(x)`` dissipates. The balance

    C dx/dt = eta_load u_load - u_gen / eta_gen + xi - w - v

is integrated with forward Euler over steps of ``dt`` hours, with every
efficiency and the dissipation evaluated at the state of charge at the
start of the step. Ramp bounds are in MW/min.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence, Union

from flexcube.errors import (
    BalanceViolation,
    ConstraintViolation,
    CurtailmentSignViolation,
    PowerBoundViolation,
    RampViolation,
    SocOutOfBounds,
)

EPS_BAL = 1e-6  # MW, instantaneous balance residual for storage-less units
DEFAULT_DT = 0.25  # h
# small slack on inequality checks so values produced by our own arithmetic pass
_SLACK = 1e-9


class Controllability(str, Enum):
    FULLY_CONTROLLABLE = "fully_controllable"
    CURTAILABLE = "curtailable"
    NON_CONTROLLABLE = "non_controllable"


@dataclass(frozen=True)
class PwaCurve:
    """Piecewise-affine function of the state of charge on [0, 1]."""

    xs: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        vs = tuple(float(v) for v in self.values)
        if len(xs) != len(vs) or len(xs) < 1:
            raise ValueError("breakpoints and values must have equal nonzero length")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(xs) > 1 and (abs(xs[0]) > 1e-12 or abs(xs[-1] - 1.0) > 1e-12):
            raise ValueError("breakpoints must span [0, 1]")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", vs)

    @classmethod
    def constant(cls, value: float) -> "PwaCurve":
        return cls((0.0, 1.0), (value, value))

    @classmethod
    def from_breakpoints(cls, pairs) -> "PwaCurve":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @classmethod
    def coerce(cls, spec) -> "PwaCurve":
        """Accept a curve, a scalar (constant curve) or ``[[x, value], ...]``."""
        if isinstance(spec, PwaCurve):
            return spec
        if isinstance(spec, (int, float)):
            return cls.constant(float(spec))
        return cls.from_breakpoints(spec)

    def __call__(self, x: float) -> float:
        xs, vs = self.xs, self.values
        if len(xs) == 1 or x <= xs[0]:
            return vs[0]
        if x >= xs[-1]:
            return vs[-1]
        i = bisect.bisect_right(xs, x) - 1
        t = (x - xs[i]) / (xs[i + 1] - xs[i])
        return vs[i] + t * (vs[i + 1] - vs[i])

    @property
    def lipschitz(self) -> float:
        slopes = [abs(b - a) / (x1 - x0) for a, b, x0, x1 in
                  zip(self.values, self.values[1:], self.xs, self.xs[1:])]
        return max(slopes, default=0.0)

    @property
    def minimum(self) -> float:
        return min(self.values)

    def to_spec(self):
        if len(set(self.values)) == 1 and self.xs == (0.0, 1.0):
            return self.values[0]
        return [[x, v] for x, v in zip(self.xs, self.values)]


Bound = Union[float, Sequence[float]]


def _at(bound: Bound, k: int) -> float:
    if isinstance(bound, (int, float)):
        return float(bound)
    if len(bound) == 0:
        raise ValueError("empty bound series")
    return float(bound[min(max(k, 0), len(bound) - 1)])


@dataclass(frozen=True)
class PowerNodeParams:
    """Physical constants and constraint boxes of one unit."""

    capacity_C: float = 0.0
    eta_gen: PwaCurve = field(default_factory=lambda: PwaCurve.constant(1.0))
    eta_load: PwaCurve = field(default_factory=lambda: PwaCurve.constant(1.0))
    dissipation_v: PwaCurve = field(default_factory=lambda: PwaCurve.constant(0.0))
    u_gen_min: float = 0.0
    u_gen_max: float = 0.0
    u_load_min: float = 0.0
    u_load_max: float = 0.0
    ramp_gen_min: float = -math.inf
    ramp_gen_max: float = math.inf
    ramp_load_min: float = -math.inf
    ramp_load_max: float = math.inf
    xi_min: Bound = 0.0
    xi_max: Bound = 0.0
    soc_min: float = 0.0
    soc_max: float = 1.0
    controllability: Controllability = Controllability.FULLY_CONTROLLABLE

    def __post_init__(self):
        for name in ("eta_gen", "eta_load", "dissipation_v"):
            object.__setattr__(self, name, PwaCurve.coerce(getattr(self, name)))
        object.__setattr__(self, "controllability", Controllability(self.controllability))
        for name in ("xi_min", "xi_max"):
            val = getattr(self, name)
            if not isinstance(val, (int, float)):
                object.__setattr__(self, name, tuple(float(v) for v in val))
        problems = self.invariant_errors()
        if problems:
            raise ValueError("; ".join(problems))

    def invariant_errors(self) -> list[str]:
        out = []
        if not 0 <= self.u_gen_min <= self.u_gen_max:
            out.append("(b) need 0 <= u_gen_min <= u_gen_max")
        if not 0 <= self.u_load_min <= self.u_load_max:
            out.append("(c) need 0 <= u_load_min <= u_load_max")
        if self.ramp_gen_min > self.ramp_gen_max:
            out.append("(d) need ramp_gen_min <= ramp_gen_max")
        if self.ramp_load_min > self.ramp_load_max:
            out.append("(e) need ramp_load_min <= ramp_load_max")
        if self.capacity_C < 0:
            out.append("capacity_C must be >= 0")
        if not 0 <= self.soc_min <= self.soc_max <= 1:
            out.append("(a) need 0 <= soc_min <= soc_max <= 1")
        for name in ("eta_gen", "eta_load"):
            curve = getattr(self, name)
            if min(curve.values) <= 0 or max(curve.values) > 1:
                out.append(f"{name} must lie in (0, 1]")
        return out

    def xi_bounds(self, k: int = 0) -> tuple[float, float]:
        return _at(self.xi_min, k), _at(self.xi_max, k)

    @property
    def has_gen(self) -> bool:
        return self.u_gen_max > 0

    @property
    def has_load(self) -> bool:
        return self.u_load_max > 0


@dataclass(frozen=True)
class NodeState:
    """State of charge plus the set-points in effect at ``time_index``."""

    soc_x: float = 0.0
    u_gen: float = 0.0
    u_load: float = 0.0
    xi: float = 0.0
    w: float = 0.0
    time_index: int = 0


@dataclass(frozen=True)
class Controls:
    u_gen: float = 0.0
    u_load: float = 0.0
    w: float = 0.0


@dataclass(frozen=True)
class Violation:
    """A breached constraint; ``slack`` < 0 measures by how much."""

    tag: str
    slack: float
    detail: str = ""


def net_inflow(params: PowerNodeParams, x: float, u_gen: float, u_load: float,
               xi: float, w: float) -> float:
    """Right-hand side of the balance (MW into storage) at state of charge ``x``."""
    return (params.eta_load(x) * u_load - u_gen / params.eta_gen(x)
            + xi - w - params.dissipation_v(x))


def validate(params: PowerNodeParams, s: NodeState, prev: NodeState | None = None,
             dt: float = DEFAULT_DT) -> list[Violation]:
    """Every violated constraint (a)-(h) for state ``s``, tagged by letter.

    Ramp constraints (d)/(e) are only checked when the previous state is given.
    """
    out: list[Violation] = []

    def lower(tag, value, bound, what):
        if value < bound - _SLACK:
            out.append(Violation(tag, value - bound, f"{what} below {bound}"))

    def upper(tag, value, bound, what):
        if value > bound + _SLACK:
            out.append(Violation(tag, bound - value, f"{what} above {bound}"))

    lower("a", s.soc_x, params.soc_min, "soc_x")
    upper("a", s.soc_x, params.soc_max, "soc_x")
    lower("b", s.u_gen, params.u_gen_min, "u_gen")
    upper("b", s.u_gen, params.u_gen_max, "u_gen")
    lower("c", s.u_load, params.u_load_min, "u_load")
    upper("c", s.u_load, params.u_load_max, "u_load")
    if prev is not None:
        minutes = 60.0 * dt
        rg = (s.u_gen - prev.u_gen) / minutes
        rl = (s.u_load - prev.u_load) / minutes
        lower("d", rg, params.ramp_gen_min, "gen ramp")
        upper("d", rg, params.ramp_gen_max, "gen ramp")
        lower("e", rl, params.ramp_load_min, "load ramp")
        upper("e", rl, params.ramp_load_max, "load ramp")
    if s.xi * s.w < -_SLACK:
        out.append(Violation("f", s.xi * s.w, "xi and w have opposite signs"))
    if abs(s.w) > abs(s.xi) + _SLACK:
        out.append(Violation("g", abs(s.xi) - abs(s.w), "|w| exceeds |xi|"))
    v = params.dissipation_v(s.soc_x)
    if v < -_SLACK:
        out.append(Violation("h", v, "negative dissipation"))
    return out


def step(params: PowerNodeParams, s: NodeState, controls: Controls, xi_realized: float,
         dt: float = DEFAULT_DT) -> NodeState:
    """Advance one forward-Euler step, raising on the first violated constraint."""
    u_gen, u_load, w = controls.u_gen, controls.u_load, controls.w
    if not params.u_gen_min - _SLACK <= u_gen <= params.u_gen_max + _SLACK:
        raise PowerBoundViolation(f"u_gen={u_gen} outside [{params.u_gen_min}, {params.u_gen_max}]")
    if not params.u_load_min - _SLACK <= u_load <= params.u_load_max + _SLACK:
        raise PowerBoundViolation(
            f"u_load={u_load} outside [{params.u_load_min}, {params.u_load_max}]")
    minutes = 60.0 * dt
    rg = (u_gen - s.u_gen) / minutes
    rl = (u_load - s.u_load) / minutes
    if not params.ramp_gen_min - _SLACK <= rg <= params.ramp_gen_max + _SLACK:
        raise RampViolation(f"gen ramp {rg} MW/min outside "
                            f"[{params.ramp_gen_min}, {params.ramp_gen_max}]")
    if not params.ramp_load_min - _SLACK <= rl <= params.ramp_load_max + _SLACK:
        raise RampViolation(f"load ramp {rl} MW/min outside "
                            f"[{params.ramp_load_min}, {params.ramp_load_max}]")
    if xi_realized * w < -_SLACK or abs(w) > abs(xi_realized) + _SLACK:
        raise CurtailmentSignViolation(f"curtailment w={w} incompatible with xi={xi_realized}")

    balance = net_inflow(params, s.soc_x, u_gen, u_load, xi_realized, w)
    if params.capacity_C > 0:
        x_new = s.soc_x + dt * balance / params.capacity_C
        if not params.soc_min - _SLACK <= x_new <= params.soc_max + _SLACK:
            raise SocOutOfBounds(
                f"soc would reach {x_new}, outside [{params.soc_min}, {params.soc_max}]")
    else:
        if abs(balance) > EPS_BAL:
            raise BalanceViolation(f"storage-less unit has balance residual {balance} MW")
        x_new = s.soc_x
    return NodeState(x_new, u_gen, u_load, xi_realized, w, s.time_index + 1)


@dataclass
class Trajectory:
    """States visited by ``simulate``; ``error`` is set when it stopped early."""

    states: list[NodeState]
    dt: float
    error: ConstraintViolation | None = None
    error_index: int | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]


def _control(c) -> Controls:
    if isinstance(c, Controls):
        return c
    if isinstance(c, dict):
        return Controls(**c)
    return Controls(*c)


def simulate(params: PowerNodeParams, initial: NodeState, schedule: Sequence,
             xi_series: Sequence[float], dt: float = DEFAULT_DT) -> Trajectory:
    """Apply ``step`` along a schedule; stops at the first infeasible step."""
    if len(schedule) != len(xi_series):
        raise ValueError(f"schedule has {len(schedule)} steps but xi_series {len(xi_series)}")
    states = [initial]
    s = initial
    for k, (c, xi) in enumerate(zip(schedule, xi_series)):
        try:
            s = step(params, s, _control(c), float(xi), dt)
        except ConstraintViolation as err:
            err.step = k
            return Trajectory(states, dt, err, k)
        states.append(s)
    return Trajectory(states, dt)


def balance_terms(params: PowerNodeParams, traj: Trajectory) -> list[float]:
    """Per-step energy into storage, ``dt * balance`` in MWh."""
    out = []
    for prev, cur in zip(traj.states, traj.states[1:]):
        out.append(traj.dt * net_inflow(params, prev.soc_x, cur.u_gen, cur.u_load, cur.xi, cur.w))
    return out


def write_trajectory_csv(path, params: PowerNodeParams, traj: Trajectory) -> Path:
    from flexcube.mesh import fmt

    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "x", "u_gen", "u_load", "xi", "w", "v"])
        for s in traj.states:
            wr.writerow([fmt(s.time_index * traj.dt), fmt(s.soc_x), fmt(s.u_gen), fmt(s.u_load),
                         fmt(s.xi), fmt(s.w), fmt(params.dissipation_v(s.soc_x))])
    return path


def with_state(s: NodeState, **changes) -> NodeState:
    return replace(s, **changes)

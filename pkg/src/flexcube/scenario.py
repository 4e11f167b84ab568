"""Scenario files: versioned YAML describing units, schedules, forecasts and pools.

Minimal example::

    schema_version: 1
    units:
      battery:
        params: {capacity_C: 10, u_gen_max: 5, u_load_max: 5}
        initial: {soc_x: 0.5}

Series may be given as a list (one value per grid step) or a scalar
(constant). ``xi_forecasts`` entries may also be the word ``balance``: the
external process then follows from the power balance of a storage-less
unit at each step (e.g. fuel burnt by a thermal plant).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import yaml

from flexcube.errors import ParseError, SchemaVersionUnsupported, ValidationError
from flexcube.powernode import Controls, NodeState, PowerNodeParams, PwaCurve, validate

SCHEMA_VERSIONS = (1,)
DEFAULT_GRID = {"dt": 0.25, "horizon_T": 24.0, "k_max": 15}
BALANCE = "balance"

_PARAM_FIELDS = {f.name for f in dataclasses.fields(PowerNodeParams)}
_STATE_FIELDS = ("soc_x", "u_gen", "u_load", "xi", "w")
_CONTROL_FIELDS = ("u_gen", "u_load", "w")


@dataclass(frozen=True)
class Grid:
    dt: float = 0.25
    steps: int = 96
    horizon_T: float = 24.0
    k_max: int = 15


@dataclass(frozen=True)
class PoolSpec:
    id: str
    members: tuple[str, ...]
    zone_label: str = ""
    disturbance: str | None = None


@dataclass
class Scenario:
    units: dict[str, PowerNodeParams]
    initial: dict[str, NodeState]
    schedules: dict[str, list[Controls]]
    xi_forecasts: dict[str, Union[list[float], str]]
    disturbances: dict[str, list[float]]
    pools: list[PoolSpec]
    grid: Grid
    reach_gamma: dict[str, float] = field(default_factory=dict)
    name: str = ""
    schema_version: int = 1

    def pool(self, pool_id: str) -> PoolSpec:
        for p in self.pools:
            if p.id == pool_id:
                return p
        raise KeyError(f"no pool {pool_id!r}")

    def xi_series(self, unit: str) -> list[float]:
        """Realized external process per step (resolving ``balance`` entries)."""
        spec = self.xi_forecasts[unit]
        if spec != BALANCE:
            return list(spec)
        p = self.units[unit]
        x = self.initial[unit].soc_x
        out = []
        for c in self.schedules[unit]:
            out.append(c.u_gen / p.eta_gen(x) - p.eta_load(x) * c.u_load + c.w
                       + p.dissipation_v(x))
        return out


# ---------------------------------------------------------------------------
# parsing helpers


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", field=where)
    return float(value)


def _series(value, steps: int, where: str) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)] * steps
    if not isinstance(value, list):
        raise ParseError(f"expected a list or a number, got {type(value).__name__}", field=where)
    out = [_number(v, f"{where}[{i}]") for i, v in enumerate(value)]
    if len(out) != steps:
        raise ValidationError(f"{where} has {len(out)} values, grid has {steps} steps")
    return out


def _mapping(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ParseError(f"expected a mapping, got {type(value).__name__}", field=where)
    return value


def _params(uid: str, spec: dict) -> PowerNodeParams:
    spec = dict(_mapping(spec, f"units.{uid}.params"))
    unknown = set(spec) - _PARAM_FIELDS
    if unknown:
        raise ParseError(f"unknown parameter(s) {sorted(unknown)}", field=f"units.{uid}.params")
    for name in ("eta_gen", "eta_load", "dissipation_v"):
        if name in spec:
            try:
                spec[name] = PwaCurve.coerce(spec[name])
            except (TypeError, ValueError, IndexError) as err:
                raise ParseError(str(err), field=f"units.{uid}.params.{name}") from err
    try:
        return PowerNodeParams(**spec)
    except ValueError as err:
        msg = str(err)
        tag = msg[1] if msg.startswith("(") else None
        raise ValidationError(msg, unit=uid, tag=tag) from err
    except TypeError as err:
        raise ParseError(str(err), field=f"units.{uid}.params") from err


def _state(uid: str, spec: dict) -> NodeState:
    spec = _mapping(spec, f"units.{uid}.initial")
    unknown = set(spec) - set(_STATE_FIELDS)
    if unknown:
        raise ParseError(f"unknown state field(s) {sorted(unknown)}", field=f"units.{uid}.initial")
    return NodeState(**{k: _number(v, f"units.{uid}.initial.{k}") for k, v in spec.items()})


_TOP_LEVEL = {"schema_version", "name", "grid", "units", "schedules", "xi_forecasts",
              "disturbances", "pools"}


def scenario_from_dict(data: Any) -> Scenario:
    data = _mapping(data, "<root>")
    if "schema_version" not in data:
        raise ParseError("missing mandatory field", field="schema_version")
    version = data["schema_version"]
    if version not in SCHEMA_VERSIONS:
        raise SchemaVersionUnsupported(f"schema_version {version!r} is not supported "
                                       f"(supported: {list(SCHEMA_VERSIONS)})")
    unknown = set(data) - _TOP_LEVEL
    if unknown:
        raise ParseError(f"unknown field(s) {sorted(unknown)}", field="<root>")
    grid_spec = {**DEFAULT_GRID, **_mapping(data.get("grid"), "grid")}
    unknown = set(grid_spec) - {"dt", "steps", "horizon_T", "k_max"}
    if unknown:
        raise ParseError(f"unknown grid field(s) {sorted(unknown)}", field="grid")
    dt = _number(grid_spec["dt"], "grid.dt")
    horizon = _number(grid_spec["horizon_T"], "grid.horizon_T")
    if dt <= 0:
        raise ValidationError("grid.dt must be positive")
    if horizon <= 0:
        raise ValidationError("grid.horizon_T must be positive")
    steps = grid_spec.get("steps")
    if steps is None:
        steps = int(round(horizon / dt))
    grid = Grid(dt, int(steps), horizon, int(grid_spec["k_max"]))
    if grid.steps < 1:
        raise ValidationError("grid.steps must be >= 1")

    units, initial, gammas = {}, {}, {}
    unit_specs = _mapping(data.get("units"), "units")
    if not unit_specs:
        raise ValidationError("scenario defines no units")
    for uid, spec in unit_specs.items():
        uid = str(uid)
        spec = _mapping(spec, f"units.{uid}")
        unknown = set(spec) - {"params", "initial", "reach_gamma"}
        if unknown:
            raise ParseError(f"unknown field(s) {sorted(unknown)}", field=f"units.{uid}")
        units[uid] = _params(uid, spec.get("params"))
        initial[uid] = _state(uid, spec.get("initial"))
        if "reach_gamma" in spec:
            gammas[uid] = _number(spec["reach_gamma"], f"units.{uid}.reach_gamma")
        bad = validate(units[uid], initial[uid], dt=dt)
        if bad:
            raise ValidationError(f"initial state violates {bad[0].detail} (slack {bad[0].slack})",
                                  unit=uid, tag=bad[0].tag)

    schedules = {}
    sched_specs = _mapping(data.get("schedules"), "schedules")
    for uid in sched_specs:
        if str(uid) not in units:
            raise ValidationError("schedule for an undefined unit", unit=str(uid))
    for uid in units:
        spec = _mapping(sched_specs.get(uid), f"schedules.{uid}")
        unknown = set(spec) - set(_CONTROL_FIELDS)
        if unknown:
            raise ParseError(f"unknown control(s) {sorted(unknown)}", field=f"schedules.{uid}")
        s0 = initial[uid]
        cols = {name: _series(spec.get(name, getattr(s0, name)), grid.steps,
                              f"schedules.{uid}.{name}") for name in _CONTROL_FIELDS}
        schedules[uid] = [Controls(*vals) for vals in zip(*(cols[n] for n in _CONTROL_FIELDS))]

    xi_forecasts = {}
    xi_specs = _mapping(data.get("xi_forecasts"), "xi_forecasts")
    for uid in xi_specs:
        if str(uid) not in units:
            raise ValidationError("xi forecast for an undefined unit", unit=str(uid))
    for uid in units:
        spec = xi_specs.get(uid, initial[uid].xi)
        if spec == BALANCE:
            if units[uid].capacity_C > 0:
                raise ValidationError("'balance' xi needs a storage-less unit", unit=uid)
            xi_forecasts[uid] = BALANCE
        else:
            xi_forecasts[uid] = _series(spec, grid.steps, f"xi_forecasts.{uid}")

    disturbances = {str(name): _series(series, grid.steps, f"disturbances.{name}")
                    for name, series in _mapping(data.get("disturbances"), "disturbances").items()}

    pools = []
    raw_pools = data.get("pools") or []
    if not isinstance(raw_pools, list):
        raise ParseError("expected a list", field="pools")
    for i, p in enumerate(raw_pools):
        p = _mapping(p, f"pools[{i}]")
        if "id" not in p or "members" not in p:
            raise ParseError("pool needs 'id' and 'members'", field=f"pools[{i}]")
        members = tuple(str(m) for m in p["members"])
        if not members or len(set(members)) != len(members):
            raise ValidationError(f"pool {p['id']!r} needs unique, nonempty members")
        for m in members:
            if m not in units:
                raise ValidationError(f"pool {p['id']!r} lists an undefined unit", unit=m)
        dist = p.get("disturbance")
        if dist is not None and dist not in disturbances:
            raise ValidationError(f"pool {p['id']!r} refers to unknown disturbance {dist!r}")
        pools.append(PoolSpec(str(p["id"]), members, str(p.get("zone_label", "")), dist))

    return Scenario(units, initial, schedules, xi_forecasts, disturbances, pools, grid,
                    gammas, str(data.get("name", "")), int(version))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as err:
        raise ParseError(f"{path} is not valid UTF-8") from err
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ParseError(f"invalid YAML: {getattr(err, 'problem', err)}", line=line) from err
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# writing


def _params_dict(p: PowerNodeParams) -> dict:
    out = {}
    for f in dataclasses.fields(p):
        val = getattr(p, f.name)
        if isinstance(val, PwaCurve):
            val = val.to_spec()
        elif isinstance(val, tuple):
            val = list(val)
        elif hasattr(val, "value"):
            val = val.value
        out[f.name] = val
    return out


def scenario_to_dict(sc: Scenario) -> dict:
    units = {}
    for uid, p in sc.units.items():
        entry = {"params": _params_dict(p),
                 "initial": {k: getattr(sc.initial[uid], k) for k in _STATE_FIELDS}}
        if uid in sc.reach_gamma:
            entry["reach_gamma"] = sc.reach_gamma[uid]
        units[uid] = entry
    schedules = {uid: {name: [getattr(c, name) for c in cs] for name in _CONTROL_FIELDS}
                 for uid, cs in sc.schedules.items()}
    xi = {uid: (v if v == BALANCE else list(v)) for uid, v in sc.xi_forecasts.items()}
    pools = []
    for p in sc.pools:
        entry = {"id": p.id, "members": list(p.members), "zone_label": p.zone_label}
        if p.disturbance is not None:
            entry["disturbance"] = p.disturbance
        pools.append(entry)
    return {
        "schema_version": sc.schema_version,
        "name": sc.name,
        "grid": dataclasses.asdict(sc.grid),
        "units": units,
        "schedules": schedules,
        "xi_forecasts": xi,
        "disturbances": {k: list(v) for k, v in sc.disturbances.items()},
        "pools": pools,
    }


def save_scenario(sc: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(scenario_to_dict(sc), sort_keys=False), encoding="utf-8")
    return path


def bundled_scenario(name: str) -> Path:
    """Path of a golden scenario shipped with the package."""
    path = Path(__file__).parent / "data" / f"{name}.yaml"
    if not path.exists():
        raise FileNotFoundError(f"no bundled scenario {name!r}")
    return path

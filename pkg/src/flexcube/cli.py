"""Batch command-line tool: scenario in, CSV/OFF/JSON artifacts out.

Exit codes: 0 success, 2 adequacy deficit detected, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from flexcube import ensemble
from flexcube import polytope as poly
from flexcube.errors import FlexCubeError, PolytopeError
from flexcube.flexmetrics import CSV_HEADER, FlexCube, FlexTimeline, flex_timeline
from flexcube.mesh import fmt, write_mesh_json, write_off
from flexcube.polytope import EmptyPolytope
from flexcube.powernode import Trajectory, simulate, write_trajectory_csv
from flexcube.reach import FlexDynamics, gap_report, hausdorff_to_cube, reach_until
from flexcube.scenario import Scenario, load_scenario

COMMANDS = ("simulate", "flex", "reach", "aggregate", "adequacy")
FORMATS = ("csv", "off", "json")
EXIT_OK, EXIT_ERROR, EXIT_DEFICIT = 0, 1, 2


@dataclass(frozen=True)
class Flags:
    out: Path
    k_max: int | None = None
    horizon: float | None = None
    pool: str | None = None
    format: str | None = None

    def wants(self, kind: str) -> bool:
        return self.format is None or self.format == kind


class CommandError(FlexCubeError):
    """Failure with the command, unit and step that produced it."""


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def _mesh(flags: Flags, stem: Path, p) -> None:
    if isinstance(p, EmptyPolytope):
        return
    if flags.wants("off"):
        write_off(stem.with_suffix(".off"), p)
    if flags.wants("json"):
        write_mesh_json(stem.with_suffix(".json"), p)


# ---------------------------------------------------------------------------
# shared pipeline stages


def _selected_units(sc: Scenario, flags: Flags) -> list[str]:
    if flags.pool is None:
        return sorted(sc.units)
    try:
        return list(sc.pool(flags.pool).members)
    except KeyError as err:
        raise CommandError(f"unknown pool {flags.pool!r}") from err


def _trajectory(sc: Scenario, uid: str) -> Trajectory:
    traj = simulate(sc.units[uid], sc.initial[uid], sc.schedules[uid], sc.xi_series(uid),
                    sc.grid.dt)
    if not traj.ok:
        raise CommandError(f"unit {uid!r} step {traj.error_index}: {traj.error}")
    return traj


def _timeline(sc: Scenario, uid: str, horizon: float) -> FlexTimeline:
    traj = _trajectory(sc, uid)
    try:
        return flex_timeline(sc.units[uid], traj, horizon, sc.schedules[uid], sc.xi_series(uid),
                             unit_id=uid)
    except FlexCubeError as err:
        raise CommandError(f"unit {uid!r}: {err}") from err


def _horizon(sc: Scenario, flags: Flags) -> float:
    return flags.horizon if flags.horizon is not None else sc.grid.horizon_T


def _k_max(sc: Scenario, flags: Flags) -> int:
    return flags.k_max if flags.k_max is not None else sc.grid.k_max


def _reach_sets(sc: Scenario, uid: str, cube: FlexCube, k_max: int):
    dyn = FlexDynamics.from_cube(cube, sc.grid.dt, sc.reach_gamma.get(uid, 0.0))
    return reach_until(dyn, k_max)


def _pools(sc: Scenario, flags: Flags):
    if flags.pool is None:
        return list(sc.pools)
    try:
        return [sc.pool(flags.pool)]
    except KeyError as err:
        raise CommandError(f"unknown pool {flags.pool!r}") from err


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(sc: Scenario, flags: Flags) -> int:
    summary = {}
    for uid in _selected_units(sc, flags):
        traj = _trajectory(sc, uid)
        if flags.wants("csv"):
            write_trajectory_csv(flags.out / f"{uid}_trajectory.csv", sc.units[uid], traj)
        summary[uid] = {"steps": len(traj.states) - 1,
                        "final_soc": float(fmt(traj.states[-1].soc_x))}
    if flags.wants("json"):
        _dump_json(flags.out / "simulate.json", summary)
    return EXIT_OK


def cmd_flex(sc: Scenario, flags: Flags) -> int:
    horizon = _horizon(sc, flags)
    for uid in _selected_units(sc, flags):
        tl = _timeline(sc, uid, horizon)
        if flags.wants("csv"):
            tl.write_csv(flags.out / f"{uid}_flex.csv")
        if flags.wants("off") or flags.wants("json"):
            mesh_dir = flags.out / f"{uid}_cubes"
            mesh_dir.mkdir(parents=True, exist_ok=True)
            for cube in tl:
                _mesh(flags, mesh_dir / f"cube_k{cube.time_index:03d}", cube.to_polytope())
    return EXIT_OK


def cmd_reach(sc: Scenario, flags: Flags) -> int:
    horizon, k_max = _horizon(sc, flags), _k_max(sc, flags)
    index = {}
    for uid in _selected_units(sc, flags):
        cube = _timeline(sc, uid, horizon)[0]
        sets = _reach_sets(sc, uid, cube, k_max)
        rows = [[r.step_k, r.volume, hausdorff_to_cube(r)] for r in sets]
        gaps = gap_report(sets[-1], cube)
        if flags.wants("csv"):
            _write_rows(flags.out / f"{uid}_reach.csv", ["k", "volume", "hausdorff_to_cube"], rows)
            _write_rows(flags.out / f"{uid}_gaps.csv",
                        ["vertex", "rho", "pi", "eps", "distance", "reachable"],
                        [["/".join(g.labels), *g.vertex, g.distance, str(g.reachable).lower()]
                         for g in gaps])
        if flags.wants("off") or flags.wants("json"):
            mesh_dir = flags.out / f"{uid}_reach"
            mesh_dir.mkdir(parents=True, exist_ok=True)
            for r in sets:
                _mesh(flags, mesh_dir / f"reach_k{r.step_k:03d}", r.poly)
            _mesh(flags, mesh_dir / "max_cube", cube.to_polytope())
        index[uid] = {
            "steps": [{"k": k, "volume": float(fmt(v)), "hausdorff_to_cube": float(fmt(h))}
                      for k, v, h in rows],
            "gap_report": [{"vertex": list(g.labels), "distance": float(fmt(g.distance)),
                            "reachable": g.reachable} for g in gaps],
        }
    if flags.wants("json"):
        _dump_json(flags.out / "reach_index.json", index)
    return EXIT_OK


def cmd_aggregate(sc: Scenario, flags: Flags) -> int:
    horizon, k_max = _horizon(sc, flags), _k_max(sc, flags)
    pools = _pools(sc, flags)
    if not pools:
        raise CommandError("scenario defines no pools")
    report = {}
    for pool in pools:
        timelines = [_timeline(sc, m, horizon) for m in pool.members]
        agg_rows = [ensemble.aggregate_cubes(list(cubes)) for cubes in zip(*timelines)]
        if flags.wants("csv"):
            FlexTimeline(agg_rows, pool.id).write_csv(flags.out / f"{pool.id}_aggregate_flex.csv")
        members = {m: _reach_sets(sc, m, tl[0], k_max)[-1].poly
                   for m, tl in zip(pool.members, timelines)}
        total = ensemble.aggregate_polytopes([members[m] for m in pool.members])
        mesh_dir = flags.out / f"{pool.id}_meshes"
        if flags.wants("off") or flags.wants("json"):
            mesh_dir.mkdir(parents=True, exist_ok=True)
            for m, p in members.items():
                _mesh(flags, mesh_dir / f"member_{m}", p)
            _mesh(flags, mesh_dir / "aggregate", total)
        report[pool.id] = {
            "members": list(pool.members),
            "zone_label": pool.zone_label,
            "modeling_assumptions": list(ensemble.MODELING_ASSUMPTIONS),
            "volumes": {**{m: float(fmt(poly.volume(p))) for m, p in members.items()},
                        "aggregate": float(fmt(poly.volume(total)))},
            "aggregate_cube_k0": [float(fmt(v)) for v in agg_rows[0].as_row()],
        }
    if flags.wants("json"):
        _dump_json(flags.out / "aggregate.json", report)
    return EXIT_OK


def adequacy_series(sc: Scenario, pool_id: str, horizon: float):
    """Per-step (available, needed, Adequacy, remaining) for one pool."""
    pool = sc.pool(pool_id)
    if pool.disturbance is None:
        raise CommandError(f"pool {pool.id!r} has no disturbance series")
    series = sc.disturbances[pool.disturbance]
    window = max(1, int(round(horizon / sc.grid.dt)))
    timelines = [_timeline(sc, m, horizon) for m in pool.members]
    out = []
    for k in range(sc.grid.steps):
        available = ensemble.aggregate_cubes([tl[k] for tl in timelines]).to_polytope()
        needed = ensemble.needed_envelope(series[k:k + window], sc.grid.dt, horizon, k,
                                          initial=series[k - 1] if k > 0 else 0.0)
        verdict = ensemble.adequacy(available, needed)
        remaining = ensemble.remaining_flex(available, needed)
        out.append((available, needed, verdict, remaining))
    return out


def cmd_adequacy(sc: Scenario, flags: Flags) -> int:
    horizon = _horizon(sc, flags)
    pools = [p for p in _pools(sc, flags) if p.disturbance is not None]
    if not pools:
        raise CommandError("no pool with a disturbance series")
    deficit = False
    report = {}
    for pool in pools:
        rows, steps = [], []
        mesh_dir = flags.out / f"{pool.id}_adequacy"
        if flags.wants("off") or flags.wants("json"):
            mesh_dir.mkdir(parents=True, exist_ok=True)
        for k, (avail, need, verdict, rem) in enumerate(adequacy_series(sc, pool.id, horizon)):
            deficit |= not verdict.covered
            empty = poly.is_empty(rem)
            rows.append([k, str(verdict.covered).lower(), " ".join(verdict.deficit_axes),
                         *need.needed.as_row(), str(not empty).lower(),
                         0.0 if empty else poly.volume(rem)])
            meshes = {"needed": f"needed_k{k:03d}", "available": f"available_k{k:03d}",
                      "remaining": None if empty else f"remaining_k{k:03d}"}
            steps.append({"time_index": k, "covered": verdict.covered,
                          "deficit_axes": list(verdict.deficit_axes),
                          "remaining_volume": rows[-1][-1] if empty else float(fmt(rows[-1][-1])),
                          "meshes": meshes})
            if flags.wants("off") or flags.wants("json"):
                _mesh(flags, mesh_dir / meshes["needed"], need.to_polytope())
                _mesh(flags, mesh_dir / meshes["available"], avail)
                if not empty:
                    _mesh(flags, mesh_dir / meshes["remaining"], rem)
        if flags.wants("csv"):
            _write_rows(flags.out / f"{pool.id}_adequacy.csv",
                        ["k", "covered", "deficit_axes", *[f"needed_{c}" for c in CSV_HEADER[1:]],
                         "remaining_nonempty", "remaining_volume"], rows)
        report[pool.id] = {"covered_steps": sum(s["covered"] for s in steps),
                           "total_steps": len(steps), "steps": steps,
                           "modeling_assumptions": list(ensemble.MODELING_ASSUMPTIONS)}
    if flags.wants("json"):
        _dump_json(flags.out / "adequacy.json", report)
    return EXIT_DEFICIT if deficit else EXIT_OK


_DISPATCH = {
    "simulate": cmd_simulate,
    "flex": cmd_flex,
    "reach": cmd_reach,
    "aggregate": cmd_aggregate,
    "adequacy": cmd_adequacy,
}


def run(command: str, scenario: Scenario, flags: Flags) -> int:
    """Run one command, writing artifacts under ``flags.out``; returns the exit code."""
    if command not in _DISPATCH:
        raise ValueError(f"unknown command {command!r}; expected one of {COMMANDS}")
    flags.out.mkdir(parents=True, exist_ok=True)
    return _DISPATCH[command](scenario, flags)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flexcube", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scenario", required=True, type=Path, help="scenario YAML file")
    ap.add_argument("--out", required=True, type=Path, help="output directory")
    ap.add_argument("--k-max", type=int, default=None, help="reach steps (overrides grid.k_max)")
    ap.add_argument("--horizon", type=float, default=None,
                    help="energy horizon in hours (overrides grid.horizon_T)")
    ap.add_argument("--pool", default=None, help="restrict to one pool id")
    ap.add_argument("--format", choices=FORMATS, default=None,
                    help="write only this artifact type (default: all)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = Flags(args.out, args.k_max, args.horizon, args.pool, args.format)
    try:
        scenario = load_scenario(args.scenario)
        if flags.k_max is not None and flags.k_max < 1:
            raise CommandError("--k-max must be >= 1")
        if flags.horizon is not None and flags.horizon <= 0:
            raise CommandError("--horizon must be positive")
        return run(args.command, scenario, flags)
    except (FlexCubeError, PolytopeError, OSError, ValueError) as err:
        module = type(err).__module__.rsplit(".", 1)[-1]
        print(f"flexcube {args.command}: {type(err).__name__} ({module}): {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

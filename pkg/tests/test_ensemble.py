import numpy as np
import pytest

from flexcube import polytope as poly
from flexcube.ensemble import (MODELING_ASSUMPTIONS, Pool, adequacy, aggregate_cubes,
                               aggregate_polytopes, needed_envelope, remaining_flex)
from flexcube.errors import DimensionMismatch, EmptySeries, MixedHorizon, MixedTimeIndex
from flexcube.flexmetrics import FlexCube
from flexcube.polytope import EmptyPolytope, HPolytope, VPolytope

from oracles import random_points

DT = 0.25


def cube(*row, T=24.0, k=0):
    return FlexCube(*row, horizon_T=T, time_index=k)


def random_cube(rng, T=24.0, k=0, scale=1.0):
    hi = rng.uniform(0, 5 * scale, 3)
    lo = -rng.uniform(0, 5 * scale, 3)
    return cube(hi[0], lo[0], hi[1], lo[1], hi[2], lo[2], T=T, k=k)


# --- pools -------------------------------------------------------------------------


def test_pool_validation():
    assert Pool("p", ["a", "b"]).members == ("a", "b")
    with pytest.raises(ValueError):
        Pool("p", [])
    with pytest.raises(ValueError):
        Pool("p", ["a", "a"])


def test_modeling_assumption_is_declared():
    assert any("grid constraints" in a for a in MODELING_ASSUMPTIONS)


# --- cube aggregation --------------------------------------------------------------


def test_aggregate_two_cubes():
    agg = aggregate_cubes([cube(1, -1, 10, -5, 20, -8), cube(0.5, -2, 3, 0, 4, -1)])
    assert agg.as_row() == [1.5, -3, 13, -5, 24, -9]
    assert agg.horizon_T == 24.0


def test_aggregate_is_componentwise_sum():
    rng = np.random.default_rng(50)
    for _ in range(50):
        members = [random_cube(rng) for _ in range(rng.integers(1, 6))]
        agg = aggregate_cubes(members)
        assert np.allclose(agg.as_row(), np.sum([m.as_row() for m in members], axis=0))


def test_aggregate_witness_decomposition():
    """Every point of the aggregate box splits into one point per member box."""
    rng = np.random.default_rng(51)
    for _ in range(30):
        members = [random_cube(rng) for _ in range(3)]
        agg = aggregate_cubes(members)
        target = rng.uniform(agg.lower, agg.upper)
        # share each axis by the same fraction of every member's range
        span = agg.upper - agg.lower
        frac = np.where(span > 0, (target - agg.lower) / np.where(span > 0, span, 1), 0)
        parts = [m.lower + frac * (m.upper - m.lower) for m in members]
        assert np.allclose(np.sum(parts, axis=0), target)
        assert all(m.contains_point(p) for m, p in zip(members, parts))


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate_cubes([])
    with pytest.raises(MixedTimeIndex):
        aggregate_cubes([cube(0, 0, 0, 0, 0, 0, k=0), cube(0, 0, 0, 0, 0, 0, k=1)])
    with pytest.raises(MixedHorizon):
        aggregate_cubes([cube(0, 0, 0, 0, 0, 0, T=4), cube(0, 0, 0, 0, 0, 0, T=24)])


# --- polytope aggregation ----------------------------------------------------------


def test_aggregate_polytopes_all_pairs_oracle():
    rng = np.random.default_rng(52)
    for _ in range(20):
        vols = [VPolytope(random_points(rng, int(rng.integers(4, 9)), 3)) for _ in range(3)]
        agg = aggregate_polytopes(vols)
        sums = vols[0].vertices
        for v in vols[1:]:
            sums = (sums[:, None, :] + v.vertices[None, :, :]).reshape(-1, 3)
        assert poly.equals(agg, VPolytope(sums))


def test_aggregate_polytopes_single_and_errors():
    box = HPolytope.box([-1, -1], [1, 1])
    assert aggregate_polytopes([box]) is box
    with pytest.raises(ValueError):
        aggregate_polytopes([])
    with pytest.raises(DimensionMismatch):
        aggregate_polytopes([box, HPolytope.box([0, 0, 0], [1, 1, 1])])


# --- needed envelope ---------------------------------------------------------------


def test_zero_disturbance_is_a_point():
    env = needed_envelope(np.zeros(16), DT)
    assert env.needed.as_row() == [0.0] * 6
    assert env.needed.horizon_T == 4.0


def test_constant_disturbance():
    env = needed_envelope(np.full(16, 5.0), DT).needed
    assert env.pi_plus == 5.0 and env.pi_minus == 0.0
    assert env.eps_plus == pytest.approx(20.0) and env.eps_minus == 0.0
    assert env.rho_plus == pytest.approx(5.0 / 15.0) and env.rho_minus == 0.0


def test_initial_value_sets_first_ramp():
    env = needed_envelope(np.full(16, 5.0), DT, initial=5.0).needed
    assert env.rho_plus == 0.0


def sampled_cosine(A, dt, hours=24.0):
    """Cosine samples taken mid-step, matching the per-step hold of the envelope."""
    t = (np.arange(int(round(hours / dt))) + 0.5) * dt
    return A * np.cos(2 * np.pi * t / 24.0)


def test_cosine_energy():
    A = 3.0
    env = needed_envelope(sampled_cosine(A, DT), DT).needed
    dense = needed_envelope(sampled_cosine(A, DT / 60), DT / 60).needed
    assert env.eps_plus == pytest.approx(A * 24.0 / (2 * np.pi), rel=0.02)
    assert env.eps_plus == pytest.approx(dense.eps_plus, rel=0.02)
    assert env.pi_plus == pytest.approx(A, rel=0.02) and env.pi_minus == pytest.approx(-A, rel=0.02)
    assert dense.pi_plus == pytest.approx(A, rel=1e-4)


def test_rectangle_pulse_exact():
    for A, n in ((2.0, 8), (7.5, 3), (-4.0, 12)):
        env = needed_envelope(np.full(n, A), DT).needed
        T = n * DT
        assert (env.pi_plus, env.pi_minus) == (max(A, 0), min(A, 0))
        assert (env.eps_plus if A > 0 else env.eps_minus) == A * T


def test_envelope_errors():
    with pytest.raises(EmptySeries):
        needed_envelope([], DT)
    with pytest.raises(ValueError):
        needed_envelope([1.0], 0.0)


def test_envelope_covers_series():
    rng = np.random.default_rng(53)
    for _ in range(50):
        x = rng.normal(0, 2, int(rng.integers(1, 40)))
        env = needed_envelope(x, DT).needed
        e = np.cumsum(x * DT)
        r = np.diff(np.concatenate([[0], x])) / (60 * DT)
        assert env.pi_plus >= x.max() and env.pi_minus <= x.min()
        assert env.eps_plus >= e.max() - 1e-12 and env.eps_minus <= e.min() + 1e-12
        assert env.rho_plus == pytest.approx(max(0, r.max()))
        assert env.rho_minus == pytest.approx(min(0, r.min()))


# --- adequacy and remaining flexibility --------------------------------------------


def test_adequacy_names_deficit_axes():
    avail = cube(1, -1, 1, -1, 1, -1)
    need = cube(0.5, -0.5, 2, -0.5, 0.5, -3)
    res = adequacy(avail, need)
    assert not res.covered
    assert set(res.deficit_axes) == {"pi+", "eps-"}


def test_adequacy_covered():
    res = adequacy(cube(1, -1, 1, -1, 1, -1), cube(1, 0, 0.5, -1, 0, 0))
    assert res.covered and res.deficit_axes == ()


def test_adequacy_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        adequacy(HPolytope.box([-1, -1], [1, 1]), cube(0, 0, 0, 0, 0, 0))


def test_remaining_box_erosion():
    rem = remaining_flex(HPolytope.box([-4] * 3, [4] * 3), HPolytope.box([-1] * 3, [1] * 3))
    assert poly.equals(rem, HPolytope.box([-3] * 3, [3] * 3))


def test_remaining_empty_when_need_too_large():
    rem = remaining_flex(cube(1, -1, 1, -1, 1, -1), cube(0, 0, 3, 0, 0, 0))
    assert isinstance(rem, EmptyPolytope)


def test_remaining_plus_need_inside_available():
    rng = np.random.default_rng(54)
    for _ in range(20):
        A = VPolytope(random_points(rng, 12, 3, scale=4.0))
        N = HPolytope.box(-rng.uniform(0, 0.5, 3), rng.uniform(0, 0.5, 3))
        R = remaining_flex(A, N)
        if not isinstance(R, EmptyPolytope):
            assert poly.contains(A, poly.minkowski_sum(R, N))


def test_covered_iff_remaining_holds_origin():
    rng = np.random.default_rng(55)
    seen = set()
    for _ in range(60):
        avail, need = random_cube(rng), random_cube(rng, scale=0.6)
        res = adequacy(avail, need)
        rem = remaining_flex(avail, need)
        holds = not isinstance(rem, EmptyPolytope) and poly.contains_point(rem, np.zeros(3))
        assert res.covered == holds
        assert res.covered == (res.deficit_axes == ())
        seen.add(res.covered)
    assert seen == {True, False}

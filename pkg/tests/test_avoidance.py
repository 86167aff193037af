import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupsim.avoidance import (
    HalfPlane,
    agent_group_vo,
    closest_outside_union,
    extreme_agents,
    obstacle_halfplane,
    orca_halfplane,
    solve_velocity,
)
from groupsim.geom import AlreadyColliding, Vec2, cone_contains, convex_hull, cross, tangent_rays
from groupsim.model import Agent, Group, Obstacle

from oracles import first_contact_sweep, vo_collides


def _agent(i, x, y, vx=0.0, vy=0.0, r=0.3):
    return Agent(id=i, position=Vec2(x, y), goal=Vec2(x, y), velocity=Vec2(vx, vy), radius=r)


OBSERVER = _agent(100, 0, 0, r=0.0)


# ---------------------------------------------------------------- cones


def test_singleton_cone_half_angle_30_degrees():
    agents = {0: _agent(0, 2, 0, r=1.0)}
    cone = agent_group_vo(OBSERVER, Group(0, [0]), agents, math.inf)
    s = math.sin(math.radians(30))
    c = math.cos(math.radians(30))
    assert cone.left_dir == pytest.approx((c, s))
    assert cone.right_dir == pytest.approx((c, -s))
    assert cone.apex == Vec2(0, 0)


def test_singleton_cone_is_classical_vo():
    b = _agent(0, 3, 1, vx=-0.5, vy=0.2, r=0.4)
    a = _agent(1, 0, 0, r=0.3)
    cone = agent_group_vo(a, Group(0, [0]), {0: b}, 4.0)
    rng = np.random.default_rng(0)
    for vx, vy in rng.uniform(-3, 3, size=(300, 2)):
        rel_v = (vx - b.velocity.x, vy - b.velocity.y)
        rel_p = (a.position.x - b.position.x, a.position.y - b.position.y)
        classical = first_contact_sweep(rel_p, rel_v, 0.7, 4.0)
        assert cone_contains(cone, Vec2(vx, vy)) == classical


def test_observer_inside_hull_signals_collision():
    agents = {0: _agent(0, 0.2, 0), 1: _agent(1, 3, 0)}
    with pytest.raises(AlreadyColliding):
        agent_group_vo(_agent(9, 0, 0), Group(0, [0, 1]), agents, 4.0)


def test_extreme_agents_example():
    agents = {0: _agent(0, 3, 1, r=0.0), 1: _agent(1, 4, 0, r=0.0), 2: _agent(2, 3, -1, r=0.0)}
    pair = extreme_agents(OBSERVER, Group(0, [0, 1, 2]), agents)
    assert (pair.left, pair.right) == (0, 2)
    solo = extreme_agents(OBSERVER, Group(1, [1]), agents)
    assert solo.left == solo.right == 1


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.1, 0.4)), min_size=1, max_size=12),
       st.floats(0, 2 * math.pi), st.floats(4, 8))
def test_extreme_agents_match_angular_scan(offsets, ang, dist):
    cx, cy = dist * math.cos(ang), dist * math.sin(ang)
    agents = {i: _agent(i, cx + dx, cy + dy, r=r) for i, (dx, dy, r) in enumerate(offsets)}
    obs = _agent(99, 0, 0, r=0.3)
    g = Group(0, sorted(agents))
    radius = obs.radius + max(a.radius for a in agents.values())
    pair = extreme_agents(obs, g, agents)
    cone = agent_group_vo(obs, g, agents, math.inf)
    # brute force: signed angle of each tangent relative to the center direction
    base = math.atan2(cy, cx)

    def rel(d):
        return (math.atan2(d.y, d.x) - base + math.pi) % (2 * math.pi) - math.pi

    lefts = {i: rel(tangent_rays(Vec2(0, 0), a.position, radius)[0]) for i, a in agents.items()}
    rights = {i: rel(tangent_rays(Vec2(0, 0), a.position, radius)[1]) for i, a in agents.items()}
    assert lefts[pair.left] == pytest.approx(max(lefts.values()), abs=1e-9)
    assert rights[pair.right] == pytest.approx(min(rights.values()), abs=1e-9)
    # sufficiency: the pair alone reproduces the cone's boundary rays
    assert rel(cone.left_dir) == pytest.approx(max(lefts.values()), abs=1e-9)
    assert rel(cone.right_dir) == pytest.approx(min(rights.values()), abs=1e-9)


@settings(max_examples=300)
@given(st.lists(st.tuples(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2), st.floats(0.1, 0.4)), min_size=1, max_size=6),
       st.floats(-6, 6), st.floats(-6, 6), st.floats(0.5, 6),
       st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=30))
def test_velocities_outside_cone_never_collide(offsets, cx, cy, tau, vs):
    agents = {i: _agent(i, cx + dx, cy + dy, vx=0.4, vy=-0.2, r=r) for i, (dx, dy, r) in enumerate(offsets)}
    obs = _agent(99, 0, 0)
    try:
        cone = agent_group_vo(obs, Group(0, sorted(agents)), agents, tau)
    except AlreadyColliding:
        return
    radius = obs.radius + max(a.radius for a in agents.values())
    outside = [v for v in vs if not cone_contains(cone, Vec2(*v))]
    if not outside:
        return
    hits = vo_collides((0, 0), outside, [tuple(a.position) for a in agents.values()], (0.4, -0.2), radius, tau)
    assert not hits.any()


# ------------------------------------------------------------------- ORCA


def test_orca_head_on_excludes_current_velocity_and_mirrors():
    a = _agent(0, 0, 0, vx=1.0)
    b = _agent(1, 6, 0, vx=-1.0)
    ha = orca_halfplane(a, b, 4.0)
    hb = orca_halfplane(b, a, 4.0)
    # closing at 2 m/s, contact after 2.7 s < tau
    assert ha.violation(a.velocity) > 0
    assert hb.violation(b.velocity) > 0
    assert abs(ha.normal.y) > 0.99  # lateral
    # a half turn about the midpoint maps a's constraint onto b's, so both dodge to their own right
    assert hb.point == pytest.approx(tuple(-ha.point), abs=1e-12)
    assert hb.normal == pytest.approx(tuple(-ha.normal), abs=1e-12)


def test_orca_head_on_beyond_horizon_needs_no_correction():
    a = _agent(0, 0, 0, vx=1.0)
    b = _agent(1, 10, 0, vx=-1.0)
    # contact would need (10 - 0.6) / 2 = 4.7 s > tau
    assert orca_halfplane(a, b, 4.0).violation(a.velocity) <= 0


def test_orca_receding_keeps_current_velocity():
    a = _agent(0, 0, 0, vx=-1.0)
    b = _agent(1, 3, 0, vx=1.0)
    assert orca_halfplane(a, b, 4.0).violation(a.velocity) <= 0


def test_orca_coincident_fallback_is_deterministic():
    a = _agent(0, 1, 1)
    b = _agent(1, 1, 1)
    ha, hb = orca_halfplane(a, b, 4.0), orca_halfplane(b, a, 4.0)
    assert ha.normal == Vec2(1.0, 0.0)
    assert hb.normal == Vec2(-1.0, 0.0)


@settings(max_examples=300)
@given(st.floats(1.0, 8.0), st.floats(-0.5, 0.5), st.floats(0.3, 1.8), st.floats(-0.4, 0.4))
def test_reciprocal_solution_avoids_collision(dist, lateral, speed, skew):
    a = _agent(0, -dist / 2, lateral / 2, vx=speed, vy=skew)
    b = _agent(1, dist / 2, -lateral / 2, vx=-speed, vy=-skew)
    va, _ = solve_velocity([orca_halfplane(a, b, 4.0)], a.velocity, 2.0)
    vb, _ = solve_velocity([orca_halfplane(b, a, 4.0)], b.velocity, 2.0)
    rel_p = (b.position.x - a.position.x, b.position.y - a.position.y)
    rel_v = (vb.x - va.x, vb.y - va.y)
    # touching the boundary is allowed; shrink the disc by a hair
    assert not first_contact_sweep(rel_p, rel_v, 0.6 - 1e-6, 4.0)
    # and the pair is symmetric
    assert va == pytest.approx(-vb, abs=1e-9)


def test_obstacle_halfplane_allows_stopping():
    box = Obstacle(convex_hull([Vec2(2, -1), Vec2(3, -1), Vec2(3, 1), Vec2(2, 1)]))
    h = obstacle_halfplane(_agent(0, 0, 0), box, 4.0)
    assert h.violation(Vec2(0, 0)) <= 0
    assert h.normal == pytest.approx((-1, 0))
    # reaching the obstacle within tau is excluded
    assert h.violation(Vec2(1.0, 0)) > 0


# ------------------------------------------------------------------ LP


def test_solve_without_constraints_clamps():
    assert solve_velocity([], Vec2(1, 0), 2.0) == (Vec2(1, 0), True)
    v, ok = solve_velocity([], Vec2(3, 4), 1.0)
    assert ok and v == pytest.approx((0.6, 0.8))


def test_solve_single_constraint_projects():
    h = HalfPlane(Vec2(0.5, 0), Vec2(-1, 0))  # permits x <= 0.5
    v, ok = solve_velocity([h], Vec2(1.0, 0.3), 2.0)
    assert ok and v == pytest.approx((0.5, 0.3))


def test_solve_infeasible_is_flagged():
    hs = [HalfPlane(Vec2(1, 0), Vec2(1, 0)), HalfPlane(Vec2(-1, 0), Vec2(-1, 0))]
    v, ok = solve_velocity(hs, Vec2(0, 0), 2.0)
    assert not ok
    assert v.x == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * math.pi)), max_size=8),
       st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 2.5))
def test_solution_respects_speed_and_feasible_constraints(rows, px, py, vmax):
    hs = [HalfPlane(Vec2(x, y), Vec2(math.cos(a), math.sin(a))) for x, y, a in rows]
    v, ok = solve_velocity(hs, Vec2(px, py), vmax)
    assert v.norm() <= vmax + 1e-9
    if ok:
        assert all(h.violation(v) <= 1e-7 for h in hs)


# --------------------------------------------------------------- union


def test_union_returns_v_pref_when_free():
    agents = {0: _agent(0, 3, 0)}
    cone = agent_group_vo(_agent(9, 0, 0), Group(0, [0]), agents, 4.0)
    assert closest_outside_union([cone], Vec2(0, 1), 2.0) == Vec2(0, 1)
    assert closest_outside_union([], Vec2(3, 4), 1.0) == pytest.approx((0.6, 0.8))


def test_union_single_cone_projects_onto_a_ray():
    agents = {0: _agent(0, 2, 0, r=0.7)}
    obs = _agent(9, 0, 0, r=0.3)
    cone = agent_group_vo(obs, Group(0, [0]), agents, math.inf)
    v = closest_outside_union([cone], Vec2(1, 0.1), 2.0)
    # the nearest boundary ray is the left one at 30 degrees
    d = cone.left_dir
    proj = d * Vec2(1, 0.1).dot(d)
    assert v == pytest.approx(tuple(proj), abs=1e-6)
    assert not cone_contains(cone, v)


def test_union_surrounded_is_infeasible():
    obs = _agent(99, 0, 0)
    cones = []
    for k in range(8):
        ang = 2 * math.pi * k / 8
        c, s = math.cos(ang), math.sin(ang)
        agents = {0: _agent(0, 1.5 * c, 1.5 * s, vx=-c, vy=-s)}
        cones.append(agent_group_vo(obs, Group(0, [0]), agents, 4.0))
    assert closest_outside_union(cones, Vec2(1, 0), 0.3) is None


def test_union_static_ring_allows_standing_still():
    obs = _agent(99, 0, 0)
    cones = []
    for k in range(8):
        ang = 2 * math.pi * k / 8
        agents = {0: _agent(0, math.cos(ang), math.sin(ang))}
        cones.append(agent_group_vo(obs, Group(0, [0]), agents, 4.0))
    v = closest_outside_union(cones, Vec2(1, 0), 1.0)
    assert v is not None and all(not cone_contains(c, v) for c in cones)

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupsim.geom import Vec2, cross
from groupsim.group_nav import (
    GAP_FACTOR,
    adapt_follower_velocity,
    adapt_leader_velocity,
    assign_followers,
    build_bypass_plan,
    bypass_effort,
    choose_side,
    detach_flags,
    elect_leader,
    should_detach,
)
from groupsim.model import Agent, Group

from oracles import first_contact_sweep


def _agent(i, x, y, vx=0.0, vy=0.0, r=0.3, goal=(20.0, 0.0)):
    return Agent(id=i, position=Vec2(x, y), goal=Vec2(*goal), velocity=Vec2(vx, vy), radius=r)


def _groups(agents, *member_lists):
    out = []
    for ms in member_lists:
        g = Group(min(ms), sorted(ms))
        g.refresh(agents)
        out.append(g)
    return out


# ------------------------------------------------------------ bypass side


def test_bypass_effort_examples():
    g = Group(9, [9], mean_position=Vec2(0, 0), mean_velocity=Vec2(0, 0))
    assert bypass_effort(_agent(0, 0, 1, vx=1), g) == 1
    assert bypass_effort(_agent(0, 0, -1, vx=1), g) == -1
    assert bypass_effort(_agent(0, 2, 2, vx=1, vy=1), g) == 0


def test_choose_side_examples():
    agents = {0: _agent(0, 0, -0.5, vx=1), 9: _agent(9, 0, 0)}
    ga, g = _groups(agents, [0], [9])
    assert bypass_effort(agents[0], g) == -0.5
    assert choose_side(ga, g, agents) == "right"
    agents[0] = _agent(0, -3, 0, vx=1)
    ga.refresh(agents)
    assert choose_side(ga, g, agents) == "left"  # E = 0


side_scene = st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)),
                      min_size=2, max_size=10)


@given(side_scene, st.integers(1, 8), st.floats(0, math.pi))
def test_choose_side_flips_under_reflection(rows, split, angle):
    split = min(split, len(rows) - 1)
    # reflect across the line through the origin at ``angle``
    c, s = math.cos(2 * angle), math.sin(2 * angle)

    def ref(x, y):
        return c * x + s * y, s * x - c * y

    agents = {i: _agent(i, x, y, vx, vy) for i, (x, y, vx, vy) in enumerate(rows)}
    mirror = {i: _agent(i, *ref(x, y), *ref(vx, vy)) for i, (x, y, vx, vy) in enumerate(rows)}
    a_ids, b_ids = list(range(split)), list(range(split, len(rows)))
    ga, gb = _groups(agents, a_ids, b_ids)
    ma, mb = _groups(mirror, a_ids, b_ids)
    total = sum(bypass_effort(agents[m], gb) for m in a_ids)
    if abs(total) < 1e-9:
        return
    side = choose_side(ga, gb, agents)
    flipped = choose_side(ma, mb, mirror)
    assert {side, flipped} == {"left", "right"}


def _chain_scene():
    agents = {
        0: _agent(0, 0, 0.5, vx=1.4), 1: _agent(1, 0, -0.5, vx=1.4),
        2: _agent(2, 6, -0.6), 3: _agent(3, 6, 0.1), 4: _agent(4, 6.5, -0.3),
        5: _agent(5, 8, 0.4), 6: _agent(6, 8, 1.4), 7: _agent(7, 8.6, 1.0),
    }
    return agents, _groups(agents, [0, 1], [2, 3, 4], [5, 6, 7])


def test_plan_adopts_second_group_on_same_side():
    agents, (g1, g2, g3) = _chain_scene()
    plan = build_bypass_plan(g1, [g2, g3], random.Random(1), agents, 8.0)
    assert plan.entries == [(2, "left", 3), (5, "left", 6)]
    # the temporary goal sits left of the last extreme agent
    e = agents[6].position
    assert cross(e - g1.mean_position, plan.temp_goal - g1.mean_position) > 0


def test_plan_empty_without_colliding_groups():
    agents, (g1, g2, g3) = _chain_scene()
    plan = build_bypass_plan(g1, [g2, g3], random.Random(0), agents, 1.0)
    assert plan.entries == [] and plan.temp_goal is None and plan.side is None


def test_plan_dead_ahead_symmetric_goes_left():
    agents = {0: _agent(0, 0, 0, vx=1.4), 1: _agent(1, -1, 0, vx=1.4), 2: _agent(2, 5, 0.5), 3: _agent(3, 5, -0.5)}
    ga, gb = _groups(agents, [0, 1], [2, 3])
    plan = build_bypass_plan(ga, [gb], random.Random(0), agents, 4.0)
    assert [(gid, side) for gid, side, _ in plan.entries] == [(2, "left")]


def _random_scene(rng):
    agents, members = {}, []
    nid = 0
    for k in range(4):
        if k == 0:
            cx, cy, vx, vy = 0.0, 0.0, 1.4, 0.0
        else:
            cx, cy = rng.uniform(3, 12), rng.uniform(-5, 5)
            vx, vy = rng.uniform(-1, 0.5), rng.uniform(-0.5, 0.5)
        ms = []
        for _ in range(rng.randint(1, 5)):
            agents[nid] = _agent(nid, cx + rng.uniform(-1, 1), cy + rng.uniform(-1, 1), vx, vy)
            ms.append(nid)
            nid += 1
        members.append(ms)
    return agents, _groups(agents, *members)


def test_plan_side_coherence_and_termination():
    for seed in range(1000):
        rng = random.Random(seed)
        agents, groups = _random_scene(rng)
        try:
            plan = build_bypass_plan(groups[0], groups[1:], rng, agents, 6.0)
        except Exception as exc:  # overlapping probe and hull
            assert type(exc).__name__ == "AlreadyColliding"
            continue
        assert len({side for _, side, _ in plan.entries}) <= 1
        assert len(plan.entries) <= len(groups) - 1
        assert len({gid for gid, _, _ in plan.entries}) == len(plan.entries)
        for gid, _, extreme in plan.entries:
            assert extreme in next(g for g in groups if g.id == gid).members


# ------------------------------------------------------ leaders, followers


def test_elect_leader_examples():
    agents = {0: _agent(0, 3, 0), 1: _agent(1, 2, 0), 2: _agent(2, -5, 0)}
    assert elect_leader(Group(0, [0, 1, 2]), Vec2(0, 0), agents) == 1
    assert elect_leader(Group(2, [2]), Vec2(0, 0), agents) == 2
    agents[0] = _agent(0, -2, 0)
    assert elect_leader(Group(0, [0, 1, 2]), Vec2(0, 0), agents) == 0


def test_assign_followers_chain_and_tie_fallback():
    agents = {0: _agent(0, 3, 0), 1: _agent(1, 1, 0), 2: _agent(2, 2, 0)}
    fa = assign_followers(Group(0, [0, 1, 2]), 1, Vec2(0, 0), agents)
    assert fa.follow_edges == {2: 1, 0: 2}
    assert fa.order() == [2, 0]
    tie = {0: _agent(0, 1, 0), 1: _agent(1, 0, 1), 2: _agent(2, -1, 0)}
    fa = assign_followers(Group(0, [0, 1, 2]), 0, Vec2(0, 0), tie)
    assert fa.follow_edges == {1: 0, 2: 0}


@settings(max_examples=300)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=20, unique=True),
       st.floats(-10, 10), st.floats(-10, 10))
def test_follow_edges_form_forest_rooted_at_leader(points, gx, gy):
    agents = {i: _agent(i, x, y) for i, (x, y) in enumerate(points)}
    g = Group(0, sorted(agents))
    goal = Vec2(gx, gy)
    leader = elect_leader(g, goal, agents)
    fa = assign_followers(g, leader, goal, agents)
    assert set(fa.follow_edges) == set(g.members) - {leader}
    for a in fa.follow_edges:
        seen, node = set(), a
        while node != leader:
            assert node not in seen
            seen.add(node)
            nxt = fa.follow_edges[node]
            da = (agents[node].position - goal).norm()
            db = (agents[nxt].position - goal).norm()
            assert db < da or nxt == leader
            node = nxt
        assert len(seen) <= len(g.members)
    order = fa.order()
    assert sorted(order) == sorted(fa.follow_edges)
    pos = {m: i for i, m in enumerate(order)}
    for f, t in fa.follow_edges.items():
        assert t == leader or pos[t] < pos[f]


def test_follower_velocity_examples():
    gap = GAP_FACTOR * 0.3
    target = _agent(1, gap, 0)
    f = _agent(0, 0, 0)
    f.preferred_velocity = Vec2(1.4, 0)
    assert adapt_follower_velocity(f, target) == pytest.approx((1.4, 0))
    f.preferred_velocity = Vec2(0, 1.4)
    assert adapt_follower_velocity(f, target) == pytest.approx((0, 0))
    far = _agent(1, 2 * gap, 0)
    f.preferred_velocity = Vec2(1.0, 0)
    # gap error 1.5 m, correction clamped to pref_speed / 2
    assert adapt_follower_velocity(f, far) == pytest.approx((1.0 + 0.7, 0))
    same = _agent(1, 0, 0)
    assert adapt_follower_velocity(f, same) == f.preferred_velocity


def test_leader_without_other_groups_keeps_v_pref():
    leader = _agent(0, 0, 0)
    leader.preferred_velocity = Vec2(1.4, 0)
    assert adapt_leader_velocity(leader, [], {0: leader}, 4.0) == (Vec2(1.4, 0), True)


def test_leader_projection_matches_plan_side():
    agents, (g1, g2, g3) = _chain_scene()
    plan = build_bypass_plan(g1, [g2], random.Random(0), agents, 8.0)
    leader = agents[0]
    leader.preferred_velocity = Vec2(1.4, 0)
    v, ok = adapt_leader_velocity(leader, [g2], agents, 8.0)
    assert ok and plan.side == "left"
    assert cross(Vec2(1, 0), v) > 0


def test_leader_boxed_in_is_infeasible():
    agents = {0: _agent(0, 0, 0)}
    members = []
    for k in range(8):
        a = 2 * math.pi * k / 8
        agents[k + 1] = _agent(k + 1, 1.2 * math.cos(a), 1.2 * math.sin(a), -math.cos(a), -math.sin(a))
        members.append([k + 1])
    groups = _groups(agents, *members)
    agents[0].preferred_velocity = Vec2(1.4, 0)
    v, ok = adapt_leader_velocity(agents[0], groups, agents, 4.0, max_speed=0.3)
    assert not ok and v == Vec2(1.4, 0)


# ---------------------------------------------------------------- detach


def test_should_detach_examples():
    a = _agent(0, 0, 0)
    a.preferred_velocity = Vec2(1.4, 0)
    assert should_detach(a, [a], 4.0)
    blocker = _agent(1, 1.0, 0)
    assert not should_detach(a, [a, blocker], 4.0)
    arrived = _agent(1, 1.0, 0)
    arrived.arrived = True
    assert should_detach(a, [a, arrived], 4.0)


def test_detach_matches_sweep_oracle():
    rng = np.random.default_rng(5)
    for _ in range(400):
        n = int(rng.integers(2, 25))
        crowd = []
        for i in range(n):
            x, y = rng.uniform(-6, 6, 2)
            vx, vy = rng.uniform(-1.5, 1.5, 2)
            crowd.append(_agent(i, x, y, vx, vy, r=float(rng.uniform(0.2, 0.4))))
        for a in crowd:
            a.preferred_velocity = Vec2(*rng.uniform(-1.5, 1.5, 2))
        flags = detach_flags(crowd, crowd, 4.0)
        for a, flag in zip(crowd, flags):
            want = not any(
                first_contact_sweep(
                    (b.position.x - a.position.x, b.position.y - a.position.y),
                    (b.velocity.x - a.preferred_velocity.x, b.velocity.y - a.preferred_velocity.y),
                    a.radius + b.radius, 4.0,
                )
                for b in crowd if b.id != a.id
            )
            assert flag == should_detach(a, crowd, 4.0) == want

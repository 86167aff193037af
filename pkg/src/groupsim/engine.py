"""Deterministic per-step pipeline and run metrics.

One step: arrivals, detachment, clustering, bypass plans, leader/follower
assignment, adapted preferred velocities, agent-agent ORCA, Euler
integration, bookkeeping. ``orca_only`` mode skips everything group-related.
"""

from __future__ import annotations

import logging
import math
import os
import random
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .avoidance import _orca_line, obstacle_halfplane, solve_lines
from .clustering import SimilarityParams, form_groups, needs_recluster
from .geom import EPS, ZERO, Vec2, point_polygon_distance
from .group_nav import (
    BypassPlan,
    FollowAssignment,
    adapt_follower_velocity,
    adapt_leader_velocity,
    assign_followers,
    build_bypass_plan,
    detach_flags,
    elect_leader,
    group_goal,
)
from .model import Agent, Group, Obstacle, Scenario, SimParams, group_stats
from .spatial import SpatialHash

log = logging.getLogger(__name__)


TrajectoryRow = tuple[int, int, float, float, float, float, int, int]


@dataclass
class Metrics:
    tpf_ms: list[float] = field(default_factory=list)
    steps_to_goal: dict[int, int] = field(default_factory=dict)
    collisions: int = 0
    group_counts: list[int] = field(default_factory=list)
    group_sizes: Counter = field(default_factory=Counter)
    recluster_events: int = 0
    infeasible_leaders: int = 0
    truncated: bool = False

    def summary(self, n_agents: int, max_steps: int) -> dict:
        steps = [self.steps_to_goal.get(i, max_steps) for i in range(n_agents)]
        return {
            "tpf_ms_mean": (sum(self.tpf_ms) / len(self.tpf_ms)) if self.tpf_ms else 0.0,
            "steps_mean": (sum(steps) / len(steps)) if steps else 0.0,
            "collisions": self.collisions,
            "max_groups": max(self.group_counts, default=0),
            "truncated": self.truncated,
        }


@dataclass
class SimState:
    params: SimParams
    agents: list[Agent]
    obstacles: list[Obstacle] = field(default_factory=list)
    groups: list[Group] = field(default_factory=list)
    rng: random.Random = field(default_factory=random.Random)
    metrics: Metrics = field(default_factory=Metrics)
    step: int = 0
    overlaps: set[tuple[int, int]] = field(default_factory=set)
    detached: set[int] = field(default_factory=set)
    recluster_pending: bool = True
    plans: dict[int, BypassPlan] = field(default_factory=dict)
    follow: dict[int, FollowAssignment] = field(default_factory=dict)
    trajectory: list[TrajectoryRow] = field(default_factory=list)
    threads: int = 1

    @classmethod
    def from_scenario(cls, scenario: Scenario, threads: Optional[int] = None) -> "SimState":
        agents = sorted((a.copy() for a in scenario.agents), key=lambda a: a.id)
        return cls(
            params=scenario.params,
            agents=agents,
            obstacles=list(scenario.obstacles),
            rng=random.Random(scenario.params.seed),
            threads=threads_from_env() if threads is None else max(1, threads),
        )

    def active(self) -> list[Agent]:
        return [a for a in self.agents if not a.arrived]


def threads_from_env() -> int:
    raw = os.environ.get("GROUPSIM_THREADS", "1").strip() or "1"
    n = int(raw)
    if n <= 0:
        return os.cpu_count() or 1
    return n


def count_collisions(
    agents: Sequence[Agent], previous: set[tuple[int, int]]
) -> tuple[int, set[tuple[int, int]]]:
    """New overlap episodes since ``previous`` and the current overlapping pairs."""
    active = [a for a in agents if not a.arrived]
    if not active:
        return 0, set()
    reach = 2.0 * max(a.radius for a in active)
    grid = SpatialHash(reach).build((a.id, a.position.x, a.position.y) for a in active)
    by_id = {a.id: a for a in active}
    current: set[tuple[int, int]] = set()
    for i, j, d2 in grid.pairs_within(reach):
        limit = by_id[i].radius + by_id[j].radius - EPS
        if d2 < limit * limit:
            current.add((i, j))
    return len(current - previous), current


def nearest_neighbors(active: Sequence[Agent], radius: float, k: int) -> dict[int, list[int]]:
    """Up to ``k`` nearest other agents within ``radius`` for each agent, ties by id.

    A KD-tree returns a few spare candidates; the final order is re-derived
    from exact squared distances so equal distances sort by id.
    """
    out: dict[int, list[int]] = {a.id: [] for a in active}
    if len(active) < 2 or k <= 0:
        return out
    pos = np.array([(a.position.x, a.position.y) for a in active])
    query_k = min(len(active), k + 3)
    dist, idx = cKDTree(pos).query(pos, k=query_k, distance_upper_bound=radius * (1.0 + 1e-12))
    r2 = radius * radius
    n = len(active)
    for row, a in enumerate(active):
        ax, ay = a.position
        cand = []
        for j in idx[row]:
            if j >= n or j == row:
                continue
            b = active[j]
            d2 = (b.position.x - ax) ** 2 + (b.position.y - ay) ** 2
            if d2 <= r2:
                cand.append((d2, b.id))
        cand.sort()
        out[a.id] = [i for _, i in cand[:k]]
    return out


# ------------------------------------------------------------------ phases


def _arrivals(state: SimState) -> list[Agent]:
    p = state.params
    arrived = []
    for a in state.agents:
        if a.arrived:
            continue
        if (a.position - a.goal).norm() <= p.goal_tolerance:
            a.arrived = True
            a.velocity = ZERO
            a.group = None
            a.follow_target = None
            state.metrics.steps_to_goal[a.id] = state.step + 1
            state.detached.discard(a.id)
            arrived.append(a)
    return arrived


def _cluster(state: SimState, active: list[Agent]) -> None:
    p = state.params
    agents = state.agents
    old_decisions = {g.id: g.side_decisions for g in state.groups}

    grouped = {m for g in state.groups for m in g.members if not agents[m].arrived}
    if p.recluster == "every_step":
        check = sorted(grouped | state.detached)
    else:
        check = sorted(grouped)
    flags = detach_flags([agents[i] for i in check], active, p.tau)
    for aid, free in zip(check, flags):
        if free:
            state.detached.add(aid)
        else:
            state.detached.discard(aid)

    sim = SimilarityParams(p.eps_p, p.eps_v)
    if p.recluster == "every_step":
        eligible = [a for a in active if a.id not in state.detached]
        groups, _ = form_groups(eligible, sim)
    elif state.step == 0 or state.recluster_pending:
        state.detached.clear()
        groups, _ = form_groups(active, sim)
        if state.step > 0:
            state.metrics.recluster_events += 1
    else:
        groups = []
        for g in state.groups:
            members = [m for m in g.members if not agents[m].arrived and m not in state.detached]
            if len(members) >= 2:
                groups.append(Group(id=min(members), members=sorted(members), side_decisions=g.side_decisions))
        state.detached.clear()

    live = {g.id for g in groups}
    for a in agents:
        a.group = None
        a.follow_target = None
    for g in groups:
        kept = old_decisions.get(g.id, g.side_decisions)
        g.side_decisions = {k: v for k, v in kept.items() if k in live}
        for m in g.members:
            agents[m].group = g.id
        g.refresh(agents)
    state.groups = groups


def _reachable(leader: Agent, g: Group, agents: list[Agent], tau: float) -> bool:
    speed = leader.max_speed + g.mean_velocity.norm()
    limit = speed * tau + leader.radius + max(agents[m].radius for m in g.members)
    lp = leader.position
    return any((agents[m].position - lp).norm() <= limit for m in g.members)


def _navigate_groups(state: SimState) -> None:
    p = state.params
    agents = state.agents
    groups = state.groups
    state.plans = {}
    state.follow = {}
    leader_ok: dict[int, bool] = {}
    for g in groups:
        probe = agents[g.members[0]]
        reach = max(agents[m].max_speed for m in g.members)
        others = [o for o in groups if o.id != g.id and _reachable(
            Agent(id=-1, position=g.mean_position, goal=g.mean_position, radius=probe.radius, max_speed=reach), o, agents, p.tau)]
        plan = build_bypass_plan(g, others, state.rng, agents, p.tau)
        state.plans[g.id] = plan
        g.temp_goal = plan.temp_goal
        for gid, side, _ in plan.entries:
            g.side_decisions[gid] = side

    for g in groups:
        goal = group_goal(g, agents)
        leader_id = elect_leader(g, goal, agents)
        g.leader = leader_id
        assignment = assign_followers(g, leader_id, goal, agents)
        state.follow[g.id] = assignment
        leader = agents[leader_id]
        if g.temp_goal is not None:
            leader.preferred_velocity = leader.velocity_toward(g.temp_goal, p.dt)
        others = [o for o in groups if o.id != g.id and _reachable(leader, o, agents, p.tau)]
        v, ok = adapt_leader_velocity(leader, others, agents, p.tau)
        leader.adapted_preferred_velocity = v
        leader_ok[g.id] = ok
        if not ok:
            state.metrics.infeasible_leaders += 1
        for f in assignment.order():
            target = assignment.follow_edges[f]
            agents[f].follow_target = target
            # Without a bypass plan members steer to their own goals; the
            # follow edges are still recorded.
            if g.temp_goal is not None:
                agents[f].adapted_preferred_velocity = adapt_follower_velocity(agents[f], agents[target])

    state.recluster_pending = needs_recluster(groups, agents, leader_ok, p.eps_p, p.deform_factor)


def _orca_pass(state: SimState, active: list[Agent]) -> dict[int, Vec2]:
    p = state.params
    agents = state.agents
    near_obstacles = state.obstacles
    neighbors = nearest_neighbors(active, p.neighbor_radius, p.max_neighbors)

    def solve(a: Agent) -> Vec2:
        lines = []
        for ob in near_obstacles:
            if point_polygon_distance(a.position, ob.vertices) <= p.neighbor_radius:
                h = obstacle_halfplane(a, ob, p.tau, p.dt)
                lines.append((h.point.x, h.point.y, h.normal.y, -h.normal.x))
        hard = len(lines)
        pax, pay = a.position
        vax, vay = a.velocity
        for j in neighbors[a.id]:
            b = agents[j]
            qx, qy, nx, ny = _orca_line(
                pax, pay, vax, vay, a.radius,
                b.position.x, b.position.y, b.velocity.x, b.velocity.y, b.radius,
                p.tau, p.dt, 0.5, a.id < b.id,
            )
            lines.append((qx, qy, ny, -nx))
        v, _ = solve_lines(lines, tuple(a.adapted_preferred_velocity), a.max_speed, hard)
        return v

    if state.threads > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=state.threads) as pool:
            results = list(pool.map(solve, active))
    else:
        results = [solve(a) for a in active]
    return {a.id: v for a, v in zip(active, results)}


def step(state: SimState) -> SimState:
    """Advance the simulation by one fixed time step, in place."""
    t0 = time.perf_counter()
    p = state.params
    arrived_now = _arrivals(state)
    active = state.active()

    for a in active:
        a.preferred_velocity = a.velocity_toward(a.goal, p.dt)
        a.adapted_preferred_velocity = a.preferred_velocity

    if p.mode == "dynamic_grouping" and active:
        _cluster(state, active)
        _navigate_groups(state)
    else:
        state.groups = []
        for a in state.agents:
            a.group = None
            a.follow_target = None

    new_velocity = _orca_pass(state, active) if active else {}

    leaders = {g.leader for g in state.groups}
    k = state.step
    recorded = sorted(active + arrived_now, key=lambda a: a.id)
    for a in recorded:
        v = new_velocity.get(a.id, ZERO)
        state.trajectory.append((
            k, a.id, a.position.x, a.position.y, v.x, v.y,
            -1 if a.group is None else a.group, 1 if a.id in leaders else 0,
        ))

    for a in active:
        v = new_velocity[a.id]
        a.velocity = v
        a.position = Vec2(a.position.x + v.x * p.dt, a.position.y + v.y * p.dt)

    for g in state.groups:
        g.mean_position, g.mean_velocity = group_stats(g, state.agents)

    m = state.metrics
    delta, state.overlaps = count_collisions(state.agents, state.overlaps)
    m.collisions += len(state.overlaps) if p.collision_counting == "per_step" else delta
    m.group_counts.append(len(state.groups))
    for g in state.groups:
        m.group_sizes[len(g.members)] += 1
    state.step += 1
    m.tpf_ms.append((time.perf_counter() - t0) * 1000.0)
    return state


def run(scenario: Scenario, threads: Optional[int] = None) -> tuple[list[TrajectoryRow], Metrics]:
    """Step until every agent arrives or ``max_steps`` elapse."""
    state = SimState.from_scenario(scenario, threads)
    while state.step < scenario.params.max_steps and any(not a.arrived for a in state.agents):
        step(state)
    state.metrics.truncated = any(not a.arrived for a in state.agents)
    return state.trajectory, state.metrics


def simulate(scenario: Scenario, threads: Optional[int] = None) -> SimState:
    """Like ``run`` but returns the final state."""
    state = SimState.from_scenario(scenario, threads)
    while state.step < scenario.params.max_steps and any(not a.arrived for a in state.agents):
        step(state)
    state.metrics.truncated = any(not a.arrived for a in state.agents)
    return state

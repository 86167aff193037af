"""Inter-group bypass planning and intra-group leader/follower navigation."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .avoidance import agent_group_vo, closest_outside_union, extreme_agents
from .geom import EPS, AlreadyColliding, Vec2, clamp_norm, cone_contains, cross
from .model import Agent, Group, Side, group_stats

log = logging.getLogger(__name__)

GAP_FACTOR = 5.0  # desired following gap, in agent radii
K_GAP = 1.0  # 1/s
GOAL_CLEARANCE = 0.2  # m, beyond the extreme agent's disc

AgentTable = Mapping[int, Agent] | Sequence[Agent]


@dataclass
class BypassPlan:
    group: int
    entries: list[tuple[int, Side, int]] = field(default_factory=list)
    temp_goal: Optional[Vec2] = None

    @property
    def side(self) -> Optional[Side]:
        return self.entries[0][1] if self.entries else None


@dataclass
class FollowAssignment:
    group: int
    leader: int
    follow_edges: dict[int, int] = field(default_factory=dict)

    def order(self) -> list[int]:
        """Followers in leader-to-leaves order (each after its target)."""
        children: dict[int, list[int]] = {}
        for f, t in self.follow_edges.items():
            children.setdefault(t, []).append(f)
        out: list[int] = []
        frontier = [self.leader]
        while frontier:
            nxt: list[int] = []
            for node in frontier:
                for c in sorted(children.get(node, ())):
                    out.append(c)
                    nxt.append(c)
            frontier = nxt
        return out


def bypass_effort(a: Agent, g: Group) -> float:
    """Signed steering effort of ``a`` to pass ``g``: cross(v_a - v_G, p_a - p_G)."""
    rv = a.velocity - g.mean_velocity
    rp = a.position - g.mean_position
    return cross(rv, rp)


def choose_side(g_a: Group, g: Group, agents: AgentTable) -> Side:
    total = sum(bypass_effort(agents[m], g) for m in g_a.members)
    return "right" if total < 0.0 else "left"


def _probe(g: Group, agents: AgentTable) -> Agent:
    radius = sum(agents[m].radius for m in g.members) / len(g.members)
    return Agent(id=-1, position=g.mean_position, goal=g.mean_position, velocity=g.mean_velocity, radius=radius)


def may_collide(g_a: Group, g: Group, agents: AgentTable, tau: float) -> bool:
    """Group ``g``'s velocity obstacle, seen from ``g_a``'s mean state, holds ``g_a``'s mean velocity."""
    probe = _probe(g_a, agents)
    try:
        cone = agent_group_vo(probe, g, agents, tau)
    except AlreadyColliding:
        return False
    return cone_contains(cone, probe.velocity)


def _on_side(origin: Vec2, through: Vec2, point: Vec2, side: Side) -> bool:
    c = cross(through - origin, point - origin)
    return c > EPS if side == "left" else c < -EPS


def build_bypass_plan(
    g_a: Group,
    others: Sequence[Group],
    rng: random.Random,
    agents: AgentTable,
    tau: float,
) -> BypassPlan:
    """Pick the side and chain of obstacle groups ``g_a`` passes coherently.

    The seed group is drawn from the colliding candidates (sorted by id) with
    ``rng``; subsequent groups are adopted while a colliding group lies beyond
    the current extreme agent on the chosen side, nearest first.
    """
    plan = BypassPlan(g_a.id)
    colliding = sorted((g for g in others if g.id != g_a.id and may_collide(g_a, g, agents, tau)), key=lambda g: g.id)
    if not colliding:
        return plan
    probe = _probe(g_a, agents)
    seed = colliding[rng.randrange(len(colliding))]
    side = g_a.side_decisions.get(seed.id) or choose_side(g_a, seed, agents)
    pair = extreme_agents(probe, seed, agents)
    extreme = pair.left if side == "left" else pair.right
    plan.entries.append((seed.id, side, extreme))
    remaining = [g for g in colliding if g.id != seed.id]
    origin = probe.position
    while remaining:
        e_pos = agents[extreme].position
        beyond = [g for g in remaining if _on_side(origin, e_pos, g.mean_position, side)]
        if not beyond:
            break
        nxt = min(beyond, key=lambda g: ((g.mean_position - origin).norm(), g.id))
        remaining.remove(nxt)
        pair = extreme_agents(probe, nxt, agents)
        extreme = pair.left if side == "left" else pair.right
        plan.entries.append((nxt.id, side, extreme))

    e = agents[extreme]
    direction = (e.position - origin).normalized()
    lateral = direction.perp() if side == "left" else -direction.perp()
    plan.temp_goal = e.position + lateral * (e.radius + probe.radius + GOAL_CLEARANCE)
    return plan


def group_goal(g: Group, agents: AgentTable) -> Vec2:
    """Temporary goal if set, else the centroid of member goals."""
    if g.temp_goal is not None:
        return g.temp_goal
    n = len(g.members)
    return Vec2(sum(agents[m].goal.x for m in g.members) / n, sum(agents[m].goal.y for m in g.members) / n)


def elect_leader(g: Group, temp_goal: Vec2, agents: AgentTable) -> int:
    return min(g.members, key=lambda m: ((agents[m].position - temp_goal).norm(), m))


def assign_followers(g: Group, leader: int, temp_goal: Vec2, agents: AgentTable) -> FollowAssignment:
    """Each non-leader follows its nearest member strictly closer to the goal.

    A member with no strictly closer member (exact distance ties) follows the
    leader.
    """
    dist = {m: (agents[m].position - temp_goal).norm() for m in g.members}
    edges: dict[int, int] = {}
    for a in sorted(g.members):
        if a == leader:
            continue
        closer = [b for b in g.members if b != a and dist[b] < dist[a]]
        if not closer:
            edges[a] = leader
            continue
        pa = agents[a].position
        edges[a] = min(closer, key=lambda b: ((agents[b].position - pa).norm(), b))
    return FollowAssignment(g.id, leader, edges)


def adapt_leader_velocity(
    leader: Agent,
    other_groups: Sequence[Group],
    agents: AgentTable,
    tau: float,
    max_speed: Optional[float] = None,
) -> tuple[Vec2, bool]:
    """Nearest velocity to the leader's preferred velocity outside every other group's cone."""
    v_pref = leader.preferred_velocity
    speed = leader.max_speed if max_speed is None else max_speed
    cones = []
    for g in other_groups:
        if leader.id in g.members:
            continue
        try:
            cones.append(agent_group_vo(leader, g, agents, tau))
        except AlreadyColliding:
            log.debug("leader %d already overlaps group %d", leader.id, g.id)
    v = closest_outside_union(cones, v_pref, speed)
    if v is None:
        return v_pref, False
    return v, True


def adapt_follower_velocity(
    follower: Agent,
    target: Agent,
    gap_factor: float = GAP_FACTOR,
    k_gap: float = K_GAP,
) -> Vec2:
    """Preferred velocity projected on the direction to the followed agent, plus a gap regulator."""
    d = target.position - follower.position
    gap = d.norm()
    if gap < EPS:
        log.debug("follower %d coincides with target %d", follower.id, target.id)
        return follower.preferred_velocity
    u = d / gap
    half = 0.5 * follower.pref_speed
    corr = max(-half, min(half, k_gap * (gap - gap_factor * follower.radius)))
    speed = max(0.0, follower.preferred_velocity.dot(u) + corr)
    return clamp_norm(u * speed, follower.max_speed)


def _first_contact(rel_p: Vec2, rel_v: Vec2, radius: float, tau: float) -> bool:
    """Whether |rel_p + rel_v t| <= radius for some t in [0, tau]."""
    return _contact(rel_p.x, rel_p.y, rel_v.x, rel_v.y, radius, tau)


def _contact(px: float, py: float, vx: float, vy: float, radius: float, tau: float) -> bool:
    r2 = radius * radius
    if px * px + py * py <= r2:
        return True
    b = px * vx + py * vy
    a = vx * vx + vy * vy
    if b >= 0.0 or a == 0.0:
        return False
    t = -b / a
    if t > tau:
        t = tau
    cx, cy = px + vx * t, py + vy * t
    return cx * cx + cy * cy <= r2


def should_detach(a: Agent, others: Sequence[Agent], tau: float) -> bool:
    """True when holding the unmodified preferred velocity touches nobody within ``tau``."""
    vx, vy = a.preferred_velocity
    ax, ay = a.position
    for b in others:
        if b.id == a.id or b.arrived:
            continue
        bx, by = b.position
        bvx, bvy = b.velocity
        if _contact(bx - ax, by - ay, bvx - vx, bvy - vy, a.radius + b.radius, tau):
            return False
    return True


def detach_flags(candidates: Sequence[Agent], crowd: Sequence[Agent], tau: float) -> list[bool]:
    """``should_detach`` for every candidate against the whole active ``crowd``, vectorized."""
    if not candidates:
        return []
    crowd = [b for b in crowd if not b.arrived]
    pos = np.array([tuple(b.position) for b in crowd])
    vel = np.array([tuple(b.velocity) for b in crowd])
    rad = np.array([b.radius for b in crowd])
    ids = np.array([b.id for b in crowd])
    out = []
    for a in candidates:
        px = pos[:, 0] - a.position.x
        py = pos[:, 1] - a.position.y
        vx = vel[:, 0] - a.preferred_velocity.x
        vy = vel[:, 1] - a.preferred_velocity.y
        r = rad + a.radius
        r2 = r * r
        b = px * vx + py * vy
        aa = vx * vx + vy * vy
        approaching = (b < 0.0) & (aa != 0.0)
        t = np.where(approaching, -b / np.where(aa == 0.0, 1.0, aa), 0.0)
        t = np.minimum(t, tau)
        cx, cy = px + vx * t, py + vy * t
        hit = (px * px + py * py <= r2) | (approaching & (cx * cx + cy * cy <= r2))
        hit &= ids != a.id
        out.append(not bool(hit.any()))
    return out


def refresh(g: Group, agents: AgentTable) -> None:
    g.mean_position, g.mean_velocity = group_stats(g, agents)

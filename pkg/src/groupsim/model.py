"""Agents, groups, obstacles and scenario configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Literal, Mapping, Optional, Sequence

from .geom import EPS, ZERO, ConvexPolygon, Vec2, point_polygon_distance

Side = Literal["left", "right"]
Mode = Literal["dynamic_grouping", "orca_only"]

DEFAULT_RADIUS = 0.3
DEFAULT_PREF_SPEED = 1.4
DEFAULT_MAX_SPEED = 2.0


@dataclass
class Agent:
    id: int
    position: Vec2
    goal: Vec2
    velocity: Vec2 = ZERO
    radius: float = DEFAULT_RADIUS
    pref_speed: float = DEFAULT_PREF_SPEED
    max_speed: float = DEFAULT_MAX_SPEED
    preferred_velocity: Vec2 = ZERO
    adapted_preferred_velocity: Vec2 = ZERO
    group: Optional[int] = None
    follow_target: Optional[int] = None
    arrived: bool = False

    def copy(self) -> "Agent":
        return Agent(**{f.name: getattr(self, f.name) for f in fields(self)})

    def velocity_toward(self, target: Vec2, dt: float) -> Vec2:
        """Preferred-speed velocity toward ``target``, slowing to land on it within one step."""
        dx, dy = target.x - self.position.x, target.y - self.position.y
        dist = math.hypot(dx, dy)
        if dist == 0.0 or self.pref_speed == 0.0:
            return ZERO
        speed = min(self.pref_speed, dist / dt)
        return Vec2(dx / dist * speed, dy / dist * speed)


@dataclass
class Group:
    id: int
    members: list[int]
    mean_position: Vec2 = ZERO
    mean_velocity: Vec2 = ZERO
    leader: Optional[int] = None
    temp_goal: Optional[Vec2] = None
    side_decisions: dict[int, Side] = field(default_factory=dict)

    def refresh(self, agents: Mapping[int, Agent] | Sequence[Agent]) -> None:
        self.mean_position, self.mean_velocity = group_stats(self, agents)


@dataclass(frozen=True)
class Obstacle:
    polygon: ConvexPolygon

    @property
    def vertices(self) -> tuple[Vec2, ...]:
        return self.polygon.vertices


@dataclass(frozen=True)
class SimParams:
    eps_p: float = 1.5
    eps_v: float = 0.5
    tau: float = 4.0
    dt: float = 0.1
    neighbor_radius: float = 10.0
    seed: int = 0
    max_steps: int = 5000
    goal_tolerance: float = 0.5
    mode: Mode = "dynamic_grouping"
    max_neighbors: int = 10
    recluster: Literal["every_step", "event"] = "every_step"
    deform_factor: float = 3.0
    collision_counting: Literal["episode", "per_step"] = "episode"


@dataclass
class Scenario:
    name: str
    agents: list[Agent]
    obstacles: list[Obstacle] = field(default_factory=list)
    params: SimParams = field(default_factory=SimParams)


class InvariantError(RuntimeError):
    """Internal bookkeeping invariant broken."""


def group_stats(group: Group, agents: Mapping[int, Agent] | Sequence[Agent]) -> tuple[Vec2, Vec2]:
    """Mean position and mean velocity over the group's current members."""
    if not group.members:
        raise InvariantError(f"group {group.id} has no members")
    px = py = vx = vy = 0.0
    for m in group.members:
        a = agents[m]
        px += a.position.x
        py += a.position.y
        vx += a.velocity.x
        vy += a.velocity.y
    n = len(group.members)
    return Vec2(px / n, py / n), Vec2(vx / n, vy / n)


def validate_scenario(s: Scenario) -> list[str]:
    """Every violated scenario invariant, as human-readable strings. Empty means ok."""
    out: list[str] = []
    p = s.params
    for name in ("tau", "dt", "neighbor_radius", "goal_tolerance", "deform_factor"):
        value = getattr(p, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            out.append(f"non-positive {name}")
    # eps_p = 0 is the documented way to switch clustering off.
    for name in ("eps_p", "eps_v"):
        value = getattr(p, name)
        if not (math.isfinite(value) and value >= 0):
            out.append(f"negative {name}")
    if p.max_steps <= 0:
        out.append("non-positive max_steps")
    if p.max_neighbors <= 0:
        out.append("non-positive max_neighbors")
    if p.mode not in ("dynamic_grouping", "orca_only"):
        out.append(f"unknown mode {p.mode!r}")
    if p.recluster not in ("every_step", "event"):
        out.append(f"unknown recluster policy {p.recluster!r}")
    if p.collision_counting not in ("episode", "per_step"):
        out.append(f"unknown collision_counting {p.collision_counting!r}")

    ids = [a.id for a in s.agents]
    seen: set[int] = set()
    for i, aid in enumerate(ids):
        if aid in seen:
            out.append(f"duplicate id {aid} (agent index {i})")
        seen.add(aid)
    if sorted(ids) != list(range(len(ids))):
        out.append("agent ids not dense from 0")

    for i, a in enumerate(s.agents):
        for name in ("position", "velocity", "goal"):
            if not getattr(a, name).is_finite():
                out.append(f"agent {i}: non-finite {name}")
        if not a.radius > 0:
            out.append(f"agent {i}: non-positive radius")
        if not a.pref_speed >= 0:
            out.append(f"agent {i}: negative pref_speed")
        if not (a.max_speed > 0 and a.max_speed >= a.pref_speed):
            out.append(f"agent {i}: max_speed below pref_speed")

    for j, ob in enumerate(s.obstacles):
        if not ob.polygon.is_valid() or len(ob.polygon) < 3:
            out.append(f"obstacle {j}: not a counterclockwise convex polygon")

    agents = s.agents
    for i in range(len(agents)):
        for k in range(i + 1, len(agents)):
            a, b = agents[i], agents[k]
            if (a.position - b.position).norm() < a.radius + b.radius - EPS:
                out.append(f"initial overlap ({i},{k})")
        for j, ob in enumerate(s.obstacles):
            if len(ob.polygon) and point_polygon_distance(agents[i].position, ob.vertices) < agents[i].radius - EPS:
                out.append(f"agent {i} overlaps obstacle {j}")
    return out

"""Built-in benchmark scenario generators.

Sizes default to the agent counts of the five published benchmarks; geometry
is synthetic (the source videos are not available).
"""

from __future__ import annotations

import math
import random
from typing import Callable, Optional

from .geom import ConvexPolygon, Vec2, point_polygon_distance
from .model import DEFAULT_RADIUS, Agent, Obstacle, Scenario, SimParams

DEFAULT_COUNTS = {
    "crosswalk": 49,
    "hallway": 97,
    "cluttered": 185,
    "random": 184,
    "random_obstacles": 151,
}


def _rect(x0: float, y0: float, x1: float, y1: float) -> Obstacle:
    return Obstacle(ConvexPolygon((Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1))))


def _clear(p: Vec2, placed: list[Vec2], obstacles: list[Obstacle], gap: float) -> bool:
    if any((p - q).norm() < gap for q in placed):
        return False
    return all(point_polygon_distance(p, o.vertices) >= gap for o in obstacles)


def _clumps(n: int, rng: random.Random, lo: int = 2, hi: int = 7) -> list[int]:
    sizes = []
    while sum(sizes) < n:
        sizes.append(min(rng.randint(lo, hi), n - sum(sizes)))
    return sizes


def _place_clump(
    rng: random.Random,
    size: int,
    center: Vec2,
    placed: list[Vec2],
    obstacles: list[Obstacle],
    spacing: float,
    spread: float,
) -> list[Vec2]:
    out: list[Vec2] = []
    for _ in range(size):
        for attempt in range(400):
            r = spread * math.sqrt(rng.random()) * (1.0 + attempt / 100.0)
            a = rng.uniform(0.0, 2.0 * math.pi)
            p = Vec2(center.x + r * math.cos(a), center.y + r * math.sin(a))
            if _clear(p, placed + out, obstacles, spacing):
                out.append(p)
                break
        else:
            raise RuntimeError("could not place agent; region too crowded")
    return out


def crosswalk(n: int = 49, seed: int = 0) -> Scenario:
    """Two streams of pedestrian clumps crossing a street in opposite directions."""
    rng = random.Random(seed)
    agents: list[Agent] = []
    placed: list[Vec2] = []
    sizes = _clumps(n, rng)
    width = 3.0 + 0.22 * n ** 0.75
    for k, size in enumerate(sizes):
        direction = 1.0 if k % 2 == 0 else -1.0
        start_x = -direction * rng.uniform(7.0, 7.0 + 0.12 * n)
        cy = rng.uniform(-width / 2, width / 2)
        pts = _place_clump(rng, size, Vec2(start_x, cy), placed, [], 1.0, 0.9)
        placed += pts
        for p in pts:
            goal = Vec2(-p.x + direction * 6.0, p.y)
            agents.append(Agent(id=len(agents), position=p, goal=goal))
    return Scenario("crosswalk", agents, [], SimParams(seed=seed))


def hallway(n: int = 97, seed: int = 0) -> Scenario:
    """Bidirectional flow along a walled corridor."""
    rng = random.Random(seed)
    half_w = 3.0
    length = 40.0
    walls = [_rect(-length, half_w, length, half_w + 1.0), _rect(-length, -half_w - 1.0, length, -half_w)]
    agents: list[Agent] = []
    placed: list[Vec2] = []
    for k, size in enumerate(_clumps(n, rng)):
        direction = 1.0 if k % 2 == 0 else -1.0
        cx = -direction * rng.uniform(8.0, 8.0 + 0.18 * n)
        cy = rng.uniform(-half_w + 1.0, half_w - 1.0)
        pts = _place_clump(rng, size, Vec2(cx, cy), placed, walls, 0.8, 0.9)
        placed += pts
        for p in pts:
            agents.append(Agent(id=len(agents), position=p, goal=Vec2(direction * 30.0, p.y)))
    return Scenario("hallway", agents, walls, SimParams(seed=seed))


def _slab(a: Vec2, b: Vec2, outward: Vec2, thickness: float) -> Obstacle:
    """Wall of ``thickness`` along segment ab, extruded toward ``outward``."""
    off = outward.normalized() * thickness
    pts = [a, b, b + off, a + off]
    area = sum(pts[i].cross(pts[(i + 1) % 4]) for i in range(4))
    if area < 0:
        pts.reverse()
    return Obstacle(ConvexPolygon(tuple(pts)))


def cluttered(
    n: int = 185,
    seed: int = 0,
    gap: float = 5.0,
    length: float = 4.0,
    funnel: float = 24.0,
    pillars: int = 6,
    two_way: bool = True,
) -> Scenario:
    """Two crowds in cluttered rooms exchanging sides through a short hallway.

    The hallway opens into 45-degree funnels so that agents pushed against a
    wall slide toward the opening (agents have no global planner). Goals are
    starts mirrored through a random point of the doorway, clamped inside the
    opposite funnel; pillars sit in both rooms.
    """
    rng = random.Random(seed)
    h, w, t = length / 2, gap / 2, 0.5
    reach = funnel / math.sqrt(2.0)
    obstacles = [_rect(-h, w, h, w + t), _rect(-h, -w - t, h, -w)]
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            a = Vec2(sx * h, sy * w)
            b = Vec2(sx * (h + reach), sy * (w + reach))
            obstacles.append(_slab(a, b, Vec2(-sx, sy), t))

    def inside(x: float, y: float, margin: float) -> bool:
        return abs(x) >= h and abs(y) <= w + (abs(x) - h) - margin

    depth = 6.0 + (0.06 if two_way else 0.1) * n
    for k in range(pillars):
        side = 1.0 if k % 2 == 0 else -1.0
        while True:
            x = rng.uniform(h + 4.0, h + 4.0 + depth)
            y = rng.uniform(-(w + x - h), w + x - h)
            if inside(x, y, 2.5) and abs(y) > 1.0:
                break
        obstacles.append(_rect(side * x - 0.4, y - 0.4, side * x + 0.4, y + 0.4))

    agents: list[Agent] = []
    placed: list[Vec2] = []
    for k, size in enumerate(_clumps(n, rng)):
        direction = 1.0 if k % 2 == 0 or not two_way else -1.0
        x = rng.uniform(h + 2.5, h + 2.5 + depth)
        lim = w + (x - h) - 2.0
        cy = rng.uniform(-lim, lim)
        pts = _place_clump(rng, size, Vec2(-direction * x, cy), placed, obstacles, 1.0, 0.9)
        placed += pts
        for p in pts:
            q = Vec2(0.0, rng.uniform(-w + 0.8, w - 0.8))
            g = q * 2.0 - p
            lim_g = w + (abs(g.x) - h) - 1.0
            g = Vec2(g.x, max(-lim_g, min(lim_g, g.y)))
            agents.append(Agent(id=len(agents), position=p, goal=g))
    return Scenario("cluttered", agents, obstacles, SimParams(seed=seed))


def random_scene(n: int = 184, seed: int = 0, obstacles: Optional[list[Obstacle]] = None) -> Scenario:
    """Agents scattered uniformly over a square with uniformly random goals."""
    rng = random.Random(seed)
    obstacles = obstacles or []
    half = 2.2 * math.sqrt(n)
    agents: list[Agent] = []
    placed: list[Vec2] = []
    goals: list[Vec2] = []
    while len(agents) < n:
        p = Vec2(rng.uniform(-half, half), rng.uniform(-half, half))
        if not _clear(p, placed, obstacles, 2 * DEFAULT_RADIUS + 0.2):
            continue
        while True:
            g = Vec2(rng.uniform(-half, half), rng.uniform(-half, half))
            if _clear(g, goals, obstacles, 2 * DEFAULT_RADIUS + 0.5) and (g - p).norm() > half / 2:
                break
        placed.append(p)
        goals.append(g)
        agents.append(Agent(id=len(agents), position=p, goal=g))
    return Scenario("random", agents, obstacles, SimParams(seed=seed))


def random_obstacles(n: int = 151, seed: int = 0) -> Scenario:
    rng = random.Random(seed + 7919)
    half = 2.2 * math.sqrt(n)
    obstacles = []
    for _ in range(6):
        cx, cy = rng.uniform(-half / 2, half / 2), rng.uniform(-half / 2, half / 2)
        w, h = rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0)
        obstacles.append(_rect(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2))
    s = random_scene(n, seed, obstacles)
    s.name = "random_obstacles"
    return s


GENERATORS: dict[str, Callable[..., Scenario]] = {
    "crosswalk": crosswalk,
    "hallway": hallway,
    "cluttered": cluttered,
    "random": random_scene,
    "random_obstacles": random_obstacles,
}


def generate(name: str, agents: Optional[int] = None, seed: int = 0) -> Scenario:
    if name not in GENERATORS:
        raise KeyError(name)
    n = DEFAULT_COUNTS[name] if agents is None else agents
    return GENERATORS[name](n, seed)

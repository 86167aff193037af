"""Velocity obstacles: agent-agent ORCA constraints and agent-group cones.

``solve_velocity`` is the usual incremental 2D linear program over ORCA
half-planes with the 3D fallback that minimizes the largest violation.
``closest_outside_union`` solves the non-convex leader problem (nearest
velocity outside a union of cones) exactly by enumerating boundary
projections and pairwise boundary intersections.
"""

from __future__ import annotations

import functools
import heapq
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .geom import (
    EPS,
    AlreadyColliding,
    ConvexPolygon,
    VelocityCone,
    Vec2,
    clamp_norm,
    convex_hull,
    point_polygon_distance,
    tangent_rays,
)
from .model import Agent, Group, Obstacle, group_stats

log = logging.getLogger(__name__)

LP_EPS = 1e-9
# Candidate boundaries are pushed this far (m) off the true obstacle so that
# returned velocities are strictly outside every cone.
VO_MARGIN = 1e-7


@dataclass(frozen=True)
class HalfPlane:
    """Velocities ``v`` with ``(v - point) . normal >= 0`` are permitted."""

    point: Vec2
    normal: Vec2

    @property
    def direction(self) -> Vec2:
        return Vec2(self.normal.y, -self.normal.x)

    def violation(self, v: Vec2) -> float:
        return -((v.x - self.point.x) * self.normal.x + (v.y - self.point.y) * self.normal.y)


@dataclass(frozen=True)
class ExtremePair:
    left: int
    right: int


# ---------------------------------------------------------------- agent-agent


def orca_halfplane(a: Agent, b: Agent, tau: float, dt: float = 0.1, share: float = 0.5) -> HalfPlane:
    """ORCA constraint on ``a``'s velocity induced by ``b``.

    ``a`` takes ``share`` of the smallest relative-velocity change that leaves
    the truncated velocity obstacle. Overlapping agents get a constraint that
    separates them within one ``dt``.
    """
    qx, qy, nx, ny = _orca_line(
        a.position.x, a.position.y, a.velocity.x, a.velocity.y, a.radius,
        b.position.x, b.position.y, b.velocity.x, b.velocity.y, b.radius,
        tau, dt, share, a.id < b.id,
    )
    return HalfPlane(Vec2(qx, qy), Vec2(nx, ny))


def _orca_line(pax, pay, vax, vay, ra, pbx, pby, vbx, vby, rb, tau, dt, share, lower_id):
    """Scalar core of ``orca_halfplane``: (point x, point y, normal x, normal y)."""
    rpx, rpy = pbx - pax, pby - pay
    rvx, rvy = vax - vbx, vay - vby
    dist_sq = rpx * rpx + rpy * rpy
    comb = ra + rb
    comb_sq = comb * comb
    if dist_sq > comb_sq:
        inv_tau = 1.0 / tau
        wx, wy = rvx - inv_tau * rpx, rvy - inv_tau * rpy
        w_len_sq = wx * wx + wy * wy
        dot1 = wx * rpx + wy * rpy
        if dot1 < 0.0 and dot1 * dot1 > comb_sq * w_len_sq:
            # Closest boundary is the cutoff disc.
            w_len = math.sqrt(w_len_sq)
            nx, ny = wx / w_len, wy / w_len
            mag = comb * inv_tau - w_len
            ux, uy = mag * nx, mag * ny
        else:
            leg = math.sqrt(dist_sq - comb_sq)
            if rpx * wy - rpy * wx > 0.0:
                dx = (rpx * leg - rpy * comb) / dist_sq
                dy = (rpx * comb + rpy * leg) / dist_sq
            else:
                dx = -(rpx * leg + rpy * comb) / dist_sq
                dy = -(-rpx * comb + rpy * leg) / dist_sq
            d2 = rvx * dx + rvy * dy
            ux, uy = d2 * dx - rvx, d2 * dy - rvy
            nx, ny = -dy, dx
    else:
        inv_dt = 1.0 / dt
        wx, wy = rvx - inv_dt * rpx, rvy - inv_dt * rpy
        w_len = math.hypot(wx, wy)
        if w_len < LP_EPS:
            log.debug("coincident agents with equal velocity; using fallback normal")
            nx, ny = (1.0, 0.0) if lower_id else (-1.0, 0.0)
            w_len = 0.0
        else:
            nx, ny = wx / w_len, wy / w_len
        mag = comb * inv_dt - w_len
        ux, uy = mag * nx, mag * ny
    # Normal of the permitted side points along u for the cutoff and overlap
    # branches; along the outward leg normal for the leg branch.
    return vax + share * ux, vay + share * uy, nx, ny


def obstacle_halfplane(agent: Agent, obstacle: Obstacle, tau: float, dt: float = 0.1) -> HalfPlane:
    """Full-responsibility constraint against a static convex obstacle.

    The obstacle lies behind its supporting line at the point nearest the
    agent; moving toward that line by less than the current clearance within
    ``tau`` cannot collide. An overlapping agent must leave within one ``dt``.
    """
    p = agent.position
    q = _nearest_point_on_polygon(p, obstacle.vertices)
    dx, dy = p.x - q.x, p.y - q.y
    dist = math.hypot(dx, dy)
    if dist < LP_EPS:
        verts = obstacle.vertices
        cx = sum(v.x for v in verts) / len(verts)
        cy = sum(v.y for v in verts) / len(verts)
        dx, dy = p.x - cx, p.y - cy
        dist_c = math.hypot(dx, dy) or 1.0
        n = Vec2(dx / dist_c, dy / dist_c)
    else:
        n = Vec2(dx / dist, dy / dist)
    clearance = dist - agent.radius
    if clearance > 0.0:
        offset = -clearance / tau
    else:
        offset = -clearance / dt
    return HalfPlane(n * offset, n)


def _nearest_point_on_polygon(p: Vec2, verts: Sequence[Vec2]) -> Vec2:
    if point_polygon_distance(p, verts) == 0.0:
        return p
    best, best_d = verts[0], math.inf
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        ex, ey = b.x - a.x, b.y - a.y
        l2 = ex * ex + ey * ey
        t = 0.0 if l2 == 0.0 else max(0.0, min(1.0, ((p.x - a.x) * ex + (p.y - a.y) * ey) / l2))
        q = Vec2(a.x + t * ex, a.y + t * ey)
        d = math.hypot(p.x - q.x, p.y - q.y)
        if d < best_d:
            best, best_d = q, d
    return best


# ------------------------------------------------------------ linear program


def _lp1(lines, no, radius, opt, direction_opt):
    px, py, dx, dy = lines[no]
    dotp = px * dx + py * dy
    disc = dotp * dotp + radius * radius - (px * px + py * py)
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    t_left, t_right = -dotp - sq, -dotp + sq
    for i in range(no):
        qx, qy, ex, ey = lines[i]
        den = dx * ey - dy * ex
        num = ex * (py - qy) - ey * (px - qx)
        if abs(den) <= LP_EPS:
            if num < 0.0:
                return None
            continue
        t = num / den
        if den >= 0.0:
            if t < t_right:
                t_right = t
        elif t > t_left:
            t_left = t
        if t_left > t_right:
            return None
    ox, oy = opt
    if direction_opt:
        t = t_right if ox * dx + oy * dy > 0.0 else t_left
    else:
        t = dx * (ox - px) + dy * (oy - py)
        if t < t_left:
            t = t_left
        elif t > t_right:
            t = t_right
    return (px + t * dx, py + t * dy)


def _lp2(lines, radius, opt, direction_opt):
    ox, oy = opt
    if direction_opt:
        result = (ox * radius, oy * radius)
    else:
        n2 = ox * ox + oy * oy
        if n2 > radius * radius:
            s = radius / math.sqrt(n2)
            result = (ox * s, oy * s)
        else:
            result = (ox, oy)
    for i, (px, py, dx, dy) in enumerate(lines):
        if dx * (py - result[1]) - dy * (px - result[0]) > 0.0:
            new = _lp1(lines, i, radius, opt, direction_opt)
            if new is None:
                return i, result
            result = new
    return len(lines), result


def _lp3(lines, n_hard, begin, radius, result):
    distance = 0.0
    for i in range(begin, len(lines)):
        px, py, dx, dy = lines[i]
        if dx * (py - result[1]) - dy * (px - result[0]) > distance:
            proj = list(lines[:n_hard])
            for j in range(n_hard, i):
                qx, qy, ex, ey = lines[j]
                det = dx * ey - dy * ex
                if abs(det) <= LP_EPS:
                    if dx * ex + dy * ey > 0.0:
                        continue
                    ptx, pty = 0.5 * (px + qx), 0.5 * (py + qy)
                else:
                    t = (ex * (py - qy) - ey * (px - qx)) / det
                    ptx, pty = px + t * dx, py + t * dy
                nx, ny = ex - dx, ey - dy
                nl = math.hypot(nx, ny)
                proj.append((ptx, pty, nx / nl, ny / nl))
            fail, cand = _lp2(proj, radius, (-dy, dx), True)
            if fail >= len(proj):
                result = cand
            distance = dx * (py - result[1]) - dy * (px - result[0])
    return result


def solve_velocity(
    constraints: Sequence[HalfPlane], v_pref: Vec2, max_speed: float, hard: int = 0
) -> tuple[Vec2, bool]:
    """Velocity in all half-planes and the speed disc closest to ``v_pref``.

    The first ``hard`` constraints (static obstacles) are never relaxed. When
    the intersection is empty the returned velocity minimizes the largest
    violation of the remaining constraints and the flag is False.
    """
    lines = [(h.point.x, h.point.y, h.normal.y, -h.normal.x) for h in constraints]
    return solve_lines(lines, (v_pref.x, v_pref.y), max_speed, hard)


def solve_lines(lines, v_pref, max_speed, hard=0):
    """``solve_velocity`` on raw ``(px, py, dx, dy)`` tuples; permitted side is left of d."""
    fail, result = _lp2(lines, max_speed, v_pref, False)
    if fail < len(lines):
        result = _lp3(lines, hard, fail, max_speed, result)
        return Vec2(*result), False
    return Vec2(*result), True


# ---------------------------------------------------------- agent-group cones


def _expanded_radius(observer: Agent, members: Sequence[Agent]) -> float:
    return observer.radius + max(m.radius for m in members)


def _extreme_index(observer: Vec2, centers: Sequence[Vec2], radius: float) -> tuple[int, int, Vec2, Vec2]:
    """Indices of the counterclockwise-most and clockwise-most tangent among discs.

    Ties within EPS go to the lowest index.
    """
    tangents = [tangent_rays(observer, c, radius) for c in centers]
    li = ri = 0
    for i in range(1, len(tangents)):
        if tangents[li][0].cross(tangents[i][0]) > EPS:
            li = i
        if tangents[i][1].cross(tangents[ri][1]) > EPS:
            ri = i
    best_l, best_r = tangents[li][0], tangents[ri][1]
    li = min(i for i, t in enumerate(tangents) if best_l.cross(t[0]) >= -EPS)
    ri = min(i for i, t in enumerate(tangents) if t[1].cross(best_r) >= -EPS)
    return li, ri, tangents[li][0], tangents[ri][1]


@functools.lru_cache(maxsize=1024)
def _hull(points: tuple[Vec2, ...]) -> ConvexPolygon:
    # Every observer of a group asks for the same hull within a step.
    return convex_hull(points)


def _members(group: Group, agents) -> list[Agent]:
    return [agents[m] for m in sorted(group.members)]


def _check_outside(observer: Agent, members: Sequence[Agent], radius: float):
    hull = _hull(tuple(m.position for m in members))
    if point_polygon_distance(observer.position, hull.vertices) <= radius + EPS:
        raise AlreadyColliding(f"agent {observer.id} overlaps the expanded hull")
    return hull


def extreme_agents(observer: Agent, group: Group, agents: Mapping[int, Agent] | Sequence[Agent]) -> ExtremePair:
    """Members whose expanded discs give the outermost tangents seen from ``observer``."""
    members = _members(group, agents)
    radius = _expanded_radius(observer, members)
    _check_outside(observer, members, radius)
    li, ri, _, _ = _extreme_index(observer.position, [m.position for m in members], radius)
    return ExtremePair(members[li].id, members[ri].id)


def agent_group_vo(
    observer: Agent, group: Group, agents: Mapping[int, Agent] | Sequence[Agent], tau: float
) -> VelocityCone:
    """Truncated velocity obstacle of the group's expanded hull, translated by the group velocity.

    The hull is taken over member centers and expanded by the observer radius
    plus the largest member radius.
    """
    members = _members(group, agents)
    radius = _expanded_radius(observer, members)
    hull = _check_outside(observer, members, radius)
    _, v_group = group_stats(group, agents)
    _, _, left, right = _extreme_index(observer.position, hull.vertices, radius)
    p = observer.position
    rel = tuple(Vec2(c.x - p.x, c.y - p.y) for c in hull.vertices)
    return VelocityCone(v_group, left, right, rel, radius, tau)


# -------------------------------------------------- nearest point outside union


def _cone_primitives(cone: VelocityCone, margin: float) -> list[tuple]:
    """Lines and circles (velocity space) containing the boundary of the inflated cone."""
    ax, ay = cone.apex
    radius = cone.radius + margin
    _, _, left, right = _extreme_index(Vec2(0.0, 0.0), cone.hull, radius)
    prims: list[tuple] = [("L", ax, ay, left.x, left.y), ("L", ax, ay, right.x, right.y)]
    if math.isinf(cone.tau):
        return prims
    inv = 1.0 / cone.tau
    r = radius * inv
    hull = cone.hull
    for c in hull:
        prims.append(("C", ax + c.x * inv, ay + c.y * inv, r))
    n = len(hull)
    if n >= 2:
        edges = [(hull[i], hull[(i + 1) % n]) for i in range(n if n > 2 else 1)]
        for a, b in edges:
            ex, ey = b.x - a.x, b.y - a.y
            el = math.hypot(ex, ey)
            ex, ey = ex / el, ey / el
            sides = (1.0,) if n > 2 else (1.0, -1.0)
            for s in sides:
                nx, ny = s * ey, -s * ex
                prims.append(("L", ax + a.x * inv + nx * r, ay + a.y * inv + ny * r, ex, ey))
    return prims


def _project(prim, vx, vy):
    if prim[0] == "L":
        _, px, py, dx, dy = prim
        t = (vx - px) * dx + (vy - py) * dy
        return [(px + t * dx, py + t * dy)]
    _, cx, cy, r = prim
    wx, wy = vx - cx, vy - cy
    wl = math.hypot(wx, wy)
    if wl == 0.0:
        return [(cx + r, cy)]
    return [(cx + wx / wl * r, cy + wy / wl * r)]


def _intersect(p, q):
    if p[0] == "C" and q[0] == "L":
        p, q = q, p
    if p[0] == "L" and q[0] == "L":
        _, px, py, dx, dy = p
        _, qx, qy, ex, ey = q
        den = dx * ey - dy * ex
        if abs(den) < 1e-12:
            return []
        t = ((qx - px) * ey - (qy - py) * ex) / den
        return [(px + t * dx, py + t * dy)]
    if p[0] == "L":
        _, px, py, dx, dy = p
        _, cx, cy, r = q
        t = (cx - px) * dx + (cy - py) * dy
        fx, fy = px + t * dx, py + t * dy
        h2 = r * r - ((fx - cx) ** 2 + (fy - cy) ** 2)
        if h2 < 0.0:
            return []
        h = math.sqrt(h2)
        return [(fx + h * dx, fy + h * dy), (fx - h * dx, fy - h * dy)]
    _, ax, ay, ra = p
    _, bx, by, rb = q
    dx, dy = bx - ax, by - ay
    d = math.hypot(dx, dy)
    if d == 0.0 or d > ra + rb or d < abs(ra - rb):
        return []
    a = (ra * ra - rb * rb + d * d) / (2.0 * d)
    h = math.sqrt(max(0.0, ra * ra - a * a))
    mx, my = ax + a * dx / d, ay + a * dy / d
    return [(mx + h * dy / d, my - h * dx / d), (mx - h * dy / d, my + h * dx / d)]


def _prim_distance(prim, vx, vy) -> float:
    if prim[0] == "L":
        _, px, py, dx, dy = prim
        return abs((vx - px) * dy - (vy - py) * dx)
    _, cx, cy, r = prim
    return abs(math.hypot(vx - cx, vy - cy) - r)


def closest_outside_union(cones: Sequence[VelocityCone], v_pref: Vec2, max_speed: float) -> Optional[Vec2]:
    """Nearest velocity to ``v_pref`` inside the speed disc and outside every cone.

    Returns None when the speed disc is fully covered.
    """
    start = clamp_norm(v_pref, max_speed)
    if all(c.clearly_outside(start.x, start.y) or c.depth(start) < -EPS for c in cones):
        return start

    limit = max_speed + EPS
    half = 0.5 * VO_MARGIN
    order_hint = list(cones)

    def feasible(x: float, y: float) -> bool:
        if x * x + y * y > limit * limit:
            return False
        v = Vec2(x, y)
        for k, c in enumerate(order_hint):
            verdict = c.classify(x, y)
            if verdict < 0:
                continue
            if verdict > 0 or c.depth(v) >= -half:
                # Blocking cones tend to block neighbouring candidates too.
                if k:
                    order_hint.insert(0, order_hint.pop(k))
                return False
        return True

    prims: list[tuple] = [("C", 0.0, 0.0, max_speed)]
    for c in cones:
        prims.extend(_cone_primitives(c, VO_MARGIN))
    vx, vy = v_pref

    # Best-first over candidates: a projection onto primitive i lies at
    # dists[i] and an intersection of i and j at no less than max(dists), so
    # once primitives are added in distance order, any queued candidate no
    # farther than the next primitive is final and can be tested.
    dists = [_prim_distance(p, vx, vy) for p in prims]
    order = sorted(range(len(prims)), key=dists.__getitem__)
    queue: list[tuple[float, float, float]] = []
    best: Optional[tuple[float, float]] = None
    seen: list[int] = []
    for i in order + [-1]:
        bound = dists[i] if i >= 0 else math.inf
        while queue and queue[0][0] <= bound:
            d, x, y = heapq.heappop(queue)
            if feasible(x, y):
                best = (x, y)
                break
        if best is not None or i < 0:
            break
        prim = prims[i]
        for x, y in _project(prim, vx, vy):
            heapq.heappush(queue, (math.hypot(x - vx, y - vy), x, y))
        for j in seen:
            for x, y in _intersect(prims[j], prim):
                heapq.heappush(queue, (math.hypot(x - vx, y - vy), x, y))
        seen.append(i)
    return None if best is None else Vec2(*best)

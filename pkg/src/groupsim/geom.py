"""Small 2D geometry kernel shared by every simulation phase.

Vectors are immutable ``Vec2`` tuples so they hash, sort lexicographically
and unpack for free. All orientation and containment tests use the single
tolerance ``EPS``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

EPS = 1e-9


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":  # type: ignore[override]
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":  # type: ignore[override]
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "Vec2":
        return Vec2(self.x / s, self.y / s)

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm_sq(self) -> float:
        return self.x * self.x + self.y * self.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def normalized(self) -> "Vec2":
        n = math.hypot(self.x, self.y)
        if n == 0.0:
            return ZERO
        return Vec2(self.x / n, self.y / n)

    def perp(self) -> "Vec2":
        """Counterclockwise perpendicular."""
        return Vec2(-self.y, self.x)

    def rotated(self, angle: float) -> "Vec2":
        c, s = math.cos(angle), math.sin(angle)
        return Vec2(c * self.x - s * self.y, s * self.x + c * self.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


ZERO = Vec2(0.0, 0.0)


def cross(a: Vec2, b: Vec2) -> float:
    return a.x * b.y - a.y * b.x


def dot(a: Vec2, b: Vec2) -> float:
    return a.x * b.x + a.y * b.y


def clamp_norm(v: Vec2, limit: float) -> Vec2:
    n2 = v.x * v.x + v.y * v.y
    if n2 > limit * limit:
        s = limit / math.sqrt(n2)
        return Vec2(v.x * s, v.y * s)
    return v


def _turn(o: Vec2, a: Vec2, b: Vec2) -> float:
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)


@dataclass(frozen=True)
class ConvexPolygon:
    """Counterclockwise convex polygon; 1 or 2 vertices encode a point or segment."""

    vertices: tuple[Vec2, ...]

    def __len__(self) -> int:
        return len(self.vertices)

    def edges(self) -> list[tuple[Vec2, Vec2]]:
        vs = self.vertices
        if len(vs) == 1:
            return []
        if len(vs) == 2:
            return [(vs[0], vs[1])]
        return [(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))]

    def is_valid(self) -> bool:
        vs = self.vertices
        if not vs or not all(v.is_finite() for v in vs):
            return False
        n = len(vs)
        if n == 2:
            return vs[0] != vs[1]
        if n > 2:
            for i in range(n):
                if vs[i] == vs[(i + 1) % n]:
                    return False
                if _turn(vs[i], vs[(i + 1) % n], vs[(i + 2) % n]) <= EPS:
                    return False
        return True

    def contains(self, p: Vec2, tol: float = EPS) -> bool:
        """Closed containment for a proper polygon, distance test otherwise."""
        if len(self.vertices) < 3:
            return point_polygon_distance(p, self.vertices) <= tol
        vs = self.vertices
        n = len(vs)
        for i in range(n):
            a, b = vs[i], vs[(i + 1) % n]
            if _turn(a, b, p) < -tol * math.hypot(b.x - a.x, b.y - a.y):
                return False
        return True


def convex_hull(points: Iterable[Vec2]) -> ConvexPolygon:
    """Monotone-chain hull, counterclockwise, collinear boundary points dropped."""
    pts = sorted(set(Vec2(float(p[0]), float(p[1])) for p in points))
    if not pts:
        raise ValueError("convex_hull needs at least one point")
    if len(pts) <= 2:
        return ConvexPolygon(tuple(pts))

    lower: list[Vec2] = []
    for p in pts:
        while len(lower) >= 2 and _turn(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: list[Vec2] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _turn(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and hull[0] == hull[1]:
        hull = hull[:1]
    return ConvexPolygon(tuple(hull))


class AlreadyColliding(Exception):
    """Observer is inside (or on) the region it is supposed to avoid."""


def tangent_rays(observer: Vec2, center: Vec2, radius: float) -> tuple[Vec2, Vec2]:
    """Unit directions from ``observer`` tangent to the disc, (left, right).

    ``left`` is the counterclockwise tangent. Raises ``AlreadyColliding`` when
    the observer is inside or on the disc.
    """
    dx, dy = center.x - observer.x, center.y - observer.y
    dist = math.hypot(dx, dy)
    if dist <= radius + EPS:
        raise AlreadyColliding(f"observer within {radius} of {tuple(center)}")
    ux, uy = dx / dist, dy / dist
    s = radius / dist
    c = math.sqrt(max(0.0, 1.0 - s * s))
    left = Vec2(c * ux - s * uy, s * ux + c * uy)
    right = Vec2(c * ux + s * uy, -s * ux + c * uy)
    return left, right


def point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> float:
    abx, aby = b.x - a.x, b.y - a.y
    l2 = abx * abx + aby * aby
    if l2 == 0.0:
        return math.hypot(p.x - a.x, p.y - a.y)
    t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / l2
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.hypot(p.x - a.x - t * abx, p.y - a.y - t * aby)


def point_polygon_distance(p: Vec2, vertices: Sequence[Vec2]) -> float:
    """Distance from ``p`` to a convex polygon (0 inside)."""
    n = len(vertices)
    if n == 1:
        return math.hypot(p.x - vertices[0].x, p.y - vertices[0].y)
    if n == 2:
        return point_segment_distance(p, vertices[0], vertices[1])
    inside = True
    best = math.inf
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        if _turn(a, b, p) < 0.0:
            inside = False
        d = point_segment_distance(p, a, b)
        if d < best:
            best = d
    return 0.0 if inside else best


def _point_path_distance(p: Vec2, o: Vec2, d: Vec2, tmax: float) -> float:
    dd = d.x * d.x + d.y * d.y
    if dd == 0.0:
        return math.hypot(p.x - o.x, p.y - o.y)
    t = ((p.x - o.x) * d.x + (p.y - o.y) * d.y) / dd
    if t < 0.0:
        t = 0.0
    elif t > tmax:
        t = tmax
    return math.hypot(p.x - o.x - t * d.x, p.y - o.y - t * d.y)


def path_segment_distance(o: Vec2, d: Vec2, tmax: float, a: Vec2, b: Vec2) -> float:
    """Distance between {o + t d : 0 <= t <= tmax} and segment ab.

    ``tmax`` may be ``math.inf`` (a ray).
    """
    ex, ey = b.x - a.x, b.y - a.y
    den = d.x * ey - d.y * ex
    if den != 0.0:
        wx, wy = a.x - o.x, a.y - o.y
        t = (wx * ey - wy * ex) / den
        s = (wx * d.y - wy * d.x) / den
        if 0.0 <= t <= tmax and 0.0 <= s <= 1.0:
            return 0.0
    best = point_segment_distance(o, a, b)
    if math.isfinite(tmax):
        end = Vec2(o.x + tmax * d.x, o.y + tmax * d.y)
        best = min(best, point_segment_distance(end, a, b))
    best = min(best, _point_path_distance(a, o, d, tmax), _point_path_distance(b, o, d, tmax))
    return best


def path_polygon_distance(o: Vec2, d: Vec2, tmax: float, vertices: Sequence[Vec2]) -> float:
    """Distance from a swept point path to a convex polygon (0 if the path starts inside)."""
    n = len(vertices)
    if n == 1:
        return _point_path_distance(vertices[0], o, d, tmax)
    if n == 2:
        return path_segment_distance(o, d, tmax, vertices[0], vertices[1])
    if point_polygon_distance(o, vertices) == 0.0:
        return 0.0
    best = math.inf
    for i in range(n):
        dist = path_segment_distance(o, d, tmax, vertices[i], vertices[(i + 1) % n])
        if dist < best:
            best = dist
            if best == 0.0:
                break
    return best


def _seg_dist2(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    ex, ey = bx - ax, by - ay
    l2 = ex * ex + ey * ey
    wx, wy = px - ax, py - ay
    if l2 > 0.0:
        t = (wx * ex + wy * ey) / l2
        if t > 0.0:
            if t >= 1.0:
                wx, wy = px - bx, py - by
            else:
                wx, wy = wx - t * ex, wy - t * ey
    return wx * wx + wy * wy


def _origin_path_hull_distance(dx: float, dy: float, tmax: float, xs, ys) -> float:
    """``path_polygon_distance(ZERO, (dx, dy), tmax, hull)`` on flat coordinates.

    Same case analysis, without allocating vectors: 0 on a crossing,
    otherwise the least of the endpoint-to-edge and vertex-to-path distances.
    """
    n = len(xs)
    dd = dx * dx + dy * dy
    finite = tmax != math.inf
    if finite:
        qx, qy = dx * tmax, dy * tmax
    best = math.inf
    edges = n if n > 2 else n - 1
    for i in range(n):
        vx, vy = xs[i], ys[i]
        # vertex to path
        if dd == 0.0:
            d2 = vx * vx + vy * vy
        else:
            t = (vx * dx + vy * dy) / dd
            if t < 0.0:
                t = 0.0
            elif t > tmax:
                t = tmax
            ex, ey = vx - t * dx, vy - t * dy
            d2 = ex * ex + ey * ey
        if d2 < best:
            best = d2
        if i >= edges:
            continue
        j = i + 1 if i + 1 < n else 0
        wx, wy = xs[j], ys[j]
        ex, ey = wx - vx, wy - vy
        den = dx * ey - dy * ex
        if den != 0.0:
            t = (vx * ey - vy * ex) / den
            s = (vx * dy - vy * dx) / den
            if 0.0 <= t <= tmax and 0.0 <= s <= 1.0:
                return 0.0
        d2 = _seg_dist2(0.0, 0.0, vx, vy, wx, wy)
        if d2 < best:
            best = d2
        if finite:
            d2 = _seg_dist2(qx, qy, vx, vy, wx, wy)
            if d2 < best:
                best = d2
    return math.sqrt(best)


@dataclass(frozen=True)
class Cutoff:
    """Rounded convex polygon closing a truncated cone (a disc for one center)."""

    centers: tuple[Vec2, ...]
    radius: float


@dataclass(frozen=True)
class VelocityCone:
    """Velocity obstacle of a radius-expanded convex set.

    ``hull`` holds the obstacle's hull vertices relative to the observer and
    ``radius`` their common expansion; ``apex`` is the obstacle velocity. A
    relative velocity ``u = v - apex`` is inside iff the path ``u * t`` for
    ``t`` in ``[0, tau]`` comes within ``radius`` of the hull.
    """

    apex: Vec2
    left_dir: Vec2
    right_dir: Vec2
    hull: tuple[Vec2, ...]
    radius: float
    tau: float = math.inf

    @property
    def cutoff(self) -> Cutoff | None:
        if math.isinf(self.tau):
            return None
        inv = 1.0 / self.tau
        return Cutoff(tuple(c * inv for c in self.hull), self.radius * inv)

    @functools.cached_property
    def _filters(self) -> tuple:
        # Built on first use; many cones are only ever asked one question.
        outer = _wedge(self.hull, self.radius + PREFILTER_SLACK)
        inner = _wedge(self.hull, self.radius - PREFILTER_SLACK) if self.radius > PREFILTER_SLACK else None
        far = max(math.hypot(c.x, c.y) for c in self.hull) + self.radius
        return outer, inner, far

    @functools.cached_property
    def _flat(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return tuple(c.x for c in self.hull), tuple(c.y for c in self.hull)

    def depth(self, v: Vec2) -> float:
        """Signed penetration in position units; >= 0 means inside."""
        xs, ys = self._flat
        return self.radius - _origin_path_hull_distance(v.x - self.apex.x, v.y - self.apex.y, self.tau, xs, ys)

    def classify(self, x: float, y: float) -> int:
        """Cheap conservative membership: -1 when depth < -PREFILTER_SLACK,
        +1 when depth > PREFILTER_SLACK, 0 when only ``depth`` can tell.

        Uses tangent wedges of the hull expanded by radius -/+ the slack and
        the length the relative velocity covers within ``tau``.
        """
        ux, uy = x - self.apex.x, y - self.apex.y
        f, g, far = self._filters
        if f is None:
            return 0
        lx, ly, rx, ry, clearance = f
        if rx * uy - ry * ux < 0.0 or ux * ly - uy * lx < 0.0:
            return -1
        travel2 = (ux * ux + uy * uy) * self.tau * self.tau
        if travel2 < clearance * clearance:
            return -1
        if g is None:
            return 0
        lx, ly, rx, ry, _ = g
        if rx * uy - ry * ux > 0.0 and ux * ly - uy * lx > 0.0 and travel2 > far * far:
            return 1
        return 0

    def clearly_outside(self, x: float, y: float) -> bool:
        return self.classify(x, y) < 0


PREFILTER_SLACK = 1e-6


def _wedge(hull: Sequence[Vec2], radius: float) -> Optional[tuple[float, float, float, float, float]]:
    """(left tangent, right tangent, reach) of the hull expanded by ``radius`` seen from the origin.

    ``reach`` is the clearance between the origin and the expanded hull. None
    when the origin is within the expansion (no wedge exists).
    """
    clearance = point_polygon_distance(ZERO, hull) - radius
    if clearance <= EPS:
        return None
    left = right = None
    for c in hull:
        lt, rt = tangent_rays(ZERO, c, radius)
        if left is None or left.cross(lt) > 0.0:
            left = lt
        if right is None or right.cross(rt) < 0.0:
            right = rt
    return left.x, left.y, right.x, right.y, clearance


def cone_contains(cone: VelocityCone, v: Vec2) -> bool:
    """Closed membership: boundary velocities count as inside."""
    return cone.depth(v) >= -EPS

"""SVG 1.1 rendering of trajectory files: one color per group."""

from __future__ import annotations

from collections import Counter, defaultdict
from typing import Optional, Sequence

from .model import DEFAULT_RADIUS, Obstacle

ISOLATED_COLOR = "#808080"
OBSTACLE_FILL = "#c8c8c8"
MARGIN = 1.0  # m around the drawn extent
SCALE = 20.0  # px per m

Row = tuple[int, int, float, float, float, float, int, int]


def group_color(gid: int) -> str:
    """Deterministic color for a group id; isolated agents (gid < 0) are gray.

    Hues step by the golden angle so consecutive ids stay far apart.
    """
    if gid < 0:
        return ISOLATED_COLOR
    hue = (gid * 137.50776) % 360.0
    return f"hsl({hue:.3f},70%,45%)"


def modal_groups(rows: Sequence[Row]) -> dict[int, int]:
    """Most frequent non-negative group id per agent (ties to the lower id), else -1."""
    counts: dict[int, Counter] = defaultdict(Counter)
    for _, aid, _, _, _, _, gid, _ in rows:
        counts[aid]
        if gid >= 0:
            counts[aid][gid] += 1
    out = {}
    for aid, c in counts.items():
        if c:
            best = max(c.values())
            out[aid] = min(g for g, n in c.items() if n == best)
        else:
            out[aid] = -1
    return out


def _f(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Canvas:
    def __init__(self, xs: Sequence[float], ys: Sequence[float]):
        self.x0 = min(xs) - MARGIN
        self.y1 = max(ys) + MARGIN
        self.w = (max(xs) - min(xs) + 2 * MARGIN) * SCALE
        self.h = (max(ys) - min(ys) + 2 * MARGIN) * SCALE

    def pt(self, x: float, y: float) -> str:
        return f"{_f((x - self.x0) * SCALE)},{_f((self.y1 - y) * SCALE)}"


def render_svg(
    rows: Sequence[Row],
    obstacles: Sequence[Obstacle] = (),
    frame: Optional[int] = None,
    radii: Optional[dict[int, float]] = None,
) -> str:
    """Trajectory polylines, or agent discs at step ``frame`` when given."""
    radii = radii or {}
    shown = rows if frame is None else [r for r in rows if r[0] == frame]
    if frame is not None and not shown:
        raise ValueError(f"no rows at step {frame}")
    xs = [r[2] for r in shown] + [v.x for o in obstacles for v in o.vertices]
    ys = [r[3] for r in shown] + [v.y for o in obstacles for v in o.vertices]
    if not xs:
        xs, ys = [0.0], [0.0]
    c = _Canvas(xs, ys)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(c.w)}" height="{_f(c.h)}" '
        f'viewBox="0 0 {_f(c.w)} {_f(c.h)}">',
        f'<rect width="{_f(c.w)}" height="{_f(c.h)}" fill="white"/>',
    ]
    for o in obstacles:
        pts = " ".join(c.pt(v.x, v.y) for v in o.vertices)
        out.append(f'<polygon points="{pts}" fill="{OBSTACLE_FILL}" stroke="none"/>')

    if frame is None:
        color_of = modal_groups(rows)
        paths: dict[int, list[str]] = defaultdict(list)
        for _, aid, x, y, *_ in rows:
            paths[aid].append(c.pt(x, y))
        for aid in sorted(paths):
            out.append(
                f'<polyline id="a{aid}" points="{" ".join(paths[aid])}" fill="none" '
                f'stroke="{group_color(color_of[aid])}" stroke-width="1.5"/>'
            )
    else:
        for _, aid, x, y, _, _, gid, lead in shown:
            r = radii.get(aid, DEFAULT_RADIUS) * SCALE
            stroke = ' stroke="black" stroke-width="1.5"' if lead else ""
            out.append(
                f'<circle id="a{aid}" cx="{c.pt(x, y).split(",")[0]}" cy="{c.pt(x, y).split(",")[1]}" '
                f'r="{_f(r)}" fill="{group_color(gid)}"{stroke}/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"

"""Scenario JSON, trajectory CSV and metrics JSON formats."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .geom import ConvexPolygon, Vec2
from .model import (
    DEFAULT_MAX_SPEED,
    DEFAULT_PREF_SPEED,
    DEFAULT_RADIUS,
    Agent,
    Obstacle,
    Scenario,
    SimParams,
    validate_scenario,
)

TRAJECTORY_HEADER = ["step", "agent_id", "x", "y", "vx", "vy", "group_id", "leader_flag"]


class ScenarioError(ValueError):
    """Scenario document failed to parse or validate; message lists every problem."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsModel(_Strict):
    eps_p: float = 1.5
    eps_v: float = 0.5
    tau: float = 4.0
    dt: float = 0.1
    neighbor_radius: float = 10.0
    seed: int = 0
    max_steps: int = 5000
    goal_tolerance: float = 0.5
    mode: Literal["dynamic_grouping", "orca_only"] = "dynamic_grouping"
    max_neighbors: int = 10
    recluster: Literal["every_step", "event"] = "every_step"
    deform_factor: float = 3.0
    collision_counting: Literal["episode", "per_step"] = "episode"


class AgentModel(_Strict):
    id: int
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    radius: float = DEFAULT_RADIUS
    goal: tuple[float, float]
    pref_speed: float = DEFAULT_PREF_SPEED
    max_speed: float = DEFAULT_MAX_SPEED


class ScenarioModel(_Strict):
    name: str
    params: ParamsModel = Field(default_factory=ParamsModel)
    agents: list[AgentModel] = Field(default_factory=list)
    obstacles: list[list[tuple[float, float]]] = Field(default_factory=list)


def _loc(loc: Sequence) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += ("." if out else "") + str(part)
    return out or "<root>"


def _polygon(points: Sequence[tuple[float, float]]) -> ConvexPolygon:
    verts = [Vec2(float(x), float(y)) for x, y in points]
    area = sum(verts[i].cross(verts[(i + 1) % len(verts)]) for i in range(len(verts)))
    if area < 0:
        verts.reverse()
    return ConvexPolygon(tuple(verts))


def scenario_from_dict(doc: dict, validate: bool = True) -> Scenario:
    try:
        model = ScenarioModel.model_validate(doc)
    except ValidationError as exc:
        lines = [f"{_loc(e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ScenarioError("\n".join(lines)) from None
    params = SimParams(**model.params.model_dump())
    agents = [
        Agent(
            id=a.id,
            position=Vec2(*a.position),
            velocity=Vec2(*a.velocity),
            radius=a.radius,
            goal=Vec2(*a.goal),
            pref_speed=a.pref_speed,
            max_speed=a.max_speed,
        )
        for a in model.agents
    ]
    obstacles = [Obstacle(_polygon(o)) for o in model.obstacles]
    scenario = Scenario(model.name, agents, obstacles, params)
    if validate:
        problems = validate_scenario(scenario)
        if problems:
            raise ScenarioError("\n".join(problems))
    return scenario


def scenario_to_dict(s: Scenario) -> dict:
    p = s.params
    return {
        "name": s.name,
        "params": {k: getattr(p, k) for k in ParamsModel.model_fields},
        "agents": [
            {
                "id": a.id,
                "position": [a.position.x, a.position.y],
                "velocity": [a.velocity.x, a.velocity.y],
                "radius": a.radius,
                "goal": [a.goal.x, a.goal.y],
                "pref_speed": a.pref_speed,
                "max_speed": a.max_speed,
            }
            for a in s.agents
        ],
        "obstacles": [[[v.x, v.y] for v in o.vertices] for o in s.obstacles],
    }


def load_scenario(path: str | Path, validate: bool = True) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return scenario_from_dict(doc, validate)


def dump_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1) + "\n"


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(s), encoding="utf-8")


# ---------------------------------------------------------------- trajectory


def _g(x: float) -> str:
    s = f"{x:.9g}"
    return "0" if s == "-0" else s


def format_trajectory(rows: Iterable[tuple]) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRAJECTORY_HEADER) + "\n")
    for step, aid, x, y, vx, vy, gid, lead in rows:
        buf.write(f"{step},{aid},{_g(x)},{_g(y)},{_g(vx)},{_g(vy)},{gid},{lead}\n")
    return buf.getvalue()


def write_trajectory(rows: Iterable[tuple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trajectory(rows))


class TrajectoryError(ValueError):
    def __init__(self, row: int, msg: str):
        super().__init__(f"row {row}: {msg}")
        self.row = row


def read_trajectory(path: str | Path) -> list[tuple[int, int, float, float, float, float, int, int]]:
    """Parse and check a trajectory CSV; rows are 1-based in errors (header is row 1)."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise TrajectoryError(1, f"expected header {','.join(TRAJECTORY_HEADER)}")
        prev: Optional[tuple[int, int]] = None
        for n, rec in enumerate(reader, start=2):
            if len(rec) != len(TRAJECTORY_HEADER):
                raise TrajectoryError(n, f"expected {len(TRAJECTORY_HEADER)} fields, got {len(rec)}")
            try:
                row = (
                    int(rec[0]), int(rec[1]), float(rec[2]), float(rec[3]),
                    float(rec[4]), float(rec[5]), int(rec[6]), int(rec[7]),
                )
            except ValueError as exc:
                raise TrajectoryError(n, str(exc)) from None
            key = (row[0], row[1])
            if prev is not None:
                if key <= prev:
                    raise TrajectoryError(n, "rows not sorted by (step, agent_id)")
                if row[0] > prev[0] + 1:
                    raise TrajectoryError(n, f"step {row[0]} skips step {prev[0] + 1}")
            elif row[0] != 0:
                raise TrajectoryError(n, "steps must start at 0")
            prev = key
            rows.append(row)
    return rows


def metrics_document(summary: dict, group_counts: Sequence[int], **extra) -> dict:
    doc = dict(summary)
    doc["group_counts"] = list(group_counts)
    doc.update(extra)
    return doc


def dump_metrics(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"

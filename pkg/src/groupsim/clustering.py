"""Group formation: connected components of the position/velocity similarity relation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import Agent, Group


@dataclass(frozen=True)
class SimilarityParams:
    eps_p: float
    eps_v: float


def similar(a: Agent, b: Agent, p: SimilarityParams) -> bool:
    """Strictly closer than eps_p in position and eps_v in velocity."""
    return (
        math.hypot(b.position.x - a.position.x, b.position.y - a.position.y) < p.eps_p
        and math.hypot(b.velocity.x - a.velocity.x, b.velocity.y - a.velocity.y) < p.eps_v
    )


def _candidate_pairs(agents: Sequence[Agent], eps_p: float) -> Iterable[tuple[int, int]]:
    """Index pairs closer than one grid cell apart; a superset of position-similar pairs."""
    if eps_p <= 0.0:
        return
    cells: dict[tuple[int, int], list[int]] = {}
    keys = []
    for i, a in enumerate(agents):
        key = (math.floor(a.position.x / eps_p), math.floor(a.position.y / eps_p))
        keys.append(key)
        cells.setdefault(key, []).append(i)
    for i, (cx, cy) in enumerate(keys):
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for j in cells.get((cx + dx, cy + dy), ()):
                    if j > i:
                        yield i, j


def form_groups(agents: Sequence[Agent], p: SimilarityParams) -> tuple[list[Group], list[int]]:
    """Partition ``agents`` into groups (components of size >= 2) and isolated ids.

    Agents are scanned in id order and attached to every existing group that
    holds a similar member; an agent linking several groups merges them, so
    the result is exactly the transitive closure of ``similar``. Groups are
    returned ordered and identified by their lowest member id.
    """
    order = sorted(range(len(agents)), key=lambda i: agents[i].id)
    rank = {i: r for r, i in enumerate(order)}
    neighbors: dict[int, list[int]] = {i: [] for i in order}
    for i, j in _candidate_pairs(agents, p.eps_p):
        if similar(agents[i], agents[j], p):
            neighbors[i].append(j)
            neighbors[j].append(i)

    label: dict[int, int] = {}
    sets: dict[int, list[int]] = {}
    for i in order:
        linked = sorted({label[j] for j in neighbors[i] if j in label})
        if not linked:
            label[i] = i
            sets[i] = [i]
            continue
        keep = min(linked, key=lambda g: rank[g])
        for other in linked:
            if other == keep:
                continue
            for m in sets.pop(other):
                label[m] = keep
                sets[keep].append(m)
        label[i] = keep
        sets[keep].append(i)

    groups: list[Group] = []
    isolated: list[int] = []
    for members in sets.values():
        ids = sorted(agents[m].id for m in members)
        if len(ids) == 1:
            isolated.append(ids[0])
        else:
            groups.append(Group(id=ids[0], members=ids))
    groups.sort(key=lambda g: g.id)
    isolated.sort()
    return groups, isolated


def max_member_distance(group: Group, agents: Mapping[int, Agent] | Sequence[Agent]) -> float:
    best = 0.0
    ms = group.members
    for i in range(len(ms)):
        pa = agents[ms[i]].position
        for j in range(i + 1, len(ms)):
            pb = agents[ms[j]].position
            d = math.hypot(pa.x - pb.x, pa.y - pb.y)
            if d > best:
                best = d
    return best


def needs_recluster(
    groups: Sequence[Group],
    agents: Mapping[int, Agent] | Sequence[Agent],
    leader_feasible: Mapping[int, bool],
    eps_p: float,
    deform_factor: float = 3.0,
) -> bool:
    """True when any leader solve was infeasible or any group spans more than deform_factor * eps_p."""
    if any(not ok for ok in leader_feasible.values()):
        return True
    limit = deform_factor * eps_p
    return any(max_member_distance(g, agents) > limit for g in groups)

"""Uniform spatial hash for radius and k-nearest queries over agent positions."""

from __future__ import annotations

import heapq
import math
from typing import Iterable, Iterator


class SpatialHash:
    def __init__(self, cell_size: float):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.cell_size = cell_size
        self.cells: dict[tuple[int, int], list[tuple[int, float, float]]] = {}

    def _key(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / self.cell_size), math.floor(y / self.cell_size))

    def build(self, items: Iterable[tuple[int, float, float]]) -> "SpatialHash":
        self.cells.clear()
        for item in items:
            self.cells.setdefault(self._key(item[1], item[2]), []).append(item)
        return self

    def _block(self, x: float, y: float, radius: float) -> Iterator[tuple[int, float, float]]:
        cs = self.cell_size
        x0, x1 = math.floor((x - radius) / cs), math.floor((x + radius) / cs)
        y0, y1 = math.floor((y - radius) / cs), math.floor((y + radius) / cs)
        cells = self.cells
        for cx in range(x0, x1 + 1):
            for cy in range(y0, y1 + 1):
                bucket = cells.get((cx, cy))
                if bucket:
                    yield from bucket

    def within(self, x: float, y: float, radius: float) -> list[tuple[float, int]]:
        """(squared distance, id) for every item within ``radius``, sorted."""
        r2 = radius * radius
        out = []
        for i, px, py in self._block(x, y, radius):
            d2 = (px - x) ** 2 + (py - y) ** 2
            if d2 <= r2:
                out.append((d2, i))
        out.sort()
        return out

    def nearest(self, x: float, y: float, radius: float, k: int, exclude: int = -1) -> list[int]:
        """Ids of up to ``k`` nearest items within ``radius``, ties by id.

        Scans square rings of cells outward and stops once the k-th distance
        is closer than anything an unvisited ring could hold.
        """
        cs = self.cell_size
        cells = self.cells
        r2 = radius * radius
        kx, ky = self._key(x, y)
        max_ring = int(math.ceil(radius / cs)) + 1
        cand: list[tuple[float, int]] = []
        for ring in range(max_ring + 1):
            if ring == 0:
                keys = [(kx, ky)]
            else:
                keys = [(kx + dx, ky - ring) for dx in range(-ring, ring + 1)]
                keys += [(kx + dx, ky + ring) for dx in range(-ring, ring + 1)]
                keys += [(kx - ring, ky + dy) for dy in range(-ring + 1, ring)]
                keys += [(kx + ring, ky + dy) for dy in range(-ring + 1, ring)]
            for key in keys:
                bucket = cells.get(key)
                if not bucket:
                    continue
                for i, px, py in bucket:
                    if i == exclude:
                        continue
                    d2 = (px - x) ** 2 + (py - y) ** 2
                    if d2 <= r2:
                        cand.append((d2, i))
            # Anything in ring + 1 is at least ring * cs away.
            reach = ring * cs
            if len(cand) >= k:
                cand = heapq.nsmallest(k, cand)
                if cand[-1][0] < reach * reach:
                    break
        return [i for _, i in sorted(cand)[:k]]

    def pairs_within(self, radius: float) -> Iterator[tuple[int, int, float]]:
        """Unordered id pairs (lo, hi, squared distance) closer than ``radius``; needs cell_size >= radius."""
        r2 = radius * radius
        cells = self.cells
        for (cx, cy), bucket in cells.items():
            for dx, dy in ((0, 0), (1, -1), (1, 0), (1, 1), (0, 1)):
                other = cells.get((cx + dx, cy + dy))
                if not other:
                    continue
                same = dx == 0 and dy == 0
                for ia, (i, xi, yi) in enumerate(bucket):
                    start = ia + 1 if same else 0
                    for j, xj, yj in other[start:]:
                        d2 = (xi - xj) ** 2 + (yi - yj) ** 2
                        if d2 < r2:
                            yield (i, j, d2) if i < j else (j, i, d2)

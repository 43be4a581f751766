"""Structured scenes: 1-3 colored shapes chained by spatial relations.

Objects sit on a 4x4 cell grid. Consecutive objects are related by
"left-of" (next object one cell to the right) or "above" (next object one
cell below), so a scene is a monotone staircase path of distinct cells.
Cell coordinates are not part of the source description, only the
relations are; the rendered image carries the full layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import List, Tuple

import numpy as np

from ..errors import ContractViolation

GRID = 4
SHAPES = ("circle", "square", "triangle")
COLORS = ("red", "green", "blue")
RELATIONS = ("left-of", "above")
MAX_OBJECTS = 3


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: str
    row: int
    col: int


@dataclass(frozen=True)
class SceneSpec:
    objects: Tuple[SceneObject, ...]
    relations: Tuple[str, ...]

    def __post_init__(self):
        if not (1 <= len(self.objects) <= MAX_OBJECTS):
            raise ContractViolation("scene needs 1..3 objects")
        if len(self.relations) != len(self.objects) - 1:
            raise ContractViolation("need one relation per consecutive pair")
        cells = {(o.row, o.col) for o in self.objects}
        if len(cells) != len(self.objects):
            raise ContractViolation("object cells must be distinct")
        for prev, nxt, rel in zip(self.objects, self.objects[1:],
                                  self.relations):
            if rel == "left-of":
                ok = nxt.row == prev.row and nxt.col == prev.col + 1
            elif rel == "above":
                ok = nxt.col == prev.col and nxt.row == prev.row + 1
            else:
                raise ContractViolation(f"unknown relation {rel!r}")
            if not ok:
                raise ContractViolation(
                    f"relation {rel!r} inconsistent with cells "
                    f"({prev.row},{prev.col}) -> ({nxt.row},{nxt.col})")


def _paths(n_objects: int) -> List[Tuple[Tuple[int, int], Tuple[str, ...]]]:
    """All (start cell, relation sequence) pairs that stay on the grid."""
    out = []
    for r, c in product(range(GRID), range(GRID)):
        for rels in product(RELATIONS, repeat=n_objects - 1):
            rr, cc = r, c
            ok = True
            for rel in rels:
                if rel == "left-of":
                    cc += 1
                else:
                    rr += 1
                if rr >= GRID or cc >= GRID:
                    ok = False
                    break
            if ok:
                out.append(((r, c), rels))
    return out


def _cells_along(start: Tuple[int, int], rels: Tuple[str, ...]
                 ) -> List[Tuple[int, int]]:
    cells = [start]
    r, c = start
    for rel in rels:
        if rel == "left-of":
            c += 1
        else:
            r += 1
        cells.append((r, c))
    return cells


_ALL_SCENES: List[SceneSpec] = []


def enumerate_scenes() -> List[SceneSpec]:
    """Every valid scene, in a fixed deterministic order (cached)."""
    if _ALL_SCENES:
        return _ALL_SCENES
    attrs = list(product(SHAPES, COLORS))
    for n in range(1, MAX_OBJECTS + 1):
        for start, rels in _paths(n):
            cells = _cells_along(start, rels)
            for combo in product(attrs, repeat=n):
                objs = tuple(
                    SceneObject(shape=s, color=col, row=r, col=c)
                    for (s, col), (r, c) in zip(combo, cells))
                _ALL_SCENES.append(SceneSpec(objs, rels))
    return _ALL_SCENES


def sample_scene(rng: np.random.Generator) -> SceneSpec:
    """Uniform draw over all valid scenes; deterministic per stream state."""
    scenes = enumerate_scenes()
    return scenes[int(rng.integers(len(scenes)))]

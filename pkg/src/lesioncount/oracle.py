"""Slow, obviously-correct reference implementations for tests and benchmarks.

Everything here recomputes results from first principles - breadth-first
flood fills over explicit (x, y, z) coordinates, one full pass per distinct
probability level - and shares no traversal or union-find code with the
fast filtration module.  These functions anchor the fast path: component
counts per level, and the persistence diagram obtained by tracking flood
regions across a descending level sweep.

Intended for small volumes only; nothing here is fast, by design.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .filtration import PersistenceDiagram
from .volume import Volume

__all__ = [
    "brute_force_components",
    "LevelSweepTrace",
    "level_sweep_trace",
    "brute_force_diagram",
]

_STEPS = ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1))


def _flood_components(mask: np.ndarray) -> list[frozenset[int]]:
    """Connected components of a boolean 3D mask under 6-connectivity.

    Components are frozensets of linear indices (x fastest), sorted by
    their minimum member, which doubles as the canonical component id.
    """
    nx, ny, nz = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if not mask[x, y, z] or seen[x, y, z]:
                    continue
                queue = deque([(x, y, z)])
                seen[x, y, z] = True
                members = []
                while queue:
                    cx, cy, cz = queue.popleft()
                    members.append(cx + nx * (cy + ny * cz))
                    for dx, dy, dz in _STEPS:
                        px, py, pz = cx + dx, cy + dy, cz + dz
                        if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz:
                            if mask[px, py, pz] and not seen[px, py, pz]:
                                seen[px, py, pz] = True
                                queue.append((px, py, pz))
                comps.append(frozenset(members))
    return sorted(comps, key=min)


def brute_force_components(vol: Volume, tau: float) -> list[frozenset[int]]:
    """Components of the superlevel set {p >= tau} by BFS flood fill."""
    return _flood_components(vol.data >= tau)


@dataclass(frozen=True)
class LevelSweepTrace:
    """Flood-fill components of {p >= level} for every distinct level.

    Levels are the distinct foreground values in descending order;
    ``components_at_level[k]`` are the components at ``levels[k]``.  As the
    level decreases the component sets are nested: every component at one
    level is contained in exactly one component at the next.
    """

    levels: np.ndarray
    components_at_level: list[list[frozenset[int]]]


def level_sweep_trace(vol: Volume, mask_eps: float = 0.0) -> LevelSweepTrace:
    """Flood the volume once per distinct foreground level, top down."""
    values = vol.data[vol.data > mask_eps]
    levels = np.unique(values)[::-1]
    comps = [_flood_components(vol.data >= lv) for lv in levels]
    return LevelSweepTrace(levels=levels, components_at_level=comps)


def brute_force_diagram(vol: Volume, mask_eps: float = 0.0) -> PersistenceDiagram:
    """Persistence diagram from the level sweep.

    A component is born at the highest level at which its region appears
    and is identified by its birth voxel.  When several alive components
    first share one flood region, all but the oldest (highest birth, ties
    to the smaller birth index) die at the current level.  Zero-persistence
    plateau pairs are below the level resolution of this sweep, so the
    result contains positive-persistence dots only.
    """
    trace = level_sweep_trace(vol, mask_eps=mask_eps)
    flat = vol.linear_values()

    alive: dict[int, float] = {}  # birth linear index -> birth value
    dot_births: list[float] = []
    dot_deaths: list[float] = []
    dot_lins: list[int] = []

    for level, comps in zip(trace.levels, trace.components_at_level):
        for comp in comps:
            members = [lin for lin in alive if lin in comp]
            if not members:
                # Brand-new region: all voxels sit at the current level;
                # the birth voxel is the first in the filtration order.
                birth_lin = min(comp, key=lambda lin: (-flat[lin], lin))
                alive[birth_lin] = float(flat[birth_lin])
            elif len(members) >= 2:
                survivor = min(members, key=lambda lin: (-alive[lin], lin))
                for lin in sorted(members):
                    if lin == survivor:
                        continue
                    dot_births.append(alive[lin])
                    dot_deaths.append(float(level))
                    dot_lins.append(lin)
                    del alive[lin]

    ess = sorted(alive.items(), key=lambda kv: (-kv[1], kv[0]))
    return PersistenceDiagram(
        births=np.array(dot_births, dtype=np.float64),
        deaths=np.array(dot_deaths, dtype=np.float64),
        birth_indices=np.array(dot_lins, dtype=np.int64),
        essential_births=np.array([v for _, v in ess], dtype=np.float64),
        essential_indices=np.array([k for k, _ in ess], dtype=np.int64),
    )

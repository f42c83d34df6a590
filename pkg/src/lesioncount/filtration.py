"""Superlevel-set 0-dimensional persistence of probability volumes.

Lesions are maxima of the probability field.  Sweeping a threshold down
from 1 grows superlevel sets ``{p >= t}``; connected components are born at
local maxima and die when they merge into an older (higher-born) component.
The persistence of a component, birth minus death in probability units, is
the noise-versus-lesion criterion: components are merged away when their
persistence is <= theta, and whatever survives the sweep is the lesion
count.

Conventions fixed here and used by everything downstream:

* 6-connectivity (face neighbors) on the voxel grid;
* background masking: voxels with p <= mask_eps are excluded from the graph
  entirely, so disjoint foreground islands never merge through background;
* total filtration order: descending probability, ties broken by ascending
  linear index (which also resolves the elder rule on plateaus: of two
  equal-birth components the one with the smaller birth index is older);
* the merge test is inclusive (persistence <= theta merges), so plateau
  components of zero persistence never inflate the count, even at theta 0.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _sweep
from .volume import Volume

__all__ = [
    "ForegroundGraph",
    "MergeForest",
    "PersistenceDiagram",
    "PersistenceCountResult",
    "build_filtration_order",
    "persistence_count",
    "compute_persistence",
    "count_from_diagram",
    "diagram_to_csv",
    "write_diagram_csv",
]


def _check_mask_eps(mask_eps: float) -> float:
    if not 0.0 <= mask_eps < 1.0:
        raise ValueError(f"mask_eps must be in [0, 1), got {mask_eps}")
    return float(mask_eps)


def _foreground(vol: Volume, mask_eps: float):
    """Foreground vertex arrays and the filtration permutation.

    Returns (fg_lin, fg_val, order, pos_of_lin): linear indices and values
    of voxels with p > mask_eps, the permutation sorting them by
    (descending value, ascending index), and the inverse map from linear
    index to compact position (-1 for background).
    """
    flat = vol.linear_values()
    fg_lin = np.flatnonzero(flat > mask_eps).astype(np.int64)
    fg_val = flat[fg_lin]
    order = np.lexsort((fg_lin, -fg_val)).astype(np.int64)
    pos_of_lin = np.full(flat.size, -1, dtype=np.int64)
    pos_of_lin[fg_lin] = np.arange(fg_lin.size, dtype=np.int64)
    return fg_lin, fg_val, order, pos_of_lin


@dataclass(frozen=True)
class ForegroundGraph:
    """Foreground voxels in filtration order, with implicit 6-adjacency.

    ``vertex_ids`` are linear voxel indices sorted by the total filtration
    order; ``vertex_values`` are the matching probabilities.  Adjacency is
    one +-1 step along a single axis, restricted to the foreground.
    """

    dims: tuple[int, int, int]
    mask_eps: float
    vertex_ids: np.ndarray
    vertex_values: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.vertex_ids.size

    def neighbors(self, lin: int) -> list[int]:
        """Foreground 6-neighbors of a linear index (any order)."""
        nx, ny, nz = self.dims
        x = lin % nx
        y = (lin // nx) % ny
        z = lin // (nx * ny)
        out = []
        fg = set(int(i) for i in self.vertex_ids)
        for dx, dy, dz in ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)):
            X, Y, Z = x + dx, y + dy, z + dz
            if 0 <= X < nx and 0 <= Y < ny and 0 <= Z < nz:
                q = X + nx * (Y + ny * Z)
                if q in fg:
                    out.append(q)
        return out


@dataclass(frozen=True)
class MergeForest:
    """Final union-find state of a sweep.

    ``vertex_ids``/``vertex_values`` are the foreground arrays in compact
    order; ``parent`` maps each compact position to its root position and
    is fully path-compressed.  Roots are always birth vertices, so a root's
    birth value and birth voxel are simply its own value and linear index.
    """

    vertex_ids: np.ndarray
    vertex_values: np.ndarray
    parent: np.ndarray

    def root_of(self, pos: int) -> int:
        return int(self.parent[pos])

    def root_birth(self, pos: int) -> float:
        """Birth probability of the component containing compact position pos."""
        return float(self.vertex_values[self.parent[pos]])

    def root_vertex(self, pos: int) -> int:
        """Linear index of the birth voxel of pos's component."""
        return int(self.vertex_ids[self.parent[pos]])

    @property
    def n_roots(self) -> int:
        return int(np.count_nonzero(self.parent == np.arange(self.parent.size)))


@dataclass(frozen=True)
class PersistenceDiagram:
    """Birth/death pairs plus essential components, in probability units.

    Dots satisfy birth >= death (persistence = birth - death >= 0).
    Essentials are components of the foreground support that never merge;
    there is exactly one per support component.  Zero-persistence dots are
    plateau artifacts: they are retained and can be identified via
    :attr:`zero_persistence`, and they never contribute to any count.
    """

    births: np.ndarray
    deaths: np.ndarray
    birth_indices: np.ndarray
    essential_births: np.ndarray
    essential_indices: np.ndarray

    @property
    def n_dots(self) -> int:
        return self.births.size

    @property
    def n_essentials(self) -> int:
        return self.essential_births.size

    @property
    def persistences(self) -> np.ndarray:
        return self.births - self.deaths

    @property
    def zero_persistence(self) -> np.ndarray:
        """Boolean mask flagging dots with birth == death."""
        return self.births == self.deaths

    def count_at(self, theta: float) -> int:
        """Essentials plus dots with persistence strictly above theta."""
        return self.n_essentials + int(np.count_nonzero(self.persistences > theta))

    def count_alive_at(self, tau: float) -> int:
        """Components alive at level tau: birth inclusive, death exclusive."""
        ess = int(np.count_nonzero(self.essential_births >= tau))
        dots = int(np.count_nonzero((self.births >= tau) & (self.deaths < tau)))
        return ess + dots


@dataclass(frozen=True)
class PersistenceCountResult:
    """Outcome of a thresholded merge sweep.

    ``labels`` assigns every foreground voxel the linear index of its final
    root's birth voxel plus one (background is 0), so the count equals the
    number of distinct nonzero labels and every label identifies a birth
    voxel whose probability bounds the component from above.
    """

    count: int
    labels: np.ndarray
    diagram: PersistenceDiagram
    forest: MergeForest = field(repr=False)


def build_filtration_order(vol: Volume, mask_eps: float = 0.0) -> ForegroundGraph:
    """Order foreground voxels by descending probability, ties by index."""
    mask_eps = _check_mask_eps(mask_eps)
    fg_lin, fg_val, order, _ = _foreground(vol, mask_eps)
    return ForegroundGraph(
        dims=vol.dims,
        mask_eps=mask_eps,
        vertex_ids=fg_lin[order],
        vertex_values=fg_val[order],
    )


_EMPTY_F = np.empty(0, dtype=np.float64)
_EMPTY_I = np.empty(0, dtype=np.int64)


def _empty_diagram() -> PersistenceDiagram:
    return PersistenceDiagram(
        births=_EMPTY_F,
        deaths=_EMPTY_F,
        birth_indices=_EMPTY_I,
        essential_births=_EMPTY_F,
        essential_indices=_EMPTY_I,
    )


def _run_sweep(vol: Volume, theta: float, mask_eps: float):
    fg_lin, fg_val, order, pos_of_lin = _foreground(vol, mask_eps)
    nx, ny, nz = vol.dims
    if fg_lin.size == 0:
        forest = MergeForest(vertex_ids=fg_lin, vertex_values=fg_val, parent=_EMPTY_I)
        return fg_lin, fg_val, forest, _empty_diagram()
    (
        parent,
        _n_roots,
        dot_b,
        dot_d,
        dot_l,
        n_dots,
        ess_pos,
        n_ess,
    ) = _sweep.filtration_sweep(fg_lin, fg_val, order, pos_of_lin, nx, ny, nz, float(theta))
    diagram = PersistenceDiagram(
        births=dot_b[:n_dots].copy(),
        deaths=dot_d[:n_dots].copy(),
        birth_indices=dot_l[:n_dots].copy(),
        essential_births=fg_val[ess_pos[:n_ess]].copy(),
        essential_indices=fg_lin[ess_pos[:n_ess]].copy(),
    )
    forest = MergeForest(vertex_ids=fg_lin, vertex_values=fg_val, parent=parent)
    return fg_lin, fg_val, forest, diagram


def persistence_count(vol: Volume, theta: float, mask_eps: float = 0.0) -> PersistenceCountResult:
    """Count lesions by persistence-thresholded component merging.

    Vertices are processed in filtration order; every edge that joins two
    existing components records a diagram dot (younger birth, level), and
    the merge is performed when the younger side's persistence is
    <= theta.  The count is the number of surviving components over the
    foreground.
    """
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    mask_eps = _check_mask_eps(mask_eps)
    fg_lin, _fg_val, forest, diagram = _run_sweep(vol, theta, mask_eps)
    labels_flat = np.zeros(vol.n_voxels, dtype=np.int64)
    if fg_lin.size:
        labels_flat[fg_lin] = fg_lin[forest.parent] + 1
    labels = labels_flat.reshape(vol.dims, order="F")
    return PersistenceCountResult(
        count=forest.n_roots,
        labels=labels,
        diagram=diagram,
        forest=forest,
    )


def compute_persistence(vol: Volume, mask_eps: float = 0.0) -> PersistenceDiagram:
    """The canonical superlevel 0-dim persistence diagram of the foreground.

    Equivalent to a sweep in which every merge is performed (elder rule):
    each non-essential component contributes exactly one dot.
    """
    mask_eps = _check_mask_eps(mask_eps)
    _, _, _, diagram = _run_sweep(vol, np.inf, mask_eps)
    return diagram


def count_from_diagram(pd: PersistenceDiagram, theta: float) -> int:
    """Closed-form count from a canonical diagram: essentials + dots above theta."""
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    return pd.count_at(theta)


def _diagram_rows(pd: PersistenceDiagram):
    ess_order = np.lexsort((pd.essential_indices, -pd.essential_births))
    for i in ess_order:
        yield (pd.essential_births[i], None, None, pd.essential_indices[i], 1)
    pers = pd.persistences
    dot_order = np.lexsort((pd.birth_indices, -pers))
    for i in dot_order:
        yield (pd.births[i], pd.deaths[i], pers[i], pd.birth_indices[i], 0)


def diagram_to_csv(pd: PersistenceDiagram) -> str:
    """Render a diagram as CSV.

    Header is ``birth,death,persistence,birth_index,essential``; essentials
    come first (birth descending) with death and persistence as the literal
    string ``inf``, then dots by descending persistence with ties broken by
    ascending birth index.  Probabilities are printed with 6 decimals.
    """
    out = io.StringIO()
    out.write("birth,death,persistence,birth_index,essential\n")
    for birth, death, pers, idx, ess in _diagram_rows(pd):
        if ess:
            out.write(f"{birth:.6f},inf,inf,{int(idx)},1\n")
        else:
            out.write(f"{birth:.6f},{death:.6f},{pers:.6f},{int(idx)},0\n")
    return out.getvalue()


def write_diagram_csv(pd: PersistenceDiagram, path) -> None:
    Path(path).write_text(diagram_to_csv(pd))

"""Direct-threshold baseline counting and threshold-grid sweeps.

The clinical baseline binarizes the probability map at a threshold tau and
counts 6-connected components; small components are deliberately *not*
removed.  The comparison is inclusive (p >= tau), so tau = 1.0 is
meaningful for saturated probabilities.

Persistence sweeps reuse one canonical diagram across the whole theta grid;
this is equivalent to re-running the merge per theta but costs O(|diagram|)
per grid point.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .filtration import compute_persistence, count_from_diagram
from .volume import Volume

__all__ = [
    "SweepResult",
    "make_grid",
    "DEFAULT_TAU_GRID",
    "DEFAULT_THETA_GRID",
    "direct_threshold_count",
    "sweep_direct",
    "sweep_persistence",
    "sweep_to_csv",
    "write_sweep_csv",
]

_SIX_CONNECTED = ndimage.generate_binary_structure(3, 1)


def make_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid from start to stop.

    ``stop`` is included when ``stop - start`` is an integer multiple of
    ``step`` within 1e-9.  Values are snapped to 12 decimals so that
    decimal steps yield exact decimal thresholds (0.1 + 2 * 0.1 compares
    equal to a stored probability of 0.3).
    """
    if step <= 0:
        raise ValueError(f"grid step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"grid stop {stop} below start {start}")
    k = int(round((stop - start) / step))
    if abs(start + k * step - stop) > 1e-9:
        k = int(np.floor((stop - start) / step + 1e-12))
    values = np.round(start + step * np.arange(k + 1), 12)
    return values


DEFAULT_TAU_GRID = make_grid(0.1, 1.0, 0.1)
DEFAULT_THETA_GRID = make_grid(0.0, 0.04, 0.004)


@dataclass(frozen=True)
class SweepResult:
    """Counts along a strictly increasing threshold grid."""

    method: str  # "persistence" or "direct_threshold"
    thresholds: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if self.thresholds.size != self.counts.size:
            raise ValueError("thresholds and counts must have equal length")
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly increasing")


def _check_grid(grid, name: str) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError(f"{name} grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError(f"{name} grid must be strictly increasing")
    return grid


def direct_threshold_count(vol: Volume, tau: float) -> int:
    """Number of 6-connected components of the superlevel set {p >= tau}."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    _, n = ndimage.label(vol.data >= tau, structure=_SIX_CONNECTED)
    return int(n)


def sweep_direct(vol: Volume, taus=None) -> SweepResult:
    """Baseline counts over a tau grid (default 0.1 to 1.0, step 0.1)."""
    taus = DEFAULT_TAU_GRID if taus is None else _check_grid(taus, "tau")
    counts = np.array([direct_threshold_count(vol, t) for t in taus], dtype=np.int64)
    return SweepResult(method="direct_threshold", thresholds=taus, counts=counts)


def sweep_persistence(vol: Volume, thetas=None, mask_eps: float = 0.0) -> SweepResult:
    """Persistence counts over a theta grid (default 0 to 0.04, step 0.004).

    The diagram is computed once and queried per grid point.
    """
    thetas = DEFAULT_THETA_GRID if thetas is None else _check_grid(thetas, "theta")
    if thetas[0] < 0:
        raise ValueError("theta grid values must be >= 0")
    pd = compute_persistence(vol, mask_eps=mask_eps)
    counts = np.array([count_from_diagram(pd, th) for th in thetas], dtype=np.int64)
    return SweepResult(method="persistence", thresholds=thetas, counts=counts)


def sweep_to_csv(result: SweepResult) -> str:
    """CSV with header ``method,threshold,count``; thresholds at 6 decimals."""
    out = io.StringIO()
    out.write("method,threshold,count\n")
    for th, c in zip(result.thresholds, result.counts):
        out.write(f"{result.method},{th:.6f},{int(c)}\n")
    return out.getvalue()


def write_sweep_csv(result: SweepResult, path) -> None:
    Path(path).write_text(sweep_to_csv(result))

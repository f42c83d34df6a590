"""Selection of the merge threshold from longitudinal count data.

Given counts y[i][j][t] for subject i, threshold-grid index j and timepoint
t, the threshold is chosen either against ground-truth counts (supervised:
minimize the sum of squared count errors) or, without labels, by preferring
thresholds under which each subject's count trajectory is closest to a
straight line in time (unsupervised: minimize the summed least-squares
residual of one linear fit per subject and threshold).

Evaluation is k-fold cross-validation over subjects: the threshold is
selected on the training fold and scored on the held-out subjects by mean
absolute count error against ground truth - in both modes, so the two
selection strategies are comparable on one scale.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import betainc

from .counting import direct_threshold_count
from .filtration import compute_persistence, count_from_diagram
from .volume import load_volume

__all__ = [
    "TimepointRecord",
    "SubjectRecord",
    "LongitudinalManifest",
    "CountTable",
    "CalibrationReport",
    "build_count_table",
    "supervised_select",
    "linear_fit",
    "unsupervised_select",
    "cross_validate",
    "paired_ttest",
]


@dataclass(frozen=True)
class TimepointRecord:
    t_index: int
    volume_path: str
    gt_count: int | None = None


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    timepoints: tuple[TimepointRecord, ...]

    def __post_init__(self):
        if not self.timepoints:
            raise ValueError(f"subject {self.subject_id!r} has no timepoints")
        t = [tp.t_index for tp in self.timepoints]
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"subject {self.subject_id!r}: t_index not strictly increasing")


@dataclass(frozen=True)
class LongitudinalManifest:
    """Subjects x timepoints, each naming a volume file and optional truth.

    Volume paths are resolved relative to ``base_dir`` (normally the
    directory containing the manifest JSON).
    """

    subjects: tuple[SubjectRecord, ...]
    base_dir: Path | None = None

    def __post_init__(self):
        if not self.subjects:
            raise ValueError("manifest has no subjects")
        ids = [s.subject_id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate subject ids in manifest")

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    def resolve(self, volume_path: str) -> Path:
        p = Path(volume_path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p

    @classmethod
    def from_json(cls, path) -> "LongitudinalManifest":
        path = Path(path)
        doc = json.loads(path.read_text())
        subjects = []
        for s in doc["subjects"]:
            tps = tuple(
                TimepointRecord(
                    t_index=int(tp["t_index"]),
                    volume_path=str(tp["volume_path"]),
                    gt_count=None if tp.get("gt_count") is None else int(tp["gt_count"]),
                )
                for tp in s["timepoints"]
            )
            subjects.append(SubjectRecord(subject_id=str(s["subject_id"]), timepoints=tps))
        return cls(subjects=tuple(subjects), base_dir=path.parent)

    def to_json_dict(self) -> dict:
        return {
            "subjects": [
                {
                    "subject_id": s.subject_id,
                    "timepoints": [
                        {
                            "t_index": tp.t_index,
                            "volume_path": tp.volume_path,
                            "gt_count": tp.gt_count,
                        }
                        for tp in s.timepoints
                    ],
                }
                for s in self.subjects
            ]
        }


@dataclass(frozen=True)
class CountTable:
    """Counts indexed by (subject, threshold-grid index, timepoint).

    ``counts[i]`` has shape (len(theta_grid), T_i); subjects may have
    different numbers of timepoints.  ``gt[i]`` holds ground-truth counts
    per timepoint, or None when unavailable.
    """

    method: str
    theta_grid: np.ndarray
    subject_ids: tuple[str, ...]
    counts: tuple[np.ndarray, ...]
    gt: tuple[np.ndarray | None, ...]

    def __post_init__(self):
        for i, c in enumerate(self.counts):
            if c.shape[0] != self.theta_grid.size:
                raise ValueError(f"subject {i}: count rows do not match grid size")
            if self.gt[i] is not None and self.gt[i].size != c.shape[1]:
                raise ValueError(f"subject {i}: gt length does not match timepoints")

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def has_full_gt(self) -> bool:
        return all(g is not None for g in self.gt)

    def subset(self, indices) -> "CountTable":
        indices = [int(i) for i in indices]
        return CountTable(
            method=self.method,
            theta_grid=self.theta_grid,
            subject_ids=tuple(self.subject_ids[i] for i in indices),
            counts=tuple(self.counts[i] for i in indices),
            gt=tuple(self.gt[i] for i in indices),
        )


@dataclass(frozen=True)
class CalibrationReport:
    """Selected threshold plus the objective curve and any CV scores.

    ``theta_star`` attains the minimum of ``objective_by_theta`` (smallest
    grid value on ties).  Fold fields are None outside cross-validation.
    ``case_errors`` holds per-(subject, timepoint) absolute test errors in
    (fold, subject, timepoint) order and is used for paired testing.
    """

    mode: str  # "supervised" or "unsupervised"
    method: str
    theta_grid: np.ndarray
    theta_star: float
    objective_by_theta: np.ndarray
    fold_maes: tuple[float, ...] | None = None
    mean_mae: float | None = None
    fold_thetas: tuple[float, ...] | None = None
    case_errors: tuple[float, ...] | None = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "method": self.method,
            "theta_star": float(self.theta_star),
            "objective_by_theta": [
                {"theta": float(th), "objective": float(ob)}
                for th, ob in zip(self.theta_grid, self.objective_by_theta)
            ],
            "fold_maes": None if self.fold_maes is None else [float(m) for m in self.fold_maes],
            "mean_mae": None if self.mean_mae is None else float(self.mean_mae),
        }


def _count_column(path: Path, method: str, theta_grid: np.ndarray, mask_eps: float) -> np.ndarray:
    try:
        vol = load_volume(path)
    except Exception as exc:
        raise RuntimeError(f"failed to load volume {path}: {exc}") from exc
    if method == "persistence":
        pd = compute_persistence(vol, mask_eps=mask_eps)
        return np.array([count_from_diagram(pd, th) for th in theta_grid], dtype=np.int64)
    if method == "direct_threshold":
        return np.array([direct_threshold_count(vol, th) for th in theta_grid], dtype=np.int64)
    raise ValueError(f"unknown method {method!r}")


def build_count_table(
    manifest: LongitudinalManifest,
    theta_grid,
    method: str = "persistence",
    mask_eps: float = 0.0,
    jobs: int = 1,
) -> CountTable:
    """Count every manifest volume over the threshold grid.

    For the persistence method one diagram per volume is computed and
    reused across the grid.  Volumes may be processed concurrently
    (``jobs``); results are assembled in manifest order regardless.
    """
    theta_grid = np.asarray(theta_grid, dtype=np.float64)
    if theta_grid.size == 0 or np.any(np.diff(theta_grid) <= 0):
        raise ValueError("theta grid must be nonempty and strictly increasing")
    tasks = [
        (i, t, manifest.resolve(tp.volume_path))
        for i, subj in enumerate(manifest.subjects)
        for t, tp in enumerate(subj.timepoints)
    ]
    results: dict[tuple[int, int], np.ndarray] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cols = pool.map(
                lambda it: _count_column(it[2], method, theta_grid, mask_eps), tasks
            )
            for (i, t, _), col in zip(tasks, cols):
                results[(i, t)] = col
    else:
        for i, t, path in tasks:
            results[(i, t)] = _count_column(path, method, theta_grid, mask_eps)

    counts = []
    gts = []
    for i, subj in enumerate(manifest.subjects):
        cols = [results[(i, t)] for t in range(len(subj.timepoints))]
        counts.append(np.stack(cols, axis=1))
        gt_vals = [tp.gt_count for tp in subj.timepoints]
        gts.append(None if any(g is None for g in gt_vals) else np.array(gt_vals, dtype=np.int64))
    return CountTable(
        method=method,
        theta_grid=theta_grid,
        subject_ids=tuple(s.subject_id for s in manifest.subjects),
        counts=tuple(counts),
        gt=tuple(gts),
    )


def supervised_select(table: CountTable, gt=None) -> CalibrationReport:
    """Pick the grid threshold minimizing the summed squared count error.

    ``gt`` defaults to the table's ground truth and must be present for
    every (subject, timepoint).  Ties go to the smallest threshold.
    """
    gt = list(table.gt) if gt is None else [np.asarray(g) for g in gt]
    if len(gt) != table.n_subjects or any(g is None for g in gt):
        raise ValueError("supervised selection requires ground truth for every timepoint")
    objective = np.zeros(table.theta_grid.size, dtype=np.float64)
    for y, g in zip(table.counts, gt):
        resid = y - np.asarray(g, dtype=np.float64)[None, :]
        objective += np.sum(resid * resid, axis=1)
    j = int(np.argmin(objective))
    return CalibrationReport(
        mode="supervised",
        method=table.method,
        theta_grid=table.theta_grid,
        theta_star=float(table.theta_grid[j]),
        objective_by_theta=objective,
    )


def linear_fit(series) -> tuple[float, float, float]:
    """Ordinary least squares of counts against t = 1..T.

    Returns (slope, intercept, sum of squared residuals), from the closed
    form slope = cov(t, y) / var(t).
    """
    y = np.asarray(series, dtype=np.float64)
    T = y.size
    if T < 2:
        raise ValueError("linear fit needs at least 2 timepoints")
    t = np.arange(1, T + 1, dtype=np.float64)
    tc = t - t.mean()
    a = float(tc @ (y - y.mean()) / (tc @ tc))
    b = float(y.mean() - a * t.mean())
    resid = y - (a * t + b)
    return a, b, float(resid @ resid)


def unsupervised_select(table: CountTable) -> CalibrationReport:
    """Pick the grid threshold whose count trajectories are most linear.

    One line is fitted per (subject, threshold); the objective per
    threshold is the residual sum over subjects.  Ties go to the smallest
    threshold.
    """
    objective = np.zeros(table.theta_grid.size, dtype=np.float64)
    for y in table.counts:
        for j in range(table.theta_grid.size):
            objective[j] += linear_fit(y[j, :])[2]
    j = int(np.argmin(objective))
    return CalibrationReport(
        mode="unsupervised",
        method=table.method,
        theta_grid=table.theta_grid,
        theta_star=float(table.theta_grid[j]),
        objective_by_theta=objective,
    )


def _select(table: CountTable, mode: str) -> CalibrationReport:
    if mode == "supervised":
        return supervised_select(table)
    if mode == "unsupervised":
        return unsupervised_select(table)
    raise ValueError(f"unknown mode {mode!r}")


def cross_validate(
    manifest: LongitudinalManifest,
    theta_grid,
    mode: str,
    folds: int = 5,
    seed: int = 0,
    method: str = "persistence",
    mask_eps: float = 0.0,
    jobs: int = 1,
    table: CountTable | None = None,
) -> CalibrationReport:
    """k-fold cross-validation of threshold selection over subjects.

    Subjects are shuffled deterministically by ``seed`` and split into
    ``folds`` near-equal folds.  Per fold, the threshold is selected on the
    training subjects (by ``mode``) and scored on the held-out subjects by
    mean absolute count error against ground truth - ground truth is
    required in both modes.  The report's ``theta_star`` comes from
    selection on the full table; fold-level selections are also returned.
    """
    if table is None:
        table = build_count_table(manifest, theta_grid, method=method, mask_eps=mask_eps, jobs=jobs)
    n = table.n_subjects
    if folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    if n < folds:
        raise ValueError(f"{n} subjects is fewer than {folds} folds")
    if not table.has_full_gt:
        raise ValueError("cross-validation requires ground truth for every timepoint")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fold_members = np.array_split(perm, folds)

    fold_maes = []
    fold_thetas = []
    case_errors = []
    for members in fold_members:
        test_idx = sorted(int(i) for i in members)
        train_idx = [i for i in range(n) if i not in set(test_idx)]
        sel = _select(table.subset(train_idx), mode)
        j = int(np.argmin(np.abs(table.theta_grid - sel.theta_star)))
        errs = []
        for i in test_idx:
            errs.extend(np.abs(table.counts[i][j, :] - table.gt[i]).astype(np.float64))
        fold_maes.append(float(np.mean(errs)))
        fold_thetas.append(sel.theta_star)
        case_errors.extend(errs)

    full = _select(table, mode)
    return CalibrationReport(
        mode=mode,
        method=table.method,
        theta_grid=table.theta_grid,
        theta_star=full.theta_star,
        objective_by_theta=full.objective_by_theta,
        fold_maes=tuple(fold_maes),
        mean_mae=float(np.mean(fold_maes)),
        fold_thetas=tuple(fold_thetas),
        case_errors=tuple(float(e) for e in case_errors),
    )


def paired_ttest(errors_a, errors_b) -> tuple[float, float]:
    """Two-tailed paired t-test on per-case error differences.

    Cases must be aligned (same subject/timepoint order).  Returns
    (t statistic, p value); p comes from the t-distribution survival
    function evaluated through the regularized incomplete beta function.
    Degenerate cases: all-zero differences give (0, 1); nonzero constant
    differences give (signed inf, 0).
    """
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.size != b.size:
        raise ValueError("paired t-test needs equally many cases on both sides")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least 2 cases")
    d = a - b
    md = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if md == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, md), 0.0
    t = md / (sd / math.sqrt(n))
    dof = n - 1
    p = float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))
    return t, p

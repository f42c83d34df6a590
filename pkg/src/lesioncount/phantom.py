"""Synthetic probability-map phantoms with known lesion counts.

Desk-scale stand-ins for real longitudinal lesion data.  A phantom is a
3D probability field assembled from:

* an optional background *bed*: a smooth ellipsoidal field with a constant
  central plateau, connecting all content into one foreground component
  the way diffuse low probabilities do in real segmentations;
* spherical lesion bumps with peaks in [0.7, 1.0] and smooth compact
  falloff, placed singly or as confluent pairs whose merge saddle sits at
  a controlled probability level;
* 1-voxel noise speckles with absolute peak capped by ``noise_amplitude``.

Lesion bumps have the radial profile ``peak * (1 - (r/R)^2)^3``, so a pair
of equal bumps at integer center offset D along an axis merges exactly at
the on-axis dip ``max(p1 * B, p2 * A)`` with ``A = (1 - 1/R^2)^3`` and
``B = (1 - (D-1)^2/R^2)^3``.  Pair geometry is chosen from that closed
form: "mid" pairs merge between roughly 0.45 and 0.72, "high" pairs above
0.70, which is what makes direct thresholding miscount confluent lesions
at every fixed threshold while their persistence stays large.

Everything is deterministic in the seed; subjects and timepoints derive
independent streams, so adding a subject never reshuffles another.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import LongitudinalManifest, SubjectRecord, TimepointRecord
from .volume import Volume, save_raw_json

__all__ = [
    "PhantomSpec",
    "LongitudinalSpec",
    "generate_phantom",
    "generate_longitudinal",
]

_BED_PLATEAU_R = 0.66  # normalized radius where the bed plateau ends
_MAX_PLACEMENT_TRIES = 4000


@dataclass(frozen=True)
class PhantomSpec:
    """Parameters for a single phantom volume.

    With the defaults (no bed, no speckles) the volume contains only
    isolated lesion bumps; ``n_lesions = 0`` and ``noise_speckles = 0``
    yield an all-zero volume.
    """

    dims: tuple[int, int, int] = (24, 24, 24)
    n_lesions: int = 0
    lesion_radius_range: tuple[float, float] = (2.0, 3.0)
    noise_speckles: int = 0
    noise_amplitude: float = 0.3
    seed: int = 0
    background_level: float = 0.0
    peak_range: tuple[float, float] = (0.72, 0.98)
    voxel_size_mm: tuple[float, float, float] = (2.0, 2.0, 2.0)


@dataclass(frozen=True)
class LongitudinalSpec:
    """Parameters for a longitudinal dataset of phantom subjects.

    Each subject has a fixed lesion layout revealed gradually by a
    non-decreasing schedule; speckle noise is re-drawn per timepoint.
    ``lesion_schedule`` applies to every subject when given; otherwise a
    random non-decreasing schedule within ``schedule_start``/``max_lesions``
    is drawn per subject.
    """

    n_subjects: int
    timepoints: int
    lesion_schedule: tuple[int, ...] | None = None
    seed: int = 0
    dims: tuple[int, int, int] = (48, 88, 48)
    noise_speckles: int = 40
    noise_amplitude: float = 0.3
    background_level: float = 0.26
    schedule_start: tuple[int, int] = (5, 9)
    schedule_increment: tuple[int, int] = (0, 3)
    max_lesions: int = 18
    voxel_size_mm: tuple[float, float, float] = (2.0, 2.0, 2.0)


def _norm_radius(dims) -> np.ndarray:
    """Normalized ellipsoidal radius: 0 at the grid center, 1 at face centers."""
    axes = []
    for n in dims:
        c = (n - 1) / 2.0
        a = max(c, 1.0)
        axes.append(((np.arange(n) - c) / a) ** 2)
    return np.sqrt(
        axes[0][:, None, None] + axes[1][None, :, None] + axes[2][None, None, :]
    )


def _bed_field(dims, level: float) -> np.ndarray:
    """Smooth connected background: constant plateau, smoothstep falloff to 0."""
    r = _norm_radius(dims)
    u = np.clip((r - _BED_PLATEAU_R) / (1.0 - _BED_PLATEAU_R), 0.0, 1.0)
    return level * (1.0 - u * u * (3.0 - 2.0 * u))


def _add_bump(data: np.ndarray, center, radius: float, peak: float) -> None:
    """Max-combine a compact radial bump into the field (in place)."""
    cx, cy, cz = center
    nx, ny, nz = data.shape
    lo = [max(0, int(math.floor(c - radius))) for c in center]
    hi = [min(n - 1, int(math.ceil(c + radius))) for c, n in zip(center, data.shape)]
    xs = np.arange(lo[0], hi[0] + 1)
    ys = np.arange(lo[1], hi[1] + 1)
    zs = np.arange(lo[2], hi[2] + 1)
    d2 = (
        ((xs - cx) ** 2)[:, None, None]
        + ((ys - cy) ** 2)[None, :, None]
        + ((zs - cz) ** 2)[None, None, :]
    )
    prof = 1.0 - d2 / (radius * radius)
    np.clip(prof, 0.0, None, out=prof)
    bump = peak * prof**3
    region = data[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1]
    np.maximum(region, bump, out=region)


@dataclass
class _Lesion:
    center: tuple[int, int, int]
    radius: float
    peak: float


@dataclass
class _Cluster:
    lesions: list[_Lesion] = field(default_factory=list)

    @property
    def center(self):
        cs = np.array([l.center for l in self.lesions], dtype=float)
        return cs.mean(axis=0)

    @property
    def clearance(self) -> float:
        c = self.center
        return max(
            float(np.linalg.norm(np.array(l.center) - c)) + l.radius for l in self.lesions
        )


def _place_cluster(rng, dims, make_lesions, placed: list[_Cluster], region_r: np.ndarray | None, r_max: float):
    """Rejection-sample a non-overlapping position for one lesion cluster.

    ``make_lesions(center)`` builds the cluster's lesions around an integer
    center.  Placement keeps a 2-voxel gap between cluster footprints and,
    when ``region_r`` is given, keeps every lesion center inside the
    normalized radius ``r_max``.
    """
    nx, ny, nz = dims
    for _ in range(_MAX_PLACEMENT_TRIES):
        center = (
            int(rng.integers(0, nx)),
            int(rng.integers(0, ny)),
            int(rng.integers(0, nz)),
        )
        lesions = make_lesions(center)
        cluster = _Cluster(lesions=lesions)
        ok = True
        for les in lesions:
            cx, cy, cz = les.center
            m = les.radius + 1
            if not (m <= cx <= nx - 1 - m and m <= cy <= ny - 1 - m and m <= cz <= nz - 1 - m):
                ok = False
                break
            if region_r is not None and region_r[les.center] > r_max:
                ok = False
                break
        if ok:
            c = cluster.center
            cl = cluster.clearance
            for other in placed:
                if np.linalg.norm(other.center - c) < cl + other.clearance + 2.0:
                    ok = False
                    break
        if ok:
            placed.append(cluster)
            return cluster
    raise RuntimeError(
        f"could not place lesion cluster in dims {dims} after "
        f"{_MAX_PLACEMENT_TRIES} attempts"
    )


def _single_maker(rng, radius_range, peak_range):
    radius = float(rng.uniform(*radius_range))
    peak = float(rng.uniform(*peak_range))

    def make(center):
        return [_Lesion(center=center, radius=radius, peak=peak)]

    return make


def _pair_maker(rng, radius_range, peak_range, offset: int = 3):
    """A confluent pair: two equal-radius bumps ``offset`` voxels apart."""
    radius = float(rng.uniform(*radius_range))
    p1 = float(rng.uniform(*peak_range))
    p2 = float(rng.uniform(*peak_range))
    axis = int(rng.integers(0, 3))

    def make(center):
        shifted = list(center)
        shifted[axis] += offset
        return [
            _Lesion(center=center, radius=radius, peak=p1),
            _Lesion(center=tuple(shifted), radius=radius, peak=p2),
        ]

    return make


def _place_speckles(rng, data, lesions, n_core, n_slope, delta_range, region_r, amplitude):
    """Scatter 1-voxel bumps: ``n_core`` on the bed plateau (local maxima of
    tiny prominence), ``n_slope`` on the bed falloff where the gradient
    exceeds their prominence (absorbed without a diagram trace)."""
    dims = data.shape
    taken: list[tuple[int, int, int]] = []

    def far_from_content(pos) -> bool:
        for les in lesions:
            if np.linalg.norm(np.array(pos) - np.array(les.center)) < les.radius + 2.0:
                return False
        for other in taken:
            if np.linalg.norm(np.array(pos) - np.array(other)) < 2.0:
                return False
        return True

    def sample(r_lo, r_hi, count):
        placed = 0
        for _ in range(_MAX_PLACEMENT_TRIES):
            if placed == count:
                break
            pos = tuple(int(rng.integers(0, n)) for n in dims)
            if not r_lo <= region_r[pos] <= r_hi:
                continue
            if not far_from_content(pos):
                continue
            delta = float(rng.uniform(*delta_range))
            value = data[pos] + delta
            if value > amplitude:
                continue
            data[pos] = value
            taken.append(pos)
            placed += 1
        if placed < count:
            raise RuntimeError("could not place noise speckles")

    if n_core:
        sample(0.0, 0.55, n_core)
    if n_slope:
        sample(0.72, 0.90, n_slope)


def _place_isolated_speckles(rng, data, lesions, count, amplitude):
    """Speckles on empty background (no bed): isolated 1-voxel components."""
    dims = data.shape
    taken: list[tuple[int, int, int]] = []
    placed = 0
    for _ in range(_MAX_PLACEMENT_TRIES):
        if placed == count:
            break
        pos = tuple(int(rng.integers(0, n)) for n in dims)
        if data[pos] > 0:
            continue
        near = False
        for les in lesions:
            if np.linalg.norm(np.array(pos) - np.array(les.center)) < les.radius + 2.0:
                near = True
                break
        if not near:
            for other in taken:
                if max(abs(a - b) for a, b in zip(pos, other)) < 2:
                    near = True
                    break
        if near:
            continue
        data[pos] = float(rng.uniform(0.02, amplitude))
        taken.append(pos)
        placed += 1
    if placed < count:
        raise RuntimeError("could not place noise speckles")


def generate_phantom(spec: PhantomSpec) -> tuple[Volume, int]:
    """Build a single phantom volume; returns (volume, true lesion count).

    Lesions are isolated spherical bumps (no confluent pairs).  With
    ``background_level > 0`` the bed connects the whole foreground and
    speckles ride on it; otherwise speckles are isolated voxels.
    """
    rng = np.random.default_rng(spec.seed)
    dims = tuple(int(d) for d in spec.dims)
    if spec.background_level > 0:
        data = _bed_field(dims, spec.background_level)
        region_r = _norm_radius(dims)
    else:
        data = np.zeros(dims, dtype=np.float64)
        region_r = None

    clusters: list[_Cluster] = []
    lesions: list[_Lesion] = []
    for _ in range(spec.n_lesions):
        maker = _single_maker(rng, spec.lesion_radius_range, spec.peak_range)
        cluster = _place_cluster(rng, dims, maker, clusters, region_r, 0.55)
        lesions.extend(cluster.lesions)
    for les in lesions:
        _add_bump(data, les.center, les.radius, les.peak)

    if spec.noise_speckles:
        if spec.background_level > 0:
            if spec.noise_amplitude <= spec.background_level:
                raise ValueError("noise_amplitude must exceed background_level")
            n_core = spec.noise_speckles // 2
            _place_speckles(
                rng,
                data,
                lesions,
                n_core,
                spec.noise_speckles - n_core,
                (0.0005, 0.0035),
                _norm_radius(dims),
                spec.noise_amplitude,
            )
        else:
            _place_isolated_speckles(rng, data, lesions, spec.noise_speckles, spec.noise_amplitude)

    vol = Volume(data=data, voxel_size_mm=spec.voxel_size_mm)
    return vol, spec.n_lesions


def _subject_layout(rng, spec: LongitudinalSpec, k_max: int) -> list[_Cluster]:
    """Fixed lesion layout for one subject, in reveal order.

    Confluent pairs come first (one high-saddle pair, then mid-saddle
    pairs), so every timepoint with >= 5 lesions contains merged pairs;
    singles fill the rest.
    """
    dims = spec.dims
    region_r = _norm_radius(dims)
    placed: list[_Cluster] = []
    ordered: list[_Cluster] = []
    n_pairs = min(3, k_max // 2)
    for p in range(n_pairs):
        if p == 0:
            # High pair: merge saddle p2 * (1 - 1/R^2)^3 in [0.73, 0.78].
            maker = _pair_maker(rng, (3.45, 3.7), (0.95, 0.98), offset=3)
        else:
            # Mid pairs: saddles spread across [0.45, 0.72].
            maker = _pair_maker(rng, (2.6, 3.2), (0.72, 0.98), offset=3)
        ordered.append(_place_cluster(rng, dims, maker, placed, region_r, 0.55))
    for _ in range(k_max - 2 * n_pairs):
        maker = _single_maker(rng, (2.0, 2.8), (0.72, 0.98))
        ordered.append(_place_cluster(rng, dims, maker, placed, region_r, 0.55))

    reveal: list[_Lesion] = []
    for cluster in ordered:
        reveal.extend(cluster.lesions)
    return reveal


def _subject_schedule(rng, spec: LongitudinalSpec) -> list[int]:
    if spec.lesion_schedule is not None:
        sched = [int(k) for k in spec.lesion_schedule]
        if len(sched) != spec.timepoints:
            raise ValueError("lesion_schedule length must equal timepoints")
        if any(b < a for a, b in zip(sched, sched[1:])):
            raise ValueError("lesion_schedule must be non-decreasing")
        return sched
    lo, hi = spec.schedule_start
    n = int(rng.integers(lo, hi + 1))
    sched = [min(n, spec.max_lesions)]
    ilo, ihi = spec.schedule_increment
    for _ in range(spec.timepoints - 1):
        n = min(n + int(rng.integers(ilo, ihi + 1)), spec.max_lesions)
        sched.append(n)
    return sched


def generate_longitudinal(spec: LongitudinalSpec, out_dir) -> LongitudinalManifest:
    """Write a longitudinal phantom dataset: raw_json volumes + manifest.json.

    Per subject, lesions appear according to a non-decreasing schedule and
    keep their position and intensity once present; speckle noise is
    re-drawn per timepoint.  Ground-truth counts are recorded per
    timepoint.  Returns the manifest (paths relative to ``out_dir``).
    """
    if spec.timepoints < 2:
        raise ValueError("need at least 2 timepoints")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dims = tuple(int(d) for d in spec.dims)
    region_r = _norm_radius(dims)

    subjects = []
    for si in range(spec.n_subjects):
        sid = f"sub{si + 1:02d}"
        rng_subject = np.random.default_rng([spec.seed, si, 1])
        schedule = _subject_schedule(rng_subject, spec)
        k_max = max(schedule)
        reveal = _subject_layout(rng_subject, spec, k_max) if k_max else []

        records = []
        for t in range(spec.timepoints):
            n_t = schedule[t]
            data = _bed_field(dims, spec.background_level)
            visible = reveal[:n_t]
            for les in visible:
                _add_bump(data, les.center, les.radius, les.peak)
            if spec.noise_speckles:
                rng_noise = np.random.default_rng([spec.seed, si, 2, t])
                n_core = min(int(rng_noise.integers(3, 10)), spec.noise_speckles)
                _place_speckles(
                    rng_noise,
                    data,
                    visible,
                    n_core,
                    spec.noise_speckles - n_core,
                    (0.0005, 0.0035),
                    region_r,
                    spec.noise_amplitude,
                )
            vol = Volume(data=data, voxel_size_mm=spec.voxel_size_mm)
            name = f"{sid}_t{t + 1}.json"
            save_raw_json(vol, out_dir / name)
            records.append(TimepointRecord(t_index=t + 1, volume_path=name, gt_count=n_t))
        subjects.append(SubjectRecord(subject_id=sid, timepoints=tuple(records)))

    manifest = LongitudinalManifest(subjects=tuple(subjects), base_dir=out_dir)
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest.to_json_dict(), indent=2) + "\n")
    return manifest

"""Command-line interface: count, diagram, sweep, calibrate, phantom, preprocess.

Results go to standard output (JSON) or to files named by ``--output``;
logs and errors go to standard error.  Exit codes: 0 success, 1 runtime
failure (I/O, malformed input), 2 usage error.  Every command is
deterministic given its flags, inputs and seed.

Grids are written ``A:B:STEP``, inclusive of B when B - A is an integer
multiple of STEP (within 1e-9); the defaults are 0.1:1.0:0.1 for direct
thresholding and 0:0.04:0.004 for persistence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .calibration import LongitudinalManifest, cross_validate, paired_ttest
from .counting import (
    DEFAULT_TAU_GRID,
    DEFAULT_THETA_GRID,
    direct_threshold_count,
    make_grid,
    sweep_direct,
    sweep_persistence,
    sweep_to_csv,
)
from .filtration import compute_persistence, diagram_to_csv, persistence_count
from .phantom import LongitudinalSpec, generate_longitudinal
from .volume import crop_to_foreground, downsample, load_volume, save_raw_json

__all__ = ["main"]


class UsageError(Exception):
    """Inconsistent flag combination (exit code 2)."""


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be A:B:STEP, got {text!r}")
    try:
        a, b, step = (float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"grid must be numeric A:B:STEP, got {text!r}") from exc
    try:
        return make_grid(a, b, step)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _json_float(x: float):
    """Floats for the JSON envelope; infinities become strings."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _check_mask_eps(args) -> None:
    if not 0.0 <= args.mask_eps < 1.0:
        raise UsageError("--mask-eps must be in [0, 1)")


def _load_preprocessed(args) -> "Volume":
    vol = load_volume(args.input)
    if getattr(args, "crop", False):
        vol = crop_to_foreground(vol, eps=args.crop_eps)
    factor = getattr(args, "downsample", 1)
    if factor and factor > 1:
        vol = downsample(vol, factor)
    return vol


def _cmd_count(args) -> int:
    _check_mask_eps(args)
    if args.method == "persistence":
        if args.theta is None:
            raise UsageError("--method persistence requires --theta")
        if args.tau is not None:
            raise UsageError("--tau is only valid with --method threshold")
        if args.theta < 0:
            raise UsageError("--theta must be >= 0")
    else:
        if args.tau is None:
            raise UsageError("--method threshold requires --tau")
        if args.theta is not None:
            raise UsageError("--theta is only valid with --method persistence")
        if not 0.0 < args.tau <= 1.0:
            raise UsageError("--tau must be in (0, 1]")
    vol = _load_preprocessed(args)
    if args.method == "persistence":
        count = persistence_count(vol, args.theta, mask_eps=args.mask_eps).count
        method, threshold = "persistence", args.theta
    else:
        count = direct_threshold_count(vol, args.tau)
        method, threshold = "direct_threshold", args.tau
    _emit(
        {
            "count": count,
            "method": method,
            "threshold": threshold,
            "dims": list(vol.dims),
            "voxel_size_mm": list(vol.voxel_size_mm),
        }
    )
    return 0


def _cmd_diagram(args) -> int:
    _check_mask_eps(args)
    vol = load_volume(args.input)
    pd = compute_persistence(vol, mask_eps=args.mask_eps)
    Path(args.output).write_text(diagram_to_csv(pd))
    return 0


def _cmd_sweep(args) -> int:
    _check_mask_eps(args)
    vol = load_volume(args.input)
    grid = _parse_grid(args.grid) if args.grid else None
    if args.method == "persistence":
        if grid is not None and grid[0] < 0:
            raise UsageError("persistence grid values must be >= 0")
        result = sweep_persistence(vol, grid, mask_eps=args.mask_eps)
    else:
        if grid is not None and not (0.0 < grid[0] and grid[-1] <= 1.0):
            raise UsageError("threshold grid values must lie in (0, 1]")
        result = sweep_direct(vol, grid)
    Path(args.output).write_text(sweep_to_csv(result))
    return 0


def _report_dict(report) -> dict:
    return report.to_json_dict()


def _cmd_calibrate(args) -> int:
    _check_mask_eps(args)
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    manifest = LongitudinalManifest.from_json(args.manifest)
    grid = _parse_grid(args.grid) if args.grid else DEFAULT_THETA_GRID
    if grid[0] < 0:
        raise UsageError("persistence grid values must be >= 0")
    report = cross_validate(
        manifest,
        grid,
        mode=args.mode,
        folds=args.folds,
        seed=args.seed,
        method="persistence",
        mask_eps=args.mask_eps,
        jobs=args.jobs,
    )
    doc = _report_dict(report)
    if args.compare_baseline:
        baseline = cross_validate(
            manifest,
            DEFAULT_TAU_GRID,
            mode=args.mode,
            folds=args.folds,
            seed=args.seed,
            method="direct_threshold",
            mask_eps=args.mask_eps,
            jobs=args.jobs,
        )
        t, p = paired_ttest(report.case_errors, baseline.case_errors)
        doc["baseline"] = _report_dict(baseline)
        doc["ttest"] = {"t": _json_float(t), "p": _json_float(p), "baseline": "direct_threshold"}
    _emit(doc)
    return 0


def _cmd_phantom(args) -> int:
    schedule = None
    if args.schedule:
        try:
            schedule = tuple(int(k) for k in args.schedule.split(","))
        except ValueError as exc:
            raise UsageError(f"--schedule must be comma-separated integers: {exc}") from exc
    spec = LongitudinalSpec(
        n_subjects=args.subjects,
        timepoints=args.timepoints,
        lesion_schedule=schedule,
        seed=args.seed,
        dims=tuple(args.dims),
        noise_speckles=args.speckles,
        noise_amplitude=args.noise_amplitude,
        background_level=args.background,
        voxel_size_mm=tuple(args.voxel_size),
    )
    manifest = generate_longitudinal(spec, args.out)
    _emit(
        {
            "manifest": str(Path(args.out) / "manifest.json"),
            "subjects": args.subjects,
            "timepoints": args.timepoints,
            "volumes": sum(len(s.timepoints) for s in manifest.subjects),
        }
    )
    return 0


def _cmd_preprocess(args) -> int:
    vol = load_volume(args.input)
    vol = crop_to_foreground(vol, eps=args.crop_eps)
    if args.downsample > 1:
        vol = downsample(vol, args.downsample)
    out = Path(args.output)
    if out.suffix != ".json":
        raise UsageError("--output must be a .json path (raw_json format)")
    save_raw_json(vol, out)
    _emit(
        {
            "output": str(out),
            "dims": list(vol.dims),
            "voxel_size_mm": list(vol.voxel_size_mm),
        }
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesioncount",
        description="Topologically robust lesion counting for 3D probability maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="count lesions in one volume")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=["persistence", "threshold"])
    p.add_argument("--theta", type=float, default=None, help="persistence threshold")
    p.add_argument("--tau", type=float, default=None, help="probability threshold")
    p.add_argument("--mask-eps", type=float, default=0.0)
    p.add_argument("--crop", action="store_true", help="crop to foreground first")
    p.add_argument("--crop-eps", type=float, default=0.0)
    p.add_argument("--downsample", type=int, default=1)
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("diagram", help="write the persistence diagram as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mask-eps", type=float, default=0.0)
    p.set_defaults(func=_cmd_diagram)

    p = sub.add_parser("sweep", help="count across a threshold grid, write CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=["persistence", "threshold"])
    p.add_argument("--grid", default=None, help="A:B:STEP (inclusive); default per method")
    p.add_argument("--output", required=True)
    p.add_argument("--mask-eps", type=float, default=0.0)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("calibrate", help="cross-validated threshold selection")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", required=True, choices=["supervised", "unsupervised"])
    p.add_argument("--grid", default=None, help="persistence grid A:B:STEP")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-eps", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument(
        "--compare-baseline",
        action="store_true",
        help="also cross-validate direct thresholding and report a paired t-test",
    )
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("phantom", help="generate a longitudinal phantom dataset")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--timepoints", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", type=int, nargs=3, default=[48, 88, 48])
    p.add_argument("--speckles", type=int, default=40)
    p.add_argument("--noise-amplitude", type=float, default=0.3)
    p.add_argument("--background", type=float, default=0.26)
    p.add_argument("--schedule", default=None, help="comma-separated lesion counts per timepoint")
    p.add_argument("--voxel-size", type=float, nargs=3, default=[2.0, 2.0, 2.0])
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("preprocess", help="crop and downsample, write raw_json")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--crop-eps", type=float, default=0.0)
    p.add_argument("--downsample", type=int, default=1)
    p.set_defaults(func=_cmd_preprocess)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

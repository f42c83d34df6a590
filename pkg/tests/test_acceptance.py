"""Acceptance suite: one test per shipping criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS line per
criterion; a pytest failure is the FAIL line.  The randomized suites are
seeded, so every run checks the same volumes.
"""

import json
import math
import subprocess
import sys
import time
from collections import Counter

import numpy as np
import pytest
from scipy.integrate import quad

from lesioncount import (
    DEFAULT_TAU_GRID,
    DEFAULT_THETA_GRID,
    PhantomSpec,
    Volume,
    compute_persistence,
    count_from_diagram,
    direct_threshold_count,
    generate_phantom,
    linear_fit,
    load_volume,
    paired_ttest,
    persistence_count,
    supervised_select,
    sweep_direct,
    sweep_persistence,
)
from lesioncount.calibration import CountTable, LongitudinalManifest
from lesioncount.oracle import brute_force_components, brute_force_diagram

from conftest import random_quantized_volume

SUITE_SEED = 20260809
BENCH_SEED = 20260809
CV_SEED = 7
N_SUITE_VOLUMES = 200
THETA_GRID_32 = np.arange(33) / 32.0  # {0, 1/32, ..., 1}


def _pass(n: int, message: str) -> None:
    print(f"\nACCEPTANCE {n:02d} PASS: {message}")


@pytest.fixture(scope="module")
def suite():
    """200 random quantized volumes (<= 12^3) with fast and slow diagrams."""
    rng = np.random.default_rng(SUITE_SEED)
    t0 = time.perf_counter()
    volumes, fast, slow = [], [], []
    for _ in range(N_SUITE_VOLUMES):
        vol = random_quantized_volume(rng, max_side=12)
        volumes.append(vol)
        fast.append(compute_persistence(vol))
        slow.append(brute_force_diagram(vol))
    build_seconds = time.perf_counter() - t0
    return {"volumes": volumes, "fast": fast, "slow": slow, "build_seconds": build_seconds}


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory):
    """Criterion 6 benchmark: 10 subjects x 5 timepoints, generated and
    calibrated through the CLI, both modes, baseline compared."""
    out = tmp_path_factory.mktemp("bench")
    t0 = time.perf_counter()

    def cli(*args) -> bytes:
        proc = subprocess.run(
            [sys.executable, "-m", "lesioncount", *[str(a) for a in args]],
            capture_output=True,
            check=False,
        )
        assert proc.returncode == 0, proc.stderr.decode()
        return proc.stdout

    cli(
        "phantom", "--subjects", 10, "--timepoints", 5,
        "--out", out, "--seed", BENCH_SEED,
        "--speckles", 40, "--noise-amplitude", 0.3,
    )
    manifest = out / "manifest.json"
    reports = {}
    for mode in ("unsupervised", "supervised"):
        stdout = cli(
            "calibrate", "--manifest", manifest, "--mode", mode,
            "--seed", CV_SEED, "--compare-baseline",
        )
        reports[mode] = json.loads(stdout)
    elapsed = time.perf_counter() - t0
    return {"dir": out, "manifest": manifest, "reports": reports, "seconds": elapsed}


def test_criterion_01_oracle_count_equivalence(suite):
    t0 = time.perf_counter()
    for vol, fast, slow in zip(suite["volumes"], suite["fast"], suite["slow"]):
        for theta in THETA_GRID_32:
            merged = persistence_count(vol, theta).count
            assert merged == count_from_diagram(fast, theta)
            assert merged == slow.count_at(theta)
    elapsed = suite["build_seconds"] + (time.perf_counter() - t0)
    assert elapsed < 60.0, f"count equivalence took {elapsed:.1f}s (limit 60s)"
    _pass(1, f"3-way count equality on {N_SUITE_VOLUMES} volumes x 33 thresholds in {elapsed:.1f}s")


def test_criterion_02_oracle_diagram_equivalence(suite):
    for fast, slow in zip(suite["fast"], suite["slow"]):
        fast_dots = Counter(
            (b, d) for b, d in zip(fast.births, fast.deaths) if b > d
        )
        slow_dots = Counter(zip(slow.births, slow.deaths))
        assert fast_dots == slow_dots
        assert fast.essential_births.tolist() == slow.essential_births.tolist()
        assert fast.essential_indices.tolist() == slow.essential_indices.tolist()
        # retained zero-persistence dots are flagged and never counted
        assert np.all(fast.persistences >= 0)
    _pass(2, f"diagram multisets and essentials match on {N_SUITE_VOLUMES} volumes")


def test_criterion_03_baseline_equivalence(suite):
    checked = 0
    for vol in suite["volumes"]:
        for tau in np.unique(vol.data[vol.data > 0]):
            assert direct_threshold_count(vol, tau) == len(brute_force_components(vol, tau))
            checked += 1
    _pass(3, f"baseline equals flood fill at {checked} distinct levels")


def test_criterion_04_monotonicity(suite):
    rng = np.random.default_rng(SUITE_SEED + 1)
    volumes = list(suite["volumes"])
    for i in range(20):
        vol, _ = generate_phantom(
            PhantomSpec(
                dims=(18, 18, 18),
                n_lesions=int(rng.integers(0, 4)),
                noise_speckles=int(rng.integers(0, 6)),
                seed=int(rng.integers(0, 2**31)),
            )
        )
        volumes.append(vol)
    for vol in volumes:
        counts = sweep_persistence(vol).counts
        assert np.all(np.diff(counts) <= 0)
    _pass(4, f"persistence counts non-increasing on {len(volumes)} volumes")


def test_criterion_05_disjoint_additivity():
    rng = np.random.default_rng(SUITE_SEED + 2)
    for pair in range(50):
        a, _ = generate_phantom(
            PhantomSpec(
                dims=(16, 16, 16),
                n_lesions=int(rng.integers(0, 3)),
                lesion_radius_range=(1.5, 2.2),
                noise_speckles=int(rng.integers(0, 5)),
                seed=int(rng.integers(0, 2**31)),
            )
        )
        b, _ = generate_phantom(
            PhantomSpec(
                dims=(16, 16, 16),
                n_lesions=int(rng.integers(0, 3)),
                lesion_radius_range=(1.5, 2.2),
                noise_speckles=int(rng.integers(0, 5)),
                seed=int(rng.integers(0, 2**31)),
            )
        )
        gap = 1 + int(rng.integers(0, 3))
        nx = a.dims[0] + gap + b.dims[0]
        data = np.zeros((nx, 16, 16))
        data[: a.dims[0]] = a.data
        data[a.dims[0] + gap :] = b.data
        combined = Volume(data=data)
        for theta in DEFAULT_THETA_GRID:
            assert (
                persistence_count(combined, theta).count
                == persistence_count(a, theta).count + persistence_count(b, theta).count
            )
    _pass(5, "combined counts equal summed counts for 50 separated pairs x 11 thresholds")


def test_criterion_06_synthetic_benchmark_direction(benchmark):
    unsup = benchmark["reports"]["unsupervised"]
    sup = benchmark["reports"]["supervised"]
    for mode, doc in (("unsupervised", unsup), ("supervised", sup)):
        assert doc["mean_mae"] < doc["baseline"]["mean_mae"], (
            f"{mode}: persistence MAE {doc['mean_mae']} not below "
            f"baseline {doc['baseline']['mean_mae']}"
        )
    p = unsup["ttest"]["p"]
    p_value = 0.0 if isinstance(p, str) else float(p)
    assert p_value < 0.05
    assert benchmark["seconds"] < 300.0, f"benchmark took {benchmark['seconds']:.0f}s"
    _pass(
        6,
        "persistence MAE beats baseline in both modes "
        f"(unsup {unsup['mean_mae']:.2f} < {unsup['baseline']['mean_mae']:.2f}, "
        f"sup {sup['mean_mae']:.2f} < {sup['baseline']['mean_mae']:.2f}; "
        f"p = {p_value:.2e}) in {benchmark['seconds']:.0f}s",
    )


def test_criterion_07_threshold_stability(benchmark):
    manifest = LongitudinalManifest.from_json(benchmark["manifest"])
    stds_persistence, stds_direct = [], []
    for subject in manifest.subjects:
        for tp in subject.timepoints:
            vol = load_volume(manifest.resolve(tp.volume_path))
            stds_persistence.append(float(np.std(sweep_persistence(vol).counts)))
            stds_direct.append(float(np.std(sweep_direct(vol).counts)))
    mean_p = float(np.mean(stds_persistence))
    mean_d = float(np.mean(stds_direct))
    assert mean_p < mean_d
    _pass(7, f"count spread across default grids: persistence {mean_p:.2f} < direct {mean_d:.2f}")


def test_criterion_08_performance_40x80x40():
    vol, _ = generate_phantom(
        PhantomSpec(
            dims=(40, 80, 40),
            n_lesions=15,
            noise_speckles=40,
            background_level=0.26,
            seed=SUITE_SEED,
        )
    )
    persistence_count(vol, 0.02)  # warm the JIT cache
    times = []
    for _ in range(5):
        t0 = time.perf_counter()
        persistence_count(vol, 0.02)
        times.append(time.perf_counter() - t0)
    median = sorted(times)[2]
    assert median < 1.0, f"median sweep time {median:.3f}s exceeds 1s"
    _pass(8, f"full merge sweep on 40x80x40 in median {median * 1000:.0f} ms")


def test_criterion_09_calibration_unit_anchors():
    # squared-error selection picks the zero-residual column when one exists
    table = CountTable(
        method="persistence",
        theta_grid=np.array([0.0, 0.01, 0.02]),
        subject_ids=("s0",),
        counts=(np.array([[5, 6], [3, 3], [9, 9]]),),
        gt=(np.array([3, 3]),),
    )
    report = supervised_select(table)
    assert report.theta_star == 0.01
    assert report.objective_by_theta[1] == 0.0

    a, b, sse = linear_fit([1, 3, 2])
    assert abs(a - 0.5) <= 1e-9
    assert abs(b - 1.0) <= 1e-9
    assert abs(sse - 1.5) <= 1e-9

    # paired t-test against an independent numerical t-distribution integrator
    t_stat, p = paired_ttest([3.0, 1.0, 2.0, 4.0, 0.0], [1.0, 1.0, 1.0, 1.0, 1.0])
    assert abs(t_stat - math.sqrt(2)) <= 1e-9
    dof = 4

    def t_pdf(x):
        return (
            math.gamma((dof + 1) / 2)
            / (math.sqrt(dof * math.pi) * math.gamma(dof / 2))
            * (1 + x * x / dof) ** (-(dof + 1) / 2)
        )

    tail, _ = quad(t_pdf, abs(t_stat), np.inf)
    assert abs(p - 2 * tail) <= 1e-3
    assert abs(p - 0.2302) <= 1e-3
    _pass(9, f"selection, linear-fit and t-test anchors hold (p = {p:.4f})")


def test_criterion_10_cli_determinism(tmp_path):
    def run(*args, cwd=None) -> bytes:
        proc = subprocess.run(
            [sys.executable, "-m", "lesioncount", *[str(a) for a in args]],
            capture_output=True,
            check=False,
            cwd=cwd,
        )
        assert proc.returncode == 0, proc.stderr.decode()
        return proc.stdout

    from lesioncount import save_raw_json

    rng = np.random.default_rng(SUITE_SEED + 3)
    vol = random_quantized_volume(rng, max_side=10)
    src = tmp_path / "vol.json"
    save_raw_json(vol, src)

    ds_a, ds_b = tmp_path / "ds_a", tmp_path / "ds_b"
    phantom_args = ("phantom", "--subjects", 3, "--timepoints", 3,
                    "--seed", 5, "--dims", 30, 48, 30, "--schedule", "3,4,5")
    out_a = run(*phantom_args, "--out", ds_a)
    out_b = run(*phantom_args, "--out", ds_b)
    assert out_a.replace(b"ds_a", b"") == out_b.replace(b"ds_b", b"")
    for f in sorted(ds_a.iterdir()):
        assert f.read_bytes() == (ds_b / f.name).read_bytes(), f.name

    checks = [
        ("count", "--input", src, "--method", "persistence", "--theta", 0.01),
        ("count", "--input", src, "--method", "threshold", "--tau", 0.5),
        ("calibrate", "--manifest", ds_a / "manifest.json", "--mode", "supervised",
         "--folds", 3, "--seed", 2, "--compare-baseline"),
    ]
    for args in checks:
        assert run(*args) == run(*args), args[0]

    file_checks = [
        ("diagram", ("--input", src), "pd.csv"),
        ("sweep", ("--input", src, "--method", "persistence"), "sp.csv"),
        ("sweep", ("--input", src, "--method", "threshold"), "st.csv"),
        ("preprocess", ("--input", src, "--downsample", 2), "pre.json"),
    ]
    for cmd, args, outname in file_checks:
        d1, d2 = tmp_path / f"run1_{cmd}_{outname}", tmp_path / f"run2_{cmd}_{outname}"
        d1.mkdir()
        d2.mkdir()
        o1, o2 = d1 / outname, d2 / outname
        s1 = run(cmd, *args, "--output", o1)
        s2 = run(cmd, *args, "--output", o2)
        assert s1.replace(str(d1).encode(), b"") == s2.replace(str(d2).encode(), b"")
        assert o1.read_bytes() == o2.read_bytes(), cmd
        if o1.suffix == ".json":  # raw_json outputs carry a sibling blob
            assert o1.with_suffix(".raw").read_bytes() == o2.with_suffix(".raw").read_bytes()
    _pass(10, "all CLI commands byte-identical across repeated runs")

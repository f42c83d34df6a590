"""Volume I/O and preprocessing: formats, cropping, downsampling.

Volumes load from NIfTI-1 (.nii / .nii.gz, values clamped to [0, 1]) or
from the raw_json fixture format used by the phantom generator and tests.
Preprocessing for large scans is cropping to the foreground bounding box
and block-mean downsampling; neither changes what gets counted.
"""

import tempfile
from pathlib import Path

import numpy as np

from lesioncount import (
    PhantomSpec,
    crop_to_foreground,
    downsample,
    generate_phantom,
    load_volume,
    persistence_count,
    read_header,
    save_raw_json,
)

workdir = Path(tempfile.mkdtemp(prefix="lesioncount_demo_"))

vol, true_count = generate_phantom(PhantomSpec(dims=(40, 40, 40), n_lesions=4, seed=7))
path = save_raw_json(vol, workdir / "phantom.json")
print(f"wrote {path} ({true_count} lesions)")

info = read_header(path)
print(f"header: format={info.source_format}, dims on disk={info.original_dims}")

reloaded = load_volume(path)
assert np.array_equal(
    reloaded.data, vol.data.astype(np.float32).astype(np.float64)
), "float32 round trip is exact for float32 data"

# crop to the occupied region (1-voxel margin), then halve the resolution
cropped = crop_to_foreground(reloaded, eps=0.0)
small = downsample(cropped, 2)
print(f"crop: {reloaded.dims} -> {cropped.dims}; downsample x2 -> {small.dims}")
print(f"voxel size after downsampling: {small.voxel_size_mm} mm")

for stage, v in (("original", reloaded), ("cropped", cropped)):
    count = persistence_count(v, theta=0.02).count
    print(f"count on {stage:9s} volume: {count}")
# cropping never changes the count; downsampling changes the field itself
# (block means), so counts there are a resolution trade-off, not an identity

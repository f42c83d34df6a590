"""Loading, validation, and preprocessing of 3D probability volumes.

A volume is a dense 3D scalar field of per-voxel lesion probabilities with
voxel geometry attached.  Two on-disk formats are supported:

* NIfTI-1 (``.nii``, optionally gzip-compressed) - read only.
* A simple ``raw_json`` fixture format: a JSON header next to a raw binary
  blob of little-endian values - read and write.

Linearization convention, used everywhere in this package (graph vertex
ids, diagram birth indices, oracle component ids)::

    linear index = x + nx * (y + ny * z)

i.e. x varies fastest, matching the on-disk voxel order of both formats.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Volume",
    "VolumeHeaderInfo",
    "VolumeFormatError",
    "load_nifti",
    "load_raw_json",
    "save_raw_json",
    "load_volume",
    "read_header",
    "crop_to_foreground",
    "downsample",
]

# Loaded values are clamped to [0, 1], but anything outside this band before
# clamping means the file is not a probability map at all.
_PRECLAMP_MIN = -0.01
_PRECLAMP_MAX = 1.01

_GZIP_MAGIC = b"\x1f\x8b"

# NIfTI-1 datatype codes we accept (code -> numpy dtype without byte order).
_NIFTI_DTYPES = {
    2: "u1",   # uint8
    4: "i2",   # int16
    8: "i4",   # int32
    16: "f4",  # float32
    64: "f8",  # float64
}


class VolumeFormatError(ValueError):
    """Raised when a volume file is malformed or unsupported."""


@dataclass(frozen=True)
class Volume:
    """A 3D probability field with voxel geometry.

    ``data`` has shape ``(nx, ny, nz)`` and holds float64 probabilities in
    [0, 1]; ``voxel_size_mm`` is the physical edge length per axis.
    """

    data: np.ndarray
    voxel_size_mm: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume data contains non-finite values")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("volume data must lie in [0, 1]")
        if len(self.voxel_size_mm) != 3 or any(s <= 0 for s in self.voxel_size_mm):
            raise ValueError(f"voxel sizes must be positive, got {self.voxel_size_mm}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "voxel_size_mm", tuple(float(s) for s in self.voxel_size_mm))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_voxels(self) -> int:
        return self.data.size

    def linear_values(self) -> np.ndarray:
        """Values in linear-index order (x fastest)."""
        return self.data.ravel(order="F")


@dataclass(frozen=True)
class VolumeHeaderInfo:
    """Provenance of a loaded volume: format, on-disk dims, scaling applied."""

    source_format: str  # "nifti1" or "raw_json"
    original_dims: tuple[int, int, int]
    scale_applied: tuple[float, float] | None = None  # (slope, intercept)

    def __post_init__(self):
        if self.scale_applied is not None and self.scale_applied[0] == 0:
            raise ValueError("scale slope must be nonzero when a scaling was applied")


def _read_file_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == _GZIP_MAGIC:
        raw = gzip.decompress(raw)
    return raw


def _finalize_probabilities(values: np.ndarray, path: Path) -> np.ndarray:
    """Range-check raw values, then clamp to [0, 1]."""
    if not np.all(np.isfinite(values)):
        raise VolumeFormatError(f"{path}: non-finite values in volume data")
    if values.size and (values.min() < _PRECLAMP_MIN or values.max() > _PRECLAMP_MAX):
        raise VolumeFormatError(
            f"{path}: values span [{values.min():g}, {values.max():g}]; "
            "not a probability map"
        )
    return np.clip(values, 0.0, 1.0)


def _parse_nifti_header(raw: bytes, path: Path):
    """Parse the fields of a 348-byte NIfTI-1 header that we consume.

    Returns (byte_order, dims, voxel_size_mm, datatype_code, vox_offset,
    scale or None).  Byte order is detected by checking under which order
    ``sizeof_hdr`` reads 348.
    """
    if len(raw) < 348:
        raise VolumeFormatError(f"{path}: file shorter than a NIfTI-1 header")
    byte_order = None
    for bo in ("<", ">"):
        if struct.unpack(bo + "i", raw[0:4])[0] == 348:
            byte_order = bo
            break
    if byte_order is None:
        raise VolumeFormatError(f"{path}: sizeof_hdr is not 348 under either byte order")
    magic = raw[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise VolumeFormatError(f"{path}: bad NIfTI-1 magic {magic!r}")

    dim = struct.unpack(byte_order + "8h", raw[40:56])
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise VolumeFormatError(f"{path}: dim[0] = {ndim} out of range 1..7")
    # Only the first three dims describe the volume; any populated higher
    # dim means a multi-frame file, which we do not accept.
    for k in range(4, 8):
        if k <= ndim and dim[k] > 1:
            raise VolumeFormatError(
                f"{path}: {dim[k]} frames along dim[{k}]; only single-frame 3D supported"
            )
    dims = tuple(int(dim[k]) if k <= ndim else 1 for k in (1, 2, 3))
    if any(d < 1 for d in dims):
        raise VolumeFormatError(f"{path}: non-positive dims {dims}")

    datatype = struct.unpack(byte_order + "h", raw[70:72])[0]
    pixdim = struct.unpack(byte_order + "8f", raw[76:108])
    vox_offset = int(struct.unpack(byte_order + "f", raw[108:112])[0])
    scl_slope, scl_inter = struct.unpack(byte_order + "2f", raw[112:120])

    # pixdim entries of 0 occur in sloppy files; fall back to 1 mm.
    voxel_size = tuple(float(pixdim[k]) if pixdim[k] > 0 else 1.0 for k in (1, 2, 3))
    scale = None
    if np.isfinite(scl_slope) and scl_slope != 0.0:
        inter = float(scl_inter) if np.isfinite(scl_inter) else 0.0
        scale = (float(scl_slope), inter)
    return byte_order, dims, voxel_size, datatype, vox_offset, scale, magic


def load_nifti(path) -> Volume:
    """Load a NIfTI-1 volume (``.nii`` or ``.nii.gz``; ``.hdr/.img`` pairs too).

    Values are transformed by ``slope * v + intercept`` when the header's
    scl_slope is nonzero, then clamped to [0, 1].  Raw values outside
    [-0.01, 1.01] are rejected as non-probability inputs.
    """
    path = Path(path)
    raw = _read_file_bytes(path)
    byte_order, dims, voxel_size, datatype, vox_offset, scale, magic = _parse_nifti_header(raw, path)

    if datatype not in _NIFTI_DTYPES:
        raise VolumeFormatError(f"{path}: unsupported NIfTI datatype code {datatype}")
    dtype = np.dtype(byte_order + _NIFTI_DTYPES[datatype])

    if magic == b"n+1\x00":
        offset = max(vox_offset, 348)
        payload = raw
    else:
        # .hdr/.img pair: voxel data lives in a sibling .img file.
        img_path = path.with_suffix(".img")
        if not img_path.exists() and img_path.with_suffix(".img.gz").exists():
            img_path = img_path.with_suffix(".img.gz")
        if not img_path.exists():
            raise VolumeFormatError(f"{path}: companion .img file not found")
        payload = _read_file_bytes(img_path)
        offset = max(vox_offset, 0)

    n = dims[0] * dims[1] * dims[2]
    need = offset + n * dtype.itemsize
    if len(payload) < need:
        raise VolumeFormatError(
            f"{path}: data truncated ({len(payload)} bytes, need {need})"
        )
    values = np.frombuffer(payload, dtype=dtype, count=n, offset=offset).astype(np.float64)
    if scale is not None:
        values = scale[0] * values + scale[1]
    values = _finalize_probabilities(values, path)
    data = values.reshape(dims, order="F")
    return Volume(data=data, voxel_size_mm=voxel_size)


def _read_raw_json_header(path: Path) -> dict:
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise VolumeFormatError(f"{path}: invalid JSON header: {exc}") from exc
    for key in ("dims", "voxel_size_mm", "data_file", "dtype", "byte_order"):
        if key not in header:
            raise VolumeFormatError(f"{path}: missing header field {key!r}")
    return header


def load_raw_json(path) -> Volume:
    """Load a volume in the raw_json fixture format.

    The JSON header names a sibling binary blob; ``dims`` must match the
    blob length.  The same range check and clamping as :func:`load_nifti`
    apply.
    """
    path = Path(path)
    header = _read_raw_json_header(path)
    dims = tuple(int(d) for d in header["dims"])
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise VolumeFormatError(f"{path}: bad dims {header['dims']}")
    dtype_name = header["dtype"]
    if dtype_name not in ("float32", "float64"):
        raise VolumeFormatError(f"{path}: unknown dtype {dtype_name!r}")
    if header["byte_order"] != "little":
        raise VolumeFormatError(f"{path}: unsupported byte order {header['byte_order']!r}")
    dtype = np.dtype("<f4" if dtype_name == "float32" else "<f8")

    blob_path = path.parent / header["data_file"]
    blob = blob_path.read_bytes()
    n = dims[0] * dims[1] * dims[2]
    if len(blob) != n * dtype.itemsize:
        raise VolumeFormatError(
            f"{path}: data length mismatch ({len(blob)} bytes for dims {dims})"
        )
    values = np.frombuffer(blob, dtype=dtype).astype(np.float64)
    values = _finalize_probabilities(values, path)
    data = values.reshape(dims, order="F")
    voxel_size = tuple(float(s) for s in header["voxel_size_mm"])
    return Volume(data=data, voxel_size_mm=voxel_size)


def save_raw_json(vol: Volume, path, dtype: str = "float32") -> Path:
    """Write a volume in the raw_json fixture format.

    Returns the header path.  ``path`` should end in ``.json``; the blob is
    written next to it with a ``.raw`` suffix.  ``dtype`` may be
    ``float32`` (default) or ``float64`` for fixtures that must preserve
    exact probability levels.
    """
    if dtype not in ("float32", "float64"):
        raise ValueError(f"unknown dtype {dtype!r}")
    path = Path(path)
    blob_path = path.with_suffix(".raw")
    np_dtype = "<f4" if dtype == "float32" else "<f8"
    blob = np.asfortranarray(vol.data).astype(np_dtype).tobytes(order="F")
    blob_path.write_bytes(blob)
    header = {
        "dims": [int(d) for d in vol.dims],
        "voxel_size_mm": [float(s) for s in vol.voxel_size_mm],
        "data_file": blob_path.name,
        "dtype": dtype,
        "byte_order": "little",
    }
    path.write_text(json.dumps(header, indent=2) + "\n")
    return path


def load_volume(path) -> Volume:
    """Load a volume, dispatching on format (.json -> raw_json, else NIfTI)."""
    path = Path(path)
    if path.suffix == ".json":
        return load_raw_json(path)
    return load_nifti(path)


def read_header(path) -> VolumeHeaderInfo:
    """Read format and provenance info without loading voxel data."""
    path = Path(path)
    if path.suffix == ".json":
        header = _read_raw_json_header(path)
        return VolumeHeaderInfo(
            source_format="raw_json",
            original_dims=tuple(int(d) for d in header["dims"]),
        )
    raw = _read_file_bytes(path)
    _, dims, _, _, _, scale, _ = _parse_nifti_header(raw, path)
    return VolumeHeaderInfo(source_format="nifti1", original_dims=dims, scale_applied=scale)


def crop_to_foreground(vol: Volume, eps: float = 0.0) -> Volume:
    """Crop to the bounding box of voxels with p > eps, plus a 1-voxel margin.

    The margin is clipped to the original bounds.  If nothing exceeds eps,
    a 1x1x1 zero volume is returned.  Retained values are never changed.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must be in [0, 1), got {eps}")
    mask = vol.data > eps
    if not mask.any():
        return Volume(data=np.zeros((1, 1, 1)), voxel_size_mm=vol.voxel_size_mm)
    slices = []
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        hit = np.any(mask, axis=other)
        idx = np.flatnonzero(hit)
        lo = max(int(idx[0]) - 1, 0)
        hi = min(int(idx[-1]) + 1, vol.dims[axis] - 1)
        slices.append(slice(lo, hi + 1))
    data = np.ascontiguousarray(vol.data[tuple(slices)])
    return Volume(data=data, voxel_size_mm=vol.voxel_size_mm)


def downsample(vol: Volume, factor: int) -> Volume:
    """Block-mean pooling over ``factor``-cubed blocks.

    Trailing partial blocks average over the voxels actually present.
    Output dims are ``ceil(dims / factor)`` and voxel sizes are multiplied
    by ``factor``.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return vol
    sums = vol.data
    block_counts = []
    for axis in range(3):
        n = sums.shape[axis]
        starts = np.arange(0, n, factor)
        sums = np.add.reduceat(sums, starts, axis=axis)
        block_counts.append(np.minimum(starts + factor, n) - starts)
    counts = (
        block_counts[0][:, None, None]
        * block_counts[1][None, :, None]
        * block_counts[2][None, None, :]
    )
    data = sums / counts
    voxel_size = tuple(s * factor for s in vol.voxel_size_mm)
    return Volume(data=data, voxel_size_mm=voxel_size)

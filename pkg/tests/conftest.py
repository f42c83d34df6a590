import struct

import numpy as np
import pytest

from lesioncount import Volume

# Strip used across modules: order, merges, and counts are all hand-checkable.
STRIP_VALUES = [0.2, 0.9, 0.3, 0.6, 0.1]


@pytest.fixture
def strip():
    return Volume(data=np.array(STRIP_VALUES).reshape(5, 1, 1))


def make_nifti_bytes(
    data: np.ndarray,
    datatype_code: int = 16,
    np_dtype: str = "f4",
    byte_order: str = "<",
    pixdim=(1.0, 1.0, 1.0),
    scl_slope: float = 0.0,
    scl_inter: float = 0.0,
    magic: bytes = b"n+1\x00",
    vox_offset: int = 352,
    dim0: int | None = None,
    dim4: int = 1,
    sizeof_hdr: int = 348,
) -> bytes:
    """Assemble a minimal NIfTI-1 file: 348-byte header + padding + voxels.

    ``data`` is a 3D array whose x axis varies fastest on disk.
    """
    nx, ny, nz = data.shape
    hdr = bytearray(348)
    struct.pack_into(byte_order + "i", hdr, 0, sizeof_hdr)
    d0 = 3 if dim0 is None else dim0
    struct.pack_into(byte_order + "8h", hdr, 40, d0, nx, ny, nz, dim4, 1, 1, 1)
    bitpix = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}.get(datatype_code, 32)
    struct.pack_into(byte_order + "h", hdr, 70, datatype_code)
    struct.pack_into(byte_order + "h", hdr, 72, bitpix)
    struct.pack_into(
        byte_order + "8f", hdr, 76, 1.0, pixdim[0], pixdim[1], pixdim[2], 0, 0, 0, 0
    )
    struct.pack_into(byte_order + "f", hdr, 108, float(vox_offset))
    struct.pack_into(byte_order + "2f", hdr, 112, scl_slope, scl_inter)
    hdr[344:348] = magic
    body = data.astype(byte_order + np_dtype).tobytes(order="F")
    if magic == b"n+1\x00":
        return bytes(hdr) + b"\x00" * (vox_offset - 348) + body
    return bytes(hdr)  # .hdr of a pair; caller writes the .img body


def random_quantized_volume(rng: np.random.Generator, max_side: int = 12) -> Volume:
    """Random small volume with values in multiples of 1/32 (many ties)."""
    dims = tuple(int(d) for d in rng.integers(1, max_side + 1, size=3))
    data = rng.integers(0, 33, size=dims).astype(np.float64) / 32.0
    if rng.random() < 0.4:
        data = np.where(rng.random(size=dims) < 0.5, 0.0, data)
    return Volume(data=data)

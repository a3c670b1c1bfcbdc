"""Dense 3D volume container and raw+JSON file I/O.

Arrays are indexed ``[x, y, z]``. On disk the payload is little-endian with
x varying fastest, which is Fortran order for an ``[x, y, z]`` array.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import (InvalidDimsError, MissingRawError, RawSizeError,
                     UnknownDtypeError, VolumeFormatError)

DTYPES = {
    "u8": np.dtype("<u1"),
    "u16": np.dtype("<u2"),
    "f32": np.dtype("<f4"),
}


@dataclass(frozen=True)
class VolumeHeader:
    dims: tuple
    dtype: str
    raw: str
    order: str = "x-fastest"
    endian: str = "little"

    def __post_init__(self):
        dims = tuple(self.dims)
        if len(dims) != 3 or any(int(n) != n or n < 1 for n in dims):
            raise InvalidDimsError(f"dims must be three positive integers, got {self.dims!r}")
        object.__setattr__(self, "dims", tuple(int(n) for n in dims))
        if self.dtype not in DTYPES:
            raise UnknownDtypeError(f"unknown dtype {self.dtype!r}; expected one of {sorted(DTYPES)}")
        if self.order != "x-fastest":
            raise VolumeFormatError(f"unsupported order {self.order!r}")
        if self.endian != "little":
            raise VolumeFormatError(f"unsupported byte order {self.endian!r}")

    @property
    def nbytes(self):
        return int(np.prod(self.dims)) * DTYPES[self.dtype].itemsize

    def to_json(self):
        return {"dims": list(self.dims), "dtype": self.dtype, "order": self.order,
                "endian": self.endian, "raw": self.raw}


@dataclass(frozen=True)
class Volume:
    """Immutable float32 volume with a free-text provenance tag."""

    data: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise InvalidDimsError(f"expected a non-empty 3D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("volume contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dims(self):
        return self.data.shape

    def flat(self):
        """Data in x-fastest order."""
        return self.data.ravel(order="F")

    @classmethod
    def from_flat(cls, dims, values, provenance=""):
        values = np.asarray(values)
        if values.size != int(np.prod(dims)):
            raise InvalidDimsError(f"{values.size} values do not fill dims {tuple(dims)}")
        return cls(values.reshape(tuple(dims), order="F"), provenance)

    def index(self, x, y, z):
        nx, ny, _ = self.dims
        return x + nx * (y + ny * z)


def normalize(image):
    """Affinely map values onto [0, 1]; a constant input maps to zeros."""
    arr = np.asarray(image, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros(arr.shape, dtype=np.float32)
    return ((arr - lo) / (hi - lo)).astype(np.float32)


def _raw_path(header_path, raw_name):
    return os.path.join(os.path.dirname(os.path.abspath(header_path)), raw_name)


def read_header(header_path):
    with open(header_path) as fh:
        doc = json.load(fh)
    try:
        return VolumeHeader(dims=doc["dims"], dtype=doc["dtype"], raw=doc["raw"],
                            order=doc.get("order", "x-fastest"),
                            endian=doc.get("endian", "little"))
    except KeyError as exc:
        raise VolumeFormatError(f"{header_path}: header missing field {exc}") from None


def load_volume(header_path):
    header = read_header(header_path)
    raw = _raw_path(header_path, header.raw)
    if not os.path.isfile(raw):
        raise MissingRawError(f"raw file {raw} not found")
    size = os.path.getsize(raw)
    if size != header.nbytes:
        raise RawSizeError(f"{raw}: expected {header.nbytes} bytes for dims {header.dims} "
                           f"{header.dtype}, found {size}")
    values = np.fromfile(raw, dtype=DTYPES[header.dtype])
    return Volume.from_flat(header.dims, values.astype(np.float32), provenance=str(header_path))


def _to_dtype(values, dtype):
    if dtype == "f32":
        return values.astype("<f4")
    info = np.iinfo(DTYPES[dtype])
    clamped = np.clip(values.astype(np.float64), info.min, info.max)
    # clamped values are non-negative, so floor(x + 0.5) rounds half away from zero
    return np.floor(clamped + 0.5).astype(DTYPES[dtype])


def save_volume(volume, path, dtype="f32"):
    """Write ``path`` (JSON header) plus a sibling ``.raw`` payload."""
    if dtype not in DTYPES:
        raise UnknownDtypeError(f"unknown dtype {dtype!r}")
    if not isinstance(volume, Volume):
        volume = Volume(volume)
    stem = os.path.splitext(os.path.basename(path))[0]
    header = VolumeHeader(dims=volume.dims, dtype=dtype, raw=stem + ".raw")
    payload = _to_dtype(volume.flat(), dtype)
    with open(_raw_path(path, header.raw), "wb") as fh:
        fh.write(payload.tobytes())
    with open(path, "w") as fh:
        json.dump(header.to_json(), fh, indent=2)
        fh.write("\n")
    return header

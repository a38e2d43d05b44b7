"""3D images and binary masks on axis-aligned grids, plus grid resampling.

Arrays are stored with numpy shape ``(nz, ny, nx)`` in C order, which is the
x-fastest voxel order used on disk. Geometry triples (``dims``, ``spacing``,
``origin``) are always given in ``(x, y, z)`` order. ``origin`` is the physical
position of the centre of voxel ``(0, 0, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np


class GeometryError(ValueError):
    pass


def _triple(values, name, positive=False):
    out = tuple(float(v) for v in values)
    if len(out) != 3:
        raise GeometryError(f"{name} must have 3 components, got {len(out)}")
    if not all(math.isfinite(v) for v in out):
        raise GeometryError(f"{name} must be finite: {out}")
    if positive and not all(v > 0 for v in out):
        raise GeometryError(f"{name} components must be > 0: {out}")
    return out


@dataclass(frozen=True, eq=False)
class Volume:
    """Scalar image with physical geometry (spacing and origin in mm)."""

    array: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        arr = np.asarray(self.array, dtype=np.float64)
        if arr.ndim != 3:
            raise GeometryError(f"volume must be 3D, got {arr.ndim}D")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite data")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "array", arr)
        object.__setattr__(self, "spacing", _triple(self.spacing, "spacing", positive=True))
        object.__setattr__(self, "origin", _triple(self.origin, "origin"))

    @property
    def dims(self):
        nz, ny, nx = self.array.shape
        return (nx, ny, nz)

    @property
    def data(self):
        """Flat x-fastest view of the intensities."""
        return self.array.ravel()

    @property
    def geometry(self):
        return (self.dims, self.spacing, self.origin)

    def __eq__(self, other):
        if not isinstance(other, Volume):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.array, other.array)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary region of interest on a Volume-compatible grid."""

    array: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)
    origin: tuple = (0.0, 0.0, 0.0)
    _key: bytes = field(default=b"", repr=False)

    def __post_init__(self):
        arr = np.asarray(self.array)
        if arr.ndim != 3:
            raise GeometryError(f"mask must be 3D, got {arr.ndim}D")
        arr = np.ascontiguousarray(arr != 0)
        arr.flags.writeable = False
        object.__setattr__(self, "array", arr)
        object.__setattr__(self, "spacing", _triple(self.spacing, "spacing", positive=True))
        object.__setattr__(self, "origin", _triple(self.origin, "origin"))
        object.__setattr__(self, "_key", np.packbits(arr, axis=None).tobytes())

    @property
    def dims(self):
        nz, ny, nx = self.array.shape
        return (nx, ny, nz)

    @property
    def voxels(self):
        return self.array.ravel()

    @property
    def geometry(self):
        return (self.dims, self.spacing, self.origin)

    @cached_property
    def count(self) -> int:
        return int(np.count_nonzero(self.array))

    @property
    def is_empty(self):
        return self.count == 0

    def key(self):
        """Hashable voxel content (geometry excluded)."""
        return (self.array.shape, self._key)

    def with_array(self, arr):
        return Mask(arr, self.spacing, self.origin)

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.geometry == other.geometry and self._key == other._key

    def __hash__(self):
        return hash((self.geometry, self._key))


def check_same_geometry(a, b):
    if a.geometry != b.geometry:
        raise GeometryError(f"geometry mismatch: {a.geometry} vs {b.geometry}")


def output_dims(dims, spacing, target_spacing):
    out = tuple(int(math.ceil(d * s / t - 1e-9)) for d, s, t in zip(dims, spacing, target_spacing))
    if any(n < 1 for n in out):
        raise GeometryError(f"degenerate output dims {out}")
    return out


def _linear_axis(arr, axis, n_out, step):
    """Linear interpolation along one axis with edge clamping.

    Output sample i sits at input continuous index ``i * step``.
    """
    n_in = arr.shape[axis]
    pos = np.arange(n_out, dtype=np.float64) * step
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    w = pos - lo
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = n_out
    # a + w*(b - a) keeps constants exact
    return a + w.reshape(shape) * (b - a)


def _nearest_index(n_in, n_out, step):
    pos = np.arange(n_out, dtype=np.float64) * step
    idx = np.floor(pos + 0.5).astype(np.intp)
    return np.clip(idx, 0, n_in - 1)


def resample(v, target_spacing, mode=None):
    """Resample a Volume (trilinear) or Mask (nearest) to ``target_spacing``.

    The origin is kept; output voxel centres are placed at
    ``origin + i * target_spacing`` and samples outside the input grid clamp
    to the nearest edge voxel.
    """
    target = _triple(target_spacing, "target_spacing", positive=True)
    if mode is None:
        mode = "mask-nearest" if isinstance(v, Mask) else "image-linear"
    if mode not in ("image-linear", "mask-nearest"):
        raise ValueError(f"unknown resampling mode {mode!r}")
    if isinstance(v, Mask) and mode != "mask-nearest":
        raise ValueError("masks must be resampled with mask-nearest")
    dims = output_dims(v.dims, v.spacing, target)
    if target == v.spacing:
        return v

    arr = v.array
    # numpy axis for x is 2, y is 1, z is 0
    if mode == "image-linear":
        out = arr.astype(np.float64)
        for k in range(3):
            axis = 2 - k
            out = _linear_axis(out, axis, dims[k], target[k] / v.spacing[k])
        out = np.clip(out, arr.min(), arr.max())
    else:
        out = arr
        for k in range(3):
            axis = 2 - k
            out = np.take(out, _nearest_index(v.dims[k], dims[k], target[k] / v.spacing[k]), axis=axis)

    if isinstance(v, Mask):
        return Mask(out, target, v.origin)
    return Volume(out, target, v.origin)


def resample_pair(v, m, target_spacing):
    check_same_geometry(v, m)
    return resample(v, target_spacing, "image-linear"), resample(m, target_spacing, "mask-nearest")

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from ..volume import check_same_geometry


class EmptyMaskError(ValueError):
    pass


# 13 unique offsets (dz, dy, dx) at Chebyshev distance 1, one per +/- pair
DIRECTIONS = tuple(
    (dz, dy, dx)
    for dz in (-1, 0, 1) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
    if (dz, dy, dx) > (0, 0, 0)
)


def bounding_box(arr, pad=1):
    """Slices covering the nonzero region of ``arr`` grown by ``pad``."""
    idx = np.nonzero(arr)
    if len(idx[0]) == 0:
        raise EmptyMaskError("empty mask")
    return tuple(slice(max(int(i.min()) - pad, 0), int(i.max()) + pad + 1) for i in idx)


def pad_to(arr, box, shape, pad=1, fill=0):
    """Crop ``arr`` to ``box`` and pad so every cropped-ROI voxel has all 26
    neighbours inside the returned array."""
    sub = arr[box]
    widths = []
    for s, n in zip(box, shape):
        # bounding_box already grew the box by pad unless it hit the grid edge
        lo = pad if s.start == 0 else 0
        hi = pad if s.stop >= n else 0
        widths.append((lo, hi))
    if any(w != (0, 0) for w in widths):
        sub = np.pad(sub, widths, constant_values=fill)
    return sub


def shifted(a, d, fill=0):
    """``out[v] = a[v + d]``, with ``fill`` where ``v + d`` leaves the array."""
    out = np.full_like(a, fill)
    src = []
    dst = []
    for off, n in zip(d, a.shape):
        if off >= 0:
            src.append(slice(off, n))
            dst.append(slice(0, n - off))
        else:
            src.append(slice(0, n + off))
            dst.append(slice(-off, n))
    out[tuple(dst)] = a[tuple(src)]
    return out


@dataclass(frozen=True)
class DiscretizedROI:
    """Binned intensities of a region of interest.

    ``image`` is an integer array cropped around the ROI with a one-voxel
    background margin; ROI voxels hold labels ``1..n_bins`` and everything
    else is 0.
    """

    image: np.ndarray
    n_bins: int
    bin_width: float
    roi_min: float
    voxel_volume: float = 1.0

    @property
    def roi(self):
        return self.image > 0

    @property
    def labels(self):
        return self.image[self.image > 0]

    @property
    def n_voxels(self):
        return int(np.count_nonzero(self.image))


def bin_labels(values, bin_width, roi_min):
    return np.floor((values - roi_min) / bin_width).astype(np.int64) + 1


def discretize(v, m, bin_width):
    """Fixed-bin-width discretization anchored at the ROI minimum."""
    check_same_geometry(v, m)
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    if m.is_empty:
        raise EmptyMaskError("empty mask")
    box = bounding_box(m.array)
    return discretize_array(
        pad_to(v.array, box, v.array.shape),
        pad_to(m.array, box, m.array.shape, fill=False),
        bin_width,
        voxel_volume=math.prod(v.spacing),
    )


def discretize_array(image, roi, bin_width, voxel_volume=1.0):
    values = image[roi]
    if values.size == 0:
        raise EmptyMaskError("empty mask")
    lo = float(values.min())
    labels = np.zeros(image.shape, dtype=np.int64)
    labels[roi] = bin_labels(values, bin_width, lo)
    n_bins = int(math.floor((float(values.max()) - lo) / bin_width)) + 1
    return DiscretizedROI(labels, n_bins, float(bin_width), lo, float(voxel_volume))

"""Voxel-based shape descriptors.

Surface area counts exposed voxel faces, so it overestimates the area of
smooth objects; for this measure the best attainable Sphericity is that of
an axis-aligned box, ``(pi/6)**(1/3)``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from .discretize import EmptyMaskError

NAMES = (
    "VoxelVolume", "SurfaceArea", "SurfaceVolumeRatio", "Sphericity", "Compactness1",
    "Compactness2", "Maximum3DDiameter", "Maximum2DDiameterSlice",
    "Maximum2DDiameterColumn", "Maximum2DDiameterRow", "MajorAxisLength",
    "MinorAxisLength", "LeastAxisLength", "Elongation", "Flatness",
)

MAX_SPHERICITY = (math.pi / 6) ** (1 / 3)


def exposed_faces(arr):
    """Number of exposed faces per numpy axis (z, y, x)."""
    padded = np.pad(arr, 1)
    counts = []
    for axis in range(3):
        d = np.diff(padded.astype(np.int8), axis=axis)
        counts.append(int(np.count_nonzero(d)))
    return counts


def surface_voxels(arr):
    padded = np.pad(arr, 1)
    interior = padded.copy()
    for axis in range(3):
        interior &= np.roll(padded, 1, axis) & np.roll(padded, -1, axis)
    return arr & ~interior[1:-1, 1:-1, 1:-1]


def _max_distance(points):
    if len(points) < 2:
        return 0.0
    if len(points) > 64:
        try:
            points = points[ConvexHull(points).vertices]
        except Exception:  # flat or degenerate point sets
            pass
    return float(pdist(points).max())


def _max_planar(points, plane_axis):
    best = 0.0
    keep = [a for a in range(3) if a != plane_axis]
    key = points[:, plane_axis]
    order = np.argsort(key, kind="stable")
    key, pts = key[order], points[order]
    splits = np.flatnonzero(np.diff(key)) + 1
    for group in np.split(pts, splits):
        if len(group) > 1:
            best = max(best, _max_distance(group[:, keep]))
    return best


def shape(m):
    """Shape features of a Mask. Returns ``(features, undefined)``."""
    arr = m.array
    if not arr.any():
        raise EmptyMaskError("empty mask")
    sx, sy, sz = m.spacing
    n = int(np.count_nonzero(arr))
    volume = n * sx * sy * sz
    fz, fy, fx = exposed_faces(arr)
    area = fz * sx * sy + fy * sx * sz + fx * sy * sz

    scale = np.array([sz, sy, sx])
    surf = np.argwhere(surface_voxels(arr)) * scale  # columns z, y, x in mm
    pts = np.argwhere(arr) * scale

    lam = np.linalg.eigvalsh(np.cov(pts, rowvar=False, bias=True)) if n > 1 else np.zeros(3)
    lam = np.clip(lam[::-1], 0.0, None)  # descending
    undefined = set()
    if lam[0] > 0:
        elongation = math.sqrt(lam[1] / lam[0])
        flatness = math.sqrt(lam[2] / lam[0])
    else:
        elongation = flatness = 0.0
        undefined |= {"Elongation", "Flatness"}

    out = {
        "VoxelVolume": volume,
        "SurfaceArea": area,
        "SurfaceVolumeRatio": area / volume,
        "Sphericity": (36 * math.pi * volume ** 2) ** (1 / 3) / area,
        "Compactness1": volume / (math.sqrt(math.pi) * area ** 1.5),
        "Compactness2": 36 * math.pi * volume ** 2 / area ** 3,
        "Maximum3DDiameter": _max_distance(surf),
        "Maximum2DDiameterSlice": _max_planar(surf, 0),   # axial: fixed z
        "Maximum2DDiameterColumn": _max_planar(surf, 1),  # coronal: fixed y
        "Maximum2DDiameterRow": _max_planar(surf, 2),     # sagittal: fixed x
        "MajorAxisLength": 4 * math.sqrt(lam[0]),
        "MinorAxisLength": 4 * math.sqrt(lam[1]),
        "LeastAxisLength": 4 * math.sqrt(lam[2]),
        "Elongation": elongation,
        "Flatness": flatness,
    }
    return {k: float(out[k]) for k in NAMES}, undefined

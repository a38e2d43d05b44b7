from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np

from ..volume import check_same_geometry, resample
from . import firstorder, shape as shape_mod, texture
from .discretize import EmptyMaskError, bounding_box, discretize_array, pad_to
from .wavelet import SUBBANDS, subband_arrays

FAMILIES = (
    ("firstorder", firstorder.NAMES),
    ("glcm", texture.GLCM_NAMES),
    ("glszm", texture.GLSZM_NAMES),
    ("glrlm", texture.GLRLM_NAMES),
    ("ngtdm", texture.NGTDM_NAMES),
)


@dataclass(frozen=True)
class ExtractionSettings:
    bin_width: float = 25.0
    spacing: tuple = (1.0, 1.0, 1.0)
    wavelet: bool = True
    glcm_aggregation: str = "average"

    def __post_init__(self):
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        if not self.bin_width > 0:
            raise ValueError("bin_width must be > 0")
        if len(self.spacing) != 3 or not all(s > 0 for s in self.spacing):
            raise ValueError(f"bad target spacing {self.spacing}")
        if self.glcm_aggregation not in ("average", "merged"):
            raise ValueError(f"unknown glcm_aggregation {self.glcm_aggregation!r}")

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in ("bin_width", "spacing", "wavelet", "glcm_aggregation") if k in d}
        return cls(**known)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        d["spacing"] = list(self.spacing)
        return d


@dataclass
class FeatureVector:
    names: list
    values: np.ndarray
    undefined: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.undefined is None:
            self.undefined = np.zeros(len(self.names), dtype=bool)
        if len(self.values) != len(self.names):
            raise ValueError("names and values differ in length")

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def transforms(settings):
    names = ["original"]
    if settings.wavelet:
        names += [f"wavelet-{b}" for b in SUBBANDS]
    return names


def feature_names(settings=ExtractionSettings()):
    names = [f"original_shape_{n}" for n in shape_mod.NAMES]
    for t in transforms(settings):
        for fam, fnames in FAMILIES:
            names += [f"{t}_{fam}_{n}" for n in fnames]
    return names


def parse_name(name):
    """``(transform, family, feature)`` from a feature identifier."""
    transform, family, feature = name.split("_", 2)
    return transform, family, feature


class _Prepared:
    """Resampled image and its transforms, shared by all masks of one case."""

    def __init__(self, v, settings):
        self.settings = settings
        self.volume = resample(v, settings.spacing, "image-linear")
        self.images = {"original": self.volume.array}
        if settings.wavelet:
            for b, a in subband_arrays(self.volume.array).items():
                self.images[f"wavelet-{b}"] = a


def _texture_block(image, roi, settings, voxel_volume):
    d = discretize_array(image, roi, settings.bin_width, voxel_volume)
    fo, u1 = firstorder.first_order(image[roi], d.labels, voxel_volume)
    gc, u2 = texture.glcm_features(d, settings.glcm_aggregation)
    gs, u3 = texture.glszm_features(d)
    gr, u4 = texture.glrlm_features(d)
    ng, u5 = texture.ngtdm_features(d)
    parts = (("firstorder", fo, u1), ("glcm", gc, u2), ("glszm", gs, u3),
             ("glrlm", gr, u4), ("ngtdm", ng, u5))
    values, undefined = [], []
    for fam, vals, und in parts:
        for k, v in vals.items():
            values.append(v)
            undefined.append(k in und)
    return values, undefined


def _extract_prepared(prep, m):
    settings = prep.settings
    mr = resample(m, settings.spacing, "mask-nearest")
    if mr.array.shape != prep.volume.array.shape:
        raise ValueError("mask and image grids differ after resampling")
    if mr.is_empty:
        raise EmptyMaskError("empty mask after resampling")
    voxel_volume = math.prod(mr.spacing)

    sh, und = shape_mod.shape(mr)
    values = list(sh.values())
    undefined = [k in und for k in sh]

    box = bounding_box(mr.array)
    roi = pad_to(mr.array, box, mr.array.shape, fill=False)
    for t in transforms(settings):
        image = pad_to(prep.images[t], box, mr.array.shape)
        v, u = _texture_block(image, roi, settings, voxel_volume)
        values += v
        undefined += u
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        bad = [n for n, x in zip(feature_names(settings), values) if not math.isfinite(x)]
        raise FloatingPointError(f"non-finite features: {bad[:5]}")
    return FeatureVector(feature_names(settings), values, np.asarray(undefined, dtype=bool))


def extract_all(v, m, settings=ExtractionSettings()):
    """Resample, then compute shape features and, per image transform,
    first-order and texture features of the masked region."""
    check_same_geometry(v, m)
    return _extract_prepared(_Prepared(v, settings), m)


def extract_case(v, masks, settings=ExtractionSettings()):
    """FeatureVectors for several masks of the same image; the resampled
    image and its wavelet subbands are computed once."""
    for m in masks:
        check_same_geometry(v, m)
    prep = _Prepared(v, settings)
    return [_extract_prepared(prep, m) for m in masks]


# ---- CSV: case_id,mask_id,<features...>

def write_feature_csv(path, rows, names):
    """``rows`` is an iterable of ``(case_id, mask_id, values)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "mask_id", *names])
        for case_id, mask_id, values in rows:
            w.writerow([case_id, mask_id, *(format(float(x), ".17g") for x in values)])


def read_feature_csv(path):
    """Returns ``(names, [(case_id, mask_id, values)])``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or header[:2] != ["case_id", "mask_id"]:
            raise ValueError(f"{path}: header must start with case_id,mask_id")
        names = header[2:]
        rows = []
        for lineno, row in enumerate(r, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = np.array([float(x) for x in row[2:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            rows.append((row[0], row[1], values))
    return names, rows

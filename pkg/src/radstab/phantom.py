"""Synthetic tumour cohort with a known survival model.

Each case is a soft-edged sphere with a case-specific intensity level,
linear gradient and smoothed noise texture. Survival follows an exponential
Cox model over two image-derived quantities: the tumour intensity level and
the reference-mask volume.
"""
from __future__ import annotations

from dataclasses import asdict
import json
import math
import os

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq

from .config import PhantomSpec, derive_seed
from .nrrd import save_mask, save_volume
from .survival import CoxModel, SurvivalRecord, write_survival_csv
from .volume import Mask, Volume

DRIVER_FEATURES = ("original_firstorder_Mean", "original_shape_VoxelVolume")


def _uniform_moments(a, b, power):
    """Mean and sd of ``X**power`` for ``X ~ U(a, b)``."""
    if b == a:
        return a ** power, 0.0
    m1 = (b ** (power + 1) - a ** (power + 1)) / ((power + 1) * (b - a))
    m2 = (b ** (2 * power + 1) - a ** (2 * power + 1)) / ((2 * power + 1) * (b - a))
    return m1, math.sqrt(max(m2 - m1 ** 2, 0.0))


def driver_standardization(spec):
    """Population mean/sd of the two survival drivers under ``spec``."""
    lv_mean, lv_sd = _uniform_moments(*spec.level_range, 1)
    r_mean3, r_sd3 = _uniform_moments(*spec.radius_range, 3)
    c = 4.0 / 3.0 * math.pi
    return np.array([lv_mean, c * r_mean3]), np.array([max(lv_sd, 1e-12), max(c * r_sd3, 1e-12)])


def make_case(spec, index):
    """``(Volume, reference Mask, truth dict)`` for case ``index``."""
    rng = np.random.default_rng(derive_seed(spec.seed, "phantom", index))
    nx, ny, nz = spec.dims
    sx, sy, sz = spec.spacing
    radius = rng.uniform(*spec.radius_range)
    level = rng.uniform(*spec.level_range)
    noise = rng.uniform(*spec.noise_range)
    grad_dir = rng.normal(size=3)
    grad_dir /= np.linalg.norm(grad_dir)
    grad_amp = spec.gradient_amplitude * rng.uniform()
    centre = np.array([nx * sx, ny * sy, nz * sz]) / 2 + rng.uniform(-1.5, 1.5, size=3)

    z, y, x = np.meshgrid(np.arange(nz) * sz, np.arange(ny) * sy, np.arange(nx) * sx, indexing="ij")
    rel = (x - centre[0], y - centre[1], z - centre[2])
    dist = np.sqrt(rel[0] ** 2 + rel[1] ** 2 + rel[2] ** 2)
    inside = 1.0 / (1.0 + np.exp(-(radius - dist) / spec.edge_width))
    tumour = level + grad_amp * sum(g * r for g, r in zip(grad_dir, rel)) / radius

    texture = ndimage.gaussian_filter(rng.normal(size=dist.shape), 0.8, mode="wrap")
    texture *= noise / texture.std()
    image = spec.background + (tumour - spec.background) * inside + texture
    # float32 storage is the on-disk precision
    image = image.astype(np.float32).astype(np.float64)

    mask = dist <= radius
    volume_mm3 = float(np.count_nonzero(mask) * sx * sy * sz)
    truth = {"radius": radius, "level": level, "noise": noise, "gradient": grad_amp,
             "volume_mm3": volume_mm3}
    return Volume(image, spec.spacing, (0.0, 0.0, 0.0)), Mask(mask, spec.spacing, (0.0, 0.0, 0.0)), truth


def simulate_survival(spec, truths, case_ids):
    """Exponential survival times under the phantom's Cox model with
    exponential censoring tuned to ``spec.censoring_rate`` in expectation."""
    rng = np.random.default_rng(derive_seed(spec.seed, "survival"))
    means, sds = driver_standardization(spec)
    z = (np.array([[t["level"], t["volume_mm3"]] for t in truths]).reshape(-1, 2) - means) / sds
    hazard = spec.baseline_hazard * np.exp(z @ np.asarray(spec.coefficients))
    n = len(truths)
    event_times = rng.exponential(1.0 / hazard) if n else np.zeros(0)
    if spec.censoring_rate > 0 and n:
        lam = brentq(lambda c: np.mean(c / (c + hazard)) - spec.censoring_rate,
                     1e-12 * hazard.min(), 1e6 * hazard.max())
        censor_times = rng.exponential(1.0 / lam, size=n)
    else:
        censor_times = np.full(n, np.inf)
    time = np.minimum(event_times, censor_times)
    time = np.maximum(time, 1e-6)
    event = event_times <= censor_times
    return [SurvivalRecord(c, float(t), bool(e)) for c, t, e in zip(case_ids, time, event)]


def signature(spec):
    """The generating model as a signature over extracted features."""
    means, sds = driver_standardization(spec)
    return CoxModel(list(DRIVER_FEATURES), list(spec.coefficients), means, sds)


def write_cohort(spec, out_dir):
    """Write images/, references/, survival.csv, signature.json, cohort.json."""
    img_dir = os.path.join(out_dir, "images")
    ref_dir = os.path.join(out_dir, "references")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(ref_dir, exist_ok=True)
    case_ids, truths = [], []
    for i in range(spec.n_cases):
        case_id = f"case_{i:04d}"
        v, m, truth = make_case(spec, i)
        save_volume(v, os.path.join(img_dir, f"{case_id}.nrrd"))
        save_mask(m, os.path.join(ref_dir, f"{case_id}.nrrd"))
        case_ids.append(case_id)
        truths.append(truth)
    records = simulate_survival(spec, truths, case_ids)
    write_survival_csv(os.path.join(out_dir, "survival.csv"), records)
    signature(spec).save(os.path.join(out_dir, "signature.json"))
    manifest = {
        "spec": asdict(spec),
        "drivers": list(DRIVER_FEATURES),
        "cases": [dict(case_id=c, **t) for c, t in zip(case_ids, truths)],
    }
    with open(os.path.join(out_dir, "cohort.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest

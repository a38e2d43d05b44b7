"""Texture matrices and their features.

All matrix builders take a :class:`DiscretizedROI` whose ``image`` carries a
one-voxel zero margin, so neighbour lookups at distance 1 never leave the
array. Gray levels run over ``1..n_bins`` including levels absent from the ROI.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .discretize import DIRECTIONS, shifted

GLCM_NAMES = (
    "Autocorrelation", "JointAverage", "ClusterProminence", "ClusterShade",
    "ClusterTendency", "Contrast", "Correlation", "DifferenceAverage",
    "DifferenceEntropy", "DifferenceVariance", "JointEnergy", "JointEntropy",
    "Imc1", "Imc2", "Idm", "Id", "Idmn", "Idn", "InverseVariance",
    "MaximumProbability", "SumEntropy", "SumSquares",
)
GLRLM_NAMES = (
    "ShortRunEmphasis", "LongRunEmphasis", "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized", "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized", "RunPercentage", "GrayLevelVariance",
    "RunVariance", "RunEntropy", "LowGrayLevelRunEmphasis", "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis", "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis", "LongRunHighGrayLevelEmphasis",
)
GLSZM_NAMES = (
    "SmallAreaEmphasis", "LargeAreaEmphasis", "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized", "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized", "ZonePercentage", "GrayLevelVariance",
    "ZoneVariance", "ZoneEntropy", "LowGrayLevelZoneEmphasis", "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis", "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis", "LargeAreaHighGrayLevelEmphasis",
)
NGTDM_NAMES = ("Coarseness", "Contrast", "Busyness", "Complexity", "Strength")

COARSENESS_CAP = 1e6
_CUBE = ndimage.generate_binary_structure(3, 3)


def _xlogx(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def _log2_or_zero(a):
    return np.log2(np.where(a > 0, a, 1.0))


def _entropy_rows(a):
    """Base-2 entropy of each row, with 0 log 0 = 0."""
    return -np.sum(a * _log2_or_zero(a), axis=-1) + 0.0


def _grouped_sums(flat, idx, n):
    """Row-wise sums of ``flat`` grouped by column index ``idx`` into ``n`` bins."""
    rows = flat.shape[0]
    keys = (idx[None, :] + n * np.arange(rows)[:, None]).ravel()
    return np.bincount(keys, weights=flat.ravel(), minlength=rows * n).reshape(rows, n)


# ---------------------------------------------------------------- GLCM

def glcm_matrices(d):
    """Raw (unsymmetrized) co-occurrence counts, shape ``(13, Ng, Ng)``.

    Entry ``[k, i-1, j-1]`` counts voxel pairs ``(v, v + DIRECTIONS[k])``
    with labels ``(i, j)``, both inside the ROI.
    """
    img = d.image
    ng = d.n_bins
    out = np.zeros((len(DIRECTIONS), ng, ng), dtype=np.int64)
    for k, off in enumerate(DIRECTIONS):
        nb = shifted(img, off)
        ok = (img > 0) & (nb > 0)
        idx = (img[ok] - 1) * ng + (nb[ok] - 1)
        out[k] = np.bincount(idx, minlength=ng * ng).reshape(ng, ng)
    return out


def symmetrize(counts):
    """Symmetric normalized matrices; directions without any pair are dropped."""
    p = counts + np.swapaxes(counts, -1, -2)
    total = p.sum(axis=(-1, -2))
    keep = total > 0
    return p[keep] / total[keep, None, None]


def glcm_feature_arrays(p):
    """Features for a stack of normalized symmetric matrices ``(D, Ng, Ng)``.

    Most features are moments of the marginal, sum (``i + j``) and
    difference (``|i - j|``) distributions, so only a few passes touch the
    full matrices. Returns ``(dict name -> array of D values, undefined)``.
    """
    nd, ng, _ = p.shape
    i = np.arange(1, ng + 1, dtype=np.float64)
    flat = p.reshape(nd, -1)
    px = p.sum(axis=2)
    py = p.sum(axis=1)
    ux = px @ i
    uy = py @ i
    sx = np.sqrt(np.maximum(px @ i ** 2 - ux ** 2, 0.0))
    sy = np.sqrt(np.maximum(py @ i ** 2 - uy ** 2, 0.0))

    ii, jj = np.meshgrid(i, i, indexing="ij")
    pdiff = _grouped_sums(flat, np.abs(ii - jj).astype(np.int64).ravel(), ng)
    psum = _grouped_sums(flat, (ii + jj).astype(np.int64).ravel() - 2, 2 * ng - 1)
    kd = np.arange(ng, dtype=np.float64)
    ks = np.arange(2, 2 * ng + 1, dtype=np.float64)

    hxy = _entropy_rows(flat)
    hx = _entropy_rows(px)
    hy = _entropy_rows(py)
    # log(px*py) splits into log px + log py, so both cross entropies reduce to hx + hy
    hxy1 = hxy2 = hx + hy

    autocorr = flat @ (ii * jj).ravel()
    centred = ks[None, :] - (ux + uy)[:, None]
    diff_avg = pdiff @ kd

    undefined = set()
    sxy = sx * sy
    if np.any(sxy <= 0):
        undefined.add("Correlation")
    corr = np.where(sxy > 0, (autocorr - ux * uy) / np.where(sxy > 0, sxy, 1.0), 1.0)
    div = np.maximum(hx, hy)
    if np.any(div <= 0):
        undefined |= {"Imc1", "Imc2"}
    imc1 = np.where(div > 0, (hxy - hxy1) / np.where(div > 0, div, 1.0), 0.0)
    imc2 = np.sqrt(np.maximum(1.0 - np.exp(-2.0 * (hxy2 - hxy)), 0.0))

    inv_var = pdiff[:, 1:] @ (1.0 / kd[1:] ** 2) if ng > 1 else np.zeros(nd)

    out = {
        "Autocorrelation": autocorr,
        "JointAverage": ux,
        "ClusterProminence": np.sum(psum * centred ** 4, axis=1),
        "ClusterShade": np.sum(psum * centred ** 3, axis=1),
        "ClusterTendency": np.sum(psum * centred ** 2, axis=1),
        "Contrast": pdiff @ kd ** 2,
        "Correlation": corr,
        "DifferenceAverage": diff_avg,
        "DifferenceEntropy": _entropy_rows(pdiff),
        "DifferenceVariance": np.sum(pdiff * (kd[None, :] - diff_avg[:, None]) ** 2, axis=1),
        "JointEnergy": np.sum(flat ** 2, axis=1),
        "JointEntropy": hxy,
        "Imc1": imc1,
        "Imc2": imc2,
        "Idm": pdiff @ (1 / (1 + kd ** 2)),
        "Id": pdiff @ (1 / (1 + kd)),
        "Idmn": pdiff @ (1 / (1 + kd ** 2 / ng ** 2)),
        "Idn": pdiff @ (1 / (1 + kd / ng)),
        "InverseVariance": inv_var,
        "MaximumProbability": flat.max(axis=1),
        "SumEntropy": _entropy_rows(psum),
        "SumSquares": np.sum(px * (i[None, :] - ux[:, None]) ** 2, axis=1),
    }
    return out, undefined


def glcm_features(d, aggregation="average"):
    """22 GLCM features averaged over the 13 directions.

    ``aggregation="merged"`` sums the 13 count matrices first and evaluates
    the features once. An ROI without any neighbouring voxel pair yields all
    zeros, every feature marked undefined.
    """
    counts = glcm_matrices(d)
    if aggregation == "merged":
        counts = counts.sum(axis=0, keepdims=True)
    elif aggregation != "average":
        raise ValueError(f"unknown GLCM aggregation {aggregation!r}")
    p = symmetrize(counts)
    if len(p) == 0:
        return {k: 0.0 for k in GLCM_NAMES}, set(GLCM_NAMES)
    arrays, undefined = glcm_feature_arrays(p)
    return {k: float(np.mean(arrays[k])) for k in GLCM_NAMES}, undefined


# ------------------------------------------------------- run / zone matrices

def _size_matrix_features(m, n_voxels):
    """Shared emphasis/non-uniformity/variance/entropy features of a
    gray-level x size matrix (column ``j`` holds size ``j + 1``).

    ``m`` may carry a leading stack axis; the result then has one row of 16
    values per matrix.
    """
    m = np.asarray(m, dtype=np.float64)
    stacked = m.ndim == 3
    if not stacked:
        m = m[None]
    _, ng, ns = m.shape
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, ns + 1, dtype=np.float64)[None, :]
    nz = m.sum(axis=(1, 2))
    p = m / nz[:, None, None]

    def wsum(w):
        return np.sum(p * w, axis=(1, 2))

    mu_i = wsum(i)
    mu_j = wsum(j)
    gln = np.sum(m.sum(axis=2) ** 2, axis=1) / nz
    sn = np.sum(m.sum(axis=1) ** 2, axis=1) / nz
    rows = np.stack([
        wsum(1 / j ** 2),
        wsum(j ** 2),
        gln,
        gln / nz,
        sn,
        sn / nz,
        nz / n_voxels,
        np.sum(p * (i[None] - mu_i[:, None, None]) ** 2, axis=(1, 2)),
        np.sum(p * (j[None] - mu_j[:, None, None]) ** 2, axis=(1, 2)),
        _entropy_rows(p.reshape(len(p), -1)),
        wsum(1 / i ** 2),
        wsum(i ** 2),
        wsum(1 / (i ** 2 * j ** 2)),
        wsum(i ** 2 / j ** 2),
        wsum(j ** 2 / i ** 2),
        wsum(i ** 2 * j ** 2),
    ], axis=1)
    return rows if stacked else rows[0]


def run_lengths(d, off):
    """``(labels, lengths)`` of every maximal run along direction ``off``."""
    img = d.image
    roi = img > 0
    same = roi & (shifted(img, off) == img)
    back = tuple(-o for o in off)
    starts = roi & ~shifted(same, back, fill=False)
    length = roi.astype(np.int64)
    # length[v] = 1 + same[v] * length[v + off]; converges after the longest run
    for _ in range(max(img.shape)):
        nxt = np.where(same, 1 + shifted(length, off), length)
        if np.array_equal(nxt, length):
            break
        length = nxt
    return img[starts], length[starts]


def glrlm_matrices(d):
    """Run-length counts per direction: list of ``(Ng, max_len)`` arrays."""
    out = []
    for off in DIRECTIONS:
        labels, lengths = run_lengths(d, off)
        mat = np.zeros((d.n_bins, int(lengths.max())), dtype=np.int64)
        np.add.at(mat, (labels - 1, lengths - 1), 1)
        out.append(mat)
    return out


def glrlm_features(d):
    mats = glrlm_matrices(d)
    width = max(m.shape[1] for m in mats)
    stack = np.zeros((len(mats), d.n_bins, width))
    for k, m in enumerate(mats):
        stack[k, :, :m.shape[1]] = m
    vals = _size_matrix_features(stack, d.n_voxels).mean(axis=0)
    return {k: float(v) for k, v in zip(GLRLM_NAMES, vals)}, set()


def zones(d):
    """``(labels, sizes)`` of every 26-connected equal-label zone."""
    labels, sizes = [], []
    img = d.image
    for g in np.unique(img[img > 0]):
        lab, n = ndimage.label(img == g, structure=_CUBE)
        s = np.bincount(lab.ravel(), minlength=n + 1)[1:]
        labels.append(np.full(n, g))
        sizes.append(s)
    return np.concatenate(labels), np.concatenate(sizes)


def glszm_matrix(d):
    labels, sizes = zones(d)
    mat = np.zeros((d.n_bins, int(sizes.max())), dtype=np.int64)
    np.add.at(mat, (labels - 1, sizes - 1), 1)
    return mat


def glszm_features(d):
    vals = _size_matrix_features(glszm_matrix(d), d.n_voxels)
    return {k: float(v) for k, v in zip(GLSZM_NAMES, vals)}, set()


# ---------------------------------------------------------------- NGTDM

def ngtdm_matrix(d):
    """Per-level ``(n_i, p_i, s_i)`` as three arrays of length Ng.

    Only ROI voxels with at least one ROI neighbour (26-neighbourhood)
    contribute.
    """
    img = d.image
    roi = img > 0
    vals = img.astype(np.float64)
    total = np.zeros_like(vals)
    count = np.zeros_like(vals)
    for dz in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dz == dy == dx == 0:
                    continue
                total += shifted(vals, (dz, dy, dx))
                count += shifted(roi, (dz, dy, dx), fill=False)
    ok = roi & (count > 0)
    g = img[ok]
    a = np.abs(vals[ok] - total[ok] / count[ok])
    ng = d.n_bins
    n = np.bincount(g, minlength=ng + 1)[1:].astype(np.float64)
    s = np.bincount(g, weights=a, minlength=ng + 1)[1:]
    nvp = n.sum()
    p = n / nvp if nvp > 0 else n
    return n, p, s


def ngtdm_features(d):
    n, p, s = ngtdm_matrix(d)
    undefined = set()
    nvp = n.sum()
    if nvp == 0:
        return {"Coarseness": COARSENESS_CAP, "Contrast": 0.0, "Busyness": 0.0,
                "Complexity": 0.0, "Strength": 0.0}, set(NGTDM_NAMES)
    lv = np.flatnonzero(p > 0)
    i = (lv + 1).astype(np.float64)
    pi, si = p[lv], s[lv]
    ngp = len(lv)
    ps = float(np.sum(pi * si))
    s_sum = float(np.sum(si))
    di = i[:, None] - i[None, :]

    if ps > 0:
        coarseness = 1.0 / ps
    else:
        coarseness = COARSENESS_CAP
        undefined.add("Coarseness")
    coarseness = min(coarseness, COARSENESS_CAP)

    if ngp > 1:
        contrast = np.sum(pi[:, None] * pi[None, :] * di ** 2) / (ngp * (ngp - 1)) * s_sum / nvp
    else:
        contrast = 0.0
    bden = np.sum(np.abs(i[:, None] * pi[:, None] - i[None, :] * pi[None, :]))
    if bden > 0:
        busyness = ps / bden
    else:
        busyness = 0.0
        undefined.add("Busyness")
    complexity = np.sum(np.abs(di) * (pi[:, None] * si[:, None] + pi[None, :] * si[None, :])
                        / (pi[:, None] + pi[None, :])) / nvp
    if s_sum > 0:
        strength = np.sum((pi[:, None] + pi[None, :]) * di ** 2) / s_sum
    else:
        strength = 0.0
        undefined.add("Strength")
    out = {"Coarseness": coarseness, "Contrast": contrast, "Busyness": busyness,
           "Complexity": complexity, "Strength": strength}
    return {k: float(out[k]) for k in NGTDM_NAMES}, undefined

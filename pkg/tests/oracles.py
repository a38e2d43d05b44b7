"""Slow reference implementations used as test oracles.

Everything here works voxel by voxel on a plain label array ``lab`` (0 =
outside the ROI, 1..ng inside) and follows the textbook definitions
directly, without sharing code with the package.
"""
import itertools
import math
from collections import deque

import numpy as np


def offsets13():
    """One offset per +/- pair: the first nonzero component is positive."""
    out = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        nz = [c for c in d if c != 0]
        if nz and nz[0] > 0:
            out.append(d)
    return out


def inside(shape, v):
    return all(0 <= c < n for c, n in zip(v, shape))


def roi_voxels(lab):
    return [tuple(int(c) for c in v) for v in zip(*np.nonzero(lab))]


# ------------------------------------------------------------------ GLCM

def glcm_counts(lab, ng):
    out = {}
    for d in offsets13():
        m = np.zeros((ng, ng), dtype=np.int64)
        for v in roi_voxels(lab):
            w = tuple(a + b for a, b in zip(v, d))
            if inside(lab.shape, w) and lab[w] > 0:
                m[lab[v] - 1, lab[w] - 1] += 1
        out[d] = m
    return out


def _h(values):
    return -sum(p * math.log2(p) for p in values if p > 0)


def glcm_features_one(p):
    ng = p.shape[0]
    lv = range(1, ng + 1)
    P = lambda i, j: p[i - 1, j - 1]  # noqa: E731
    px = [sum(P(i, j) for j in lv) for i in lv]
    py = [sum(P(i, j) for i in lv) for j in lv]
    ux = sum(i * P(i, j) for i in lv for j in lv)
    uy = sum(j * P(i, j) for i in lv for j in lv)
    sx = math.sqrt(sum((i - ux) ** 2 * P(i, j) for i in lv for j in lv))
    sy = math.sqrt(sum((j - uy) ** 2 * P(i, j) for i in lv for j in lv))
    pdiff = [sum(P(i, j) for i in lv for j in lv if abs(i - j) == k) for k in range(ng)]
    psum = {k: sum(P(i, j) for i in lv for j in lv if i + j == k) for k in range(2, 2 * ng + 1)}
    hxy = _h([P(i, j) for i in lv for j in lv])
    hx, hy = _h(px), _h(py)
    hxy1 = -sum(P(i, j) * math.log2(px[i - 1] * py[j - 1]) for i in lv for j in lv if P(i, j) > 0)
    hxy2 = -sum(px[i - 1] * py[j - 1] * math.log2(px[i - 1] * py[j - 1])
                for i in lv for j in lv if px[i - 1] * py[j - 1] > 0)
    da = sum(k * pdiff[k] for k in range(ng))
    s4 = lambda e: sum((i + j - ux - uy) ** e * P(i, j) for i in lv for j in lv)  # noqa: E731
    auto = sum(i * j * P(i, j) for i in lv for j in lv)
    return {
        "Autocorrelation": auto,
        "JointAverage": ux,
        "ClusterProminence": s4(4),
        "ClusterShade": s4(3),
        "ClusterTendency": s4(2),
        "Contrast": sum((i - j) ** 2 * P(i, j) for i in lv for j in lv),
        "Correlation": (auto - ux * uy) / (sx * sy) if sx * sy > 0 else 1.0,
        "DifferenceAverage": da,
        "DifferenceEntropy": _h(pdiff),
        "DifferenceVariance": sum((k - da) ** 2 * pdiff[k] for k in range(ng)),
        "JointEnergy": sum(P(i, j) ** 2 for i in lv for j in lv),
        "JointEntropy": hxy,
        "Imc1": (hxy - hxy1) / max(hx, hy) if max(hx, hy) > 0 else 0.0,
        "Imc2": math.sqrt(max(0.0, 1 - math.exp(-2 * (hxy2 - hxy)))),
        "Idm": sum(P(i, j) / (1 + (i - j) ** 2) for i in lv for j in lv),
        "Id": sum(P(i, j) / (1 + abs(i - j)) for i in lv for j in lv),
        "Idmn": sum(P(i, j) / (1 + (i - j) ** 2 / ng ** 2) for i in lv for j in lv),
        "Idn": sum(P(i, j) / (1 + abs(i - j) / ng) for i in lv for j in lv),
        "InverseVariance": sum(P(i, j) / (i - j) ** 2 for i in lv for j in lv if i != j),
        "MaximumProbability": max(P(i, j) for i in lv for j in lv),
        "SumEntropy": _h(psum.values()),
        "SumSquares": sum((i - ux) ** 2 * P(i, j) for i in lv for j in lv),
    }


def glcm_features(lab, ng):
    per_dir = []
    for m in glcm_counts(lab, ng).values():
        s = m + m.T
        if s.sum() > 0:
            per_dir.append(glcm_features_one(s / s.sum()))
    return {k: sum(f[k] for f in per_dir) / len(per_dir) for k in per_dir[0]}


# ----------------------------------------------------------- runs / zones

def runs(lab, d):
    """List of (label, length) for maximal runs along direction d."""
    out = []
    for v in roi_voxels(lab):
        prev = tuple(a - b for a, b in zip(v, d))
        if inside(lab.shape, prev) and lab[prev] == lab[v]:
            continue
        n, w = 0, v
        while inside(lab.shape, w) and lab[w] == lab[v]:
            n += 1
            w = tuple(a + b for a, b in zip(w, d))
        out.append((int(lab[v]), n))
    return out


def zones(lab):
    """List of (label, size) for 26-connected equal-label zones (BFS)."""
    seen = np.zeros(lab.shape, bool)
    out = []
    nbrs = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
    for v in roi_voxels(lab):
        if seen[v]:
            continue
        g, size = lab[v], 0
        seen[v] = True
        q = deque([v])
        while q:
            u = q.popleft()
            size += 1
            for d in nbrs:
                w = tuple(a + b for a, b in zip(u, d))
                if inside(lab.shape, w) and not seen[w] and lab[w] == g:
                    seen[w] = True
                    q.append(w)
        out.append((int(g), size))
    return out


def size_matrix(pairs, ng):
    width = max(s for _, s in pairs)
    m = np.zeros((ng, width), dtype=np.int64)
    for g, s in pairs:
        m[g - 1, s - 1] += 1
    return m


def size_features(m, n_voxels):
    """Shared GLRLM/GLSZM feature formulas, straight double sums."""
    ng, ns = m.shape
    nz = float(m.sum())
    cells = [(i, j, m[i - 1, j - 1] / nz) for i in range(1, ng + 1) for j in range(1, ns + 1)]
    mu_i = sum(i * p for i, j, p in cells)
    mu_j = sum(j * p for i, j, p in cells)
    gln = sum(float(m[i].sum()) ** 2 for i in range(ng)) / nz
    sn = sum(float(m[:, j].sum()) ** 2 for j in range(ns)) / nz
    return [
        sum(p / j ** 2 for i, j, p in cells),
        sum(p * j ** 2 for i, j, p in cells),
        gln, gln / nz, sn, sn / nz,
        nz / n_voxels,
        sum(p * (i - mu_i) ** 2 for i, j, p in cells),
        sum(p * (j - mu_j) ** 2 for i, j, p in cells),
        _h([p for _, _, p in cells]),
        sum(p / i ** 2 for i, j, p in cells),
        sum(p * i ** 2 for i, j, p in cells),
        sum(p / (i ** 2 * j ** 2) for i, j, p in cells),
        sum(p * i ** 2 / j ** 2 for i, j, p in cells),
        sum(p * j ** 2 / i ** 2 for i, j, p in cells),
        sum(p * i ** 2 * j ** 2 for i, j, p in cells),
    ]


def glrlm_features(lab, ng):
    n = len(roi_voxels(lab))
    rows = [size_features(size_matrix(runs(lab, d), ng), n) for d in offsets13()]
    return [sum(r[k] for r in rows) / len(rows) for k in range(16)]


def glszm_features(lab, ng):
    return size_features(size_matrix(zones(lab), ng), len(roi_voxels(lab)))


# ------------------------------------------------------------------ NGTDM

def ngtdm(lab, ng):
    n = np.zeros(ng)
    s = np.zeros(ng)
    nbrs = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
    for v in roi_voxels(lab):
        vals = []
        for d in nbrs:
            w = tuple(a + b for a, b in zip(v, d))
            if inside(lab.shape, w) and lab[w] > 0:
                vals.append(lab[w])
        if vals:
            i = lab[v]
            n[i - 1] += 1
            s[i - 1] += abs(i - sum(vals) / len(vals))
    return n, s


def ngtdm_features(lab, ng, cap=1e6):
    n, s = ngtdm(lab, ng)
    nvp = n.sum()
    p = n / nvp
    lv = [i for i in range(1, ng + 1) if p[i - 1] > 0]
    P = lambda i: p[i - 1]  # noqa: E731
    S = lambda i: s[i - 1]  # noqa: E731
    ngp = len(lv)
    ps = sum(P(i) * S(i) for i in lv)
    ssum = sum(S(i) for i in lv)
    coarse = min(1 / ps, cap) if ps > 0 else cap
    contrast = (sum(P(i) * P(j) * (i - j) ** 2 for i in lv for j in lv) / (ngp * (ngp - 1)) * ssum / nvp
                if ngp > 1 else 0.0)
    bden = sum(abs(i * P(i) - j * P(j)) for i in lv for j in lv)
    busy = ps / bden if bden > 0 else 0.0
    cplx = sum(abs(i - j) * (P(i) * S(i) + P(j) * S(j)) / (P(i) + P(j)) for i in lv for j in lv) / nvp
    strength = sum((P(i) + P(j)) * (i - j) ** 2 for i in lv for j in lv) / ssum if ssum > 0 else 0.0
    return {"Coarseness": coarse, "Contrast": contrast, "Busyness": busy,
            "Complexity": cplx, "Strength": strength}


# ------------------------------------------------------------ first order

def percentile(sorted_x, q):
    pos = (len(sorted_x) - 1) * q / 100
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_x) - 1)
    return sorted_x[lo] + (pos - lo) * (sorted_x[hi] - sorted_x[lo])


def first_order(values, bin_width):
    x = sorted(float(v) for v in values)
    n = len(x)
    mean = x[0] if x[0] == x[-1] else math.fsum(x) / n
    var = math.fsum((v - mean) ** 2 for v in x) / n
    p10, p90 = percentile(x, 10), percentile(x, 90)
    robust = [v for v in x if p10 <= v <= p90]
    rmean = math.fsum(robust) / len(robust) if robust else 0.0
    labels = [math.floor((v - x[0]) / bin_width) + 1 for v in x]
    hist = [labels.count(g) / n for g in sorted(set(labels))]
    return {
        "Energy": math.fsum(v * v for v in x),
        "Entropy": _h(hist),
        "Minimum": x[0], "Maximum": x[-1],
        "10Percentile": p10, "90Percentile": p90,
        "Mean": mean, "Median": percentile(x, 50),
        "InterquartileRange": percentile(x, 75) - percentile(x, 25),
        "Range": x[-1] - x[0],
        "MeanAbsoluteDeviation": math.fsum(abs(v - mean) for v in x) / n,
        "RobustMeanAbsoluteDeviation": math.fsum(abs(v - rmean) for v in robust) / len(robust) if robust else 0.0,
        "RootMeanSquared": math.sqrt(math.fsum(v * v for v in x) / n),
        "Variance": var,
        "Skewness": math.fsum((v - mean) ** 3 for v in x) / n / var ** 1.5 if var > 0 else 0.0,
        "Kurtosis": math.fsum((v - mean) ** 4 for v in x) / n / var ** 2 if var > 0 else 0.0,
        "Uniformity": sum(h * h for h in hist),
    }


# ----------------------------------------------------------------- wavelet

HAAR = {"L": (1 / math.sqrt(2), 1 / math.sqrt(2)), "H": (-1 / math.sqrt(2), 1 / math.sqrt(2))}


def haar_band(arr, name):
    """Direct periodic filter-bank evaluation; ``name`` letters are x, y, z."""
    fx, fy, fz = (HAAR[c] for c in name)
    nz, ny, nx = arr.shape
    out = np.zeros(arr.shape)
    for z, y, x in itertools.product(range(nz), range(ny), range(nx)):
        acc = 0.0
        for a, b, c in itertools.product((0, 1), repeat=3):
            acc += fx[a] * fy[b] * fz[c] * arr[(z + c) % nz, (y + b) % ny, (x + a) % nx]
        out[z, y, x] = acc
    return out


# ---------------------------------------------------------------- survival

def cindex(risk, time, event):
    num = den = 0.0
    n = len(risk)
    for i in range(n):
        for j in range(n):
            if time[i] < time[j] and event[i]:
                den += 1
                if risk[i] > risk[j]:
                    num += 1
                elif risk[i] == risk[j]:
                    num += 0.5
    return num / den


def anova_icc(x):
    """ICC(1,1) from a textbook two-pass one-way ANOVA."""
    x = np.asarray(x, dtype=np.float64)
    n, k = x.shape
    grand = x.sum() / (n * k)
    row_means = [sum(r) / k for r in x]
    ssb = k * sum((m - grand) ** 2 for m in row_means)
    ssw = sum((v - m) ** 2 for r, m in zip(x, row_means) for v in r)
    msb = ssb / (n - 1)
    msw = ssw / (n * (k - 1))
    return (msb - msw) / (msb + (k - 1) * msw)


# ----------------------------------------------------------------- inputs

def random_roi(rng, n=6, fill=0.6, levels=6, bin_width=25.0):
    """Random ``n^3`` image/mask pair plus the oracle label array.

    Intensities are spread over ``levels`` bins so every matrix has several
    gray levels; at least one voxel is inside the ROI.
    """
    roi = rng.random((n, n, n)) < fill
    roi[tuple(rng.integers(0, n, 3))] = True
    image = rng.uniform(-50.0, -50.0 + levels * bin_width, (n, n, n))
    vals = image[roi]
    lo = vals.min()
    lab = np.zeros((n, n, n), dtype=np.int64)
    lab[roi] = np.floor((vals - lo) / bin_width).astype(np.int64) + 1
    ng = int(math.floor((vals.max() - lo) / bin_width)) + 1
    return image, roi, lab, ng


def close(a, b, rel=1e-10, floor=1e-12):
    """Relative agreement; ``floor`` only matters for values that are 0."""
    return abs(a - b) <= rel * max(abs(a), abs(b)) + floor

from __future__ import annotations

import numpy as np

NAMES = (
    "Energy", "TotalEnergy", "Entropy", "Minimum", "10Percentile", "90Percentile",
    "Maximum", "Mean", "Median", "InterquartileRange", "Range", "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation", "RootMeanSquared", "Skewness", "Kurtosis",
    "Variance", "Uniformity",
)


def first_order(values, labels, voxel_volume=1.0):
    """Intensity statistics of the ROI.

    ``values`` are the raw ROI intensities, ``labels`` their bin labels (used
    for Entropy and Uniformity only). Returns ``(features, undefined)``.
    Skewness and Kurtosis of a flat ROI, and the robust deviation when no
    value lies in [P10, P90], are reported as 0 and marked undefined.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    p = np.bincount(labels)[1:] / n
    p = p[p > 0]

    # a flat ROI must give exactly zero spread, not summation round-off
    mean = x[0] if x.min() == x.max() else x.mean()
    dev = x - mean
    m2 = np.mean(dev ** 2)
    p10, p25, median, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    robust = x[(x >= p10) & (x <= p90)]
    energy = float(np.sum(x ** 2))

    undefined = set()
    if m2 > 0:
        skew = np.mean(dev ** 3) / m2 ** 1.5
        kurt = np.mean(dev ** 4) / m2 ** 2
    else:
        skew = kurt = 0.0
        undefined |= {"Skewness", "Kurtosis"}
    if robust.size:
        rmad = np.mean(np.abs(robust - robust.mean()))
    else:
        # tiny ROIs can leave no value inside [P10, P90]
        rmad = 0.0
        undefined.add("RobustMeanAbsoluteDeviation")

    out = {
        "Energy": energy,
        "TotalEnergy": voxel_volume * energy,
        "Entropy": float(-np.sum(p * np.log2(p))) + 0.0,
        "Minimum": x.min(),
        "10Percentile": p10,
        "90Percentile": p90,
        "Maximum": x.max(),
        "Mean": mean,
        "Median": median,
        "InterquartileRange": p75 - p25,
        "Range": x.max() - x.min(),
        "MeanAbsoluteDeviation": np.mean(np.abs(dev)),
        "RobustMeanAbsoluteDeviation": rmad,
        "RootMeanSquared": np.sqrt(energy / n),
        "Skewness": skew,
        "Kurtosis": kurt,
        "Variance": m2,
        "Uniformity": float(np.sum(p ** 2)),
    }
    return {k: float(out[k]) for k in NAMES}, undefined

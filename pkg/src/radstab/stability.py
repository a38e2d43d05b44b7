"""Per-feature agreement across segmentations (ICC), stability ranking,
feature filtering and mask averaging."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import json

import numpy as np

from .features.extract import parse_name, read_feature_csv


@dataclass
class FeatureTable:
    """``values[case, mask, feature]`` with matching undefined flags."""

    case_ids: list
    mask_ids: list
    feature_names: list
    values: np.ndarray
    undefined_flags: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError("values must be a case x mask x feature array")
        n, k, p = self.values.shape
        if len(self.case_ids) != n or len(self.feature_names) != p:
            raise ValueError("case_ids / feature_names do not match values")
        if len(self.mask_ids) != n or any(len(m) != k for m in self.mask_ids):
            raise ValueError("every case needs the same number of masks")
        if len(set(self.feature_names)) != p:
            raise ValueError("duplicate feature names")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite feature values")
        if self.undefined_flags is None:
            self.undefined_flags = np.zeros(self.values.shape, dtype=bool)

    @property
    def shape(self):
        return self.values.shape

    def column(self, name):
        return self.values[:, :, self.feature_names.index(name)]

    def subset_cases(self, case_ids):
        idx = [self.case_ids.index(c) for c in case_ids]
        return FeatureTable([self.case_ids[i] for i in idx], [self.mask_ids[i] for i in idx],
                            list(self.feature_names), self.values[idx], self.undefined_flags[idx])

    @classmethod
    def from_rows(cls, names, rows, flags=None):
        """Build from ``(case_id, mask_id, values)`` rows, grouped by case in
        first-appearance order."""
        order, by_case, by_flags = [], {}, {}
        for n, (case_id, mask_id, values) in enumerate(rows):
            if case_id not in by_case:
                order.append(case_id)
                by_case[case_id] = []
                by_flags[case_id] = []
            by_case[case_id].append((mask_id, values))
            by_flags[case_id].append(flags[n] if flags is not None else np.zeros(len(names), bool))
        k = {len(v) for v in by_case.values()}
        if len(k) > 1:
            raise ValueError(f"cases have different mask counts: {sorted(k)}")
        values = np.array([[v for _, v in by_case[c]] for c in order]).reshape(len(order), -1, len(names))
        und = np.array([by_flags[c] for c in order], dtype=bool).reshape(values.shape)
        masks = [[m for m, _ in by_case[c]] for c in order]
        return cls(order, masks, list(names), values, und)

    @classmethod
    def from_csv(cls, path):
        names, rows = read_feature_csv(path)
        return cls.from_rows(names, rows)

    def rows(self):
        for c, case_id in enumerate(self.case_ids):
            for j, mask_id in enumerate(self.mask_ids[c]):
                yield case_id, mask_id, self.values[c, j]


def _anova_oneway(x):
    n, k = x.shape
    # within-row deviations taken from each row's first value, so constant
    # rows contribute exactly zero
    d = x - x[:, :1]
    ssw = float(np.sum((d - d.mean(axis=1)[:, None]) ** 2))
    row_means = x[:, 0] + d.mean(axis=1)
    ssb = float(k * np.sum((row_means - row_means.mean()) ** 2))
    return ssb / (n - 1), ssw / (n * (k - 1))


def icc_oneway(x):
    """One-way random-effects, single-measure ICC(1,1) of an
    ``n_cases x k`` matrix. Returns NaN when all values are identical."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError(f"need at least 2 cases and 2 masks, got shape {x.shape}")
    k = x.shape[1]
    msb, msw = _anova_oneway(x)
    if msb == 0 and msw == 0:
        return float("nan")
    return (msb - msw) / (msb + (k - 1) * msw)


def icc_twoway(x):
    """Two-way random-effects, absolute-agreement ICC(2,1)."""
    x = np.asarray(x, dtype=np.float64)
    n, k = x.shape
    if n < 2 or k < 2:
        raise ValueError(f"need at least 2 cases and 2 masks, got shape {x.shape}")
    d = x - x[0, 0]
    grand = d.mean()
    ssr = k * np.sum((d.mean(axis=1) - grand) ** 2)
    ssc = n * np.sum((d.mean(axis=0) - grand) ** 2)
    sse = np.sum((d - grand) ** 2) - ssr - ssc
    msr, msc, mse = ssr / (n - 1), ssc / (k - 1), max(sse, 0.0) / ((n - 1) * (k - 1))
    den = msr + (k - 1) * mse + k * (msc - mse) / n
    if den == 0:
        return float("nan")
    return (msr - mse) / den


ICC_KINDS = {"icc1": icc_oneway, "icc2": icc_twoway}


@dataclass
class ICCReport:
    feature_names: list
    icc: np.ndarray
    stability_rank: np.ndarray
    retained: np.ndarray
    cutoff: float

    @property
    def undefined(self):
        return np.isnan(self.icc)

    @property
    def retained_fraction(self):
        return float(np.mean(self.retained))

    @property
    def below_cutoff_fraction(self):
        return 1.0 - self.retained_fraction

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "icc", "stability_rank", "retained"])
            for name, v, r, keep in zip(self.feature_names, self.icc, self.stability_rank, self.retained):
                w.writerow([name, format(float(v), ".17g"), int(r), int(bool(keep))])

    @classmethod
    def read_csv(cls, path, cutoff=float("nan")):
        names, icc, rank, keep = [], [], [], []
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header != ["feature", "icc", "stability_rank", "retained"]:
                raise ValueError(f"{path}: unexpected header {header}")
            for lineno, row in enumerate(r, start=2):
                try:
                    names.append(row[0])
                    icc.append(float(row[1]))
                    rank.append(int(row[2]))
                    keep.append(row[3] in ("1", "true", "True"))
                except (IndexError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
        return cls(names, np.array(icc), np.array(rank), np.array(keep, dtype=bool), cutoff)


def stability_ranks(names, icc):
    """Rank 1 = highest ICC; ties by name; undefined (NaN) ICCs rank last."""
    icc = np.asarray(icc, dtype=np.float64)
    defined = ~np.isnan(icc)
    order = sorted(range(len(names)), key=lambda f: (not defined[f], -icc[f] if defined[f] else 0.0, names[f]))
    ranks = np.empty(len(names), dtype=np.int64)
    ranks[order] = np.arange(1, len(names) + 1)
    return ranks


def icc_report(t, cutoff=0.9, kind="icc1"):
    n, k, p = t.shape
    if n < 2 or k < 2 or p < 1:
        raise ValueError(f"degenerate table {t.shape}: need >= 2 cases, >= 2 masks, >= 1 feature")
    fn = ICC_KINDS[kind]
    icc = np.array([fn(t.values[:, :, f]) for f in range(p)])
    retained = np.where(np.isnan(icc), False, icc >= cutoff)
    return ICCReport(list(t.feature_names), icc, stability_ranks(t.feature_names, icc), retained, cutoff)


def average_over_masks(t, retained):
    retained = np.asarray(retained, dtype=bool)
    if not retained.any():
        raise ValueError("no retained features")
    return t.values[:, :, retained].mean(axis=1)


def summarize(report):
    """ICC distribution grouped by feature family and by image transform."""

    def stats(values):
        v = values[~np.isnan(values)]
        if len(v) == 0:
            return {"n": 0, "n_undefined": int(len(values))}
        q = np.percentile(v, [0, 25, 50, 75, 100])
        return {
            "n": int(len(v)),
            "n_undefined": int(len(values) - len(v)),
            "min": float(q[0]), "q1": float(q[1]), "median": float(q[2]),
            "q3": float(q[3]), "max": float(q[4]),
            "fraction_below_cutoff": float(np.mean(v < report.cutoff)),
        }

    fam, trans = {}, {}
    for name, v in zip(report.feature_names, report.icc):
        t, f, _ = parse_name(name)
        fam.setdefault(f, []).append(v)
        trans.setdefault("wavelet" if t.startswith("wavelet") else t, []).append(v)
        if t.startswith("wavelet"):
            trans.setdefault(t, []).append(v)
    return {
        "cutoff": report.cutoff,
        "n_features": len(report.feature_names),
        "fraction_below_cutoff": float(np.mean(~report.retained)),
        "by_family": {k: stats(np.array(v)) for k, v in sorted(fam.items())},
        "by_transform": {k: stats(np.array(v)) for k, v in sorted(trans.items())},
    }


def write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def stability_vs_prognosis(t, report, surv):
    """Per feature: stability rank, univariate cindex of the mask-averaged
    value (larger value = higher risk) and its orientation-free max(c, 1-c)."""
    from .survival import align, cindex

    times, events = align(t.case_ids, surv)
    means = t.values.mean(axis=1)
    rows = []
    for f, name in enumerate(t.feature_names):
        c = cindex(means[:, f], times, events)
        rows.append((name, int(report.stability_rank[f]), c, max(c, 1.0 - c)))
    return rows


def write_stability_vs_prognosis(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "stability_rank", "cindex", "cindex_oriented"])
        for name, rank, c, co in rows:
            w.writerow([name, rank, format(c, ".17g"), format(co, ".17g")])

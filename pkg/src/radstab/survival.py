"""Right-censored survival: concordance index, Cox proportional hazards
(Breslow ties, Newton-Raphson) and evaluation of fixed linear signatures."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import json

import numpy as np


class ConvergenceError(RuntimeError):
    pass


class SingularInformationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SurvivalRecord:
    case_id: str
    time: float
    event: bool

    def __post_init__(self):
        if not self.time > 0:
            raise ValueError(f"{self.case_id}: survival time must be > 0, got {self.time}")


def read_survival_csv(path):
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["case_id", "time", "event"]:
            raise ValueError(f"{path}:1: expected header case_id,time,event, got {header}")
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            try:
                case_id, time, event = row
                ev = int(event)
                if ev not in (0, 1):
                    raise ValueError(f"event must be 0 or 1, got {event!r}")
                out.append(SurvivalRecord(case_id, float(time), bool(ev)))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_survival_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "time", "event"])
        for rec in records:
            w.writerow([rec.case_id, format(rec.time, ".17g"), int(rec.event)])


def align(case_ids, records):
    """``(times, events)`` arrays ordered like ``case_ids``."""
    by_id = {r.case_id: r for r in records}
    missing = [c for c in case_ids if c not in by_id]
    if missing:
        raise KeyError(f"no survival record for cases {missing[:5]}")
    times = np.array([by_id[c].time for c in case_ids], dtype=np.float64)
    events = np.array([by_id[c].event for c in case_ids], dtype=bool)
    return times, events


# ---------------------------------------------------------------- cindex

def concordance_counts(risk, time, event):
    """``(concordant, possible)``: a pair is possible when the shorter time
    is an observed event and the times differ; risk ties count one half."""
    risk = np.asarray(risk, dtype=np.float64)
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    comparable = (time[:, None] < time[None, :]) & event[:, None]
    higher = risk[:, None] > risk[None, :]
    tied = risk[:, None] == risk[None, :]
    possible = int(np.count_nonzero(comparable))
    concordant = np.count_nonzero(comparable & higher) + 0.5 * np.count_nonzero(comparable & tied)
    return float(concordant), possible


def cindex(risk, time, event=None):
    """Concordance index of risk scores. ``time`` may also be a list of
    :class:`SurvivalRecord` aligned with ``risk``."""
    if event is None:
        recs = time
        time = np.array([r.time for r in recs])
        event = np.array([r.event for r in recs])
    if len(risk) != len(time) or len(time) != len(event):
        raise ValueError("risk, time and event must align")
    if len(risk) < 2:
        raise ValueError("need at least 2 cases")
    concordant, possible = concordance_counts(risk, time, event)
    if possible == 0:
        raise ValueError("no comparable pairs")
    return concordant / possible


# ---------------------------------------------------------------- Cox

@dataclass
class CoxModel:
    """Linear risk score ``sum(coef * (x - mean) / sd)``."""

    feature_names: list
    coefficients: np.ndarray
    means: np.ndarray = None
    sds: np.ndarray = None
    loglik: float = float("nan")
    n_iter: int = 0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        p = len(self.feature_names)
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        self.means = np.zeros(p) if self.means is None else np.asarray(self.means, dtype=np.float64)
        self.sds = np.ones(p) if self.sds is None else np.asarray(self.sds, dtype=np.float64)
        if len(set(self.feature_names)) != p:
            raise ValueError("duplicate feature names")
        if not (len(self.coefficients) == len(self.means) == len(self.sds) == p):
            raise ValueError("coefficients / standardization do not match feature_names")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("non-finite coefficients")
        if np.any(self.sds <= 0):
            raise ValueError("standardization sds must be > 0")

    @property
    def raw_coefficients(self):
        """Coefficients on the original feature scale."""
        return self.coefficients / self.sds

    def risk(self, X):
        X = np.asarray(X, dtype=np.float64)
        return ((X - self.means) / self.sds) @ self.coefficients

    def to_dict(self):
        return {
            "features": list(self.feature_names),
            "coefficients": [float(c) for c in self.coefficients],
            "standardize": {"means": [float(m) for m in self.means], "sds": [float(s) for s in self.sds]},
        }

    @classmethod
    def from_dict(cls, d):
        try:
            std = d.get("standardize") or {}
            return cls(list(d["features"]), d["coefficients"], std.get("means"), std.get("sds"))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed signature: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _risk_set_sums(X, time, event, beta):
    """Sorted-order cumulative sums needed by the Breslow partial likelihood."""
    order = np.argsort(-time, kind="stable")
    t, e, Xs = time[order], event[order], X[order]
    eta = Xs @ beta
    c = eta.max()
    w = np.exp(eta - c)
    # last sorted position sharing each time: the Breslow risk set for a tie group
    last = np.searchsorted(-t, -t, side="right") - 1
    s0 = np.cumsum(w)[last]
    s1 = np.cumsum(w[:, None] * Xs, axis=0)[last]
    s2 = np.cumsum(w[:, None, None] * Xs[:, :, None] * Xs[:, None, :], axis=0)[last]
    # running log-sum-exp: s0 itself can underflow on separable data
    log_s0 = np.logaddexp.accumulate(eta)[last]
    return e, Xs, eta, log_s0, s0, s1, s2


def partial_loglik(X, time, event, beta, derivatives=True):
    """Breslow log partial likelihood, with gradient and Hessian."""
    X = np.asarray(X, dtype=np.float64)
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    beta = np.asarray(beta, dtype=np.float64)
    e, Xs, eta, log_s0, s0, s1, s2 = _risk_set_sums(X, time, event, beta)
    ll = float(np.sum(eta[e] - log_s0[e]))
    if not derivatives:
        return ll
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = s1[e] / s0[e, None]
        grad = np.sum(Xs[e] - mean, axis=0)
        hess = -np.sum(s2[e] / s0[e, None, None] - mean[:, :, None] * mean[:, None, :], axis=0)
    return ll, grad, hess


def standardize(X):
    X = np.asarray(X, dtype=np.float64)
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    if np.any(sds == 0):
        raise ValueError(f"constant columns: {np.flatnonzero(sds == 0).tolist()}")
    return (X - means) / sds, means, sds


def cox_fit(X, time, event=None, names=None, tol=1e-8, max_iter=100, standardized=True):
    """Maximize the Breslow partial likelihood by damped Newton iterations.

    Converges when the largest absolute score component falls below ``tol``.
    Raises :class:`SingularInformationError` when the information matrix
    cannot be inverted and :class:`ConvergenceError` after ``max_iter`` steps.
    """
    if event is None:
        recs = time
        time = np.array([r.time for r in recs])
        event = np.array([r.event for r in recs])
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more cases than covariates (n={n}, p={p})")
    names = list(names) if names is not None else [f"x{i}" for i in range(p)]
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    if not event.any():
        raise ValueError("no events")
    if standardized:
        Z, means, sds = standardize(X)
    else:
        Z, means, sds = X, np.zeros(p), np.ones(p)

    beta = np.zeros(p)
    ll, grad, hess = partial_loglik(Z, time, event, beta)
    for it in range(max_iter + 1):
        if np.max(np.abs(grad)) < tol:
            return CoxModel(names, beta, means, sds, loglik=ll, n_iter=it)
        if it == max_iter:
            break
        try:
            info = -hess
            if not np.all(np.isfinite(info)) or np.linalg.cond(info) > 1e12:
                raise np.linalg.LinAlgError("ill-conditioned")
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularInformationError(f"singular information matrix at iteration {it}") from exc
        for _ in range(60):
            cand = beta + step
            new = partial_loglik(Z, time, event, cand)
            finite = np.isfinite(new[0]) and np.all(np.isfinite(new[1])) and np.all(np.isfinite(new[2]))
            if finite and new[0] >= ll - 1e-12 * abs(ll):
                break
            step = step / 2
        else:
            raise ConvergenceError("step halving failed to increase the likelihood")
        beta = cand
        ll, grad, hess = new
    raise ConvergenceError(f"no convergence after {max_iter} iterations (max |score| = {np.max(np.abs(grad)):.3g})")


# ---------------------------------------------------------- signatures

def signature_across_masks(t, model, surv):
    """cindex of ``model`` when every case is scored with its j-th mask.

    Returns ``(rows, summary)`` with rows ``(mask_index, cindex)``, 1-based.
    """
    missing = [f for f in model.feature_names if f not in t.feature_names]
    if missing:
        raise KeyError(f"signature features missing from table: {missing}")
    idx = [t.feature_names.index(f) for f in model.feature_names]
    times, events = align(t.case_ids, surv)
    rows = []
    for j in range(t.values.shape[1]):
        rows.append((j + 1, cindex(model.risk(t.values[:, j, idx]), times, events)))
    c = np.array([r[1] for r in rows])
    summary = {"k": len(rows), "min": float(c.min()), "max": float(c.max()),
               "spread": float(c.max() - c.min()), "mean": float(c.mean())}
    return rows, summary


def evaluate_expert(t_expert, model, surv):
    """cindex of ``model`` on reference-mask features (first mask slot)."""
    rows, _ = signature_across_masks(t_expert, model, surv)
    return rows[0][1]


def write_histogram_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mask_index", "cindex"])
        for j, c in rows:
            w.writerow([j, format(c, ".17g")])


# ---------------------------------------------------- feature selection

def kfold(n, n_folds, rng):
    perm = rng.permutation(n)
    return [np.sort(f) for f in np.array_split(perm, n_folds)]


def cv_cindex(X, time, event, folds):
    scores = []
    for test in folds:
        train = np.setdiff1d(np.arange(len(time)), test)
        model = cox_fit(X[train], time[train], event[train])
        try:
            scores.append(cindex(model.risk(X[test]), time[test], event[test]))
        except ValueError:
            continue  # fold without comparable pairs
    if not scores:
        raise ValueError("no fold had comparable pairs")
    return float(np.mean(scores))


def forward_select(X, names, time, event, max_features=4, n_folds=5, rng=None, min_gain=1e-4):
    """Greedy forward selection maximizing cross-validated cindex.

    Returns ``(selected_names, cv_cindex_of_selection, trace)``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    X = np.asarray(X, dtype=np.float64)
    folds = kfold(len(time), n_folds, rng)
    selected, best, trace = [], 0.5, []
    while len(selected) < max_features:
        step_best, step_feature = -np.inf, None
        for f in range(X.shape[1]):
            if f in selected:
                continue
            try:
                score = cv_cindex(X[:, selected + [f]], time, event, folds)
            except (ValueError, np.linalg.LinAlgError, ConvergenceError):
                continue
            if score > step_best:
                step_best, step_feature = score, f
        if step_feature is None or step_best < best + min_gain:
            break
        selected.append(step_feature)
        best = step_best
        trace.append({"feature": names[step_feature], "cv_cindex": step_best})
    return [names[f] for f in selected], best, trace

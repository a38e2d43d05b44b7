"""Acceptance suite: one test per criterion, reported as PASS/FAIL lines in the
terminal summary (see conftest.py)."""
import json
import math
import os
import shutil
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

import oracles
from radstab.config import PhantomSpec, PipelineConfig
from radstab.ensemble import PerturbConfig
from radstab.features import (
    DIRECTIONS, ExtractionSettings, discretize, glcm_features, glcm_matrices, glrlm_features,
    glrlm_matrices, glszm_features, glszm_matrix, ngtdm_features, ngtdm_matrix, symmetrize,
)
from radstab.features.texture import GLRLM_NAMES, GLSZM_NAMES
from radstab.features.wavelet import SUBBANDS, subband_arrays
from radstab.nrrd import save_mask, save_volume
from radstab.phantom import write_cohort
from radstab.pipeline import run_pipeline, stage_extract, stage_icc, stage_perturb
from radstab.stability import FeatureTable, icc_oneway, summarize
from radstab.survival import (
    CoxModel, SurvivalRecord, cindex, cox_fit, partial_loglik, read_survival_csv,
    signature_across_masks, write_survival_csv,
)
from radstab.volume import Mask, Volume

WORKERS = os.cpu_count() or 1


def random_rois(count, seed):
    rng = np.random.default_rng(seed)
    return [oracles.random_roi(rng, n=6) for _ in range(count)]


def tree_bytes(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            with open(os.path.join(d, f), "rb") as fh:
                out[os.path.relpath(os.path.join(d, f), root)] = fh.read()
    return out


@pytest.mark.criterion(1, "texture matrices and features match brute-force oracles")
def test_texture_oracle_equivalence():
    start = time.perf_counter()
    for img, roi, lab, ng in random_rois(200, seed=1):
        d = discretize(Volume(img), Mask(roi), 25)
        assert d.n_bins == ng
        brute = oracles.glcm_counts(lab, ng)
        counts = glcm_matrices(d)
        runs = glrlm_matrices(d)
        for k, off in enumerate(DIRECTIONS):
            np.testing.assert_array_equal(counts[k], brute[off])
            np.testing.assert_array_equal(runs[k], oracles.size_matrix(oracles.runs(lab, off), ng))
        np.testing.assert_array_equal(glszm_matrix(d), oracles.size_matrix(oracles.zones(lab), ng))
        n, _, s = ngtdm_matrix(d)
        bn, bs = oracles.ngtdm(lab, ng)
        np.testing.assert_array_equal(n, bn)
        np.testing.assert_allclose(s, bs, rtol=1e-12, atol=1e-12)

        for mine, ref in (
            (glcm_features(d)[0], oracles.glcm_features(lab, ng)),
            (ngtdm_features(d)[0], oracles.ngtdm_features(lab, ng)),
            (glrlm_features(d)[0], dict(zip(GLRLM_NAMES, oracles.glrlm_features(lab, ng)))),
            (glszm_features(d)[0], dict(zip(GLSZM_NAMES, oracles.glszm_features(lab, ng)))),
        ):
            for name, value in ref.items():
                assert oracles.close(mine[name], value, rel=1e-10), name
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(2, "GLCM, GLRLM and GLSZM conserve mass")
def test_mass_conservation():
    for img, roi, lab, ng in random_rois(200, seed=2):
        d = discretize(Volume(img), Mask(roi), 25)
        n_roi = int(roi.sum())
        p = symmetrize(glcm_matrices(d))
        for m in p:
            assert abs(m.sum() - 1.0) <= 1e-12
        sizes = np.arange(1, glszm_matrix(d).shape[1] + 1)
        assert int(glszm_matrix(d).sum(axis=0) @ sizes) == n_roi
        for m in glrlm_matrices(d):
            lengths = np.arange(1, m.shape[1] + 1)
            assert int(m.sum(axis=0) @ lengths) == n_roi


@pytest.mark.criterion(3, "Haar wavelet matches the filter-bank oracle; energy identity")
def test_wavelet_correctness():
    impulse = np.zeros((5, 4, 6))
    impulse[3, 1, 2] = 1.0
    for arr in (impulse, np.full((4, 5, 3), -7.5)):
        bands = subband_arrays(arr)
        for name in SUBBANDS:
            np.testing.assert_allclose(bands[name], oracles.haar_band(arr, name), rtol=0, atol=1e-12)
    rng = np.random.default_rng(3)
    for _ in range(50):
        arr = rng.normal(size=(4, 4, 4))
        total = sum(float(np.sum(b ** 2)) for b in subband_arrays(arr).values())
        assert abs(total - 8 * np.sum(arr ** 2)) <= 1e-10 * 8 * np.sum(arr ** 2)


@pytest.mark.criterion(4, "ICC matches two-pass ANOVA; exact at zero noise; monotone in noise")
def test_icc_oracle():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n, k = rng.integers(3, 30), rng.integers(2, 10)
        x = rng.normal(0, rng.uniform(0.1, 3), (n, 1)) + rng.normal(0, rng.uniform(0.1, 3), (n, k))
        assert abs(icc_oneway(x) - oracles.anova_icc(x)) <= 1e-12
    base = np.repeat(rng.normal(size=(40, 1)), 6, axis=1)
    assert icc_oneway(base) == 1.0
    eps = rng.normal(size=base.shape)
    values = [icc_oneway(base + sd * eps) for sd in (0.1, 0.3, 1.0)]
    assert values[0] > values[1] > values[2]


@pytest.mark.criterion(5, "cindex matches O(n^2) enumeration")
def test_cindex_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        time_ = np.round(rng.exponential(1.0, 50), 1) + 0.1  # ties in time
        event = rng.random(50) < 0.7
        risk = np.round(rng.normal(size=50), 1)  # ties in risk
        assert abs(cindex(risk, time_, event) - oracles.cindex(risk, time_, event)) <= 1e-12
    t = rng.exponential(1.0, 50)
    assert cindex(-t, t, np.ones(50, bool)) == 1.0


def simulate_cox(seed, n=2000, beta=math.log(2), censored=0.25):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    h = np.exp(beta * x)
    t = rng.exponential(1 / h)
    lam = brentq(lambda c: np.mean(c / (c + h)) - censored, 1e-6, 1e3)
    c = rng.exponential(1 / lam, n)
    return x, np.minimum(t, c), t <= c


@pytest.mark.criterion(6, "Cox recovers ln 2; gradient and score checks")
def test_cox_recovery():
    start = time.perf_counter()
    hits = 0
    for seed in range(20):
        x, t, e = simulate_cox(seed)
        m = cox_fit(x, t, e, standardized=False)
        hits += abs(m.coefficients[0] - math.log(2)) <= 0.15
        _, grad, _ = partial_loglik(x[:, None], t, e, m.coefficients)
        assert abs(grad[0]) < 1e-8
    assert hits >= 18

    x, t, e = simulate_cox(99, n=500)
    X = np.column_stack([x, np.random.default_rng(0).normal(size=500)])
    beta = np.array([0.4, -0.2])
    _, grad, _ = partial_loglik(X, t, e, beta)
    for j in range(2):
        step = np.zeros(2)
        step[j] = 1e-5
        fd = (partial_loglik(X, t, e, beta + step, False) - partial_loglik(X, t, e, beta - step, False)) / 2e-5
        assert abs(fd - grad[j]) <= 1e-4 * abs(grad[j])
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(7, "phantom: first-order > GLSZM and wavelet < original median ICC")
def test_phantom_family_ordering(tmp_path):
    start = time.perf_counter()
    write_cohort(PhantomSpec(n_cases=200, seed=7), str(tmp_path / "cohort"))
    cfg = PipelineConfig.for_cohort(str(tmp_path / "cohort"), output_dir=str(tmp_path / "out"), seed=7)
    assert cfg.perturb.boundary_flip_prob == 0.2 and cfg.extraction.wavelet
    os.makedirs(cfg.output_dir)
    stage_perturb(cfg, cfg.output_dir)
    stage_extract(cfg, cfg.output_dir, workers=WORKERS)
    _, report = stage_icc(cfg, cfg.output_dir)
    s = summarize(report)
    fam, tr = s["by_family"], s["by_transform"]
    print(f"median ICC firstorder {fam['firstorder']['median']:.3f} glszm {fam['glszm']['median']:.3f} "
          f"original {tr['original']['median']:.3f} wavelet {tr['wavelet']['median']:.3f}")
    assert fam["firstorder"]["median"] > fam["glszm"]["median"]
    assert tr["wavelet"]["median"] < tr["original"]["median"]
    assert time.perf_counter() - start < 600


def signature_spread(cohort, out, flip):
    cfg = PipelineConfig.for_cohort(cohort, output_dir=out, seed=0, n_segmentations=25)
    cfg = replace(cfg, perturb=replace(cfg.perturb, boundary_flip_prob=flip),
                  extraction=ExtractionSettings(wavelet=False))
    os.makedirs(out)
    stage_perturb(cfg, out)
    stage_extract(cfg, out, workers=WORKERS)
    table = FeatureTable.from_csv(os.path.join(out, "features.csv"))
    rows, summary = signature_across_masks(table, CoxModel.load(cfg.signature_json), read_survival_csv(cfg.survival_csv))
    assert summary["k"] == 25
    return summary["spread"]


@pytest.mark.criterion(8, "signature cindex spread is 0 at no-op and grows with flip probability")
def test_signature_spread(tmp_path):
    cohort = str(tmp_path / "cohort")
    write_cohort(PhantomSpec(n_cases=60, seed=0), cohort)
    spreads = [signature_spread(cohort, str(tmp_path / f"flip{f}"), f) for f in (0.0, 0.1, 0.3)]
    print("signature cindex spread at flip 0, 0.1, 0.3:", [round(s, 4) for s in spreads])
    assert spreads[0] == 0
    assert spreads[0] < spreads[1] < spreads[2]


@pytest.mark.criterion(9, "pipeline bundles are byte-identical across reruns and worker counts")
def test_determinism(tmp_path):
    cohort = str(tmp_path / "cohort")
    write_cohort(PhantomSpec(n_cases=10, seed=9, dims=(16, 16, 16), radius_range=(3.0, 4.5)), cohort)
    out = str(tmp_path / "out")
    cfg = PipelineConfig.for_cohort(cohort, output_dir=out, seed=9, n_segmentations=4,
                                    perturb=PerturbConfig(seed=0, n_samples=20))
    bundles = []
    for workers in (1, 1, 8, 8):
        shutil.rmtree(out, ignore_errors=True)
        assert run_pipeline(cfg, workers=workers)["status"] == "complete"
        bundles.append(tree_bytes(out))
    assert len(bundles[0]) > 5
    assert all(b == bundles[0] for b in bundles[1:])


@pytest.mark.criterion(10, "exactly the 73 of 422 empty-mask cases are excluded")
def test_exclusion_rule(tmp_path):
    rng = np.random.default_rng(10)
    case_ids = [f"p{i:03d}" for i in range(422)]
    empty = set(rng.choice(case_ids, 73, replace=False).tolist())
    os.makedirs(tmp_path / "images")
    os.makedirs(tmp_path / "references")
    for cid in case_ids:
        save_volume(Volume(rng.normal(0, 50, (6, 6, 6))), str(tmp_path / "images" / f"{cid}.nrrd"))
        m = np.zeros((6, 6, 6), bool)
        if cid not in empty:
            m[1:5, 1:5, 1:5] = True
        save_mask(Mask(m), str(tmp_path / "references" / f"{cid}.nrrd"))
    write_survival_csv(str(tmp_path / "survival.csv"),
                       [SurvivalRecord(c, float(rng.exponential(1.0)) + 0.01, bool(rng.random() < 0.7)) for c in case_ids])
    cfg = PipelineConfig.for_cohort(str(tmp_path), output_dir=str(tmp_path / "out"), n_segmentations=2,
                                    perturb=PerturbConfig(seed=0, n_samples=4),
                                    extraction=ExtractionSettings(wavelet=False))
    manifest = run_pipeline(cfg, workers=WORKERS)
    assert manifest["excluded_cases"] == sorted(empty)
    with open(tmp_path / "out" / "excluded.json") as fh:
        assert json.load(fh)["excluded"] == sorted(empty)
    assert manifest["survival"]["n_cases"] == 422 - 73

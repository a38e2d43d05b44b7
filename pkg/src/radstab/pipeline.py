"""Stage functions and the end-to-end workflow.

Each stage reads the previous stage's files and writes its own, so running
the stages one by one produces the same bundle as :func:`run_pipeline`.

Bundle layout under ``output_dir``::

    masks/                 ensemble archive (<case>/reference.nrrd, sample_####.nrrd, ensemble.json)
    features.csv           one row per (case, ensemble mask)
    features_reference.csv one row per case, reference mask
    features_undefined.csv 0/1 flags aligned with features.csv
    excluded.json          screened-out cases
    icc_report.csv, icc_summary.json
    features_averaged.csv  mask-averaged retained features
    stability_vs_prognosis.csv
    model.json, selection.json
    signature_histogram.csv, survival_report.json
    run_manifest.json
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import replace
import hashlib
import json
import logging
import os

import numpy as np

from . import __version__
from .config import derive_seed
from .ensemble import MaskEnsemble, build_ensemble, read_archive, screen_failed, write_archive
from .features.discretize import EmptyMaskError
from .features.extract import extract_case, feature_names, write_feature_csv
from .nrrd import load_mask, load_volume
from .stability import (
    FeatureTable, ICCReport, average_over_masks, icc_report, stability_vs_prognosis,
    summarize, write_stability_vs_prognosis, write_summary,
)
from .survival import (
    CoxModel, align, cox_fit, evaluate_expert, forward_select, read_survival_csv,
    signature_across_masks, write_histogram_csv,
)

log = logging.getLogger(__name__)


class InputError(Exception):
    """Missing or malformed stage input (CLI exit code 2)."""


class StageError(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _case_ids(images_dir):
    if not os.path.isdir(images_dir):
        raise InputError(f"images directory not found: {images_dir}")
    return sorted(f[:-5] for f in os.listdir(images_dir) if f.endswith(".nrrd"))


def _require(path):
    if not os.path.exists(path):
        raise InputError(f"missing input file: {path}")
    return path


# ------------------------------------------------------------ stage: perturb

def stage_perturb(cfg, out_dir):
    """Sample, deduplicate and Dice-subsample N masks per case."""
    ensembles = []
    for case_id in _case_ids(cfg.images_dir):
        ref = load_mask(_require(os.path.join(cfg.references_dir, f"{case_id}.nrrd")))
        if ref.is_empty:
            ensembles.append(MaskEnsemble(ref, [], [], case_id=case_id))
            continue
        pcfg = replace(cfg.perturb, seed=derive_seed(cfg.seed, "perturb", case_id))
        ensembles.append(build_ensemble(ref, pcfg, cfg.n_segmentations,
                                        derive_seed(cfg.seed, "sampling", case_id), case_id))
    write_archive(os.path.join(out_dir, "masks"), ensembles)
    return ensembles


# ------------------------------------------------------------ stage: extract

def _extract_one(args):
    image_path, ens, settings = args
    v = load_volume(image_path)
    try:
        vectors = extract_case(v, [ens.reference] + list(ens.members), settings)
    except EmptyMaskError:
        return None
    return vectors


def stage_extract(cfg, out_dir, masks_dir=None, workers=1):
    masks_dir = masks_dir or cfg.masks_dir or os.path.join(out_dir, "masks")
    _require(os.path.join(masks_dir, "ensemble.json"))
    try:
        ensembles = read_archive(masks_dir)
    except FileNotFoundError as exc:
        raise InputError(f"missing mask file: {exc.args[0]}") from exc
    kept, excluded = screen_failed(ensembles)
    excluded_ids = [e.case_id for e in excluded]
    kept = sorted(kept, key=lambda e: e.case_id)
    if kept and len({len(e) for e in kept}) > 1:
        raise InputError("ensembles have different sizes; sample them to a common N first")
    jobs = [(_require(os.path.join(cfg.images_dir, f"{e.case_id}.nrrd")), e, cfg.extraction) for e in kept]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_extract_one(j) for j in jobs]

    names = feature_names(cfg.extraction)
    rows, ref_rows, flag_rows = [], [], []
    for ens, vectors in zip(kept, results):
        if vectors is None:
            excluded_ids.append(ens.case_id)  # empty after resampling
            continue
        ref_rows.append((ens.case_id, "reference", vectors[0].values))
        for mid, fv in zip(ens.member_ids, vectors[1:]):
            rows.append((ens.case_id, mid, fv.values))
            flag_rows.append((ens.case_id, mid, fv.undefined.astype(np.float64)))
    write_feature_csv(os.path.join(out_dir, "features.csv"), rows, names)
    write_feature_csv(os.path.join(out_dir, "features_reference.csv"), ref_rows, names)
    with open(os.path.join(out_dir, "features_undefined.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "mask_id", *names])
        for case_id, mid, flags in flag_rows:
            w.writerow([case_id, mid, *(int(f) for f in flags)])
    excluded_ids = sorted(excluded_ids)
    _write_json(os.path.join(out_dir, "excluded.json"), {"excluded": excluded_ids})
    return excluded_ids


# ---------------------------------------------------------------- stage: icc

def stage_icc(cfg, out_dir, features_csv=None):
    path = _require(features_csv or os.path.join(out_dir, "features.csv"))
    try:
        table = FeatureTable.from_csv(path)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = icc_report(table, cfg.icc_cutoff, cfg.icc_kind)
    report.write_csv(os.path.join(out_dir, "icc_report.csv"))
    write_summary(os.path.join(out_dir, "icc_summary.json"), summarize(report))
    return table, report


# ----------------------------------------------------------- stage: survival

def stage_survival(cfg, out_dir, features_csv=None, icc_csv=None):
    table = FeatureTable.from_csv(_require(features_csv or os.path.join(out_dir, "features.csv")))
    report = ICCReport.read_csv(_require(icc_csv or os.path.join(out_dir, "icc_report.csv")), cfg.icc_cutoff)
    if report.feature_names != table.feature_names:
        raise InputError("ICC report and feature table list different features")
    try:
        surv = read_survival_csv(_require(cfg.survival_csv))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    try:
        times, events = align(table.case_ids, surv)
    except KeyError as exc:
        raise InputError(str(exc)) from exc

    write_stability_vs_prognosis(os.path.join(out_dir, "stability_vs_prognosis.csv"),
                                 stability_vs_prognosis(table, report, surv))

    retained = report.retained
    result = {"n_cases": len(table.case_ids), "n_events": int(events.sum()),
              "n_retained": int(retained.sum())}
    if retained.any():
        averaged = average_over_masks(table, retained)
        kept_names = [n for n, r in zip(table.feature_names, retained) if r]
        write_feature_csv(os.path.join(out_dir, "features_averaged.csv"),
                          ((c, "mean", row) for c, row in zip(table.case_ids, averaged)), kept_names)
        rng = np.random.default_rng(derive_seed(cfg.seed, "cv-folds"))
        selected, cv, trace = forward_select(averaged, kept_names, times, events,
                                             cfg.max_features, cfg.cv_folds, rng)
        _write_json(os.path.join(out_dir, "selection.json"),
                    {"selected": selected, "cv_cindex": cv, "trace": trace})
        result.update(selected=selected, cv_cindex=cv)
        if selected:
            cols = [kept_names.index(s) for s in selected]
            model = cox_fit(averaged[:, cols], times, events, names=selected)
            model.save(os.path.join(out_dir, "model.json"))

    if cfg.signature_json:
        sig = CoxModel.load(_require(cfg.signature_json))
        rows, summary = signature_across_masks(table, sig, surv)
        write_histogram_csv(os.path.join(out_dir, "signature_histogram.csv"), rows)
        result["signature"] = summary
        ref_csv = os.path.join(out_dir, "features_reference.csv")
        if os.path.exists(ref_csv):
            ref_table = FeatureTable.from_csv(ref_csv).subset_cases(table.case_ids)
            result["expert_cindex"] = evaluate_expert(ref_table, sig, surv)
    _write_json(os.path.join(out_dir, "survival_report.json"), result)
    return result


# ----------------------------------------------------------------- pipeline

STAGES = ("perturb", "extract", "icc", "survival")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _bundle_files(out_dir):
    out = []
    for root, _, files in os.walk(out_dir):
        for f in files:
            p = os.path.join(root, f)
            rel = os.path.relpath(p, out_dir)
            if rel != "run_manifest.json":
                out.append(rel)
    return sorted(out)


def run_pipeline(cfg, workers=1):
    """Run all stages; the manifest records the outcome even on failure."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    manifest = {
        "tool": "radstab",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "status": "running",
        "stages_completed": [],
    }
    manifest_path = os.path.join(out, "run_manifest.json")
    _write_json(manifest_path, manifest)

    stage = "perturb"
    try:
        masks_dir = cfg.masks_dir
        if not masks_dir:
            stage_perturb(cfg, out)
            masks_dir = os.path.join(out, "masks")
        manifest["stages_completed"].append("perturb")
        stage = "extract"
        manifest["excluded_cases"] = stage_extract(cfg, out, masks_dir, workers)
        manifest["stages_completed"].append("extract")
        stage = "icc"
        _, report = stage_icc(cfg, out)
        manifest["retained_fraction"] = report.retained_fraction
        manifest["stages_completed"].append("icc")
        stage = "survival"
        manifest["survival"] = stage_survival(cfg, out)
        manifest["stages_completed"].append("survival")
    except Exception as exc:
        manifest["status"] = f"failed:{stage}"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        manifest["outputs"] = {f: {"valid": False} for f in _bundle_files(out)}
        _write_json(manifest_path, manifest)
        if isinstance(exc, InputError):
            raise
        raise StageError(stage, exc) from exc

    manifest["status"] = "complete"
    manifest["outputs"] = {f: {"sha256": _sha256(os.path.join(out, f)), "valid": True}
                           for f in _bundle_files(out)}
    _write_json(manifest_path, manifest)
    return manifest

"""``radstab`` command line.

Exit codes: 0 success, 1 internal error, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import PhantomSpec, PipelineConfig
from .nrrd import NRRDError
from .pipeline import InputError, StageError, run_pipeline, stage_extract, stage_icc, stage_perturb, stage_survival

log = logging.getLogger("radstab")


def _load_config(args):
    cfg = PipelineConfig()
    if args.config:
        try:
            cfg = PipelineConfig.from_json(args.config)
        except FileNotFoundError as exc:
            raise InputError(f"config file not found: {args.config}") from exc
        except (ValueError, TypeError) as exc:
            raise InputError(f"{args.config}: {exc}") from exc
    if getattr(args, "cohort", None):
        paths = PipelineConfig.for_cohort(args.cohort)
        cfg = cfg.with_overrides(images_dir=paths.images_dir, references_dir=paths.references_dir,
                                 survival_csv=paths.survival_csv, signature_json=paths.signature_json)
    try:
        return cfg.with_overrides(
            seed=args.seed,
            n_segmentations=args.n_segmentations,
            icc_cutoff=args.icc_cutoff,
            bin_width=args.bin_width,
            output_dir=args.out,
        )
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from exc


def cmd_phantom(args):
    from .phantom import write_cohort

    d = {}
    if args.config:
        with open(args.config) as fh:
            d = json.load(fh)
    if args.seed is not None:
        d["seed"] = args.seed
    if args.n_cases is not None:
        d["n_cases"] = args.n_cases
    try:
        spec = PhantomSpec.from_dict(d)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    out = args.out or "cohort"
    manifest = write_cohort(spec, out)
    print(f"wrote {len(manifest['cases'])} cases to {out}")


def cmd_perturb(args):
    cfg = _load_config(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    ens = stage_perturb(cfg, cfg.output_dir)
    print(f"wrote {len(ens)} ensembles to {os.path.join(cfg.output_dir, 'masks')}")


def cmd_extract(args):
    cfg = _load_config(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    excluded = stage_extract(cfg, cfg.output_dir, args.masks, workers=args.workers)
    print(f"features written to {cfg.output_dir}; excluded {len(excluded)} cases")


def cmd_icc(args):
    cfg = _load_config(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    _, report = stage_icc(cfg, cfg.output_dir, args.features)
    print(f"{report.retained.sum()} of {len(report.icc)} features retained at ICC >= {cfg.icc_cutoff}")


def cmd_survival(args):
    cfg = _load_config(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    res = stage_survival(cfg, cfg.output_dir, args.features, args.icc)
    print(json.dumps(res, indent=2, sort_keys=True))


def cmd_pipeline(args):
    cfg = _load_config(args)
    manifest = run_pipeline(cfg, workers=args.workers)
    print(f"{manifest['status']}: bundle in {cfg.output_dir} (config {manifest['config_hash'][:12]})")


def build_parser():
    p = argparse.ArgumentParser(prog="radstab", description="Radiomics feature stability under segmentation variability")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        return sp

    def pipeline_flags(sp):
        common(sp)
        sp.add_argument("--cohort", help="phantom-style cohort directory (images/, references/, survival.csv)")
        sp.add_argument("--n-segmentations", type=int)
        sp.add_argument("--icc-cutoff", type=float)
        sp.add_argument("--bin-width", type=float)
        return sp

    sp = common(sub.add_parser("phantom", help="write a synthetic cohort"))
    sp.add_argument("--n-cases", type=int)
    sp.set_defaults(func=cmd_phantom)

    pipeline_flags(sub.add_parser("perturb", help="sample segmentation ensembles")).set_defaults(func=cmd_perturb)

    sp = pipeline_flags(sub.add_parser("extract", help="extract features for every ensemble mask"))
    sp.add_argument("--masks", help="ensemble archive directory")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_extract)

    sp = pipeline_flags(sub.add_parser("icc", help="per-feature ICC report"))
    sp.add_argument("--features", help="features CSV")
    sp.set_defaults(func=cmd_icc)

    sp = pipeline_flags(sub.add_parser("survival", help="feature selection, Cox fit, signature evaluation"))
    sp.add_argument("--features", help="features CSV")
    sp.add_argument("--icc", help="ICC report CSV")
    sp.set_defaults(func=cmd_survival)

    sp = pipeline_flags(sub.add_parser("pipeline", help="run every stage"))
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InputError, NRRDError, FileNotFoundError) as exc:
        print(f"radstab: error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"radstab: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"radstab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

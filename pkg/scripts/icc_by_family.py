"""Median ICC per feature family and per image transform on a phantom cohort.

    python3 scripts/icc_by_family.py --cases 200 --flip 0.2 --out runs/icc
"""
import argparse
import os
from dataclasses import replace

from radstab.config import PhantomSpec, PipelineConfig
from radstab.phantom import write_cohort
from radstab.pipeline import stage_extract, stage_icc, stage_perturb
from radstab.stability import summarize


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cases", type=int, default=200)
    ap.add_argument("--flip", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=os.cpu_count())
    ap.add_argument("--out", default="runs/icc")
    args = ap.parse_args()

    cohort = os.path.join(args.out, "cohort")
    write_cohort(PhantomSpec(n_cases=args.cases, seed=args.seed), cohort)
    cfg = PipelineConfig.for_cohort(cohort, output_dir=os.path.join(args.out, "bundle"), seed=args.seed)
    cfg = replace(cfg, perturb=replace(cfg.perturb, boundary_flip_prob=args.flip))
    os.makedirs(cfg.output_dir, exist_ok=True)
    stage_perturb(cfg, cfg.output_dir)
    stage_extract(cfg, cfg.output_dir, workers=args.workers)
    _, report = stage_icc(cfg, cfg.output_dir)
    s = summarize(report)
    print(f"{'group':<16} {'n':>4} {'median':>7} {'q1':>7} {'q3':>7}")
    for key in ("by_family", "by_transform"):
        for name, st in sorted(s[key].items()):
            q = [st.get(k, float("nan")) for k in ("median", "q1", "q3")]
            print(f"{name:<16} {st['n']:>4} {q[0]:>7.3f} {q[1]:>7.3f} {q[2]:>7.3f}")
    print(f"fraction below {cfg.icc_cutoff}: {s['fraction_below_cutoff']:.3f}")


if __name__ == "__main__":
    main()

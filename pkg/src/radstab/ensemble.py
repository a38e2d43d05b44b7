"""Segmentation ensembles: a seeded perturbation sampler, Dice scoring,
deduplication, Dice-stratified subsampling and failed-case screening."""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import os

import numpy as np
from scipy import ndimage

from .volume import Mask, check_same_geometry

_CROSS = ndimage.generate_binary_structure(3, 1)
_CUBE = ndimage.generate_binary_structure(3, 3)
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PerturbConfig:
    seed: int = 0
    n_samples: int = 100
    max_morph_radius: int = 0
    boundary_flip_prob: float = 0.2
    smooth_passes: int = 1

    def __post_init__(self):
        if not 0.0 <= self.boundary_flip_prob <= 1.0:
            raise ValueError(f"boundary_flip_prob must lie in [0, 1], got {self.boundary_flip_prob}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.max_morph_radius < 0 or self.smooth_passes < 0:
            raise ValueError("max_morph_radius and smooth_passes must be >= 0")


@dataclass
class MaskEnsemble:
    reference: Mask
    members: list
    dice: list = field(default=None)
    case_id: str = ""
    member_ids: list = field(default=None)

    def __post_init__(self):
        if self.dice is None:
            self.dice = [dice(m, self.reference) for m in self.members]
        if len(self.dice) != len(self.members):
            raise ValueError("dice list length differs from members")
        if self.member_ids is None:
            self.member_ids = [f"sample_{i:04d}" for i in range(len(self.members))]

    @property
    def failed(self):
        return self.reference.is_empty or any(m.is_empty for m in self.members)

    def __len__(self):
        return len(self.members)


def dice(a, b):
    check_same_geometry(a, b)
    na, nb = a.count, b.count
    if na + nb == 0:
        return 1.0
    inter = int(np.count_nonzero(a.array & b.array))
    return 2.0 * inter / (na + nb)


def _shift_or(arr):
    """OR of the 6 face-neighbours (outside the grid counts as False)."""
    out = np.zeros_like(arr)
    out[1:] |= arr[:-1]
    out[:-1] |= arr[1:]
    out[:, 1:] |= arr[:, :-1]
    out[:, :-1] |= arr[:, 1:]
    out[:, :, 1:] |= arr[:, :, :-1]
    out[:, :, :-1] |= arr[:, :, 1:]
    return out


def boundary(arr):
    """Foreground voxels touching background and background voxels touching
    foreground, both through the 6-neighbourhood."""
    fg_edge = arr & _shift_or(~arr)
    # voxels on the grid border also face (implicit) background
    border = np.zeros_like(arr)
    border[[0, -1]] = True
    border[:, [0, -1]] = True
    border[:, :, [0, -1]] = True
    fg_edge |= arr & border
    bg_edge = ~arr & _shift_or(arr)
    return fg_edge | bg_edge


def majority_smooth(arr):
    counts = arr.astype(np.int8)
    total = counts.copy()
    total[1:] += counts[:-1]
    total[:-1] += counts[1:]
    total[:, 1:] += counts[:, :-1]
    total[:, :-1] += counts[:, 1:]
    total[:, :, 1:] += counts[:, :, :-1]
    total[:, :, :-1] += counts[:, :, 1:]
    return total >= 4  # majority of self + 6 neighbours


def largest_overlap_component(arr, reference):
    labels, n = ndimage.label(arr, structure=_CUBE)
    if n <= 1:
        return arr
    overlap = np.bincount(labels[reference], minlength=n + 1)[1:]
    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    # max overlap, then larger size, then lowest label
    best = int(np.lexsort((-np.arange(n), sizes, overlap))[-1]) + 1
    return labels == best


def substream(seed, i):
    return np.random.default_rng((int(seed) ^ int(i)) & _MASK64)


def perturb_one(reference, cfg, index):
    rng = substream(cfg.seed, index)
    arr = reference.array.copy()
    radius = int(rng.integers(0, cfg.max_morph_radius + 1))
    grow = bool(rng.integers(0, 2))
    if radius > 0:
        op = ndimage.binary_dilation if grow else ndimage.binary_erosion
        arr = op(arr, structure=_CROSS, iterations=radius)
    u = rng.random(arr.shape)
    if cfg.boundary_flip_prob > 0:
        flip = boundary(arr) & (u < cfg.boundary_flip_prob)
        arr = arr ^ flip
    for _ in range(cfg.smooth_passes):
        arr = majority_smooth(arr)
    if arr.any():
        arr = largest_overlap_component(arr, reference.array)
    return reference.with_array(arr)


def perturb(reference, cfg):
    """Draw ``cfg.n_samples`` perturbed copies of ``reference``.

    Sample i uses its own generator seeded with ``seed ^ i`` so results do not
    depend on evaluation order. All-background results are returned as empty
    masks (``mask.is_empty``); callers screen them out.
    """
    if reference.is_empty:
        raise ValueError("empty reference mask")
    return [perturb_one(reference, cfg, i) for i in range(cfg.n_samples)]


def dedup(masks):
    seen = set()
    out = []
    for m in masks:
        k = m.key()
        if k not in seen:
            seen.add(k)
            out.append(m)
    return out


def select_uniform_dice(scores, k, rng):
    """Indices of up to ``k`` entries spread uniformly over the Dice range.

    ``[min, max]`` is cut into ``k`` equal-width bins, one entry is drawn from
    each non-empty bin in ascending order, and remaining slots go to unused
    entries farthest (in Dice) from everything already chosen.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if n == 0:
        raise ValueError("empty ensemble")
    if k < 1:
        raise ValueError("k must be >= 1")
    lo, hi = scores.min(), scores.max()
    if hi > lo:
        bins = np.minimum(((scores - lo) / ((hi - lo) / k)).astype(np.int64), k - 1)
    else:
        bins = np.zeros(n, dtype=np.int64)

    chosen = []
    for b in range(k):
        idx = np.flatnonzero(bins == b)
        if len(idx):
            chosen.append(int(idx[rng.integers(len(idx))]))

    target = min(k, n)
    unused = np.ones(n, dtype=bool)
    unused[chosen] = False
    while len(chosen) < target:
        cand = np.flatnonzero(unused)
        dist = np.min(np.abs(scores[cand, None] - scores[None, chosen]), axis=1)
        best = cand[dist == dist.max()]
        pick = int(best[rng.integers(len(best))])
        chosen.append(pick)
        unused[pick] = False
    return sorted(chosen)


def sample_uniform_dice(ens, k, seed):
    if not ens.members:
        raise ValueError("empty ensemble")
    rng = np.random.default_rng(int(seed) & _MASK64)
    idx = select_uniform_dice(ens.dice, k, rng)
    return MaskEnsemble(
        ens.reference,
        [ens.members[i] for i in idx],
        [ens.dice[i] for i in idx],
        case_id=ens.case_id,
        member_ids=[ens.member_ids[i] for i in idx],
    )


def screen_failed(cases):
    kept, excluded = [], []
    for ens in cases:
        (excluded if ens.failed else kept).append(ens)
    return kept, excluded


def build_ensemble(reference, cfg, k, sample_seed, case_id=""):
    """perturb -> dedup -> Dice-stratified subsample of size ``k``.

    Empty draws are kept through dedup so that a case whose sampler collapses
    is visible to :func:`screen_failed`. With fewer than ``k`` unique masks
    the selection is repeated cyclically, so every case ends up with exactly
    ``k`` members and ICC tables stay rectangular.
    """
    masks = dedup(perturb(reference, cfg))
    ens = MaskEnsemble(reference, masks, case_id=case_id)
    empties = [m for m in masks if m.is_empty]
    sampled = sample_uniform_dice(ens, k, sample_seed)
    if empties and not any(m.is_empty for m in sampled.members):
        # a failed draw marks the whole case, as in the screening rule
        sampled = MaskEnsemble(reference, sampled.members[:-1] + empties[:1], case_id=case_id)
    if len(sampled) < k:
        members = [sampled.members[i % len(sampled)] for i in range(k)]
        sampled = MaskEnsemble(reference, members, case_id=case_id)
    sampled.member_ids = [f"sample_{i:04d}" for i in range(len(sampled))]
    return sampled


# ---- archive layout: <root>/<case_id>/reference.nrrd, sample_####.nrrd, ensemble.json

def write_archive(root, ensembles):
    from .nrrd import save_mask

    os.makedirs(root, exist_ok=True)
    manifest = {"cases": []}
    for ens in ensembles:
        case_dir = os.path.join(root, ens.case_id)
        os.makedirs(case_dir, exist_ok=True)
        save_mask(ens.reference, os.path.join(case_dir, "reference.nrrd"))
        files = []
        for mid, m in zip(ens.member_ids, ens.members):
            name = f"{mid}.nrrd"
            save_mask(m, os.path.join(case_dir, name))
            files.append(name)
        manifest["cases"].append({
            "case_id": ens.case_id,
            "reference": "reference.nrrd",
            "members": files,
            "dice": [float(d) for d in ens.dice],
        })
    with open(os.path.join(root, "ensemble.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_archive(root):
    from .nrrd import load_mask

    path = os.path.join(root, "ensemble.json")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        manifest = json.load(fh)
    out = []
    for entry in manifest["cases"]:
        case_dir = os.path.join(root, entry["case_id"])
        ref_path = os.path.join(case_dir, entry.get("reference", "reference.nrrd"))
        if not os.path.exists(ref_path):
            raise FileNotFoundError(ref_path)
        ref = load_mask(ref_path)
        members = []
        for name in entry["members"]:
            p = os.path.join(case_dir, name)
            if not os.path.exists(p):
                raise FileNotFoundError(p)
            members.append(load_mask(p))
        ids = [os.path.splitext(n)[0] for n in entry["members"]]
        out.append(MaskEnsemble(ref, members, case_id=entry["case_id"], member_ids=ids))
    return out

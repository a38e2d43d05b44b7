from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import json

from .ensemble import PerturbConfig
from .features.extract import ExtractionSettings


def derive_seed(root, *names):
    """Stable 63-bit seed for a named substream of ``root``."""
    h = hashlib.sha256(repr((int(root),) + tuple(str(n) for n in names)).encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


@dataclass(frozen=True)
class PhantomSpec:
    n_cases: int = 40
    dims: tuple = (32, 32, 32)
    spacing: tuple = (1.0, 1.0, 1.0)
    radius_range: tuple = (4.0, 7.0)
    level_range: tuple = (-20.0, 140.0)
    background: float = -300.0
    gradient_amplitude: float = 40.0
    noise_range: tuple = (15.0, 15.0)
    edge_width: float = 0.7
    coefficients: tuple = (0.9, 0.9)  # log-hazard per sd of (level, volume)
    baseline_hazard: float = 1.0 / 700.0
    censoring_rate: float = 0.25
    seed: int = 0

    def __post_init__(self):
        for name in ("dims", "spacing", "radius_range", "level_range", "noise_range", "coefficients"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.n_cases < 0:
            raise ValueError("n_cases must be >= 0")
        if not 0.0 <= self.censoring_rate < 1.0:
            raise ValueError("censoring_rate must lie in [0, 1)")
        extent = min(d * s for d, s in zip(self.dims, self.spacing))
        if not 0 < self.radius_range[0] <= self.radius_range[1] or 2 * self.radius_range[1] + 4 > extent:
            raise ValueError(f"radius range {self.radius_range} does not fit the grid")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown phantom fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class PipelineConfig:
    images_dir: str = "cohort/images"
    references_dir: str = "cohort/references"
    masks_dir: str = ""  # existing ensemble archive; empty = run the sampler
    survival_csv: str = "cohort/survival.csv"
    signature_json: str = ""
    output_dir: str = "out"
    n_segmentations: int = 25
    icc_cutoff: float = 0.9
    icc_kind: str = "icc1"
    max_features: int = 4
    cv_folds: int = 5
    seed: int = 0
    perturb: PerturbConfig = field(default_factory=PerturbConfig)
    extraction: ExtractionSettings = field(default_factory=ExtractionSettings)

    def __post_init__(self):
        if self.n_segmentations < 2:
            raise ValueError("n_segmentations must be >= 2 for ICC")
        if not 0.0 <= self.icc_cutoff <= 1.0:
            raise ValueError("icc_cutoff must lie in [0, 1]")
        if self.icc_kind not in ("icc1", "icc2"):
            raise ValueError(f"unknown icc_kind {self.icc_kind!r}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "perturb" in d and isinstance(d["perturb"], dict):
            d["perturb"] = PerturbConfig(**d["perturb"])
        if "extraction" in d and isinstance(d["extraction"], dict):
            d["extraction"] = ExtractionSettings.from_dict(d["extraction"])
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        d["extraction"] = self.extraction.to_dict()
        return d

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw):
        """Apply CLI-style overrides; ``None`` values are ignored."""
        kw = {k: v for k, v in kw.items() if v is not None}
        ext = {}
        if "bin_width" in kw:
            ext["bin_width"] = kw.pop("bin_width")
        cfg = replace(self, **kw)
        if ext:
            cfg = replace(cfg, extraction=replace(cfg.extraction, **ext))
        return cfg

    @classmethod
    def for_cohort(cls, cohort_dir, **kw):
        import os
        sig = os.path.join(cohort_dir, "signature.json")
        return cls(
            images_dir=os.path.join(cohort_dir, "images"),
            references_dir=os.path.join(cohort_dir, "references"),
            survival_csv=os.path.join(cohort_dir, "survival.csv"),
            signature_json=sig if os.path.exists(sig) else "",
            **kw,
        )

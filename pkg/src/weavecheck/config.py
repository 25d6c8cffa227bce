"""Pipeline configuration: one dataclass tree covering every tunable.

Configs load from a JSON file (``--config``), with unknown keys rejected so
typos fail fast.  ``config_hash`` fingerprints the exact settings a model
bundle was trained with.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

DEFECT_KINDS = ("broken_end", "hole", "netting_multiple", "thick_bar", "thin_bar")

LCRE_WEIGHTED = "weighted-distance"
LCRE_EQ9 = "eq9-literal"
LCRE_MODES = (LCRE_WEIGHTED, LCRE_EQ9)

STAR1 = "star1"
STAR2 = "star2"
SUBREGION1 = "subregion1"
SUBREGION2 = "subregion2"

# Row-orderings of primitive motifs that define the two sub-region kinds.
SUBREGION_ORDERS = {
    SUBREGION1: (STAR1, STAR2, STAR1),
    SUBREGION2: (STAR2, STAR1, STAR2),
}


@dataclass
class FabricConfig:
    """Geometry and appearance of the synthetic patterned fabric."""

    prim_h: int = 16          # rows per texture primitive
    prim_w: int = 20          # cols per texture primitive
    prims_per_subregion: tuple = (3, 3)   # primitive rows x cols per sub-region
    subregion_grid: tuple = (3, 4)        # sub-region rows x cols per image
    background: float = 0.85  # bright weave ground
    motif: float = 0.15       # dark star motif
    gutter: float = 0.70      # 1-px yarn gap ringing each primitive
    seam: float = 0.05        # groove between sub-regions, darkest structure
    star1_rad: tuple = (4.5, 5.5)   # small star half-extents (rows, cols)
    star2_rad: tuple = (6.8, 8.8)   # large star half-extents
    noise_amplitude: float = 0.04   # uniform +/- noise, must stay in [0, 0.2]

    @property
    def subregion_pitch(self):
        return (self.prims_per_subregion[0] * self.prim_h,
                self.prims_per_subregion[1] * self.prim_w)

    @property
    def image_shape(self):
        pr, pc = self.subregion_pitch
        return (self.subregion_grid[0] * pr, self.subregion_grid[1] * pc)


@dataclass
class CorpusConfig:
    """Desk-scale corpus layout: 25 normal + 5 images per defect kind."""

    normal_images: int = 25
    images_per_defect: int = 5
    magnitude: float = 0.5
    hole_extent: int = 8            # ellipse col half-axis, rows scale by 3/4
    bar_length: int = 60            # horizontal span of thin/thick bars
    netting_primitives: int = 3     # primitives crossed by the dot train
    alternate_kinds: bool = True    # alternate subregion1/2 fabrics per image


@dataclass
class SegmentConfig:
    """Two-level segmentation parameters."""

    sigma: float = 1.0
    radius: int = 2
    subregion_shape: tuple = (48, 62)   # canonical sub-region crop (rows, cols)
    primitive_shape: tuple = (16, 20)   # canonical primitive crop
    pitch: tuple = (48, 60)             # expected raw lattice pitch (rows, cols)
    pitch_tol: int = 4                  # accepted deviation of a raw cell
    padding: int = 3                    # context added around raw cells
    edge_margin: int = 4                # rule-II minima ignored this close to the crop edge
    min_class_separation: float = 0.02  # required star1/star2 projection gap


@dataclass
class CodingConfig:
    """Coding-family parameters shared by both detection stages."""

    beta_ahog: float = 1.0
    beta_sift: float = 10.0
    k: int = 3
    llc_lambda: float = 1e-4
    llc_sigma: float = 1.0


@dataclass
class CascadeConfig:
    """Training/calibration knobs for the two-stage detector."""

    dict_size: int = 5              # words per (size class, kind) sub-dictionary
    lcre_mode: str = LCRE_WEIGHTED
    threshold_margin: float = 0.10  # slack on the screening threshold
    rho_margin: float = 0.10        # slack on the locality scope radius
    key_snap_tol: int = 2           # max L1 size drift when resolving a size class


@dataclass
class BenchConfig:
    """Order-sensitivity benchmark corpus (index coding vs histograms)."""

    classes: int = 4
    shared_words: int = 8
    class_words: int = 3
    train_per_class: int = 30
    test_per_class: int = 20
    descriptor_dim: int = 16
    descriptor_noise: float = 0.05
    max_count: int = 9              # shared-word repeat counts drawn from 1..max_count
    dict_sizes: tuple = (11, 16, 24)  # per-class codebook sizes to sweep
    seeds: int = 10


@dataclass
class PipelineConfig:
    fabric: FabricConfig = field(default_factory=FabricConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    coding: CodingConfig = field(default_factory=CodingConfig)
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    seed: int = 0
    threads: int = 1

    def to_dict(self):
        return _as_dict(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _as_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _as_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def _apply(obj, data: dict, path: str):
    names = {f.name: f for f in dataclasses.fields(obj)}
    for key, val in data.items():
        if key not in names:
            raise ValueError(f"unknown config key: {path}{key}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(val, dict):
                raise ValueError(f"config section {path}{key} must be an object")
            _apply(current, val, f"{path}{key}.")
        elif isinstance(current, tuple):
            setattr(obj, key, tuple(val))
        else:
            setattr(obj, key, type(current)(val) if current is not None else val)


def config_from_dict(data: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    _apply(cfg, data, "")
    if cfg.cascade.lcre_mode not in LCRE_MODES:
        raise ValueError(f"lcre_mode must be one of {LCRE_MODES}")
    if not 0.0 <= cfg.fabric.noise_amplitude <= 0.2:
        raise ValueError("fabric.noise_amplitude must lie in [0, 0.2]")
    return cfg


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))

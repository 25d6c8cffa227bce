"""Deterministic synthetic patterned-fabric generator with defect injection.

The weave is a lattice of 16x20 texture primitives stamped with one of two
anti-aliased star motifs (dark motif on bright ground), grouped 3x3 into
sub-regions separated by darker seam grooves.  Every render is a pure
function of its spec, and ground truth is tracked per primitive cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import (DEFECT_KINDS, STAR1, STAR2, SUBREGION1, SUBREGION_ORDERS,
                     CorpusConfig, FabricConfig)
from .errors import DataFormatError

MANIFEST_FORMAT = "weavecheck-corpus"
MANIFEST_VERSION = 1

# Required gap between the two stamps' vertical-projection minima; the
# primitive classifier cannot work below this.
MIN_STAMP_SEPARATION = 0.02


@dataclass
class FabricSpec:
    """Everything that determines one rendered fabric image."""

    geometry: FabricConfig = field(default_factory=FabricConfig)
    kind: str = SUBREGION1    # row ordering followed by every sub-region
    seed: int = 0


@dataclass
class DefectSpec:
    kind: str                   # one of DEFECT_KINDS
    location: tuple            # primitive lattice coords (row, col), whole image
    magnitude: float = 0.5      # intensity delta, must exceed the noise amplitude
    extent: int = 8             # size in pixels; meaning varies by kind


@dataclass
class GroundTruth:
    subregion_flags: np.ndarray     # (grid rows, grid cols) bool
    primitive_flags: np.ndarray     # (grid rows*3, grid cols*3) bool
    masks: list                     # [(kind, bool mask)] per injected defect
    noise_amplitude: float

    def copy(self) -> "GroundTruth":
        return GroundTruth(self.subregion_flags.copy(), self.primitive_flags.copy(),
                           list(self.masks), self.noise_amplitude)


def _polygon_fill(h: int, w: int, verts: np.ndarray, supersample: int = 4) -> np.ndarray:
    """Even-odd coverage fraction of a polygon on an h x w pixel grid."""
    ss = supersample
    ys = (np.arange(h * ss) + 0.5) / ss
    xs = (np.arange(w * ss) + 0.5) / ss
    X, Y = np.meshgrid(xs, ys)
    inside = np.zeros(X.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        y1, x1 = verts[i]
        y2, x2 = verts[(i + 1) % n]
        crosses = (y1 > Y) != (y2 > Y)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = x1 + (Y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (X < x_int)
    return inside.reshape(h, ss, w, ss).mean(axis=(1, 3))


def _star_vertices(cy: float, cx: float, ry: float, rx: float,
                   points: int = 5, inner: float = 0.42) -> np.ndarray:
    angles = -np.pi / 2 + np.arange(2 * points) * np.pi / points
    radii = np.where(np.arange(2 * points) % 2 == 0, 1.0, inner)
    return np.stack([cy + ry * radii * np.sin(angles),
                     cx + rx * radii * np.cos(angles)], axis=1)


def build_stamps(geom: FabricConfig) -> dict:
    """Render the two motif stamps and verify they are separable.

    Separability means the rule used everywhere downstream holds: the
    vertical-projection minimum of star1 exceeds that of star2.
    """
    h, w = geom.prim_h, geom.prim_w
    stamps = {}
    for name, (ry, rx) in ((STAR1, geom.star1_rad), (STAR2, geom.star2_rad)):
        if ry >= h / 2 + 1 or rx >= w / 2 + 1:
            raise ValueError(f"{name} radius {(ry, rx)} does not fit a {h}x{w} primitive")
        verts = _star_vertices(h / 2, w / 2, ry, rx)
        cover = _polygon_fill(h, w, verts)
        stamp = geom.background + cover * (geom.motif - geom.background)
        # yarn-gap ring: puts a mild projection dip on every primitive boundary
        stamp[0, :] = np.minimum(stamp[0, :], geom.gutter)
        stamp[-1, :] = np.minimum(stamp[-1, :], geom.gutter)
        stamp[:, 0] = np.minimum(stamp[:, 0], geom.gutter)
        stamp[:, -1] = np.minimum(stamp[:, -1], geom.gutter)
        stamps[name] = stamp
    gap = stamps[STAR1].mean(axis=0).min() - stamps[STAR2].mean(axis=0).min()
    if gap < MIN_STAMP_SEPARATION:
        raise ValueError(
            f"motif stamps are not separable: star1/star2 projection gap {gap:.4f} "
            f"< {MIN_STAMP_SEPARATION}")
    return stamps


def generate_fabric(spec: FabricSpec) -> tuple[np.ndarray, GroundTruth]:
    """Render a defect-free fabric image plus its (all-clear) ground truth.

    Deterministic for a fixed spec; with zero noise the image tiles exactly
    with the sub-region pitch.
    """
    geom = spec.geometry
    if spec.kind not in SUBREGION_ORDERS:
        raise ValueError(f"unknown sub-region kind {spec.kind!r}")
    order = SUBREGION_ORDERS[spec.kind]
    stamps = build_stamps(geom)
    gr, gc = geom.subregion_grid
    pr, pc = geom.prims_per_subregion
    n_cell_rows, n_cell_cols = gr * pr, gc * pc

    strips = []
    for cell_row in range(n_cell_rows):
        stamp = stamps[order[cell_row % len(order)]]
        strips.append(np.tile(stamp, (1, n_cell_cols)))
    img = np.vstack(strips)

    pitch_r, pitch_c = geom.subregion_pitch
    img[::pitch_r, :] = geom.seam
    img[:, ::pitch_c] = geom.seam

    if geom.noise_amplitude > 0:
        rng = np.random.default_rng(spec.seed)
        img = img + rng.uniform(-geom.noise_amplitude, geom.noise_amplitude, img.shape)
    img = np.clip(img, 0.0, 1.0)

    truth = GroundTruth(
        subregion_flags=np.zeros((gr, gc), dtype=bool),
        primitive_flags=np.zeros((n_cell_rows, n_cell_cols), dtype=bool),
        masks=[],
        noise_amplitude=geom.noise_amplitude,
    )
    return img, truth


def _cell_box(img_shape, flags_shape, loc):
    """Pixel box of a lattice cell; raises on out-of-lattice locations."""
    n_rows, n_cols = flags_shape
    ch = img_shape[0] // n_rows
    cw = img_shape[1] // n_cols
    r, c = loc
    if not (0 <= r < n_rows and 0 <= c < n_cols):
        raise ValueError(f"defect location {loc} outside the {n_rows}x{n_cols} lattice")
    return r * ch, c * cw, ch, cw


def _defect_mask(img: np.ndarray, truth: GroundTruth, d: DefectSpec) -> np.ndarray:
    h, w = img.shape
    r0, c0, ch, cw = _cell_box(img.shape, truth.primitive_flags.shape, d.location)
    cy, cx = r0 + ch // 2, c0 + cw // 2
    mask = np.zeros((h, w), dtype=bool)

    if d.kind == "hole":
        ry = max(1, round(d.extent * 0.75))
        rx = d.extent
        if cy - ry < 0 or cy + ry >= h or cx - rx < 0 or cx + rx >= w:
            raise ValueError(f"hole at {d.location} extends outside the image")
        yy, xx = np.ogrid[:h, :w]
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    elif d.kind in ("thin_bar", "thick_bar"):
        thickness = 1 if d.kind == "thin_bar" else 4
        half = d.extent // 2
        top = cy - thickness // 2
        if cx - half < 0 or cx - half + d.extent > w or top < 0 or top + thickness > h:
            raise ValueError(f"{d.kind} at {d.location} extends outside the image")
        mask[top:top + thickness, cx - half:cx - half + d.extent] = True
    elif d.kind == "broken_end":
        # erase the motif's central vertical stroke
        mask[r0:r0 + ch, cx - 2:cx + 2] = True
    elif d.kind == "netting_multiple":
        step = cw // 2
        dot_r = 2
        yy, xx = np.ogrid[:h, :w]
        for off in range(0, d.extent + 1, step):
            dx = cx + off
            if dx + dot_r >= w or cy - dot_r < 0 or cy + dot_r >= h:
                raise ValueError(f"netting dots at {d.location} extend outside the image")
            mask |= (yy - cy) ** 2 + (xx - dx) ** 2 <= dot_r ** 2
    else:
        raise ValueError(f"unknown defect kind {d.kind!r}; expected one of {DEFECT_KINDS}")
    return mask


def inject_defect(img: np.ndarray, truth: GroundTruth,
                  d: DefectSpec) -> tuple[np.ndarray, GroundTruth]:
    """Apply one defect, returning new image and updated ground truth.

    Pixels outside the defect mask are untouched, and existing flags are
    never cleared.
    """
    if d.magnitude <= truth.noise_amplitude:
        raise ValueError(
            f"defect magnitude {d.magnitude} must exceed noise amplitude "
            f"{truth.noise_amplitude}")
    mask = _defect_mask(img, truth, d)
    out = img.copy()
    if d.kind == "hole":
        out[mask] = np.clip(out[mask] - d.magnitude, 0.0, 1.0)
    else:
        out[mask] = np.clip(out[mask] + d.magnitude, 0.0, 1.0)

    new_truth = truth.copy()
    n_rows, n_cols = new_truth.primitive_flags.shape
    ch, cw = img.shape[0] // n_rows, img.shape[1] // n_cols
    hit = mask.reshape(n_rows, ch, n_cols, cw).any(axis=(1, 3))
    new_truth.primitive_flags |= hit
    gr, gc = new_truth.subregion_flags.shape
    pr, pc = n_rows // gr, n_cols // gc
    new_truth.subregion_flags |= new_truth.primitive_flags.reshape(
        gr, pr, gc, pc).any(axis=(1, 3))
    new_truth.masks.append((d.kind, mask))
    return out, new_truth


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------


def _safe_columns(kind: str, extent: int, n_cols: int, cw: int, width: int):
    """Lattice columns where the defect geometry stays inside the image."""
    cols = []
    for c in range(n_cols):
        cx = c * cw + cw // 2
        if kind in ("thin_bar", "thick_bar"):
            half = extent // 2
            ok = cx - half >= 0 and cx - half + extent <= width
        elif kind == "netting_multiple":
            ok = cx + extent + 2 < width
        else:
            ok = True
        if ok:
            cols.append(c)
    return cols


def plan_corpus(fabric: FabricConfig, corpus: CorpusConfig, seed: int) -> list:
    """Deterministic corpus plan: per-image spec, defects, and file name."""
    plans = []
    rng = np.random.default_rng(seed)
    n_rows = fabric.subregion_grid[0] * fabric.prims_per_subregion[0]
    n_cols = fabric.subregion_grid[1] * fabric.prims_per_subregion[1]
    width = fabric.image_shape[1]
    total = corpus.normal_images + corpus.images_per_defect * len(DEFECT_KINDS)
    for i in range(total):
        kind = SUBREGION1 if (not corpus.alternate_kinds or i % 2 == 0) else SUBREGION2
        spec = FabricSpec(geometry=fabric, kind=kind, seed=seed * 100003 + i)
        defects = []
        if i >= corpus.normal_images:
            defect_kind = DEFECT_KINDS[(i - corpus.normal_images) // corpus.images_per_defect]
            if defect_kind == "hole":
                extent = corpus.hole_extent
            elif defect_kind in ("thin_bar", "thick_bar"):
                extent = corpus.bar_length
            elif defect_kind == "netting_multiple":
                extent = (corpus.netting_primitives - 1) * fabric.prim_w
            else:
                extent = 4
            cols = _safe_columns(defect_kind, extent, n_cols, fabric.prim_w, width)
            loc = (int(rng.integers(0, n_rows)), int(cols[rng.integers(0, len(cols))]))
            defects.append(DefectSpec(kind=defect_kind, location=loc,
                                      magnitude=corpus.magnitude, extent=extent))
        plans.append({"name": f"fabric_{i:03d}.png", "spec": spec, "defects": defects})
    return plans


def render_plan(plan: dict) -> tuple[np.ndarray, GroundTruth]:
    img, truth = generate_fabric(plan["spec"])
    for d in plan["defects"]:
        img, truth = inject_defect(img, truth, d)
    return img, truth


def manifest_entry(plan: dict, truth: GroundTruth, path: str) -> dict:
    spec = plan["spec"]
    return {
        "path": path,
        "fabric_kind": spec.kind,
        "seed": spec.seed,
        "defective": bool(truth.primitive_flags.any()),
        "defects": [
            {"kind": d.kind, "location": list(d.location),
             "magnitude": d.magnitude, "extent": d.extent}
            for d in plan["defects"]
        ],
        "subregion_flags": truth.subregion_flags.astype(int).tolist(),
        "primitive_flags": truth.primitive_flags.astype(int).tolist(),
    }


def build_manifest(fabric: FabricConfig, seed: int, entries: list) -> dict:
    return {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "seed": seed,
        "fabric": {
            "prim_h": fabric.prim_h, "prim_w": fabric.prim_w,
            "prims_per_subregion": list(fabric.prims_per_subregion),
            "subregion_grid": list(fabric.subregion_grid),
        },
        "images": entries,
    }


def load_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise DataFormatError(f"{path} is not a {MANIFEST_FORMAT} manifest")
    if "images" not in manifest:
        raise DataFormatError(f"{path}: manifest has no image list")
    return manifest

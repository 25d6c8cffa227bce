"""Two-level segmentation: typed sub-regions (rule I) and primitives (rule II).

Rule I cuts the smoothed image into raw lattice cells at projection-curve
minima whose spacing matches the configured pitch, then refines each cell to
the canonical sub-region crop.  Rule II locates the primitive motif cores
inside a sub-region (deep projection minima) and cuts fixed-size windows
around them.  Both levels keep the measured raw geometry as the size class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SUBREGION_ORDERS, STAR1, STAR2, SegmentConfig
from .errors import CalibrationError, ClassificationError, SegmentationError
from .imaging import local_minima, projection_curve


@dataclass(frozen=True)
class SizeClass:
    """Measured raw cell size plus the per-side refinement offsets."""

    l_h: int   # raw width between vertical-curve boundaries
    l_v: int   # raw height between horizontal-curve boundaries
    h1: int
    h2: int
    v1: int
    v2: int

    @classmethod
    def from_measured(cls, l_h: int, l_v: int, canonical: tuple) -> "SizeClass":
        ch, cw = canonical
        h_extra = cw - l_h
        v_extra = ch - l_v
        h1 = h_extra // 2
        v1 = v_extra // 2
        return cls(l_h=l_h, l_v=l_v, h1=h1, h2=h_extra - h1, v1=v1, v2=v_extra - v1)

    def key(self) -> tuple:
        return (self.l_h, self.l_v)


@dataclass
class SubRegion:
    bounds: tuple          # (row0, col0, h, w) in image coordinates
    grid: tuple            # (row, col) position in the sub-region lattice
    size_class: SizeClass
    pixels: np.ndarray = field(repr=False)          # canonical crop
    kind: str | None = None
    source: np.ndarray | None = field(default=None, repr=False)  # image it was cut from


@dataclass
class Primitive:
    bounds: tuple          # (row0, col0, h, w) in image coordinates
    grid: tuple            # (row, col) position inside the sub-region
    pixels: np.ndarray = field(repr=False)          # canonical crop
    kind: str | None = None


def crop_centered(img: np.ndarray, cy: float, cx: float, h: int, w: int):
    """Fixed-size window centered at (cy, cx); out-of-image pixels replicate
    the nearest edge.  Returns (crop, bounds) with the unclamped origin."""
    r0 = int(round(cy - h / 2.0))
    c0 = int(round(cx - w / 2.0))
    rows = np.clip(np.arange(r0, r0 + h), 0, img.shape[0] - 1)
    cols = np.clip(np.arange(c0, c0 + w), 0, img.shape[1] - 1)
    return img[np.ix_(rows, cols)], (r0, c0, h, w)


def _thin_minima(cands: list, values: np.ndarray, min_separation: int) -> list:
    """Keep deepest minima first, dropping any within min_separation of a keeper."""
    order = sorted(cands, key=lambda i: (values[i], i))
    kept: list[int] = []
    for idx in order:
        if all(abs(idx - k) >= min_separation for k in kept):
            kept.append(idx)
    return sorted(kept)


def select_boundaries(curve: np.ndarray, pitch: int, tol: int) -> list:
    """Cut positions along a projection curve, spaced pitch +- tol.

    Candidate cuts are the curve's local minima plus both ends; dynamic
    programming picks the subset whose consecutive gaps all fall within
    tolerance, minimizing total deviation from the pitch.  No valid chain
    means the lattice structure is absent.
    """
    n = len(curve)
    cands = [0] + local_minima(curve, 3) + [n]
    lo, hi = pitch - tol, pitch + tol
    ncand = len(cands)
    INF = float("inf")
    cost = [INF] * ncand
    prev = [-1] * ncand
    cost[0] = 0.0
    for j in range(1, ncand):
        for i in range(j - 1, -1, -1):
            gap = cands[j] - cands[i]
            if gap > hi:
                break
            if gap >= lo and cost[i] + abs(gap - pitch) < cost[j]:
                cost[j] = cost[i] + abs(gap - pitch)
                prev[j] = i
    if math.isinf(cost[-1]):
        raise SegmentationError(
            f"no boundary chain with pitch {pitch}+-{tol} over {n} samples "
            f"({len(cands) - 2} candidate minima)",
            curves={"curve": curve.tolist(), "candidates": cands[1:-1]})
    bounds = []
    j = ncand - 1
    while j >= 0:
        bounds.append(cands[j])
        j = prev[j]
    return bounds[::-1]


def segment_rule1(img: np.ndarray, cfg: SegmentConfig) -> list:
    """Cut a smoothed fabric image into canonical sub-regions.

    Each raw cell's measured size becomes its size-class key before the
    centered refinement to the canonical crop, so re-running on an already
    canonical crop returns it unchanged.
    """
    rows_curve = projection_curve(img, "horizontal")
    cols_curve = projection_curve(img, "vertical")
    try:
        row_bounds = select_boundaries(rows_curve, cfg.pitch[0], cfg.pitch_tol)
        col_bounds = select_boundaries(cols_curve, cfg.pitch[1], cfg.pitch_tol)
    except SegmentationError as exc:
        exc.curves.setdefault("rows", rows_curve.tolist())
        exc.curves.setdefault("cols", cols_curve.tolist())
        raise
    out = []
    for gi in range(len(row_bounds) - 1):
        r0, r1 = row_bounds[gi], row_bounds[gi + 1]
        for gj in range(len(col_bounds) - 1):
            c0, c1 = col_bounds[gj], col_bounds[gj + 1]
            size = SizeClass.from_measured(c1 - c0, r1 - r0, cfg.subregion_shape)
            crop, bounds = crop_centered(img, (r0 + r1) / 2.0, (c0 + c1) / 2.0,
                                         *cfg.subregion_shape)
            out.append(SubRegion(bounds=bounds, grid=(gi, gj), size_class=size,
                                 pixels=crop, source=img))
    return out


def segment_rule2(sr: SubRegion, cfg: SegmentConfig) -> list:
    """Cut a canonical sub-region into its primitives.

    Primitive motif cores show up as the deepest projection minima of the
    crop; a fixed-size window around each core is the canonical primitive.
    """
    ph, pw = cfg.primitive_shape
    crop = sr.pixels
    H, W = crop.shape
    exp_rows = round(H / ph)
    exp_cols = round(W / pw)
    centers = {}
    for axis, pitch_px, expected in (("horizontal", ph, exp_rows),
                                     ("vertical", pw, exp_cols)):
        curve = projection_curve(crop, axis)
        limit = (H if axis == "horizontal" else W) - 1 - cfg.edge_margin
        cands = [i for i in local_minima(curve, 1) if cfg.edge_margin <= i <= limit]
        sep = math.ceil(0.75 * pitch_px)
        mins = _thin_minima(cands, curve, sep)
        if len(mins) != expected:
            raise SegmentationError(
                f"expected {expected} primitive cores on the {axis} axis, "
                f"found {len(mins)} at {mins}",
                curves={axis: curve.tolist(), "minima": mins})
        centers[axis] = mins
    up = ph // 2 - 1
    left = pw // 2 - 1
    prims = []
    for i, mr in enumerate(centers["horizontal"]):
        for j, mc in enumerate(centers["vertical"]):
            if sr.source is not None:
                # absolute windows: shifting the crop frame cannot move them
                r0 = sr.bounds[0] + mr - up
                c0 = sr.bounds[1] + mc - left
                rows = np.clip(np.arange(r0, r0 + ph), 0, sr.source.shape[0] - 1)
                cols = np.clip(np.arange(c0, c0 + pw), 0, sr.source.shape[1] - 1)
                pixels = sr.source[np.ix_(rows, cols)]
            else:
                r0 = min(max(mr - up, 0), H - ph)
                c0 = min(max(mc - left, 0), W - pw)
                pixels = crop[r0:r0 + ph, c0:c0 + pw]
                r0 += sr.bounds[0]
                c0 += sr.bounds[1]
            prims.append(Primitive(bounds=(r0, c0, ph, pw), grid=(i, j), pixels=pixels))
    return prims


# ---------------------------------------------------------------------------
# Primitive / sub-region classification
# ---------------------------------------------------------------------------

@dataclass
class PrimitiveClassifier:
    """Thresholds the vertical-projection minimum: star1 sits above the
    midpoint, star2 below."""

    midpoint: float
    star1_mean: float
    star2_mean: float
    trim: int = 2   # border pixels ignored so seam lines cannot skew the score

    def score(self, pixels: np.ndarray) -> float:
        t = self.trim
        inner = pixels[t:-t, t:-t] if t else pixels
        return float(inner.mean(axis=0).min())


def calibrate_primitive_classifier(crops: list, min_separation: float = 0.02,
                                   trim: int = 2) -> PrimitiveClassifier:
    """Unsupervised calibration: 1-D 2-means over projection minima.

    The cluster with the larger mean is star1.  Refuses to calibrate when
    the two clusters are not separated, which is what happens when all
    training crops carry the same motif.
    """
    if len(crops) < 2:
        raise CalibrationError("need at least two primitive crops to calibrate")
    probe = PrimitiveClassifier(0.0, 0.0, 0.0, trim=trim)
    vals = np.array([probe.score(np.asarray(c)) for c in crops])
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < min_separation:
        raise CalibrationError(
            f"projection minima span only {hi - lo:.4f}; motifs are not separable")
    for _ in range(100):
        mid = (lo + hi) / 2.0
        high = vals[vals >= mid]
        low = vals[vals < mid]
        if high.size == 0 or low.size == 0:
            raise CalibrationError("degenerate split while calibrating the classifier")
        new_lo, new_hi = float(low.mean()), float(high.mean())
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = new_lo, new_hi
    if hi - lo < min_separation:
        raise CalibrationError(
            f"motif classes separated by only {hi - lo:.4f} after clustering")
    return PrimitiveClassifier(midpoint=(lo + hi) / 2.0, star1_mean=hi,
                               star2_mean=lo, trim=trim)


def classify_primitive(p: Primitive, clf: PrimitiveClassifier) -> str:
    return STAR1 if clf.score(p.pixels) >= clf.midpoint else STAR2


def classify_subregion(sr: SubRegion, clf: PrimitiveClassifier, cfg: SegmentConfig,
                       primitives: list | None = None) -> str:
    """Sub-region kind from the row ordering of its primitive motifs.

    Each primitive row is labelled by its middle primitive.  Orderings that
    match no template are classification failures.
    """
    prims = primitives if primitives is not None else segment_rule2(sr, cfg)
    n_cols = max(p.grid[1] for p in prims) + 1
    mid = n_cols // 2
    ordering = tuple(classify_primitive(p, clf)
                     for p in prims if p.grid[1] == mid)
    for kind, order in SUBREGION_ORDERS.items():
        if ordering == order:
            return kind
    raise ClassificationError(f"primitive row ordering {ordering} matches no sub-region kind")


def draw_overlay(img: np.ndarray, subregions: list, primitives: list = ()) -> np.ndarray:
    """Copy of the image with sub-region bounds in white, primitives in black."""
    out = np.asarray(img).copy()

    def _rect(bounds, value):
        r0, c0, h, w = bounds
        r1, c1 = r0 + h - 1, c0 + w - 1
        rr0 = np.clip(r0, 0, out.shape[0] - 1)
        rr1 = np.clip(r1, 0, out.shape[0] - 1)
        cc0 = np.clip(c0, 0, out.shape[1] - 1)
        cc1 = np.clip(c1, 0, out.shape[1] - 1)
        out[rr0, cc0:cc1 + 1] = value
        out[rr1, cc0:cc1 + 1] = value
        out[rr0:rr1 + 1, cc0] = value
        out[rr0:rr1 + 1, cc1] = value

    for sr in subregions:
        _rect(sr.bounds, 1.0)
    for p in primitives:
        _rect(p.bounds, 0.0)
    return out

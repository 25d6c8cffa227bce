"""Dense descriptor extraction: block HOG / aggregated HOG and dense SIFT.

Sub-regions get one long aggregated-HOG vector (36 blocks x 36 values =
1296); primitives get 3 dense SIFT descriptors (128-dim, one per 16x16
patch stepped 2 px along the wide axis).  All extraction is pure and
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AHOG_DIM = 1296
SIFT_DIM = 128


@dataclass(frozen=True)
class HogParams:
    block: tuple = (8, 10)   # rows, cols
    cell: tuple = (4, 5)
    bins: int = 9            # unsigned orientations over 0..180 degrees
    eps: float = 1e-6


def _pixels(obj) -> np.ndarray:
    return np.asarray(obj.pixels if hasattr(obj, "pixels") else obj, dtype=np.float64)


def hog_block(crop, params: HogParams = HogParams()) -> np.ndarray:
    """Orientation histogram of one block: per-cell 9-bin histograms over
    2x2 cells, concatenated row-major and jointly L2-normalized.

    Gradients are central differences (one-sided at the crop edge), votes
    are magnitude-weighted and linearly interpolated between the two
    nearest bin centers, orientations unsigned.
    """
    crop = _pixels(crop)
    if crop.shape != params.block:
        raise ValueError(f"block crop must be {params.block}, got {crop.shape}")
    gy, gx = np.gradient(crop)
    mag = np.hypot(gy, gx)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0

    nbins = params.bins
    width = 180.0 / nbins
    a = ang / width - 0.5
    i0 = np.floor(a).astype(int)
    frac = a - i0
    i0 %= nbins
    i1 = (i0 + 1) % nbins

    ch, cw = params.cell
    br, bc = params.block[0] // ch, params.block[1] // cw
    rows, cols = np.indices(crop.shape)
    cell_idx = (rows // ch) * bc + (cols // cw)

    flat0 = cell_idx * nbins + i0
    flat1 = cell_idx * nbins + i1
    total = br * bc * nbins
    hist = np.bincount(flat0.ravel(), (mag * (1.0 - frac)).ravel(), minlength=total)
    hist += np.bincount(flat1.ravel(), (mag * frac).ravel(), minlength=total)
    return hist / np.sqrt(np.sum(hist ** 2) + params.eps ** 2)


def ahog(sr, params: HogParams = HogParams()) -> np.ndarray:
    """Aggregated HOG of a canonical sub-region: the row-major concatenation
    of every non-overlapping block's histogram.

    A 48x62 crop gives a 6x6 block grid (2 px on the wide axis truncated),
    hence 36 * 36 = 1296 values.
    """
    crop = _pixels(sr)
    bh, bw = params.block
    nr, nc = crop.shape[0] // bh, crop.shape[1] // bw
    if nr == 0 or nc == 0:
        raise ValueError(f"sub-region crop {crop.shape} smaller than a {params.block} block")
    out = np.empty(nr * nc * params.bins * 4)
    step = params.bins * 4
    k = 0
    for i in range(nr):
        for j in range(nc):
            block = crop[i * bh:(i + 1) * bh, j * bw:(j + 1) * bw]
            out[k * step:(k + 1) * step] = hog_block(block, params)
            k += 1
    return out


# ---------------------------------------------------------------------------
# Dense SIFT
# ---------------------------------------------------------------------------

_SIFT_BINS = 8
_SIFT_GRID = 4          # spatial cells per axis
_SIFT_CLAMP = 0.2

_sift_geometry_cache: dict = {}


def _sift_geometry(patch: int):
    """Per-pixel spatial-cell index and Gaussian weight for a patch size."""
    if patch not in _sift_geometry_cache:
        cell = patch // _SIFT_GRID
        rows, cols = np.indices((patch, patch))
        cell_idx = (rows // cell) * _SIFT_GRID + (cols // cell)
        center = (patch - 1) / 2.0
        sigma = patch / 2.0
        weight = np.exp(-((rows - center) ** 2 + (cols - center) ** 2) / (2 * sigma ** 2))
        _sift_geometry_cache[patch] = (cell_idx, weight)
    return _sift_geometry_cache[patch]


def _sift_patch(patch_px: np.ndarray) -> np.ndarray:
    patch = patch_px.shape[0]
    cell_idx, weight = _sift_geometry(patch)
    gy, gx = np.gradient(patch_px)
    mag = np.hypot(gy, gx) * weight
    ang = np.arctan2(gy, gx) % (2 * np.pi)

    a = ang / (2 * np.pi / _SIFT_BINS) - 0.5
    i0 = np.floor(a).astype(int)
    frac = a - i0
    i0 %= _SIFT_BINS
    i1 = (i0 + 1) % _SIFT_BINS

    total = _SIFT_GRID * _SIFT_GRID * _SIFT_BINS
    hist = np.bincount((cell_idx * _SIFT_BINS + i0).ravel(),
                       (mag * (1.0 - frac)).ravel(), minlength=total)
    hist += np.bincount((cell_idx * _SIFT_BINS + i1).ravel(),
                        (mag * frac).ravel(), minlength=total)

    norm = np.linalg.norm(hist)
    if norm < 1e-12:
        return np.zeros(total)
    hist = np.minimum(hist / norm, _SIFT_CLAMP)   # suppress dominant gradients
    norm = np.linalg.norm(hist)
    return hist / norm if norm >= 1e-12 else np.zeros(total)


def dense_sift(p, patch: int = 16, stride: int = 2) -> list[np.ndarray]:
    """Ordered dense SIFT descriptors of a canonical primitive.

    Square patches slide along the wide axis only (a 16x20 primitive yields
    offsets 0, 2, 4 -> exactly 3 descriptors).  Each descriptor is 4x4
    spatial cells x 8 orientation bins, Gaussian-weighted (sigma = patch/2),
    L2-normalized, clamped at 0.2, renormalized.  Flat patches give zero
    vectors.
    """
    crop = _pixels(p)
    h, w = crop.shape
    if h != patch:
        raise ValueError(f"primitive height {h} must equal patch size {patch}")
    if (w - patch) % stride != 0:
        raise ValueError(f"width {w} minus patch {patch} must be a multiple of stride {stride}")
    return [_sift_patch(crop[:, off:off + patch])
            for off in range(0, w - patch + 1, stride)]


def dump_descriptors(vectors, path) -> None:
    """One vector per line, full-precision decimals, for offline checks."""
    with open(path, "w", encoding="utf-8") as fh:
        for vec in vectors:
            fh.write(" ".join(repr(float(v)) for v in np.asarray(vec)) + "\n")

"""Image I/O, smoothing, and projection-curve analysis.

A grayscale image is a plain 2-D float64 array, shape (rows, cols), with
intensities in [0, 1].  Everything downstream consumes this representation.
"""

from __future__ import annotations

import re

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import convolve1d

from .errors import DataFormatError

_PGM_HEADER = re.compile(rb"^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s")


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG or binary PGM (P5) as a [0, 1] grayscale array.

    Color inputs are reduced by averaging the channels, so an RGB pixel
    (30, 60, 90) maps to 60/255.
    """
    path = str(path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(2)
    except OSError as exc:
        raise DataFormatError(f"cannot read image {path}: {exc}") from exc
    if magic == b"P5":
        return _read_pgm(path)
    if magic == b"\x89P":
        return _read_png(path)
    raise DataFormatError(
        f"unsupported image format in {path}: expected PNG or binary PGM (P5)")


def _read_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode == "P":
                im = im.convert("RGB")
            data = np.asarray(im)
    except (UnidentifiedImageError, OSError) as exc:
        raise DataFormatError(f"cannot decode PNG {path}: {exc}") from exc
    if data.dtype != np.uint8:
        raise DataFormatError(f"{path}: only 8-bit images are supported")
    gray = data.astype(np.float64)
    if gray.ndim == 3:
        gray = gray[:, :, :3].mean(axis=2)   # channel average, alpha dropped
    return gray / 255.0


def _read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    m = _PGM_HEADER.match(blob)
    if not m:
        raise DataFormatError(f"{path}: malformed PGM header")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval <= 0 or maxval > 255:
        raise DataFormatError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=m.end())
    if pixels.size < width * height:
        raise DataFormatError(f"{path}: truncated PGM pixel data")
    pixels = pixels[: width * height].reshape(height, width)
    return pixels.astype(np.float64) / maxval


def write_pgm(img: np.ndarray, path) -> None:
    """Write a [0, 1] grayscale array as binary PGM, for debug dumps."""
    data = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(data.tobytes())


def write_png(img: np.ndarray, path) -> None:
    data = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(str(path), format="PNG")


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    """Normalized sampled Gaussian on [-radius, radius]."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(img: np.ndarray, sigma: float = 1.0, radius: int = 2) -> np.ndarray:
    """Separable Gaussian smoothing with edge replication.

    The kernel is the normalized sampled Gaussian, so constant images are
    preserved exactly and total mass is conserved away from the borders.
    """
    kernel = gaussian_kernel(sigma, radius)
    out = convolve1d(np.asarray(img, dtype=np.float64), kernel, axis=0, mode="nearest")
    return convolve1d(out, kernel, axis=1, mode="nearest")


def projection_curve(img: np.ndarray, axis: str) -> np.ndarray:
    """Mean-intensity profile: per row ("horizontal") or per column ("vertical").

    Means rather than sums keep the curve scale independent of resolution.
    """
    img = np.asarray(img)
    if img.size == 0:
        raise ValueError("projection of an empty image")
    if axis == "horizontal":
        return img.mean(axis=1)
    if axis == "vertical":
        return img.mean(axis=0)
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def local_minima(curve: np.ndarray, min_separation: int = 1) -> list[int]:
    """Interior local minima, thinned so kept minima are >= min_separation apart.

    Where two minima fall closer than ``min_separation``, the smaller value
    wins (ties go to the lower index).  Endpoints never qualify.
    """
    if min_separation < 1:
        raise ValueError("min_separation must be >= 1")
    v = np.asarray(curve, dtype=np.float64)
    if v.size < 3:
        return []
    inner = v[1:-1]
    cand = np.nonzero((inner <= v[:-2]) & (inner <= v[2:]))[0] + 1
    if cand.size == 0:
        return []
    order = cand[np.lexsort((cand, v[cand]))]   # by value, then index
    kept: list[int] = []
    for idx in order:
        if all(abs(int(idx) - k) >= min_separation for k in kept):
            kept.append(int(idx))
    return sorted(kept)

"""Codebook training and visual-word coding.

Implements the whole coding family used by the detector: hard and soft
assignment, localized soft-assignment (weights over the k nearest words
only), locality-constrained least-squares coding in both its full and
k-neighborhood forms, the scope-restricted variant whose encoding is only
valid within a calibrated radius, and the reconstruction-error score used
for screening.

Conventions: descriptors and words are float64 row vectors; codes are
dense length-M vectors; all tie-breaking is lowest-index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import LCRE_EQ9, LCRE_MODES, LCRE_WEIGHTED

CODEBOOK_FORMAT = "weavecheck-codebook"
CODEBOOK_VERSION = 1

FLAVOR_LABEL = "label"     # keyed by sub-region size class and kind
FLAVOR_NUMBER = "number"   # per patch position, randomly numbered words


@dataclass
class Codebook:
    words: np.ndarray = field(repr=False)        # (M, D)
    flavor: str = FLAVOR_LABEL
    numbering: np.ndarray | None = None          # permutation of 1..M (number flavor)
    seed: int | None = None

    @property
    def size(self) -> int:
        return self.words.shape[0]

    def __post_init__(self):
        self.words = np.asarray(self.words, dtype=np.float64)
        if self.words.ndim != 2 or self.words.shape[0] < 1:
            raise ValueError("codebook needs at least one word (M x D matrix)")
        if self.numbering is not None:
            self.numbering = np.asarray(self.numbering, dtype=int)
            if sorted(self.numbering.tolist()) != list(range(1, self.size + 1)):
                raise ValueError("numbering must be a permutation of 1..M")


@dataclass(frozen=True)
class OutOfScope:
    """Marker value: every word sits at or beyond the scope radius."""

    distance: float   # distance to the nearest word


def _sqdists(x: np.ndarray, book: Codebook) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (book.words.shape[1],):
        raise ValueError(
            f"descriptor dim {x.shape} does not match codebook dim {book.words.shape[1]}")
    diff = book.words - x
    return np.einsum("ij,ij->i", diff, diff)


def kmeans(descriptors, M: int, seed: int = 0, flavor: str = FLAVOR_LABEL,
           return_objective: bool = False):
    """Lloyd's algorithm with k-means++ seeding.

    Stops when assignments are stable or after 100 iterations; an emptied
    cluster is re-seeded to the point farthest from its current center.
    Deterministic for a fixed seed.
    """
    X = np.asarray(descriptors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < M:
        raise ValueError(f"need at least {M} descriptors, got {X.shape}")
    n = X.shape[0]
    rng = np.random.default_rng(seed)

    centers = np.empty((M, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for m in range(1, M):
        total = d2.sum()
        idx = int(rng.choice(n, p=d2 / total)) if total > 0 else 0
        centers[m] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[m]) ** 2, axis=1))

    objective = []
    assign = None
    for _ in range(100):
        dists = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = dists.argmin(axis=1)
        point_d2 = dists[np.arange(n), new_assign]
        for m in range(M):
            if not np.any(new_assign == m):
                far = int(point_d2.argmax())
                centers[m] = X[far]
                new_assign[far] = m
                point_d2[far] = 0.0
        objective.append(float(point_d2.sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for m in range(M):
            centers[m] = X[assign == m].mean(axis=0)

    book = Codebook(words=centers, flavor=flavor, seed=seed)
    return (book, objective) if return_objective else book


def hard_assign(x, book: Codebook) -> np.ndarray:
    """One-hot code on the nearest word (ties -> lowest index)."""
    d2 = _sqdists(x, book)
    c = np.zeros(book.size)
    c[int(d2.argmin())] = 1.0
    return c


def _masked_softmax(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over masked entries, summed in index order.

    Using the full-length array keeps k = M bitwise identical to the
    unmasked softmax.
    """
    zm = z[mask].max()
    e = np.where(mask, np.exp(np.where(mask, z - zm, 0.0)), 0.0)
    return e / e.sum()


def soft_assign(x, book: Codebook, beta: float) -> np.ndarray:
    """Gaussian-kernel membership over all M words, normalized to sum 1."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    z = -beta * _sqdists(x, book)
    return _masked_softmax(z, np.ones(book.size, dtype=bool))


def lsc_assign(x, book: Codebook, beta: float, k: int) -> np.ndarray:
    """Localized soft assignment: kernel weights over the k nearest words,
    zero elsewhere (distances to the rest treated as infinite)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not 1 <= k <= book.size:
        raise ValueError(f"k must be in [1, {book.size}], got {k}")
    d2 = _sqdists(x, book)
    neighbors = np.argsort(d2, kind="stable")[:k]
    mask = np.zeros(book.size, dtype=bool)
    mask[neighbors] = True
    return _masked_softmax(-beta * d2, mask)


def _affine_lstsq(words: np.ndarray, x: np.ndarray, reg: np.ndarray) -> np.ndarray:
    """Solve min ||x - words^T c||^2 + c^T diag(reg) c subject to sum(c) = 1.

    Analytic form: solve (C + diag(reg)) c~ = 1 with C the shifted data
    covariance, then normalize c~ to unit sum.
    """
    Z = words - x
    C = Z @ Z.T
    G = C + np.diag(reg)
    ctilde = np.linalg.solve(G, np.ones(len(words)))
    total = ctilde.sum()
    if abs(total) < 1e-12:
        raise np.linalg.LinAlgError("degenerate system: coefficients sum to zero")
    return ctilde / total


def llc_approx(x, book: Codebook, k: int, lam: float = 1e-4) -> np.ndarray:
    """Locality-constrained coding over the k nearest words.

    The small linear system uses the shifted covariance with a trace-scaled
    ridge for conditioning.  A descriptor equal to one of the selected words
    gets the exact indicator solution.
    """
    if not 1 <= k <= book.size:
        raise ValueError(f"k must be in [1, {book.size}], got {k}")
    x = np.asarray(x, dtype=np.float64)
    d2 = _sqdists(x, book)
    neighbors = np.argsort(d2, kind="stable")[:k]
    code = np.zeros(book.size)
    if d2[neighbors[0]] == 0.0:
        code[neighbors[0]] = 1.0
        return code
    C_trace = np.sum((book.words[neighbors] - x) ** 2)
    reg = np.full(k, lam * C_trace / k)
    code[neighbors] = _affine_lstsq(book.words[neighbors], x, reg)
    return code


def llc_full(x, book: Codebook, lam: float = 1e-4, sigma: float = 1.0) -> np.ndarray:
    """Locality-constrained coding over the whole codebook.

    Each word's coefficient is penalized by the squared locality adaptor
    exp(dist/sigma), distances max-normalized before the exponent, so far
    words get less freedom as the penalty grows.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=np.float64)
    dist = np.sqrt(_sqdists(x, book))
    dmax = dist.max()
    adaptor = np.exp((dist / dmax if dmax > 0 else dist) / sigma)
    return _affine_lstsq(book.words, x, lam * adaptor ** 2)


def rlc_assign(x, book: Codebook, k: int, rho: float, lam: float = 1e-4):
    """Scope-restricted locality-constrained coding.

    Only words strictly closer than ``rho`` are valid bases.  Returns
    ``(code, nearest_index)`` on success, where nearest_index is the
    position of the nearest valid word, or :class:`OutOfScope` carrying the
    nearest distance when no word is in scope.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    d2 = _sqdists(x, book)
    dist = np.sqrt(d2)
    valid = np.nonzero(dist < rho)[0]
    if valid.size == 0:
        return OutOfScope(distance=float(dist.min()))
    order = valid[np.argsort(dist[valid], kind="stable")]
    chosen = order[: min(k, valid.size)]
    code = np.zeros(book.size)
    if d2[chosen[0]] == 0.0:
        code[chosen[0]] = 1.0
        return code, int(chosen[0])
    C_trace = np.sum((book.words[chosen] - x) ** 2)
    reg = np.full(len(chosen), lam * C_trace / len(chosen))
    code[chosen] = _affine_lstsq(book.words[chosen], x, reg)
    return code, int(chosen[0])


def lcre(descriptors, book: Codebook, beta: float, k: int,
         mode: str = LCRE_WEIGHTED) -> float:
    """Locality-constrained reconstruction error over a descriptor batch.

    ``weighted-distance`` (default) sums weight * squared distance over each
    descriptor's k-neighborhood and grows with defect severity.
    ``eq9-literal`` sums weight * kernel value instead, so it shrinks as
    descriptors drift from the dictionary; callers must flip their decision
    rule accordingly.
    """
    if mode not in LCRE_MODES:
        raise ValueError(f"mode must be one of {LCRE_MODES}, got {mode!r}")
    descriptors = list(descriptors)
    if not descriptors:
        raise ValueError("cannot score an empty descriptor list")
    total = 0.0
    for x in descriptors:
        c = lsc_assign(x, book, beta, k)
        d2 = _sqdists(x, book)
        if mode == LCRE_WEIGHTED:
            total += float(np.dot(c, d2))
        else:
            total += float(np.dot(c, np.exp(-beta * d2)))
    return total


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def codebook_to_dict(book: Codebook) -> dict:
    return {
        "format": CODEBOOK_FORMAT,
        "version": CODEBOOK_VERSION,
        "flavor": book.flavor,
        "rows": int(book.words.shape[0]),
        "dim": int(book.words.shape[1]),
        "words": [[float(v) for v in row] for row in book.words],
        "numbering": None if book.numbering is None else [int(i) for i in book.numbering],
        "seed": book.seed,
    }


def codebook_from_dict(data: dict) -> Codebook:
    if data.get("format") != CODEBOOK_FORMAT:
        raise ValueError("not a serialized codebook")
    words = np.array(data["words"], dtype=np.float64).reshape(data["rows"], data["dim"])
    numbering = data.get("numbering")
    return Codebook(words=words, flavor=data["flavor"],
                    numbering=None if numbering is None else np.array(numbering),
                    seed=data.get("seed"))

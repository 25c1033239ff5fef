"""Block matching, 3D group transforms and the hard-threshold w-update.

Reference blocks sit on a regular grid with stride ``step``; the last row
and column of the grid are snapped to the image border so every pixel is
covered. Each reference is grouped with its ``group_size`` closest blocks
(squared Euclidean distance) whose top-left corner lies within
``(window - block_size) // 2`` pixels of the reference's. Ties are broken
by raster order, with the reference itself always first.

Stacks have shape ``(..., block_size, block_size, group_size)``. The 3D
transform is a 2D orthonormal DCT-II on each block followed by an
orthonormal Haar (power-of-two group sizes) or DCT-II transform along the
group axis.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
import scipy.fft

if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

ZERO_EPS = 1e-12
_CHUNK = 2048


def _set_threads(workers: int | None) -> None:
    n = workers or worker_count()
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def worker_count() -> int:
    """Worker cap from ``MIXDENOISE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("MIXDENOISE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class NonlocalConfig:
    block_size: int = 8
    group_size: int = 16
    window: int = 39
    step: int = 4
    weights: str = "uniform"

    def __post_init__(self):
        if self.block_size < 2:
            raise ValueError("block_size must be >= 2")
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        if self.window < self.block_size:
            raise ValueError("window must be >= block_size")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.weights not in ("uniform", "inverse_sparsity"):
            raise ValueError(f"unknown aggregation weights {self.weights!r}")

    @property
    def radius(self) -> int:
        return (self.window - self.block_size) // 2

    def validate_for(self, shape: tuple[int, int]) -> None:
        h, w = shape
        bs = self.block_size
        if h < bs or w < bs:
            raise ValueError(f"image {h}x{w} smaller than block size {bs}")
        # Corner references see the fewest candidates.
        avail_r = min(h - bs, self.radius) + 1
        avail_c = min(w - bs, self.radius) + 1
        if avail_r * avail_c < self.group_size:
            raise ValueError(
                f"group_size {self.group_size} exceeds the {avail_r * avail_c} candidate "
                f"blocks available in a clipped search window"
            )


@dataclass
class BlockGroup:
    ref_pos: tuple[int, int]
    members: list[tuple[int, int]]
    stack: np.ndarray


@dataclass
class GroupSpectrum:
    """Transform coefficients of every group, in reference-grid order."""

    ref_pos: np.ndarray  # (n, 2)
    members: np.ndarray  # (n, C, 2)
    coeffs: np.ndarray  # (n, B, B, C)

    @property
    def size(self) -> int:
        return int(self.coeffs.size)


def _grid_1d(length: int, bs: int, step: int) -> np.ndarray:
    last = length - bs
    pos = np.arange(0, last + 1, step)
    if pos[-1] != last:
        pos = np.append(pos, last)
    return pos


def reference_grid(shape: tuple[int, int], cfg: NonlocalConfig) -> np.ndarray:
    """Top-left corners of all reference blocks, raster order, shape (n, 2)."""
    rows = _grid_1d(shape[0], cfg.block_size, cfg.step)
    cols = _grid_1d(shape[1], cfg.block_size, cfg.step)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1)


def _offsets(radius: int) -> np.ndarray:
    d = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(d, d, indexing="ij")
    return np.stack([dy.ravel(), dx.ravel()], axis=1)


@numba.njit(cache=True, parallel=True)
def _match_kernel(img, refs, offs, center, bs, c):
    """Indices into ``offs`` of the ``c`` best matches of every reference.

    Offsets are visited in raster order and a candidate only displaces the
    current worst on a strictly smaller distance, so ties keep the earlier
    position. The reference enters first with key -1. Distance sums stop
    early once they reach the current worst. Rows with fewer than ``c``
    candidates keep -1 in their unused slots.
    """
    h, w = img.shape
    n = refs.shape[0]
    out = np.full((n, c), -1, dtype=np.int64)
    for i in numba.prange(n):
        r = refs[i, 0]
        q = refs[i, 1]
        keys = np.full(c, np.inf)
        idx = np.full(c, -1, dtype=np.int64)
        keys[0] = -1.0
        idx[0] = center
        filled = 1
        for k in range(offs.shape[0]):
            if k == center:
                continue
            rr = r + offs[k, 0]
            cc = q + offs[k, 1]
            if rr < 0 or cc < 0 or rr > h - bs or cc > w - bs:
                continue
            worst = keys[c - 1]
            acc = 0.0
            for a in range(bs):
                for b in range(bs):
                    d = img[r + a, q + b] - img[rr + a, cc + b]
                    acc += d * d
                if acc >= worst:
                    break
            if acc >= worst:
                continue
            j = min(filled, c - 1)
            while j > 0 and keys[j - 1] > acc:
                keys[j] = keys[j - 1]
                idx[j] = idx[j - 1]
                j -= 1
            keys[j] = acc
            idx[j] = k
            if filled < c:
                filled += 1
        for j in range(c):
            out[i, j] = idx[j]
    return out


def match_all(img: np.ndarray, refs: np.ndarray, cfg: NonlocalConfig, workers: int | None = None) -> np.ndarray:
    """Matched block positions for every reference, shape (n, C, 2)."""
    img = np.asarray(img, dtype=np.float64)
    cfg.validate_for(img.shape)
    refs = np.asarray(refs, dtype=np.int64).reshape(-1, 2)
    bs = cfg.block_size
    h, w = img.shape
    if np.any(refs < 0) or np.any(refs[:, 0] > h - bs) or np.any(refs[:, 1] > w - bs):
        raise ValueError("reference block must lie inside the image")
    offs = _offsets(cfg.radius)
    center = len(offs) // 2

    _set_threads(workers)
    order = _match_kernel(np.ascontiguousarray(img), refs, offs, center, bs, cfg.group_size)
    if np.any(order < 0):
        raise ValueError("fewer candidate blocks than group_size in the search window")
    return refs[:, None, :] + offs[order]


def match_blocks(img: np.ndarray, ref_pos: tuple[int, int], cfg: NonlocalConfig) -> list[tuple[int, int]]:
    members = match_all(img, np.asarray([ref_pos]), cfg, workers=1)[0]
    return [(int(r), int(c)) for r, c in members]


@lru_cache(maxsize=None)
def haar_matrix(n: int) -> np.ndarray:
    """Orthonormal Haar analysis matrix (rows are basis vectors); n a power of two."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"Haar size must be a power of two, got {n}")
    h = np.ones((1, 1))
    while h.shape[0] < n:
        m = h.shape[0]
        top = np.kron(h, [1.0, 1.0])
        bottom = np.kron(np.eye(m), [1.0, -1.0])
        h = np.vstack([top, bottom]) / math.sqrt(2.0)
    h.setflags(write=False)
    return h


def _group_forward(a: np.ndarray) -> np.ndarray:
    c = a.shape[-1]
    if c & (c - 1) == 0:
        return a @ haar_matrix(c).T
    return scipy.fft.dct(a, type=2, norm="ortho", axis=-1)


def _group_inverse(a: np.ndarray) -> np.ndarray:
    c = a.shape[-1]
    if c & (c - 1) == 0:
        return a @ haar_matrix(c)
    return scipy.fft.idct(a, type=2, norm="ortho", axis=-1)


def t3d_forward(stack: np.ndarray) -> np.ndarray:
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim < 3 or stack.shape[-3] != stack.shape[-2]:
        raise ValueError(f"expected (..., B, B, C) stack, got shape {stack.shape}")
    planar = scipy.fft.dctn(stack, type=2, norm="ortho", axes=(-3, -2))
    return _group_forward(planar)


def t3d_inverse(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim < 3 or coeffs.shape[-3] != coeffs.shape[-2]:
        raise ValueError(f"expected (..., B, B, C) coefficients, got shape {coeffs.shape}")
    planar = _group_inverse(coeffs)
    return scipy.fft.idctn(planar, type=2, norm="ortho", axes=(-3, -2))


def hard(theta: np.ndarray, a: float) -> np.ndarray:
    """Zero entries with magnitude strictly below ``a``."""
    theta = np.asarray(theta, dtype=np.float64)
    return np.where(np.abs(theta) < a, 0.0, theta)


def _pixel_index(members: np.ndarray, bs: int, width: int) -> np.ndarray:
    """Flat pixel indices of the stacked blocks, shape (n, B, B, C)."""
    a = np.arange(bs)
    rows = members[:, None, None, :, 0] + a[None, :, None, None]
    cols = members[:, None, None, :, 1] + a[None, None, :, None]
    return rows * width + cols


def gather(img: np.ndarray, members: np.ndarray, bs: int) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return img.ravel()[_pixel_index(members, bs, img.shape[1])]


def group_blocks(img: np.ndarray, ref_pos: tuple[int, int], cfg: NonlocalConfig) -> BlockGroup:
    members = match_blocks(img, ref_pos, cfg)
    stack = gather(img, np.asarray([members]), cfg.block_size)[0]
    return BlockGroup(ref_pos=tuple(ref_pos), members=members, stack=stack)


def group_spectrum(img: np.ndarray, cfg: NonlocalConfig) -> GroupSpectrum:
    refs = reference_grid(img.shape, cfg)
    members = match_all(img, refs, cfg)
    coeffs = t3d_forward(gather(img, members, cfg.block_size))
    return GroupSpectrum(ref_pos=refs, members=members, coeffs=coeffs)


def coefficient_count(shape: tuple[int, int], cfg: NonlocalConfig) -> int:
    """K: total number of group coefficients for an image of this shape."""
    n = len(reference_grid(shape, cfg))
    return cfg.block_size**2 * cfg.group_size * n


def phi_nc(img: np.ndarray, cfg: NonlocalConfig) -> int:
    """Number of group-transform coefficients with magnitude above 1e-12."""
    img = np.asarray(img, dtype=np.float64)
    refs = reference_grid(img.shape, cfg)
    members = match_all(img, refs, cfg)
    total = 0
    for start in range(0, len(refs), _CHUNK):
        coeffs = t3d_forward(gather(img, members[start : start + _CHUNK], cfg.block_size))
        total += int(np.count_nonzero(np.abs(coeffs) > ZERO_EPS))
    return total


def w_threshold(shape: tuple[int, int], beta: float, mu2: float, cfg: NonlocalConfig) -> float:
    """Hard threshold sqrt(2 tau) with tau = K beta / (2 N mu2)."""
    n_pix = shape[0] * shape[1]
    k = coefficient_count(shape, cfg)
    return math.sqrt(k * beta / (n_pix * mu2))


def aggregate(
    shape: tuple[int, int],
    members: np.ndarray,
    stacks: np.ndarray,
    group_weights: np.ndarray | None = None,
    fallback: np.ndarray | None = None,
) -> np.ndarray:
    """Weighted average of overlapping block estimates back onto the pixel grid."""
    h, w = shape
    bs = stacks.shape[-3]
    idx = _pixel_index(members, bs, w).ravel()
    if group_weights is None:
        wts = np.ones(stacks.shape, dtype=np.float64)
    else:
        wts = np.broadcast_to(np.asarray(group_weights, dtype=np.float64)[:, None, None, None], stacks.shape)
    num = np.bincount(idx, weights=(stacks * wts).ravel(), minlength=h * w)
    den = np.bincount(idx, weights=np.ravel(wts), minlength=h * w)
    out = np.zeros(h * w)
    covered = den > 0
    out[covered] = num[covered] / den[covered]
    if fallback is not None:
        out[~covered] = np.asarray(fallback, dtype=np.float64).ravel()[~covered]
    return out.reshape(h, w)


def solve_w(
    r: np.ndarray,
    beta: float,
    mu2: float,
    cfg: NonlocalConfig,
    threshold: float | None = None,
    workers: int | None = None,
) -> np.ndarray:
    """Group ``r`` on its own content, hard-threshold each group's 3D
    spectrum and average the inverse-transformed blocks back.

    ``threshold`` overrides the value derived from ``beta`` and ``mu2``.
    """
    if beta <= 0 or mu2 <= 0:
        raise ValueError("beta and mu2 must be positive")
    r = np.asarray(r, dtype=np.float64)
    h, w = r.shape
    a = w_threshold(r.shape, beta, mu2, cfg) if threshold is None else threshold
    refs = reference_grid(r.shape, cfg)
    members = match_all(r, refs, cfg, workers=workers)

    def chunk(start):
        m = members[start : start + _CHUNK]
        coeffs = hard(t3d_forward(gather(r, m, cfg.block_size)), a)
        est = t3d_inverse(coeffs)
        if cfg.weights == "inverse_sparsity":
            nnz = np.count_nonzero(coeffs.reshape(len(m), -1), axis=1)
            gw = 1.0 / np.maximum(nnz, 1)
        else:
            gw = np.ones(len(m))
        idx = _pixel_index(m, cfg.block_size, w).ravel()
        wts = np.broadcast_to(gw[:, None, None, None], est.shape)
        num = np.bincount(idx, weights=(est * wts).ravel(), minlength=h * w)
        den = np.bincount(idx, weights=np.ravel(wts), minlength=h * w)
        return num, den

    starts = range(0, len(refs), _CHUNK)
    workers = workers or worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    # Reduce in chunk order so the result does not depend on scheduling.
    num = np.zeros(h * w)
    den = np.zeros(h * w)
    for pn, pd in parts:
        num += pn
        den += pd
    out = r.ravel().copy()
    covered = den > 0
    out[covered] = num[covered] / den[covered]
    return out.reshape(h, w)

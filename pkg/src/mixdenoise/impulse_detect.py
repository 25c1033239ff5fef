"""Impulse detection and the reliable-pixel selection operator.

A pixel mask is a boolean array with ``True`` marking an impulse suspect;
its complement is the reliable set that the data-fidelity term sees.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image_core import D_MAX, D_MIN

ACWMF_SCALE = 0.6
ACWMF_OFFSETS = (40.0, 25.0, 10.0, 5.0)
ACWMF_WEIGHTS = (1, 3, 5, 7)


def _check_shape(mask: np.ndarray, shape: tuple[int, ...]) -> None:
    if mask.shape != shape:
        raise ValueError(f"dimension mismatch: mask {mask.shape} vs {shape}")


def reliable_count(mask: np.ndarray) -> int:
    """Cardinality of the reliable set."""
    return int(mask.size - np.count_nonzero(mask))


def apply(mask: np.ndarray, img: np.ndarray) -> np.ndarray:
    """Reliable-pixel values in raster order (the selection ``B @ y``)."""
    _check_shape(mask, img.shape)
    return np.asarray(img, dtype=np.float64)[~mask]


def embed(mask: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`apply`: scatter ``v`` to reliable pixels, zeros elsewhere."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != reliable_count(mask):
        raise ValueError(f"length mismatch: got {v.size}, mask has {reliable_count(mask)} reliable pixels")
    out = np.zeros(mask.shape, dtype=np.float64)
    out[~mask] = v
    return out


def project(mask: np.ndarray, img: np.ndarray) -> np.ndarray:
    """``embed(apply(img))``: zero the suspect pixels."""
    return np.where(mask, 0.0, img)


def progressive_union(prev: np.ndarray, fresh: np.ndarray) -> np.ndarray:
    _check_shape(fresh, prev.shape)
    return prev | fresh


def _windows(img: np.ndarray, half: int) -> np.ndarray:
    """All ``(2*half+1)^2`` neighbourhoods with symmetric (edge-repeating) padding."""
    padded = np.pad(img, half, mode="symmetric")
    size = 2 * half + 1
    return sliding_window_view(padded, (size, size))


def amf_detect(img: np.ndarray, w_max: int = 39, extremes_only: bool = True) -> np.ndarray:
    """Adaptive median filter impulse detector.

    Each pixel grows an odd window from 3x3 until the window median lies
    strictly between the window min and max; the pixel is suspect when it
    is not strictly between them. Windows that never produce an interior
    median mark the pixel suspect, unless the window is constant
    (min == max), which is taken as noise-free.

    With ``extremes_only`` a flagged pixel must also hold the value 0 or
    255, as in two-phase salt-and-pepper methods; without it, every local
    extreme of a Gaussian-noisy image would be flagged.
    """
    if w_max < 3 or w_max % 2 == 0:
        raise ValueError(f"w_max must be odd and >= 3, got {w_max}")
    img = np.asarray(img, dtype=np.float64)
    suspect = np.zeros(img.shape, dtype=bool)
    pending = np.ones(img.shape, dtype=bool)
    for size in range(3, w_max + 1, 2):
        rows, cols = np.nonzero(pending)
        if rows.size == 0:
            break
        half = size // 2
        win = _windows(img, half)[rows, cols].reshape(rows.size, -1)
        lo = win.min(axis=1)
        hi = win.max(axis=1)
        med = np.median(win, axis=1)
        val = img[rows, cols]
        done = (lo < med) & (med < hi)
        suspect[rows[done], cols[done]] = ~((lo[done] < val[done]) & (val[done] < hi[done]))
        pending[rows[done], cols[done]] = False
        if size == w_max:
            left = ~done
            flat = lo[left] == hi[left]
            suspect[rows[left], cols[left]] = ~flat
    if extremes_only:
        suspect &= (img == D_MIN) | (img == D_MAX)
    return suspect


def _cwm(win: np.ndarray, weight: int) -> np.ndarray:
    """Center-weighted median of 3x3 windows ``(..., 9)`` with the center repeated ``weight`` times."""
    center = win[..., 4:5]
    extra = np.repeat(center, weight - 1, axis=-1)
    return np.median(np.concatenate([win, extra], axis=-1), axis=-1)


def acwmf_detect(
    img: np.ndarray,
    delta: float = 1.0,
    scale: float = ACWMF_SCALE,
    offsets: tuple[float, ...] = ACWMF_OFFSETS,
) -> np.ndarray:
    """Adaptive center-weighted median detector for random-valued impulses.

    In each 3x3 window, ``d_k = |CWM_{w_k}(y) - y|`` for center weights
    1, 3, 5, 7. The pixel is suspect iff ``d_k > scale * MAD + delta * offsets[k]``
    for any k, where MAD is the median of ``|y_j - median(window)|``.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    img = np.asarray(img, dtype=np.float64)
    win = _windows(img, 1).reshape(img.shape + (9,))
    med = np.median(win, axis=-1)
    mad = np.median(np.abs(win - med[..., None]), axis=-1)
    suspect = np.zeros(img.shape, dtype=bool)
    for weight, off in zip(ACWMF_WEIGHTS, offsets):
        cwm = med if weight == 1 else _cwm(win, weight)
        suspect |= np.abs(cwm - img) > scale * mad + delta * off
    return suspect


def median_fill(img: np.ndarray, mask: np.ndarray, max_half: int = 19) -> np.ndarray:
    """Replace suspect pixels by the median of the reliable pixels in the
    smallest window (3x3 upward) that contains any; used to seed the solver."""
    img = np.asarray(img, dtype=np.float64)
    out = img.copy()
    rows, cols = np.nonzero(mask)
    reliable = ~mask
    for half in range(1, max_half + 1):
        if rows.size == 0:
            break
        vals = _windows(img, half)[rows, cols].reshape(rows.size, -1)
        ok = _windows(reliable, half)[rows, cols].reshape(rows.size, -1)
        has = ok.any(axis=1)
        if np.any(has):
            v = np.where(ok[has], vals[has], np.nan)
            out[rows[has], cols[has]] = np.nanmedian(v, axis=1)
        rows, cols = rows[~has], cols[~has]
    return out

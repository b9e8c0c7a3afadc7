"""Patch extraction / overlap-averaging aggregation.

A patch of a (H, W, C) array is vectorized lexicographically in
(row, col, channel) order, giving length ``patch * patch * C``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def grid_starts(n: int, patch: int, stride: int) -> np.ndarray:
    """Patch start offsets along one axis; the last patch always touches the border."""
    starts = np.arange(0, n - patch + 1, stride)
    if starts[-1] != n - patch:
        starts = np.append(starts, n - patch)
    return starts


def patch_view(data: np.ndarray, patch: int) -> np.ndarray:
    """(H-p+1, W-p+1, p*p*C) view-like array of every patch position."""
    win = sliding_window_view(data, (patch, patch), axis=(0, 1))  # (h, w, C, p, p)
    return win.transpose(0, 1, 3, 4, 2)


def extract(data: np.ndarray, patch: int = 4, stride: int = 2) -> np.ndarray:
    """All grid patches as columns of a (p*p*C, N) matrix."""
    if data.ndim == 2:
        data = data[:, :, None]
    h, w, c = data.shape
    if patch > h or patch > w:
        raise ValueError(f"patch {patch} larger than image {h}x{w}")
    rows, cols = grid_starts(h, patch, stride), grid_starts(w, patch, stride)
    win = patch_view(data, patch)[np.ix_(rows, cols)]
    return win.reshape(len(rows) * len(cols), patch * patch * c).T.copy()


def aggregate(columns: np.ndarray, shape: tuple[int, int, int], patch: int = 4,
              stride: int = 2) -> np.ndarray:
    """Inverse of :func:`extract`: place patches back and average the overlaps."""
    h, w, c = shape
    rows, cols = grid_starts(h, patch, stride), grid_starts(w, patch, stride)
    p = columns.T.reshape(len(rows), len(cols), patch, patch, c)
    acc = np.zeros(shape)
    cnt = np.zeros((h, w, 1))
    for dy in range(patch):
        for dx in range(patch):
            # rows/cols are increasing so fancy-index += has no duplicates per pass
            acc[np.ix_(rows + dy, cols + dx)] += p[:, :, dy, dx, :]
            cnt[np.ix_(rows + dy, cols + dx)] += 1.0
    return acc / cnt


def remove_mean(signals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Subtract each column's mean; returns (centred, means). Constant
    columns centre to exact zeros."""
    from .coding import column_center
    return column_center(np.asarray(signals, dtype=np.float64))

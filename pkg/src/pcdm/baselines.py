"""Per-channel interpolation baselines (bilinear, bicubic).

Each channel is sampled on one (R, B) or two (G) rectangular sub-lattices of
period 4. A sub-lattice is interpolated separably with the kernel scaled to
the lattice spacing, which is normalized convolution on that lattice; samples
past the border are clamped to the edge. G takes the mean of its two
sub-lattice interpolants (their kernel weights each sum to one). Observed
samples are written back exactly.
"""

from __future__ import annotations

import numpy as np

from .pattern import SUPERPIXEL, ImageStack, MosaicImage, sample_positions

CATMULL_ROM_A = -0.5


def cubic_kernel(x: np.ndarray, a: float = CATMULL_ROM_A) -> np.ndarray:
    x = np.abs(x)
    out = np.zeros_like(x, dtype=np.float64)
    near = x <= 1
    far = (x > 1) & (x < 2)
    out[near] = (a + 2) * x[near] ** 3 - (a + 3) * x[near] ** 2 + 1
    out[far] = a * x[far] ** 3 - 5 * a * x[far] ** 2 + 8 * a * x[far] - 4 * a
    return out


def linear_kernel(x: np.ndarray) -> np.ndarray:
    return np.clip(1.0 - np.abs(x), 0.0, None)


_KERNELS = {
    "bicubic": (cubic_kernel, 2),
    "bilinear": (linear_kernel, 1),
}


def interp_matrix(n_out: int, n_samples: int, offset: int, method: str,
                  step: int = SUPERPIXEL) -> np.ndarray:
    """(n_out, n_samples) matrix mapping lattice samples to every output pixel.

    Sample k sits at pixel ``offset + step * k``; taps outside the lattice are
    redirected to the nearest edge sample (clamp-to-edge).
    """
    kernel, radius = _KERNELS[method]
    pos = (np.arange(n_out) - offset) / step
    base = np.floor(pos).astype(int)
    m = np.zeros((n_out, n_samples))
    rows = np.arange(n_out)
    for tap in range(-radius + 1, radius + 1):
        k = base + tap
        w = kernel(pos - k)
        np.add.at(m, (rows, np.clip(k, 0, n_samples - 1)), w)
    return m


def interior_mask(height: int, width: int, offsets, method: str) -> np.ndarray:
    """Pixels whose stencil on every listed sub-lattice needs no edge clamping."""
    _, radius = _KERNELS[method]

    def ok(n_out, n_samples, off):
        pos = (np.arange(n_out) - off) / SUPERPIXEL
        base = np.floor(pos).astype(int)
        return (base - radius + 1 >= 0) & (base + radius <= n_samples - 1)

    mask = np.ones((height, width), dtype=bool)
    for r0, c0 in offsets:
        rr = ok(height, height // SUPERPIXEL, r0)
        cc = ok(width, width // SUPERPIXEL, c0)
        mask &= rr[:, None] & cc[None, :]
    return mask


def interpolate_plane(plane: np.ndarray, offsets, method: str) -> np.ndarray:
    """Fill one channel from its samples at ``offsets`` (mod 4) of ``plane``."""
    h, w = plane.shape
    ref = plane[offsets[0][0], offsets[0][1]]
    acc = np.zeros((h, w))
    for r0, c0 in offsets:
        sub = plane[r0::SUPERPIXEL, c0::SUPERPIXEL] - ref
        wr = interp_matrix(h, sub.shape[0], r0, method)
        wc = interp_matrix(w, sub.shape[1], c0, method)
        acc += wr @ sub @ wc.T
    out = ref + acc / len(offsets)
    for r0, c0 in offsets:
        out[r0::SUPERPIXEL, c0::SUPERPIXEL] = plane[r0::SUPERPIXEL, c0::SUPERPIXEL]
    return out


def interpolate_mosaic(mosaic: MosaicImage, method: str) -> ImageStack:
    if method not in _KERNELS:
        raise ValueError(f"unknown interpolation method {method!r}")
    planes = [interpolate_plane(mosaic.data, sample_positions(mosaic.pattern, ch), method)
              for ch in range(12)]
    return ImageStack(np.clip(np.stack(planes, axis=2), 0.0, 1.0))


def bilinear_demosaic(mosaic: MosaicImage) -> ImageStack:
    return interpolate_mosaic(mosaic, "bilinear")


def bicubic_demosaic(mosaic: MosaicImage) -> ImageStack:
    return interpolate_mosaic(mosaic, "bicubic")

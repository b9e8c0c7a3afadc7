"""Forward mosaic model, channel scatter, initialization and synthetic scenes."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .baselines import bicubic_demosaic
from .pattern import (ANGLES, ImageStack, MosaicImage, PcfaPattern, build_masks,
                      channel_index_map, check_dims, default_pattern)

SCENE_KINDS = ("constant", "gradient", "polarized-disc", "birefringent-texture", "noise")


def mosaic(stack: ImageStack, pattern: PcfaPattern | None = None) -> MosaicImage:
    """Sample each pixel at the channel the pattern assigns to it."""
    pattern = pattern or default_pattern()
    if not stack.is_chromatic:
        raise ValueError(f"mosaic needs a 12-channel stack, got {len(stack.channels)}")
    idx = channel_index_map(pattern, stack.height, stack.width)
    data = np.take_along_axis(stack.data, idx[:, :, None], axis=2)[:, :, 0]
    return MosaicImage(data, pattern)


@dataclass(frozen=True)
class SparseChannelStack:
    values: np.ndarray  # (H, W, 12), zero where invalid
    valid: np.ndarray  # (H, W, 12) bool


def scatter(m: MosaicImage) -> SparseChannelStack:
    masks = build_masks(m.pattern, m.width, m.height).masks.transpose(1, 2, 0)
    values = np.where(masks, m.data[:, :, None], 0.0)
    return SparseChannelStack(values, masks)


def initialize(m: MosaicImage) -> ImageStack:
    """Dense starting estimate for the optimizer; same code path as the bicubic baseline."""
    return bicubic_demosaic(m)


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a synthetic polarized color scene.

    ``intensity`` scales S0 (per color, times ``chroma``); ``aop`` is in degrees.
    ``clutter`` random shapes are composited over the base, each with a DoLP
    drawn from [0, clutter_dolp]. Shapes keep the scene chroma and AoP up to
    relative ``color_jitter`` and +-``aop_jitter`` degrees, so most edges are
    luminance edges as in natural scenes.
    """

    kind: str
    height: int = 128
    width: int = 128
    intensity: float = 0.8
    dolp: float = 0.0
    aop: float = 0.0
    chroma: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seed: int = 0
    clutter: int = 0
    clutter_dolp: float = 0.2
    color_jitter: float = 0.15
    aop_jitter: float = 30.0
    group: str = field(default="")

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if not 0.0 <= self.dolp <= 1.0 or not 0.0 <= self.clutter_dolp <= 1.0:
            raise ValueError("DoLP must lie in [0, 1]")
        if self.color_jitter < 0 or self.aop_jitter < 0:
            raise ValueError("jitter amounts must be non-negative")
        if not 0.0 <= self.intensity <= 1.0 or any(not 0.0 <= c <= 1.0 for c in self.chroma):
            raise ValueError("intensity and chroma must lie in [0, 1]")
        check_dims(self.height, self.width)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["chroma"] = list(self.chroma)
        return d


def stokes_to_angles(s0: np.ndarray, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Intensities behind ideal polarizers at 0/45/90/135 degrees, stacked on the last axis."""
    out = []
    for a in ANGLES:
        t = np.deg2rad(2 * a)
        out.append(0.5 * (s0 + s1 * np.cos(t) + s2 * np.sin(t)))
    return np.stack(out, axis=-1)


def _linear_stokes(s0, dolp, aop_deg):
    t = np.deg2rad(2 * np.asarray(aop_deg, dtype=np.float64))
    return s0 * dolp * np.cos(t), s0 * dolp * np.sin(t)


def _coverage(dist: np.ndarray) -> np.ndarray:
    # one-pixel anti-aliased edge; dist > 0 inside
    return np.clip(dist + 0.5, 0.0, 1.0)


def _smooth_noise(rng, h, w, sigma):
    f = ndimage.gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
    f -= f.min()
    return f / max(f.max(), 1e-12)


def disc_geometry(spec: SceneSpec) -> tuple[float, float, float]:
    """Centre row, centre column and radius of the polarized disc."""
    return (spec.height - 1) / 2, (spec.width - 1) / 2, 0.3 * min(spec.height, spec.width)


def _base_layers(spec: SceneSpec, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-color S0, DoLP and AoP maps, each (H, W, 3)."""
    h, w = spec.height, spec.width
    chroma = np.asarray(spec.chroma, dtype=np.float64)
    ones = np.ones((h, w, 1))
    dolp = np.full((h, w, 3), spec.dolp)
    aop = np.full((h, w, 3), float(spec.aop))
    if spec.kind == "constant":
        s0 = spec.intensity * chroma * ones
    elif spec.kind == "gradient":
        ramp = np.linspace(0.2, 1.0, w)[None, :, None]
        s0 = spec.intensity * chroma * ramp * ones
    elif spec.kind == "polarized-disc":
        # unpolarized grey backdrop; the disc is composited last
        s0 = 0.5 * spec.intensity * ones * np.ones(3)
        dolp = np.zeros((h, w, 3))
    elif spec.kind == "birefringent-texture":
        tex = _smooth_noise(rng, h, w, 3.0)[:, :, None]
        lum = _smooth_noise(rng, h, w, 2.0)[:, :, None]
        s0 = spec.intensity * chroma * (0.3 + 0.7 * lum)
        # wavelength-dependent rotation couples color and polarization
        aop = (spec.aop + 40.0 * np.array([-1.0, 0.0, 1.0]) * tex) % 180.0
        dolp = spec.dolp * (0.5 + 0.5 * tex) * np.ones(3)
    elif spec.kind == "noise":
        s0 = spec.intensity * np.stack([_smooth_noise(rng, h, w, 1.5) for _ in range(3)], axis=2)
        s0 = s0 * chroma
    else:  # pragma: no cover - guarded in SceneSpec
        raise ValueError(spec.kind)
    return s0, dolp, aop


def _clutter(spec: SceneSpec, rng, s0, s1, s2):
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[:h, :w].astype(np.float64)
    chroma = np.asarray(spec.chroma, dtype=np.float64)
    for _ in range(spec.clutter):
        shape = rng.integers(3)
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        size = rng.uniform(0.06, 0.25) * min(h, w)
        if shape == 0:
            dist = size - np.hypot(yy - cy, xx - cx)
        elif shape == 1:
            th = rng.uniform(0, np.pi)
            u = (yy - cy) * np.cos(th) + (xx - cx) * np.sin(th)
            v = -(yy - cy) * np.sin(th) + (xx - cx) * np.cos(th)
            dist = np.minimum(size - np.abs(u), 0.6 * size - np.abs(v))
        else:
            th = rng.uniform(0, np.pi)
            period = rng.uniform(8, 20)  # above the per-channel Nyquist period
            u = (yy - cy) * np.cos(th) + (xx - cx) * np.sin(th)
            v = -(yy - cy) * np.sin(th) + (xx - cx) * np.cos(th)
            band = period / 4 - np.abs((u % period) - period / 2)
            dist = np.minimum(band, size - np.hypot(u, v))
        alpha = _coverage(dist)[:, :, None]
        lum = rng.uniform(0.1, 1.0)
        tint = np.clip(1.0 + spec.color_jitter * rng.standard_normal(3), 0.2, 1.8)
        color = np.clip(lum * spec.intensity * chroma * tint, 0.0, 1.0)
        d = rng.uniform(0.0, spec.clutter_dolp)
        a = (spec.aop + rng.uniform(-spec.aop_jitter, spec.aop_jitter)) % 180.0
        c1, c2 = _linear_stokes(color, d, a)
        s0 = (1 - alpha) * s0 + alpha * color
        s1 = (1 - alpha) * s1 + alpha * c1
        s2 = (1 - alpha) * s2 + alpha * c2
    return s0, s1, s2


def synthesize_scene(spec: SceneSpec) -> ImageStack:
    """Render a 12-channel stack obeying I(t) = S0/2 (1 + DoLP cos(2t - 2 AoP)) per color."""
    rng = np.random.default_rng(spec.seed)
    s0, dolp, aop = _base_layers(spec, rng)
    s1, s2 = _linear_stokes(s0, dolp, aop)
    if spec.clutter:
        s0, s1, s2 = _clutter(spec, rng, s0, s1, s2)
    if spec.kind == "polarized-disc":
        cy, cx, r = disc_geometry(spec)
        yy, xx = np.mgrid[:spec.height, :spec.width]
        alpha = _coverage(r - np.hypot(yy - cy, xx - cx))[:, :, None]
        color = spec.intensity * np.asarray(spec.chroma, dtype=np.float64)
        c1, c2 = _linear_stokes(color, spec.dolp, spec.aop)
        s0 = (1 - alpha) * s0 + alpha * color
        s1 = (1 - alpha) * s1 + alpha * c1
        s2 = (1 - alpha) * s2 + alpha * c2
    angles = stokes_to_angles(s0, s1, s2)  # (H, W, 3, 4)
    data = np.clip(angles, 0.0, 1.0).reshape(spec.height, spec.width, 12)
    return ImageStack(data)


def default_suite(size: int = 64, seed: int = 0, n_unpolarized: int = 5,
                  n_polarized: int = 5) -> list[SceneSpec]:
    """Two-group evaluation suite: unpolarized-illumination and polarized scenes."""
    rng = np.random.default_rng(seed)
    g1_kinds = ("noise", "gradient", "polarized-disc", "constant", "noise")
    g2_kinds = ("polarized-disc", "birefringent-texture", "noise", "birefringent-texture",
                "polarized-disc")
    specs = []
    for i in range(n_unpolarized):
        specs.append(SceneSpec(
            g1_kinds[i % len(g1_kinds)], size, size,
            intensity=float(rng.uniform(0.6, 0.95)), dolp=float(rng.uniform(0.0, 0.15)),
            aop=float(rng.uniform(0, 180)), chroma=tuple(float(c) for c in rng.uniform(0.3, 1.0, 3)),
            seed=seed * 1000 + i, clutter=12, clutter_dolp=0.15, group="group1-unpolarized"))
    for i in range(n_polarized):
        specs.append(SceneSpec(
            g2_kinds[i % len(g2_kinds)], size, size,
            intensity=float(rng.uniform(0.6, 0.95)), dolp=float(rng.uniform(0.4, 0.9)),
            aop=float(rng.uniform(0, 180)), chroma=tuple(float(c) for c in rng.uniform(0.3, 1.0, 3)),
            seed=seed * 1000 + 500 + i, clutter=12, clutter_dolp=0.8, group="group2-polarized"))
    return specs


def training_suite(count: int = 8, size: int = 64, seed: int = 1) -> list[SceneSpec]:
    """Scenes for dictionary training, drawn from the same generator as the
    evaluation suite but with disjoint seeds."""
    half = count // 2
    specs = default_suite(size, seed=10_000 + seed, n_unpolarized=count - half, n_polarized=half)
    return specs

"""RGB-Polarization filter-array geometry and the image containers built on it.

Channel order is color-major, angle-minor::

    index = 4 * color + angle_index
    0..3  -> (R, 0), (R, 45), (R, 90), (R, 135)
    4..7  -> (G, 0), ...
    8..11 -> (B, 0), ...
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

ANGLES = (0, 45, 90, 135)
SUPERPIXEL = 4


class Color(enum.IntEnum):
    R = 0
    G = 1
    B = 2


class ChannelId(NamedTuple):
    color: Color
    angle: int

    @property
    def index(self) -> int:
        return 4 * int(self.color) + ANGLES.index(self.angle)

    @classmethod
    def from_index(cls, index: int) -> "ChannelId":
        if not 0 <= index < 12:
            raise ValueError(f"channel index out of range: {index}")
        return cls(Color(index // 4), ANGLES[index % 4])

    def __str__(self) -> str:
        return f"{self.color.name}{self.angle:03d}"


ALL_CHANNELS: tuple[ChannelId, ...] = tuple(ChannelId.from_index(i) for i in range(12))
ANGLE_CHANNELS: tuple[int, ...] = ANGLES


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PcfaPattern:
    """A 4x4 repeating superpixel of ChannelIds."""

    layout: tuple[tuple[ChannelId, ...], ...]
    name: str = "custom"

    def __post_init__(self):
        if len(self.layout) != SUPERPIXEL or any(len(r) != SUPERPIXEL for r in self.layout):
            raise ValueError("layout must be 4x4")
        counts = np.zeros(12, dtype=int)
        for row in self.layout:
            for ch in row:
                counts[ChannelId(Color(ch.color), ch.angle).index] += 1
        for i, n in enumerate(counts):
            want = 2 if ALL_CHANNELS[i].color == Color.G else 1
            if n != want:
                raise ValueError(
                    f"channel {ALL_CHANNELS[i]} appears {n} times in the superpixel, expected {want}")

    @property
    def index_map(self) -> np.ndarray:
        """4x4 int array of channel indices."""
        return np.array([[ch.index for ch in row] for row in self.layout], dtype=np.intp)

    def channel_at(self, row: int, col: int) -> ChannelId:
        return self.layout[row % SUPERPIXEL][col % SUPERPIXEL]

    def to_dict(self) -> dict:
        return {"name": self.name,
                "layout": [[str(ch) for ch in row] for row in self.layout]}

    @classmethod
    def from_dict(cls, d: dict) -> "PcfaPattern":
        def parse(s: str) -> ChannelId:
            return ChannelId(Color[s[0]], int(s[1:]))
        return cls(tuple(tuple(parse(s) for s in row) for row in d["layout"]), d["name"])


# (90, 45 / 135, 0) inside every 2x2 polarizer unit, IMX250MYR style.
_POL_UNIT = ((90, 45), (135, 0))
_BAYER = ((Color.R, Color.G), (Color.G, Color.B))


def default_pattern() -> PcfaPattern:
    layout = tuple(
        tuple(ChannelId(_BAYER[r // 2][c // 2], _POL_UNIT[r % 2][c % 2]) for c in range(4))
        for r in range(4))
    return PcfaPattern(layout, "imx250myr")


def channel_at(pattern: PcfaPattern, row: int, col: int) -> ChannelId:
    return pattern.channel_at(row, col)


def check_dims(height: int, width: int) -> None:
    if height <= 0 or width <= 0 or height % SUPERPIXEL or width % SUPERPIXEL:
        raise ValueError(
            f"image size {height}x{width} is not a positive multiple of {SUPERPIXEL}")


def channel_index_map(pattern: PcfaPattern, height: int, width: int) -> np.ndarray:
    """(height, width) array holding the channel index sampled at each pixel."""
    check_dims(height, width)
    return np.tile(pattern.index_map, (height // SUPERPIXEL, width // SUPERPIXEL))


@dataclass(frozen=True)
class ChannelMasks:
    height: int
    width: int
    masks: np.ndarray  # (12, H, W) bool

    def __getitem__(self, ch: ChannelId | int) -> np.ndarray:
        i = ch if isinstance(ch, (int, np.integer)) else ch.index
        return self.masks[i]


def build_masks(pattern: PcfaPattern, width: int, height: int) -> ChannelMasks:
    idx = channel_index_map(pattern, height, width)
    masks = idx[None, :, :] == np.arange(12)[:, None, None]
    return ChannelMasks(height, width, _frozen(masks))


@dataclass(frozen=True)
class ImageStack:
    """Full-resolution multi-channel image, data shaped (H, W, C).

    Chromatic stacks carry the 12 ChannelIds; polarimetric stacks carry the
    four angles (as ints) and are color-agnostic.
    """

    data: np.ndarray
    channels: tuple = field(default=ALL_CHANNELS)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != len(self.channels):
            raise ValueError(f"data shape {data.shape} does not match {len(self.channels)} channels")
        if len(self.channels) not in (4, 12):
            raise ValueError("an ImageStack has 12 (chromatic) or 4 (polarimetric) channels")
        if not np.all(np.isfinite(data)):
            raise ValueError("ImageStack contains non-finite values")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def is_chromatic(self) -> bool:
        return len(self.channels) == 12

    def plane(self, ch: ChannelId | int) -> np.ndarray:
        if isinstance(ch, ChannelId):
            ch = ch.index if self.is_chromatic else ANGLES.index(ch.angle)
        return self.data[:, :, ch]

    def angle_images(self) -> np.ndarray:
        """Chromatic stack as four RGB images, shape (4, H, W, 3)."""
        if not self.is_chromatic:
            raise ValueError("angle_images needs a 12-channel stack")
        return self.data.reshape(self.height, self.width, 3, 4).transpose(3, 0, 1, 2)

    def polarimetric(self) -> "ImageStack":
        """Collapse colors by averaging the three planes at each angle."""
        if not self.is_chromatic:
            return self
        return ImageStack(to_polarimetric(self.data), ANGLE_CHANNELS)

    @classmethod
    def from_angle_images(cls, images: np.ndarray) -> "ImageStack":
        images = np.asarray(images)
        return cls(images.transpose(1, 2, 3, 0).reshape(images.shape[1], images.shape[2], 12))


def to_polarimetric(data: np.ndarray) -> np.ndarray:
    """(H, W, 12) -> (H, W, 4) color average per angle."""
    h, w = data.shape[:2]
    return data.reshape(h, w, 3, 4).mean(axis=2)


@dataclass(frozen=True)
class MosaicImage:
    data: np.ndarray
    pattern: PcfaPattern = field(default_factory=default_pattern)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("mosaic must be a single plane")
        check_dims(*data.shape)
        if not np.all(np.isfinite(data)):
            raise ValueError("mosaic contains non-finite values")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def index_map(self) -> np.ndarray:
        return channel_index_map(self.pattern, self.height, self.width)


def sample_positions(pattern: PcfaPattern, channel: int) -> list[tuple[int, int]]:
    """Offsets (row, col) inside the superpixel where ``channel`` is sampled."""
    idx = pattern.index_map
    return [(int(r), int(c)) for r, c in zip(*np.nonzero(idx == channel))]


def angle_index_map(pattern: PcfaPattern, height: int, width: int) -> np.ndarray:
    return channel_index_map(pattern, height, width) % 4


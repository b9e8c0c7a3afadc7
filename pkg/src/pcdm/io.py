"""Image, scene-directory, config and report files.

A scene directory holds twelve grayscale PNG planes named ``<angle>_<color>.png``
(angle in 000/045/090/135, color in r/g/b) and optionally ``scene.json`` with
the generating SceneSpec and group tag. Planes are written 16-bit; 8-bit
inputs are accepted on read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .pattern import ALL_CHANNELS, ImageStack, MosaicImage, PcfaPattern, check_dims

COLOR_NAMES = ("r", "g", "b")
GROUPS = ("group1-unpolarized", "group2-polarized")
SCENE_META = "scene.json"
MOSAIC_SIDECAR_SUFFIX = ".json"


class DataError(Exception):
    """Invalid or inconsistent input data (CLI exit code 2)."""


def plane_name(ch) -> str:
    return f"{ch.angle:03d}_{COLOR_NAMES[ch.color]}.png"


def write_png(path, plane: np.ndarray, bits: int = 16) -> None:
    """Save a [0, 1] plane as an 8- or 16-bit grayscale PNG (rounded, clipped)."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    top = (1 << bits) - 1
    q = np.rint(np.clip(np.asarray(plane, dtype=np.float64), 0.0, 1.0) * top)
    arr = q.astype(np.uint16 if bits == 16 else np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def read_png(path) -> np.ndarray:
    """Load a grayscale PNG as float64 in [0, 1]."""
    try:
        with Image.open(path) as im:
            mode = im.mode
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    if mode == "L":
        return arr.astype(np.float64) / 255.0
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        return arr.astype(np.float64) / 65535.0
    raise DataError(f"{path}: unsupported PNG mode {mode!r}, expected 8/16-bit grayscale")


@dataclass(frozen=True)
class DatasetLayout:
    root: Path
    height: int
    width: int
    group: str | None = None

    @classmethod
    def validate(cls, root) -> "DatasetLayout":
        root = Path(root)
        if not root.is_dir():
            raise DataError(f"{root} is not a directory")
        shape = None
        for ch in ALL_CHANNELS:
            p = root / plane_name(ch)
            if not p.is_file():
                raise DataError(f"{root}: missing channel file {p.name}")
            with Image.open(p) as im:
                size = (im.height, im.width)
            if shape is None:
                shape = size
            elif size != shape:
                raise DataError(f"{root}: {p.name} is {size[0]}x{size[1]}, "
                                f"expected {shape[0]}x{shape[1]}")
        group = None
        meta = root / SCENE_META
        if meta.is_file():
            group = json.loads(meta.read_text()).get("group") or None
            if group is not None and group not in GROUPS:
                raise DataError(f"{root}: unknown group tag {group!r}")
        return cls(root, shape[0], shape[1], group)


def write_scene(root, stack: ImageStack, meta: dict | None = None) -> Path:
    if not stack.is_chromatic:
        raise ValueError("scene directories hold 12-channel stacks")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for k, ch in enumerate(ALL_CHANNELS):
        write_png(root / plane_name(ch), stack.data[:, :, k])
    if meta is not None:
        write_json(root / SCENE_META, meta)
    return root


def read_scene(root) -> ImageStack:
    layout = DatasetLayout.validate(root)
    planes = [read_png(layout.root / plane_name(ch)) for ch in ALL_CHANNELS]
    return ImageStack(np.stack(planes, axis=2))


def write_mosaic(path, m: MosaicImage) -> None:
    path = Path(path)
    write_png(path, m.data)
    write_json(path.with_suffix(MOSAIC_SIDECAR_SUFFIX), {"pattern": m.pattern.to_dict(),
                                                          "height": m.height, "width": m.width})


def read_mosaic(path) -> MosaicImage:
    path = Path(path)
    side = path.with_suffix(MOSAIC_SIDECAR_SUFFIX)
    if not side.is_file():
        raise DataError(f"mosaic sidecar {side} not found")
    try:
        pattern = PcfaPattern.from_dict(json.loads(side.read_text())["pattern"])
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"bad mosaic sidecar {side}: {exc}") from exc
    data = read_png(path)
    try:
        check_dims(*data.shape)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return MosaicImage(data, pattern)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))

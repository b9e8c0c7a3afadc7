import json

import numpy as np
import pytest

from pcdm.io import (DataError, DatasetLayout, plane_name, read_mosaic, read_png, read_scene,
                     write_mosaic, write_png, write_scene)
from pcdm.mosaic import mosaic, scatter
from pcdm.pattern import ALL_CHANNELS, ImageStack


def _q16(x):
    return np.rint(np.clip(x, 0, 1) * 65535) / 65535


def test_plane_names():
    names = [plane_name(ch) for ch in ALL_CHANNELS]
    assert names[:4] == ["000_r.png", "045_r.png", "090_r.png", "135_r.png"]
    assert names[-1] == "135_b.png" and len(set(names)) == 12


@pytest.mark.parametrize("bits", [8, 16])
def test_png_roundtrip(tmp_path, rng, bits):
    x = rng.random((8, 12))
    write_png(tmp_path / "p.png", x, bits)
    top = (1 << bits) - 1
    assert np.array_equal(read_png(tmp_path / "p.png"), np.rint(x * top) / top)


def test_quantized_values_roundtrip_exactly(tmp_path, rng):
    x = _q16(rng.random((8, 8)))
    write_png(tmp_path / "q.png", x)
    assert np.array_equal(read_png(tmp_path / "q.png"), x)


def test_scene_roundtrip_and_validation(tmp_path, rng):
    stack = ImageStack(_q16(rng.random((8, 12, 12))))
    write_scene(tmp_path / "s", stack, {"group": "group2-polarized"})
    lay = DatasetLayout.validate(tmp_path / "s")
    assert (lay.height, lay.width, lay.group) == (8, 12, "group2-polarized")
    assert np.array_equal(read_scene(tmp_path / "s").data, stack.data)
    (tmp_path / "s" / "045_g.png").unlink()
    with pytest.raises(DataError, match="045_g"):
        DatasetLayout.validate(tmp_path / "s")


def test_layout_rejects_mixed_sizes_and_bad_group(tmp_path, rng):
    write_scene(tmp_path / "s", ImageStack(rng.random((8, 8, 12))))
    write_png(tmp_path / "s" / "000_r.png", rng.random((8, 4)))
    with pytest.raises(DataError):
        DatasetLayout.validate(tmp_path / "s")
    write_scene(tmp_path / "t", ImageStack(rng.random((8, 8, 12))))
    (tmp_path / "t" / "scene.json").write_text(json.dumps({"group": "nope"}))
    with pytest.raises(DataError):
        DatasetLayout.validate(tmp_path / "t")


def test_mosaic_file_roundtrip(tmp_path, rng):
    stack = ImageStack(_q16(rng.random((8, 8, 12))))
    m = mosaic(stack)
    write_mosaic(tmp_path / "m.png", m)
    back = read_mosaic(tmp_path / "m.png")
    assert back.pattern == m.pattern
    assert np.array_equal(back.data, m.data)
    sc = scatter(back)
    assert np.array_equal(sc.values[sc.valid], stack.data[sc.valid])
    (tmp_path / "m.json").unlink()
    with pytest.raises(DataError):
        read_mosaic(tmp_path / "m.png")


def test_unreadable_image(tmp_path):
    (tmp_path / "x.png").write_bytes(b"not a png")
    with pytest.raises(DataError):
        read_png(tmp_path / "x.png")

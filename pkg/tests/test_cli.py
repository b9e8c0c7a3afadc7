import json

import pytest

from pcdm.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from pcdm.dictionary import load_dictionary
from pcdm.io import DatasetLayout, read_mosaic
from pcdm.metrics import METRIC_KEYS


def _tree_bytes(root):
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    for k, kind in enumerate(("noise", "polarized-disc")):
        assert main(["synth", "--scene", kind, "--seed", str(k), "--size", "16x16", "--dolp", "0.5",
                     "--clutter", "3", "--group", "group2-polarized",
                     "--out", str(root / "scenes" / f"s{k}")]) == EXIT_OK
    assert main(["mosaic", str(root / "scenes" / "s1"), "--out", str(root / "m.png")]) == EXIT_OK
    assert main(["train", str(root / "scenes"), "--atoms", "32", "--samples", "300", "--sweeps", "2",
                 "--sparsity", "4", "--out-pol", str(root / "pol.pcdm"),
                 "--out-rgb", str(root / "rgb.pcdm")]) == EXIT_OK
    return root


def test_synth_is_deterministic_and_valid(workspace, tmp_path):
    args = ["synth", "--scene", "polarized-disc", "--seed", "7", "--size", "16x16"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")
    assert DatasetLayout.validate(tmp_path / "a").height == 16


def test_synth_rejects_bad_size(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--scene", "constant", "--size", "130x128", "--out", str(tmp_path / "x")])
    assert exc.value.code == EXIT_USAGE


def test_mosaic_sidecar(workspace):
    side = json.loads((workspace / "m.json").read_text())
    assert side["pattern"]["name"] == "imx250myr"
    m = read_mosaic(workspace / "m.png")
    assert m.data.shape == (16, 16)


def test_train_writes_declared_rows(workspace):
    assert load_dictionary(workspace / "pol.pcdm").rows == 64
    assert load_dictionary(workspace / "rgb.pcdm").rows == 192


def test_demosaic_methods(workspace, tmp_path):
    assert main(["demosaic", str(workspace / "m.png"), "--method", "bicubic",
                 "--out", str(tmp_path / "bic")]) == EXIT_OK
    DatasetLayout.validate(tmp_path / "bic")
    assert main(["demosaic", str(workspace / "m.png"), "--method", "joint", "--max-iter", "3",
                 "--dict-pol", str(workspace / "pol.pcdm"), "--dict-rgb", str(workspace / "rgb.pcdm"),
                 "--out", str(tmp_path / "joint")]) == EXIT_OK
    out = tmp_path / "joint"
    DatasetLayout.validate(out)
    cfg = json.loads((out / "run_config.json").read_text())
    assert cfg["admm"]["max_iter"] == 3 and cfg["admm"]["rho_pol"] == 1.05
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == "iteration,ds_pol,ds_rgb,energy" and 1 < len(lines) <= 4


def test_joint_without_dictionaries_is_a_usage_error(workspace, tmp_path):
    code = main(["demosaic", str(workspace / "m.png"), "--method", "joint", "--out", str(tmp_path / "o")])
    assert code == EXIT_USAGE


def test_metrics_report(workspace, tmp_path):
    s = workspace / "scenes" / "s0"
    assert main(["metrics", str(s), str(s), "--report", str(tmp_path / "r.json"),
                 "--csv", str(tmp_path / "r.csv")]) == EXIT_OK
    rep = json.loads((tmp_path / "r.json").read_text())
    assert set(rep["values"]) == set(METRIC_KEYS)
    assert rep["values"]["psnr"] == "inf"
    assert "metadata" in rep
    first = (tmp_path / "r.csv").read_text()
    main(["metrics", str(s), str(s), "--report", str(tmp_path / "r.json"), "--csv", str(tmp_path / "r.csv")])
    assert (tmp_path / "r.csv").read_text() == first


def test_data_errors_exit_2(workspace, tmp_path):
    assert main(["mosaic", str(tmp_path / "missing"), "--out", str(tmp_path / "m.png")]) == EXIT_DATA
    bad = tmp_path / "bad.pcdm"
    bad.write_bytes(b"nope")
    assert main(["demosaic", str(workspace / "m.png"), "--dict-pol", str(bad),
                 "--dict-rgb", str(bad), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_train_on_constant_scene_warns(tmp_path):
    main(["synth", "--scene", "constant", "--size", "8x8", "--out", str(tmp_path / "c" / "s")])
    with pytest.warns(UserWarning):
        code = main(["train", str(tmp_path / "c"), "--atoms", "4", "--samples", "40", "--sweeps", "1",
                     "--out-pol", str(tmp_path / "p.pcdm"), "--out-rgb", str(tmp_path / "r.pcdm")])
    assert code == EXIT_OK and (tmp_path / "r.pcdm").exists()


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE

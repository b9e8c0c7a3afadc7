import struct

import numpy as np
import pytest

from pcdm.dictionary import (MAGIC, DegenerateDataWarning, Dictionary, DictionaryFormatError,
                             extract_signals, ksvd_train, load_dictionary, objective,
                             save_dictionary)
from pcdm.pattern import ImageStack


def synthetic_problem(seed, n=64, k=20, sparsity=3, N=2000):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((n, k))
    D /= np.linalg.norm(D, axis=0)
    X = np.zeros((k, N))
    for j in range(N):
        idx = rng.choice(k, sparsity, replace=False)
        X[idx, j] = rng.uniform(0.5, 1.5, sparsity) * rng.choice([-1, 1], sparsity)
    return D, D @ X


def matched_fraction(D_true, D_hat, thresh=0.99):
    G = np.abs(D_true.T @ D_hat)
    return float(np.mean(G.max(axis=1) > thresh))


def test_signal_shapes():
    s = ImageStack(np.full((8, 8, 12), 0.3))
    Y = extract_signals([s], "pol", 10)
    assert Y.shape == (64, 10) and np.allclose(Y, 0.3)
    assert extract_signals([s], "rgb", 5).shape[0] == 192
    assert extract_signals([s], "channel", 5, channel=3).shape[0] == 16
    with pytest.raises(ValueError):
        extract_signals([s], "channel", 5)


def test_signals_sample_positions_deterministically(rng):
    s = ImageStack(rng.random((16, 16, 12)))
    a = extract_signals([s], "rgb", 50, seed=4)
    b = extract_signals([s], "rgb", 50, seed=4)
    assert np.array_equal(a, b)
    # every column is a real patch of the stack
    cols = {tuple(s.data[r:r + 4, c:c + 4, :].ravel()) for r in range(13) for c in range(13)}
    assert all(tuple(col) in cols for col in a.T)


def test_ksvd_recovers_synthetic_atoms():
    D_true, Y = synthetic_problem(0)
    D, trace = ksvd_train(Y, atoms=20, sparsity=3, sweeps=30, lam=0.0, seed=0, kind="pol")
    assert matched_fraction(D_true, D.atoms) >= 0.8
    assert np.allclose(np.linalg.norm(D.atoms, axis=0), 1.0)


@pytest.mark.parametrize("seed", range(4))
def test_ksvd_objective_is_monotone(seed):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((16, 300))
    _, trace = ksvd_train(Y, atoms=24, sparsity=3, sweeps=6, lam=1e-3, seed=seed, kind="channel")
    for a, b in zip(trace, trace[1:]):
        assert b <= a * (1 + 1e-8)


def test_objective_definition(rng):
    Y, D, X = rng.random((4, 5)), rng.random((4, 3)), rng.random((3, 5))
    assert np.isclose(objective(Y, D, X, 0.5), np.sum((Y - D @ X) ** 2) + 0.5 * np.abs(X).sum())


def test_degenerate_input_warns_but_trains():
    Y = np.tile(np.linspace(-1, 1, 16)[:, None], (1, 100))
    with pytest.warns(DegenerateDataWarning):
        D, _ = ksvd_train(Y, atoms=8, sparsity=2, sweeps=2, kind="channel")
    assert D.atoms.shape == (16, 8)


def test_too_many_atoms():
    with pytest.raises(ValueError):
        ksvd_train(np.random.default_rng(0).random((16, 5)), atoms=8, kind="channel")


def test_training_is_deterministic(tmp_path):
    _, Y = synthetic_problem(3, N=300)
    paths = []
    for k in range(2):
        D, _ = ksvd_train(Y, atoms=20, sparsity=3, sweeps=3, seed=9, kind="pol")
        paths.append(tmp_path / f"d{k}.pcdm")
        save_dictionary(D, paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_file_roundtrip(tmp_path, rng):
    A = rng.standard_normal((192, 10))
    d = Dictionary(A / np.linalg.norm(A, axis=0), "rgb", {"seed": 1, "lambda": 1e-4})
    save_dictionary(d, tmp_path / "d.pcdm")
    assert load_dictionary(tmp_path / "d.pcdm") == d
    raw = (tmp_path / "d.pcdm").read_bytes()
    assert raw[:4] == MAGIC
    assert struct.unpack_from("<HBII", raw, 4) == (1, 1, 192, 10)


def _corrupt(tmp_path, raw, name):
    p = tmp_path / name
    p.write_bytes(raw)
    with pytest.raises(DictionaryFormatError):
        load_dictionary(p)


def test_file_format_errors(tmp_path, rng):
    A = rng.standard_normal((64, 6))
    save_dictionary(Dictionary(A / np.linalg.norm(A, axis=0), "pol"), tmp_path / "ok.pcdm")
    raw = (tmp_path / "ok.pcdm").read_bytes()
    _corrupt(tmp_path, b"XXXX" + raw[4:], "magic")
    _corrupt(tmp_path, raw[:4] + struct.pack("<H", 9) + raw[6:], "version")
    _corrupt(tmp_path, raw[:6] + bytes([7]) + raw[7:], "tag")
    _corrupt(tmp_path, raw[:6] + bytes([1]) + raw[7:], "kind_rows")  # 64 rows is not rgb
    _corrupt(tmp_path, raw[:40], "truncated")
    _corrupt(tmp_path, raw[:8], "header")
    bad = Dictionary(A, "pol")  # atoms not unit norm
    save_dictionary(bad, tmp_path / "bad.pcdm")
    with pytest.raises(DictionaryFormatError):
        load_dictionary(tmp_path / "bad.pcdm")


def test_dictionary_rejects_inconsistent_rows():
    with pytest.raises(ValueError):
        Dictionary(np.ones((100, 3)), "rgb")
    assert Dictionary(np.ones((64, 3)), "pol").patch == 4

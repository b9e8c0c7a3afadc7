import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcdm.coding import alm_encode, omp_encode, reconstruct, svt


def best_k_support(D, y, k):
    """Exhaustive best-support least squares (the oracle for small problems)."""
    best, arg = np.inf, None
    for S in itertools.combinations(range(D.shape[1]), k):
        x, *_ = np.linalg.lstsq(D[:, S], y, rcond=None)
        r = np.linalg.norm(y - D[:, S] @ x)
        if r < best:
            best, arg = r, set(S)
    return best, arg


def naive_greedy_support(D, y, k):
    S = []
    r = y.copy()
    for _ in range(k):
        c = np.abs(D.T @ r)
        c[S] = -1
        S.append(int(np.argmax(c)))
        x, *_ = np.linalg.lstsq(D[:, S], y, rcond=None)
        r = y - D[:, S] @ x
    return set(S)


def unit_columns(rng, n, k):
    D = rng.standard_normal((n, k))
    return D / np.linalg.norm(D, axis=0)


def test_single_atom_example():
    D = unit_columns(np.random.default_rng(0), 8, 6)
    code = omp_encode(D[:, 3], D, sparsity=1)
    x = code.coefficients[:, 0]
    assert np.isclose(x[3], 1.0) and np.count_nonzero(x) == 1
    assert np.linalg.norm(D[:, 3] - reconstruct(D, code)[:, 0]) < 1e-12


def test_orthonormal_two_atom_example():
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((8, 8)))
    y = 2 * Q[:, 1] + 3 * Q[:, 5]
    x = omp_encode(y, Q, sparsity=2).coefficients[:, 0]
    assert np.allclose(x[[1, 5]], [2.0, 3.0], atol=1e-10)
    assert np.count_nonzero(x) == 2


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 4))
def test_orthonormal_recovery_is_exact(seed, k):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    x = np.zeros(12)
    x[rng.choice(12, k, replace=False)] = rng.uniform(0.5, 2, k) * rng.choice([-1, 1], k)
    y = Q @ x
    code = omp_encode(y, Q, sparsity=4, residual_tol=0.0)
    assert np.linalg.norm(y - reconstruct(Q, code)[:, 0]) < 1e-9


def test_omp_matches_exhaustive_when_greedy_reaches_it():
    rng = np.random.default_rng(5)
    hits = 0
    for _ in range(200):
        D = unit_columns(rng, rng.integers(4, 17), rng.integers(3, 9))
        y = rng.standard_normal(D.shape[0])
        r_omp = np.linalg.norm(y - reconstruct(D, omp_encode(y, D, 2, 0.0))[:, 0])
        r_best, S_best = best_k_support(D, y, 2)
        assert r_omp >= r_best - 1e-9
        if naive_greedy_support(D, y, 2) == S_best:
            hits += 1
            assert abs(r_omp - r_best) < 1e-9
    assert hits > 50


def test_ties_pick_lowest_index():
    D = np.eye(4)
    code = omp_encode(np.array([1.0, 1.0, 1.0, 0.0]), D, sparsity=1)
    assert np.flatnonzero(code.coefficients[:, 0]).tolist() == [0]


def test_sparsity_bound_and_residual_tol(rng):
    D = unit_columns(rng, 16, 40)
    Y = rng.standard_normal((16, 30))
    code = omp_encode(Y, D, sparsity=3)
    assert code.nnz.max() <= 3
    code = omp_encode(D[:, :1] * 2.0, D, sparsity=5, residual_tol=1e-6)
    assert code.n_selected[0] == 1


def test_center_and_reconstruct_add_means(rng):
    D = unit_columns(rng, 16, 20)
    Y = rng.random((16, 4)) + 3.0
    code = omp_encode(Y, D, 16, 0.0, center=True)
    assert np.allclose(code.means, Y.mean(axis=0))
    zero = omp_encode(np.full((16, 2), 0.4), D, 4, center=True)
    assert np.allclose(reconstruct(D, zero), 0.4)  # constant patches code to zero


def test_l1_shrinks_coefficients(rng):
    D = unit_columns(rng, 16, 20)
    y = D[:, [2, 7]] @ np.array([1.0, -0.5])
    x0 = omp_encode(y, D, 2).coefficients[:, 0]
    x1 = omp_encode(y, D, 2, l1=0.2).coefficients[:, 0]
    assert np.abs(x1).sum() < np.abs(x0).sum()
    assert np.all(np.sign(x1[x1 != 0]) == np.sign(x0[x1 != 0]))


def test_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        omp_encode(rng.random((5, 2)), unit_columns(rng, 6, 3))


def test_svt_matches_definition(rng):
    M = rng.standard_normal((6, 5))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    ref = U @ np.diag(np.maximum(s - 0.7, 0)) @ Vt
    assert np.allclose(svt(M, 0.7), ref)
    assert np.array_equal(svt(M, 1e6), np.zeros_like(M))


def test_alm_rank_one_clean_recovery(rng):
    D = unit_columns(rng, 16, 12)
    u = rng.standard_normal(12)
    Y = D @ np.outer(u, rng.standard_normal(30))
    sol = alm_encode(Y, D, lam=0.3)
    assert sol.converged
    s = np.linalg.svd(sol.J, compute_uv=False)
    assert s[1] / s[0] < 1e-6
    assert np.all(sol.E >= 0)
    Yn = max(1.0, np.linalg.norm(Y))
    assert np.linalg.norm(Y - D @ sol.X - sol.E) / Yn <= 1e-6
    assert np.linalg.norm(sol.X - sol.J) / Yn <= 1e-6


def test_alm_spike_support(rng):
    n, N = 20, 60
    D = unit_columns(rng, n, 30)
    L = D @ np.outer(rng.standard_normal(30), rng.standard_normal(N)) * 0.3
    spikes = np.zeros((n, N))
    mask = rng.random((n, N)) < 0.05
    spikes[mask] = rng.uniform(3, 5, mask.sum())
    sol = alm_encode(L + spikes, D, lam=0.3)
    found = sol.E > 0.5
    assert (found & mask).sum() / mask.sum() >= 0.95
    assert np.all(sol.E >= 0)


def test_alm_iteration_cap_is_reported(rng, caplog):
    D = unit_columns(rng, 8, 6)
    with caplog.at_level(logging.WARNING):
        sol = alm_encode(rng.random((8, 10)), D, lam=0.1, max_iter=2)
    assert not sol.converged and sol.iterations == 2
    assert "without converging" in caplog.text
    with pytest.raises(ValueError):
        alm_encode(rng.random((8, 3)), D, lam=0.0)

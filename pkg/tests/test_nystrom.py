import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detreg import dpp, linalg, verify
from detreg.errors import RankDeficientVC, SubsetTooSmall, ZeroProjectedKernel
from detreg.kernels import make_nnp
from detreg.nystrom import (
    common_nystrom,
    nystrom_relative_error,
    projected_nystrom,
    projected_nystrom_matrix,
)


def test_full_subset_recovers_projected_kernel(gauss_nnp, tiny_nnp):
    f = projected_nystrom(gauss_nnp, range(gauss_nnp.n))
    assert np.allclose(f.materialize(), gauss_nnp.K_tilde, atol=1e-9)
    assert nystrom_relative_error(gauss_nnp, f) == pytest.approx(0.0, abs=1e-8)
    t = projected_nystrom(tiny_nnp, (0, 1)).materialize()
    assert np.allclose(t, [[0.5, -0.5], [-0.5, 0.5]])


def test_small_subset_errors(gauss_nnp):
    with pytest.raises(SubsetTooSmall):
        projected_nystrom(gauss_nnp, (0, 1, 2))
    assert np.array_equal(projected_nystrom_matrix(gauss_nnp, (0, 1, 2)), np.zeros((6, 6)))
    V = np.column_stack([np.ones(4), [0.0, 0.0, 1.0, 1.0]])
    nnp = make_nnp(np.eye(4), V)
    with pytest.raises(RankDeficientVC):
        projected_nystrom(nnp, (0, 1, 2)[:2] + (1,))


def test_rank_deficit_gives_positive_error(tps_nnp):
    f = projected_nystrom(tps_nnp, range(tps_nnp.p + 1))
    assert f.lowrank_rank == 1
    assert 0 < nystrom_relative_error(tps_nnp, f) <= 1 + 1e-12


def test_zero_projected_kernel():
    V = np.column_stack([np.ones(4), np.arange(4.0)])
    nnp = make_nnp(V @ V.T, V)
    with pytest.raises(ZeroProjectedKernel):
        nystrom_relative_error(nnp, projected_nystrom(nnp, range(4)))


def test_common_nystrom():
    rng = np.random.default_rng(0)
    R = rng.standard_normal((6, 2))
    K = R @ R.T
    assert np.allclose(common_nystrom(K, range(6)), K)
    assert np.allclose(common_nystrom(K, (1, 4)), K, atol=1e-9)
    assert np.array_equal(common_nystrom(K, ()), np.zeros((6, 6)))


def subsets_for(nnp, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(nnp.p + 1, nnp.n + 1))
    return sorted(rng.choice(nnp.n, size=k, replace=False).tolist())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_nystrom_properties(seed):
    nnp = verify.random_instance(seed)
    C = subsets_for(nnp, seed)
    if not linalg.is_full_column_rank(nnp.V[C]):
        return
    f = projected_nystrom(nnp, C)
    L = f.materialize()
    scale = max(1.0, np.abs(nnp.K_tilde).max())
    # 0 <= L <= K_tilde
    assert np.linalg.eigvalsh(L).min() >= -1e-9 * scale
    assert np.linalg.eigvalsh(nnp.K_tilde - L).min() >= -1e-9 * scale
    # matching on the subset
    B = f.B_C
    assert np.allclose(B.T @ L[np.ix_(C, C)] @ B, B.T @ nnp.K_tilde[np.ix_(C, C)] @ B, atol=1e-9 * scale)
    # invariance to rotating the complement basis
    rng = np.random.default_rng(seed + 1)
    R, _ = np.linalg.qr(rng.standard_normal((B.shape[1], B.shape[1])))
    assert np.allclose(projected_nystrom(nnp, C, B=B @ R).materialize(), L, atol=1e-10 * scale)
    # the factor never needs K_tilde: root reproduces L
    assert np.allclose(f.root @ f.root.T, L)


def test_expected_error_matches_resolvent(gauss_nnp):
    lam = 0.4
    m = dpp.build_ensemble(gauss_nnp, lam)
    table = dpp.enumerate_distribution(m)
    Kt = gauss_nnp.K_tilde
    E = table.expectation(lambda C: Kt - projected_nystrom_matrix(gauss_nnp, C))
    target = lam * Kt @ np.linalg.inv(Kt + lam * np.eye(gauss_nnp.n))
    assert np.allclose(E, target, atol=1e-8)
    assert np.linalg.eigvalsh(E).max() <= lam + 1e-12

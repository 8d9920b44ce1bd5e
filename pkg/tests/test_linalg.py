import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from replicator.errors import InvalidArgumentError, NotPositiveDefiniteError
from replicator.linalg import mat_exp, min_eigenvalue, spd_inverse, spd_inverse_batch


def taylor_exp(M, t, terms=60):
    # scaled Taylor series with repeated squaring, independent of Pade
    s = max(0, int(np.ceil(np.log2(max(1.0, np.abs(M * t).sum())))) + 2)
    X = M * t / 2**s
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ X / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def gauss_inverse(M):
    n = M.shape[0]
    aug = np.hstack([M.astype(float), np.eye(n)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        for r in range(n):
            if r != col:
                aug[r] -= aug[r, col] * aug[col]
    return aug[:, n:]


def random_spd(rng, n):
    X = rng.standard_normal((n, n))
    return X @ X.T + n * np.eye(n)


def test_mat_exp_zero_is_identity():
    assert np.array_equal(mat_exp(np.zeros((2, 2)), 5.0), np.eye(2))


def test_mat_exp_nilpotent():
    np.testing.assert_allclose(mat_exp([[0, 1], [0, 0]], 1.0), [[1, 1], [0, 1]], atol=1e-15)


def test_mat_exp_scalar():
    assert mat_exp([[-1.0]], 1.0)[0, 0] == pytest.approx(math.exp(-1), rel=1e-14)


def test_mat_exp_matches_taylor_oracle():
    rng = np.random.default_rng(3)
    for n in (2, 3, 5, 8):
        M = rng.standard_normal((n, n))
        for t in (-1.3, 0.2, 2.0):
            E = mat_exp(M, t)
            ref = taylor_exp(M, t)
            assert np.linalg.norm(E - ref, 2) <= 1e-12 * np.linalg.norm(ref, 2)


def test_mat_exp_vectorised_times():
    M = np.array([[0.0, 1.0], [-2.0, -0.3]])
    ts = np.array([0.0, 0.5, 1.5])
    stacked = mat_exp(M, ts)
    assert stacked.shape == (3, 2, 2)
    for t, E in zip(ts, stacked):
        np.testing.assert_allclose(E, mat_exp(M, t), rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("M", [
    [[0.7]],
    [[0.0, 1.0, 0.5], [0.0, 0.0, 2.0], [0.0, 0.0, 0.0]],
    [[1.0, 1.0], [0.0, 1.0]],
    [[0.0, 3.0], [-3.0, 0.0]],
    [[0.3, -1.2, 0.4], [0.9, -0.5, 0.1], [0.2, 0.7, -1.1]],
], ids=["scalar", "nilpotent", "jordan", "rotation", "generic"])
def test_mat_exp_stacked_paths_match_taylor(M):
    M = np.array(M)
    ts = np.linspace(-1.5, 2.5, 17)
    stacked = mat_exp(M, ts)
    assert stacked.dtype == np.float64
    for t, E in zip(ts, stacked):
        ref = taylor_exp(M, t)
        assert np.linalg.norm(E - ref, 2) <= 1e-12 * max(1.0, np.linalg.norm(ref, 2))


def test_spd_inverse_batch():
    rng = np.random.default_rng(5)
    Ms = np.array([random_spd(rng, 3) for _ in range(7)])
    inv = spd_inverse_batch(Ms)
    for M, X in zip(Ms, inv):
        np.testing.assert_allclose(X, gauss_inverse(M), rtol=1e-10, atol=1e-12)
    Ms[3] = -Ms[3]
    with pytest.raises(NotPositiveDefiniteError):
        spd_inverse_batch(Ms)


def test_mat_exp_rejects_non_finite():
    with pytest.raises(InvalidArgumentError):
        mat_exp([[np.nan]], 1.0)
    with pytest.raises(InvalidArgumentError):
        mat_exp([[1.0]], np.inf)


small_matrices = arrays(np.float64, (3, 3), elements=st.floats(-2, 2, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(small_matrices, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_mat_exp_semigroup(M, s, t):
    lhs = mat_exp(M, s) @ mat_exp(M, t)
    np.testing.assert_allclose(lhs, mat_exp(M, s + t), atol=1e-9 * max(1.0, np.abs(lhs).max()))


@settings(max_examples=50, deadline=None)
@given(small_matrices, st.floats(-2, 2))
def test_mat_exp_inverse_pair(M, t):
    np.testing.assert_allclose(mat_exp(M, t) @ mat_exp(M, -t), np.eye(3), atol=1e-9 * np.exp(6 * abs(t)))


def test_spd_inverse_examples():
    np.testing.assert_array_equal(spd_inverse(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(spd_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))


def test_spd_inverse_matches_gaussian_elimination():
    rng = np.random.default_rng(11)
    M = random_spd(rng, 4)
    inv = spd_inverse(M)
    np.testing.assert_allclose(inv, gauss_inverse(M), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(M @ inv, np.eye(4), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_spd_inverse_involution(n, seed):
    M = random_spd(np.random.default_rng(seed), n)
    np.testing.assert_allclose(spd_inverse(spd_inverse(M)), M, atol=1e-8 * np.abs(M).max())


def test_spd_inverse_rejects():
    with pytest.raises(NotPositiveDefiniteError):
        spd_inverse(np.diag([1.0, -1.0]))
    with pytest.raises(NotPositiveDefiniteError):
        spd_inverse([[1.0, 2.0], [0.0, 1.0]])


def test_min_eigenvalue_examples():
    assert min_eigenvalue(np.eye(4)) == pytest.approx(1.0)
    assert min_eigenvalue(np.diag([2.0, 5.0])) == pytest.approx(2.0)


def test_min_eigenvalue_sphere_sampling_oracle():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((5, 5))
    M = 0.5 * (X + X.T)
    lam = min_eigenvalue(M)
    u = rng.standard_normal((100_000, 5))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    forms = np.einsum("pi,ij,pj->p", u, M, u)
    # lower bound everywhere, and the sampled minimum is close to it
    assert lam <= forms.min() + 1e-12
    assert forms.min() - lam <= 0.05 * np.linalg.norm(M, 2)


def test_min_eigenvalue_rejects_asymmetric():
    with pytest.raises(InvalidArgumentError):
        min_eigenvalue([[1.0, 2.0], [0.0, 1.0]])

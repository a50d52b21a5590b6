import math

import numpy as np
import pytest

from sprifed.rng import StreamKey
from sprifed.secureagg import (AggregateResult, noisy_smpc, noisy_smpc_vector,
                               pairwise_masks)


def test_noiseless_dot_product():
    res = noisy_smpc([1.0, 2.0], [3.0, 4.0], 0.0, StreamKey(0))
    assert res.value == 11.0
    assert res.sigma0 == 0.0 and res.n_participants == 2


def test_orthogonal_vectors():
    res = noisy_smpc([1.0, -1.0], [1.0, 1.0], 0.0, StreamKey(0))
    assert res.value == 0.0


def test_validation():
    with pytest.raises(ValueError):
        noisy_smpc([1.0, 2.0], [1.0], 0.0, StreamKey(0))
    with pytest.raises(ValueError):
        noisy_smpc([1.0], [1.0], -0.1, StreamKey(0))
    with pytest.raises(ValueError):
        noisy_smpc([], [], 0.0, StreamKey(0))


def test_clip_applies_to_products():
    res = noisy_smpc([3.0, -3.0], [1.0, 1.0], 0.0, StreamKey(0), clip=1.0)
    assert res.value == 0.0  # clipped to [1, -1]
    res = noisy_smpc([3.0, 3.0], [1.0, 1.0], 0.0, StreamKey(0), clip=1.0)
    assert res.value == 2.0


def test_mask_fidelity_exact_cancellation():
    rng = np.random.default_rng(123)
    a, b = rng.standard_normal(257), rng.standard_normal(257)
    res = noisy_smpc(a, b, 0.0, StreamKey(11), mask_fidelity=True)
    assert abs(res.value - float(np.dot(a, b))) <= 1e-9


def test_mask_matrix_antisymmetry():
    m = pairwise_masks(40, StreamKey(5))
    assert np.array_equal(m, -m.T)
    assert np.all(np.diag(m) == 0.0)
    assert abs(m.sum()) <= 1e-9


def test_masked_and_fast_modes_agree_without_masks():
    # masks cancel, so both modes agree to floating-point resolution
    rng = np.random.default_rng(7)
    a, b = rng.standard_normal(100), rng.standard_normal(100)
    fast = noisy_smpc(a, b, 1.5, StreamKey(9))
    fid = noisy_smpc(a, b, 1.5, StreamKey(9), mask_fidelity=True)
    assert fid.value == pytest.approx(fast.value, abs=1e-9)


def test_per_client_noise_construction():
    # the aggregate equals the exact dot product plus the sum of the
    # per-client draws at scale sigma0/sqrt(n), taken from the keyed stream
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal(64), rng.standard_normal(64)
    key = StreamKey(21)
    res = noisy_smpc(a, b, 2.0, key)
    eta = key.child("noise").normal(2.0 / math.sqrt(64), 64)
    assert res.value == pytest.approx(float((a * b).sum() + eta.sum()), abs=1e-12)


def test_variance_calibration_independent_of_n():
    rng = np.random.default_rng(17)
    sigma0 = 2.0
    for n in (1, 10, 1000):
        a, b = rng.standard_normal(n), rng.standard_normal(n)
        exact = float(np.dot(a, b))
        devs = [noisy_smpc(a, b, sigma0, StreamKey(1000 * n + r)).value - exact
                for r in range(4000)]
        var = float(np.var(devs))
        assert sigma0 ** 2 * 0.9 <= var <= sigma0 ** 2 * 1.1


def test_vector_reduces_to_scalar():
    rng = np.random.default_rng(2)
    col = rng.standard_normal(30).reshape(-1, 1)
    b = rng.standard_normal(30)
    key = StreamKey(77)
    vec = noisy_smpc_vector(col, b, 1.0, key)
    scalar = noisy_smpc(col[:, 0], b, 1.0, key.child(0))
    assert vec.shape == (1,)
    assert vec[0] == scalar.value


def test_vector_noiseless_matches_matmul():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((50, 7))
    b = rng.standard_normal(50)
    out = noisy_smpc_vector(X, b, 0.0, StreamKey(0))
    assert np.allclose(out, X.T @ b, atol=1e-9)


def test_vector_noise_uncorrelated_across_coordinates():
    n, p, sigma0 = 20, 3, 1.0
    zeros_mat = np.zeros((n, p))
    zeros_b = np.zeros(n)
    draws = np.array([noisy_smpc_vector(zeros_mat, zeros_b, sigma0, StreamKey(r))
                      for r in range(10_000)])
    cov = np.cov(draws.T)
    off = cov[~np.eye(p, dtype=bool)]
    assert np.all(np.abs(off) <= 0.05 * sigma0 ** 2)
    assert np.all(np.abs(np.diag(cov) - sigma0 ** 2) <= 0.05 * sigma0 ** 2)


def test_determinism_same_key():
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal(12), rng.standard_normal(12)
    r1 = noisy_smpc(a, b, 1.0, StreamKey(8))
    r2 = noisy_smpc(a, b, 1.0, StreamKey(8))
    assert r1 == r2
    assert isinstance(r1, AggregateResult)

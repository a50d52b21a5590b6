import itertools
import math

import numpy as np
import pytest

from sprifed.datagen import Dataset, generate_synthetic
from sprifed.privacy import PrivacyLedger, PrivacyParams
from sprifed.rng import StreamKey
from sprifed.sparse_recovery import (IncrementalPrivateOls, SolverError, omp,
                                     private_ols, sprifed_omp,
                                     sprifed_omp_grad,
                                     sprifed_omp_no_enhancement)


def _dataset_from_arrays(X, y):
    return Dataset(X=np.asarray(X, float), y=np.asarray(y, float),
                   alpha_star=None, support=None,
                   x_bound=float(np.abs(X).max()),
                   y_bound=float(np.abs(y).max()),
                   sigma_eps=None, seed=None)


def _orthonormal_design(n, p, seed):
    raw = np.random.default_rng(seed).standard_normal((n, p))
    q, _ = np.linalg.qr(raw)
    return q[:, :p]


def best_subset_support(X, y, s):
    """Exhaustive least-squares oracle over all size-s column subsets."""
    best_rss, best = math.inf, None
    for idx in itertools.combinations(range(X.shape[1]), s):
        Xs = X[:, idx]
        coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
        rss = float(np.sum((y - Xs @ coef) ** 2))
        if rss < best_rss:
            best_rss, best = rss, set(idx)
    return best


def test_omp_identity_design():
    ds = _dataset_from_arrays(np.eye(5), 5.0 * np.eye(5)[:, 3])
    est = omp(ds, 1)
    assert est.support == [3]
    assert est.alpha_hat == pytest.approx([5.0], abs=1e-12)


def test_omp_orthonormal_exact_recovery():
    X = _orthonormal_design(40, 8, seed=0)
    support = [1, 4, 6]
    alpha = np.array([2.0, -1.5, 3.0])
    y = X[:, support] @ alpha
    est = omp(_dataset_from_arrays(X, y), 3)
    assert set(est.support) == set(support)
    fitted = dict(zip(est.support, est.alpha_hat))
    assert np.allclose([fitted[j] for j in support], alpha, atol=1e-8)


def test_omp_matches_best_subset_oracle():
    hits = 0
    for seed in range(10):
        ds = generate_synthetic(200, 12, 3, 0.0, seed=seed,
                                x_clip=None, y_clip=None)
        est = omp(ds, 3)
        if set(est.support) == best_subset_support(ds.X, ds.y, 3):
            hits += 1
    assert hits >= 9


def test_omp_validation_and_singular():
    ds = generate_synthetic(20, 10, 2, 0.0, seed=0)
    with pytest.raises(ValueError):
        omp(ds, 0)
    with pytest.raises(ValueError):
        omp(ds, 11)
    col = np.random.default_rng(0).standard_normal(10)
    dup = _dataset_from_arrays(np.column_stack([col, col]), col)
    with pytest.raises(SolverError):
        omp(dup, 2)


def test_omp_tie_breaks_to_lowest_index():
    col = np.array([1.0, 0.0, 0.0])
    X = np.column_stack([col, col.copy()])
    est = omp(_dataset_from_arrays(X, col), 1)
    assert est.support == [0]


def test_private_ols_noiseless_orthonormal():
    X = _orthonormal_design(30, 5, seed=1)
    support = [0, 2]
    y = X[:, support] @ np.array([1.0, 2.0])
    ds = _dataset_from_arrays(X, y)
    alpha = private_ols(ds, support, sigma2=0.0, s=2,
                        ledger=PrivacyLedger(), key=StreamKey(0))
    assert np.allclose(alpha, [1.0, 2.0], atol=1e-10)


def test_private_ols_noiseless_matches_lstsq():
    ds = generate_synthetic(80, 15, 3, 0.01, seed=2)
    support = [1, 5, 9]
    alpha = private_ols(ds, support, sigma2=0.0, s=3,
                        ledger=PrivacyLedger(), key=StreamKey(0))
    direct, *_ = np.linalg.lstsq(ds.X[:, support], ds.y, rcond=None)
    assert np.allclose(alpha, direct, atol=1e-10)


def test_private_ols_ledger_counting_and_reuse():
    ds = generate_synthetic(60, 10, 4, 0.01, seed=3)
    ledger = PrivacyLedger()
    state = IncrementalPrivateOls(ds, sigma2=5.0, s=4, ledger=ledger,
                                  key=StreamKey(4), mu_s=0.2)
    for l, j in enumerate([2, 7, 4]):
        state.add_feature(j)
        assert ledger.count("private_ols") == 2 * (l + 1)
    # previously privatized entries are reused verbatim
    gram_before = state.gram.copy()
    state.add_feature(9)
    assert np.array_equal(state.gram[:3, :3], gram_before)
    assert ledger.count("private_ols") == 8


def test_private_gram_exactly_symmetric():
    ds = generate_synthetic(60, 10, 4, 0.01, seed=5)
    state = IncrementalPrivateOls(ds, sigma2=3.0, s=4, ledger=PrivacyLedger(),
                                  key=StreamKey(6), mu_s=1.0)
    for j in (1, 3, 8, 0):
        state.add_feature(j)
    assert np.array_equal(state.gram, state.gram.T)


@pytest.mark.parametrize("variant", ["enh", "noenh", "grad"])
def test_zero_noise_reduction_small(variant):
    params = PrivacyParams.noiseless()
    for seed in range(5):
        ds = generate_synthetic(150, 30, 4, 0.001, seed=seed)
        ref = omp(ds, 4)
        if variant == "enh":
            est = sprifed_omp(ds, 4, params, seed)
        elif variant == "noenh":
            est = sprifed_omp_no_enhancement(ds, 4, params, seed)
        else:
            est = sprifed_omp_grad(ds, 4, params, math.inf, seed)
        assert est.support == ref.support
        assert np.allclose(est.alpha_hat, ref.alpha_hat, atol=1e-9)


def test_ledger_event_counts():
    ds = generate_synthetic(100, 20, 3, 0.001, seed=7)
    params = PrivacyParams(0.5, 0.05)
    est = sprifed_omp(ds, 3, params, 0)
    assert est.ledger.count("sprifed/gamma0") == 1
    assert est.ledger.count("sprifed/beta") == 3
    assert est.ledger.count("private_ols") == 6
    assert est.ledger.total().mu == pytest.approx(
        math.sqrt(4 * 0.5 ** 2 + 6 * 0.05 ** 2), rel=1e-12)

    noenh = sprifed_omp_no_enhancement(ds, 3, params, 0)
    assert noenh.ledger.count("sprifed") == 4
    assert noenh.ledger.count("private_ols") == 0

    grad = sprifed_omp_grad(ds, 3, params, 1.0, 0)
    assert grad.ledger.count("sprifed_grad/gradient") == 3
    assert grad.ledger.count("private_ols") == 6


def test_support_cardinality_and_uniqueness():
    ds = generate_synthetic(100, 25, 5, 0.001, seed=8)
    est = sprifed_omp(ds, 5, PrivacyParams(0.5, 0.05), 1)
    assert len(est.support) == 5
    assert len(set(est.support)) == 5


def test_determinism_full_run():
    ds = generate_synthetic(80, 15, 3, 0.001, seed=9)
    params = PrivacyParams(0.6, 0.05)
    a = sprifed_omp(ds, 3, params, 42)
    b = sprifed_omp(ds, 3, params, 42)
    assert a.support == b.support
    assert np.array_equal(a.alpha_hat, b.alpha_hat)
    c = sprifed_omp(ds, 3, params, 43)
    assert (a.support != c.support) or not np.array_equal(a.alpha_hat, c.alpha_hat)


def test_gradient_norm_decreases_correlations_stay():
    # noiseless instrumentation: the gradient shrinks across rounds while the
    # covariance-column norms stay on one scale
    params = PrivacyParams.noiseless()
    ds = generate_synthetic(400, 50, 5, 0.001, seed=10, x_clip=None, y_clip=None)
    grad = sprifed_omp_grad(ds, 5, params, math.inf, 0)
    norms = grad.diagnostics["gradient_norms"]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 0.5 * norms[0]

    corr = sprifed_omp(ds, 5, params, 0)
    beta_norms = corr.diagnostics["beta_column_norms"]
    assert max(beta_norms) <= 2.0 * min(beta_norms)


def test_grad_validation():
    ds = generate_synthetic(30, 10, 2, 0.001, seed=11)
    with pytest.raises(ValueError):
        sprifed_omp_grad(ds, 2, PrivacyParams.noiseless(), 0.0, 0)
    with pytest.raises(ValueError):
        sprifed_omp(ds, 0, PrivacyParams.noiseless(), 0)


def test_model_estimate_serialization():
    ds = generate_synthetic(50, 10, 2, 0.001, seed=12)
    est = sprifed_omp(ds, 2, PrivacyParams(0.5, 0.1), 0)
    out = est.to_dict(epsilon=1.0)
    assert set(out) == {"support", "alpha_hat", "ledger", "flags"}
    assert len(out["support"]) == 2 and len(out["alpha_hat"]) == 2
    assert out["ledger"]["total_mu"] > 0
    padded = est.alpha_padded(10)
    assert padded.shape == (10,)
    assert np.count_nonzero(padded) <= 2

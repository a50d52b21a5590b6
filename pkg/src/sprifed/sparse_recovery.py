"""Private sparse basis recovery.

Non-private orthogonal matching pursuit as the reference, incremental
privatized least squares over the selected support, and the two federated
private variants: correlation-based selection with low-noise re-privatization
of the selected statistics, and gradient-based selection where clients clip
and release local gradients against the shared private model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset
from .privacy import PrivacyLedger, PrivacyParams
from .rng import StreamKey, as_key
from .secureagg import noisy_smpc, noisy_smpc_vector

# Condition-number ceiling beyond which a noisy normal-equation solve is
# stabilized with a small ridge and the trial flagged.
_COND_LIMIT = 1e12
_RIDGE_SCALE = 1e-8


class SolverError(RuntimeError):
    """Raised when a noiseless normal-equation system is numerically singular."""


@dataclass
class ModelEstimate:
    """Result of one recovery run: selected support, final model, audit trail."""

    support: list
    alpha_hat: np.ndarray
    alpha_tilde_history: list = field(default_factory=list)
    ledger: PrivacyLedger = field(default_factory=PrivacyLedger)
    flags: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def alpha_padded(self, p: int) -> np.ndarray:
        out = np.zeros(p)
        out[np.asarray(self.support, dtype=int)] = self.alpha_hat
        return out

    def to_dict(self, epsilon: float | None = None) -> dict:
        return {
            "support": [int(j) for j in self.support],
            "alpha_hat": [float(v) for v in self.alpha_hat],
            "ledger": self.ledger.to_dict(epsilon=epsilon),
            "flags": list(self.flags),
        }


def _solve_gram(gram: np.ndarray, rhs: np.ndarray, *, allow_ridge: bool):
    """Direct dense solve; optionally ridge-stabilize ill-conditioned systems.

    Returns (solution, flagged).  With ``allow_ridge=False`` an ill-conditioned
    system raises SolverError instead.
    """
    gram = np.atleast_2d(gram)
    cond = np.linalg.cond(gram)
    if cond > _COND_LIMIT or not np.isfinite(cond):
        if not allow_ridge:
            raise SolverError(f"selected-support system is singular (cond={cond:.3g})")
        lam = _RIDGE_SCALE * np.trace(gram) / gram.shape[0]
        gram = gram + lam * np.eye(gram.shape[0])
        return np.linalg.solve(gram, rhs), True
    return np.linalg.solve(gram, rhs), False


def _argmax_correlation(corr: np.ndarray, selected) -> int:
    """Index of the largest |corr| outside ``selected``; ties break low."""
    cand = np.abs(corr)
    if selected:
        cand[np.asarray(selected, dtype=int)] = -np.inf
    return int(np.argmax(cand))


def omp(dataset: Dataset, s: int) -> ModelEstimate:
    """Classical orthogonal matching pursuit (non-private reference).

    Repeatedly selects the feature most correlated with the residual, refits
    least squares on the selected set, and subtracts the fit from the response.
    """
    X, y = dataset.X, dataset.y
    n, p = X.shape
    if not 1 <= s <= min(n, p):
        raise ValueError("need 1 <= s <= min(n, p)")
    selected: list = []
    history = []
    alpha = np.zeros(0)
    residual = y.copy()
    for _ in range(s):
        corr = X.T @ residual
        selected.append(_argmax_correlation(corr, selected))
        Xs = X[:, selected]
        alpha, _ = _solve_gram(Xs.T @ Xs, Xs.T @ y, allow_ridge=False)
        history.append(alpha.copy())
        residual = y - Xs @ alpha
    return ModelEstimate(support=selected, alpha_hat=alpha,
                         alpha_tilde_history=history)


class IncrementalPrivateOls:
    """Privatized least squares over a support that grows one feature at a time.

    Each added feature privatizes exactly one new correlation entry and one new
    covariance row (mirrored for symmetry), each via the aggregation protocol
    with per-entry noise std ``sigma2 * sqrt(s)``, and records two ledger
    events at the low-dimensional GDP cost.  Previously privatized entries are
    reused verbatim on later calls.
    """

    def __init__(self, dataset: Dataset, sigma2: float, s: int,
                 ledger: PrivacyLedger, key: StreamKey, mu_s: float):
        self._X = dataset.X
        self._y = dataset.y
        self._noise_std = sigma2 * math.sqrt(s)
        self._ledger = ledger
        self._key = key
        self._mu_s = mu_s
        self.support: list = []
        self._gamma = np.zeros(0)
        self._beta = np.zeros((0, 0))

    def add_feature(self, j: int) -> None:
        l = len(self.support)
        self.support.append(int(j))
        key = self._key.child("round", l)
        gamma_new = noisy_smpc(self._X[:, j], self._y, self._noise_std,
                               key.child("gamma")).value
        self._ledger.record(f"private_ols/gamma[{l}]", self._mu_s)
        row = np.empty(l + 1)
        for k, other in enumerate(self.support):
            row[k] = noisy_smpc(self._X[:, j], self._X[:, other], self._noise_std,
                                key.child("beta", k)).value
        self._ledger.record(f"private_ols/beta_row[{l}]", self._mu_s)
        gamma = np.empty(l + 1)
        gamma[:l] = self._gamma
        gamma[l] = gamma_new
        beta = np.empty((l + 1, l + 1))
        beta[:l, :l] = self._beta
        beta[l, :] = row
        beta[:l, l] = row[:l]  # shared draw per unordered pair keeps it symmetric
        self._gamma, self._beta = gamma, beta

    @property
    def gram(self) -> np.ndarray:
        return self._beta

    @property
    def correlations(self) -> np.ndarray:
        return self._gamma

    def solve(self):
        """Solve the privatized normal equations; returns (alpha, flagged)."""
        if not self.support:
            raise ValueError("no features have been added")
        return _solve_gram(self._beta, self._gamma, allow_ridge=True)


def private_ols(dataset: Dataset, support, sigma2: float, s: int,
                ledger: PrivacyLedger, key) -> np.ndarray:
    """One-shot privatized least squares over ``support``.

    Privatizes the support incrementally in order (two ledger events per
    feature) and returns the solution of the noisy system.
    """
    if len(support) == 0:
        raise ValueError("support must be non-empty")
    mu_s = math.inf if sigma2 == 0 else 1.0 / sigma2
    state = IncrementalPrivateOls(dataset, sigma2, s, ledger, as_key(key), mu_s)
    for j in support:
        state.add_feature(j)
    alpha, _ = state.solve()
    return alpha


def _run_sprifed_omp(dataset: Dataset, s: int, params: PrivacyParams,
                     key: StreamKey, enhancement: bool) -> ModelEstimate:
    X, y = dataset.X, dataset.y
    n, p = X.shape
    if not 1 <= s <= p:
        raise ValueError("need 1 <= s <= p")
    ledger = PrivacyLedger()
    flags: list = []
    sigma1 = params.sigma1
    noise_p = sigma1 * math.sqrt(p)

    gamma0 = noisy_smpc_vector(X, y, noise_p, key.child("gamma0"))
    ledger.record("sprifed/gamma0", params.mu_p)

    ols = IncrementalPrivateOls(dataset, params.sigma2, s, ledger,
                                key.child("ols"), params.mu_s)
    selected: list = []
    beta_cols: list = []
    history: list = []
    residual_norms: list = []
    beta_col_norms: list = []
    alpha_tilde = np.zeros(0)

    for l in range(s):
        if selected:
            residual_corr = gamma0 - np.column_stack(beta_cols) @ alpha_tilde
        else:
            residual_corr = gamma0
        residual_norms.append(float(np.linalg.norm(residual_corr)))
        j = _argmax_correlation(residual_corr, selected)
        selected.append(j)

        col = noisy_smpc_vector(X, X[:, j], noise_p, key.child("beta", l))
        ledger.record(f"sprifed/beta[{l}]", params.mu_p)
        beta_cols.append(col)
        beta_col_norms.append(float(np.linalg.norm(col)))

        if enhancement:
            ols.add_feature(j)
            alpha_tilde, flagged = ols.solve()
        else:
            rows = np.asarray(selected, dtype=int)
            gram = np.column_stack(beta_cols)[rows, :]
            alpha_tilde, flagged = _solve_gram(gram, gamma0[rows], allow_ridge=True)
        if flagged:
            flags.append(f"ridge_fallback[iter={l}]")
        history.append(alpha_tilde.copy())

    if enhancement:
        alpha_hat, flagged = ols.solve()
    else:
        rows = np.asarray(selected, dtype=int)
        alpha_hat, flagged = _solve_gram(np.column_stack(beta_cols)[rows, :],
                                         gamma0[rows], allow_ridge=True)
    if flagged:
        flags.append("ridge_fallback[final]")
    return ModelEstimate(
        support=selected, alpha_hat=alpha_hat, alpha_tilde_history=history,
        ledger=ledger, flags=flags,
        diagnostics={"residual_corr_norms": residual_norms,
                     "beta_column_norms": beta_col_norms},
    )


def sprifed_omp(dataset: Dataset, s: int, params: PrivacyParams, key) -> ModelEstimate:
    """Correlation-based private OMP with low-noise re-privatization.

    The data-response correlation vector is privatized once with per-entry
    noise std ``sigma1 * sqrt(p)``; each iteration privatizes one covariance
    column at the same scale, then re-privatizes the selected-support
    statistics at the much smaller ``sigma2 * sqrt(s)`` scale to form the
    private model used for the residual update.  The ledger receives one
    p-scale event per release (s + 1 total) and two s-scale events per
    iteration.
    """
    return _run_sprifed_omp(dataset, s, params, as_key(key), enhancement=True)


def sprifed_omp_no_enhancement(dataset: Dataset, s: int, params: PrivacyParams,
                               key) -> ModelEstimate:
    """Ablation: the private model is built directly from the p-scale noisy
    artifacts, with no re-privatization (and no s-scale ledger events)."""
    return _run_sprifed_omp(dataset, s, params, as_key(key), enhancement=False)


def sprifed_omp_grad(dataset: Dataset, s: int, params: PrivacyParams,
                     clip_bound: float, key) -> ModelEstimate:
    """Gradient-based private OMP.

    Each round, every client forms its residual against the server-shared
    private model, clips each per-coordinate gradient contribution to
    magnitude ``clip_bound``, and the aggregated p-vector gradient is released
    with per-coordinate noise std ``sigma1 * clip_bound * sqrt(p)``.  Selection
    and the private model update then proceed as in the correlation variant.
    Redistribution of the private model to clients is post-processing and
    costs no extra budget.
    """
    X, y = dataset.X, dataset.y
    n, p = X.shape
    if not 1 <= s <= p:
        raise ValueError("need 1 <= s <= p")
    if not clip_bound > 0:
        raise ValueError("clip_bound must be positive")
    key = as_key(key)
    ledger = PrivacyLedger()
    flags: list = []
    sigma1 = params.sigma1
    noise_p = 0.0 if sigma1 == 0.0 else sigma1 * clip_bound * math.sqrt(p)
    clip = None if math.isinf(clip_bound) else clip_bound

    ols = IncrementalPrivateOls(dataset, params.sigma2, s, ledger,
                                key.child("ols"), params.mu_s)
    selected: list = []
    history: list = []
    gradient_norms: list = []
    alpha_tilde = np.zeros(0)

    for l in range(s):
        if selected:
            residual = y - X[:, np.asarray(selected, dtype=int)] @ alpha_tilde
        else:
            residual = y
        grad = noisy_smpc_vector(X, residual, noise_p, key.child("grad", l),
                                 clip=clip)
        ledger.record(f"sprifed_grad/gradient[{l}]", params.mu_p)
        gradient_norms.append(float(np.linalg.norm(grad)))

        j = _argmax_correlation(grad, selected)
        selected.append(j)
        ols.add_feature(j)
        alpha_tilde, flagged = ols.solve()
        if flagged:
            flags.append(f"ridge_fallback[iter={l}]")
        history.append(alpha_tilde.copy())

    alpha_hat, flagged = ols.solve()
    if flagged:
        flags.append("ridge_fallback[final]")
    return ModelEstimate(
        support=selected, alpha_hat=alpha_hat, alpha_tilde_history=history,
        ledger=ledger, flags=flags,
        diagnostics={"gradient_norms": gradient_norms},
    )

"""Evaluation metrics and theory diagnostics.

Support recovery counts, test MSE, estimation error, empirical risk on the
training set, restricted-isometry constant estimation (exhaustive or sampled),
and machine-checkable recovery-condition reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .datagen import Dataset, DiagnosticsConfig
from .privacy import PrivacyParams
from .rng import StreamKey, as_key
from .sparse_recovery import ModelEstimate


@dataclass
class TrialResult:
    """Metrics for one (algorithm, dataset, seed) run."""

    algo: str
    correct_basis_count: int | None
    test_mse: float | None
    delta_alpha: float | None
    delta_risk: float | None
    mu: float
    epsilon: float | None
    delta: float | None
    seed: int
    runtime_ms: float | None = None
    flags: tuple = ()

    def __post_init__(self):
        if self.correct_basis_count is not None and self.correct_basis_count < 0:
            raise ValueError("correct_basis_count must be nonnegative")
        if self.test_mse is not None and self.test_mse < 0:
            raise ValueError("test_mse must be nonnegative")

    def to_row(self, **context) -> dict:
        """JSON-lines row: the metric fields plus the caller's context columns.

        ``runtime_ms`` is omitted unless set, keeping result files
        byte-deterministic by default.
        """
        row = {
            "algo": self.algo,
            "correct_basis_count": self.correct_basis_count,
            "test_mse": self.test_mse,
            "delta_alpha": self.delta_alpha,
            "delta_risk": self.delta_risk,
            "mu": self.mu,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
            "flags": list(self.flags),
        }
        if self.runtime_ms is not None:
            row["runtime_ms"] = self.runtime_ms
        row.update(context)
        return row


def support_recovery(predicted, truth) -> int:
    """Number of predicted indices that belong to the true support."""
    return len(set(int(i) for i in predicted) & set(int(i) for i in truth))


def test_mse(model: ModelEstimate, test_set: Dataset) -> float:
    """Mean squared prediction error on a held-out set.

    The estimated model is embedded into R^p with zeros off-support before
    prediction.
    """
    if model.support and max(int(j) for j in model.support) >= test_set.p:
        raise ValueError("model support exceeds the test set dimension")
    alpha = model.alpha_padded(test_set.p)
    resid = test_set.X @ alpha - test_set.y
    return float(np.mean(resid ** 2))


def estimation_error(model: ModelEstimate, truth: np.ndarray) -> float:
    """Euclidean distance between the padded estimate and a reference model."""
    truth = np.asarray(truth, dtype=float)
    return float(np.linalg.norm(model.alpha_padded(truth.shape[0]) - truth))


def empirical_risk(model: ModelEstimate, dataset: Dataset) -> float:
    """Training-set risk gap between the estimate and the true model.

    (1/n) sum_i [(x_i alpha_hat - y_i)^2 - (x_i alpha_true - y_i)^2], where the
    reference is the ground truth expressed in the preprocessed coordinates.
    Slightly negative values can occur on training data through noise.
    """
    alpha_true = dataset.alpha_effective
    if alpha_true is None:
        raise ValueError("empirical risk requires a synthetic dataset with known truth")
    alpha = model.alpha_padded(dataset.p)
    fit = dataset.X @ alpha - dataset.y
    ref = dataset.X @ alpha_true - dataset.y
    return float(np.mean(fit ** 2) - np.mean(ref ** 2))


def risk_negativity_floor(dataset: Dataset) -> float:
    """Threshold below which a negative empirical risk should be flagged."""
    return -1e-9 * float(np.sum(dataset.y ** 2)) / dataset.n


def _subset_ric(Xn: np.ndarray, idx) -> float:
    sub = Xn[:, idx]
    eig = np.linalg.eigvalsh(sub.T @ sub)
    return max(float(eig[-1]) - 1.0, 1.0 - float(eig[0]))


def estimate_ric(Xn: np.ndarray, K: int, mode: str = "exhaustive",
                 budget: int = 20000, key: StreamKey | int = 0) -> float:
    """Restricted isometry constant of order K for a sqrt(n)-normalized matrix.

    Exhaustive mode maximizes over every size-K column subset (requires
    C(p, K) <= budget); sampled mode maximizes over ``budget`` random subsets
    and therefore returns a lower bound on the true constant.
    """
    Xn = np.asarray(Xn, dtype=float)
    p = Xn.shape[1]
    if not 1 <= K <= p:
        raise ValueError("need 1 <= K <= p")
    if mode == "exhaustive":
        if math.comb(p, K) > budget:
            raise ValueError(f"C({p},{K}) exceeds the budget of {budget} subsets")
        return max(_subset_ric(Xn, idx) for idx in combinations(range(p), K))
    if mode == "sampled":
        gen = as_key(key).child("ric").generator()
        best = 0.0
        for _ in range(budget):
            idx = gen.choice(p, size=K, replace=False)
            best = max(best, _subset_ric(Xn, idx))
        return best
    raise ValueError("mode must be 'exhaustive' or 'sampled'")


def normalized_design(dataset: Dataset) -> np.ndarray:
    """The design matrix divided by sqrt(n), the scaling RIP is stated for."""
    return dataset.X / math.sqrt(dataset.n)


def ric_recovery_threshold(s: int) -> float:
    """Order-(s+1) isometry-constant ceiling for exact recovery: 1/(4(1+sqrt(s)))."""
    return 1.0 / (4.0 * (1.0 + math.sqrt(s)))


def check_recovery_conditions(dataset: Dataset, params: PrivacyParams, s: int,
                              diag: DiagnosticsConfig, *, ric_budget: int = 20000,
                              key: StreamKey | int = 0) -> dict:
    """Diagnostic report on the sufficient conditions for exact recovery.

    Evaluates the directly computable conditions (isometry-constant ceiling,
    additive-error ceiling) on the preprocessed data and marks the
    constant-laden sample-size condition as not machine-checkable.  Purely
    informational; never gates execution.
    """
    if dataset.alpha_star is None or dataset.support is None:
        raise ValueError("recovery conditions require a synthetic dataset")
    alpha_eff = dataset.alpha_effective
    Xn = normalized_design(dataset)
    p = dataset.p
    mode = "exhaustive" if math.comb(p, s + 1) <= ric_budget else "sampled"
    zeta = estimate_ric(Xn, s + 1, mode=mode, budget=ric_budget, key=key)

    conditions = []
    ric_limit = ric_recovery_threshold(s)
    conditions.append({
        "condition": "ric",
        "measured": zeta,
        "bound": ric_limit,
        "estimate_kind": mode,
        "passed": bool(zeta <= ric_limit),
    })

    # kappa_eps ceiling, using the effective (preprocessed-scale) error level
    # and nu = 1/(1 - zeta) so that 1/(1-zeta) <= 1 + nu*zeta holds.
    kappa_eff = (dataset.sigma_eps_effective or 0.0) * math.sqrt(
        2.0 * math.log(2.0 * dataset.n / diag.p_b))
    min_coef = float(np.min(np.abs(alpha_eff[dataset.support])))
    nu = 1.0 / (1.0 - zeta) if zeta < 1.0 else math.inf
    eps_limit = min_coef / (16.0 * (math.sqrt(s) + 1.0) * (1.0 + nu * zeta))
    conditions.append({
        "condition": "kappa_eps",
        "measured": kappa_eff,
        "bound": eps_limit,
        "passed": bool(kappa_eff <= eps_limit),
    })

    conditions.append({
        "condition": "sample_size",
        "measured": dataset.n,
        "bound": None,
        "passed": None,
        "note": "not machine-checkable: depends on unobservable constants",
    })
    return {"s": s, "n": dataset.n, "p": p, "mu_p": params.mu_p,
            "mu_s": params.mu_s, "conditions": conditions}

"""Gaussian-DP accountant.

Calibrates Gaussian noise from L2 sensitivity, composes per-mechanism GDP
costs, converts a GDP guarantee losslessly to (epsilon, delta)-DP, evaluates
the closed-form sensitivities of correlation/covariance/gradient releases, and
keeps an auditable ledger of every noise injection in a run.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _log_std_normal_cdf(x: float) -> float:
    # Leading asymptotic of log Phi(x) for x << 0, used only where erfc underflows.
    phi = std_normal_cdf(x)
    if phi > 0.0:
        return math.log(phi)
    return -0.5 * x * x - math.log(-x) - 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GdpGuarantee:
    """A mu-GDP privacy guarantee."""

    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")

    def to_dp(self, epsilon: float) -> "DpGuarantee":
        return gdp_to_dp(self.mu, epsilon)


@dataclass(frozen=True)
class DpGuarantee:
    """An (epsilon, delta)-DP guarantee."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


@dataclass(frozen=True)
class PrivacyParams:
    """GDP constants for the two release sizes used by the private solvers.

    ``mu_p`` governs p-dimensional releases (noise std ``sigma1 = 1/mu_p`` per
    unit of scale) and ``mu_s`` governs the re-privatized selected-support
    releases (``sigma2 = 1/mu_s``).  The usual regime has ``mu_p > mu_s``
    since the few low-dimensional releases can afford much smaller budgets.
    ``math.inf`` is accepted for noiseless (non-private) runs.
    """

    mu_p: float
    mu_s: float

    def __post_init__(self):
        if self.mu_p <= 0 or self.mu_s <= 0:
            raise ValueError("GDP constants must be positive")

    @property
    def sigma1(self) -> float:
        return 0.0 if math.isinf(self.mu_p) else 1.0 / self.mu_p

    @property
    def sigma2(self) -> float:
        return 0.0 if math.isinf(self.mu_s) else 1.0 / self.mu_s

    @classmethod
    def noiseless(cls) -> "PrivacyParams":
        return cls(math.inf, math.inf)


def gaussian_sigma(l2_sensitivity: float, mu: float) -> float:
    """Noise standard deviation making a release of this L2 sensitivity mu-GDP."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if l2_sensitivity < 0:
        raise ValueError("l2_sensitivity must be nonnegative")
    if math.isinf(mu):
        return 0.0
    return l2_sensitivity / mu


def compose(mus) -> GdpGuarantee:
    """Compose per-mechanism GDP costs: sqrt of the sum of squares."""
    total = 0.0
    for mu in mus:
        if mu < 0:
            raise ValueError("cannot compose a negative GDP constant")
        total += mu * mu
    return GdpGuarantee(math.sqrt(total))


def gdp_to_dp(mu: float, epsilon: float) -> DpGuarantee:
    """Lossless conversion of a mu-GDP guarantee to (epsilon, delta(epsilon))-DP.

    delta(eps) = Phi(-eps/mu + mu/2) - exp(eps) * Phi(-eps/mu - mu/2), with the
    result clamped to [0, 1] against floating-point residue.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if math.isinf(mu):
        return DpGuarantee(epsilon, 1.0)
    first = std_normal_cdf(-epsilon / mu + mu / 2.0)
    log_second = epsilon + _log_std_normal_cdf(-epsilon / mu - mu / 2.0)
    second = math.exp(log_second) if log_second > -745.0 else 0.0
    delta = min(1.0, max(0.0, first - second))
    return DpGuarantee(epsilon, delta)


def mu_for_budget(epsilon: float, delta: float, tol: float = 1e-9) -> float:
    """Solve for the mu whose conversion at ``epsilon`` yields ``delta``.

    delta(epsilon) is strictly increasing in mu, so plain bisection applies.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    lo, hi = 0.0, 1.0
    while gdp_to_dp(hi, epsilon).delta < delta:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("no mu below 1e6 matches the requested budget")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= 0 or gdp_to_dp(mid, epsilon).delta < delta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def epsilon_for_delta(mu: float, delta: float, tol: float = 1e-9) -> float:
    """Smallest epsilon at which a mu-GDP guarantee meets the target delta."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if gdp_to_dp(mu, 0.0).delta <= delta:
        return 0.0
    lo, hi = 0.0, 1.0
    while gdp_to_dp(mu, hi).delta > delta:
        hi *= 2.0
        if hi > 1e8:
            raise ValueError("no epsilon below 1e8 matches the requested delta")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gdp_to_dp(mu, mid).delta > delta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def correlation_sensitivity(p: int, x_bound: float, y_bound: float) -> float:
    """L2 sensitivity of the stacked data-response correlations X^T y."""
    return 2.0 * math.sqrt(p) * x_bound * y_bound


def covariance_sensitivity(p: int, x_bound: float) -> float:
    """L2 sensitivity of one column of data-data correlations X^T X_j."""
    return 2.0 * math.sqrt(p) * x_bound * x_bound


def gradient_clip_bound(s: int, x_bound: float, kappa_eps: float,
                        zeta: float, alpha_inf: float) -> float:
    """Theoretical bound on the per-client gradient-coordinate magnitude.

    B_C = 1 + 2 X_M kappa_eps
            + 2 sqrt(s) X_M^2 (alpha_inf / (1 - zeta)
                               + sqrt(1 + zeta) kappa_eps / (1 - zeta))

    where ``alpha_inf`` is the sup-norm of the ground-truth coefficients off
    the already-selected support and ``zeta`` is the order-(s+1) restricted
    isometry constant.  Experiments normally override this with a configured
    clip constant; the bound is available for synthetic diagnostics where the
    ground truth is known.
    """
    if not 0.0 <= zeta < 1.0:
        raise ValueError("zeta must lie in [0, 1)")
    if s < 0 or x_bound < 0 or kappa_eps < 0 or alpha_inf < 0:
        raise ValueError("arguments must be nonnegative")
    tail = alpha_inf / (1.0 - zeta) + math.sqrt(1.0 + zeta) * kappa_eps / (1.0 - zeta)
    return 1.0 + 2.0 * x_bound * kappa_eps + 2.0 * math.sqrt(s) * x_bound ** 2 * tail


@dataclass
class PrivacyLedger:
    """Append-only record of every mechanism invocation in one algorithm run."""

    events: list = field(default_factory=list)
    _sumsq: float = 0.0

    def record(self, label: str, mu: float) -> None:
        if mu < 0:
            raise ValueError("event mu must be nonnegative")
        self.events.append((label, float(mu)))
        self._sumsq += mu * mu

    def total(self) -> GdpGuarantee:
        return GdpGuarantee(math.sqrt(self._sumsq))

    def count(self, label_prefix: str = "") -> int:
        return sum(1 for label, _ in self.events if label.startswith(label_prefix))

    def to_dict(self, epsilon: float | None = None, delta: float | None = None) -> dict:
        """Serializable summary; supply epsilon (or delta) to pin the DP point."""
        mu = self.total().mu
        out = {
            "events": [{"label": label, "mu": mu_i} for label, mu_i in self.events],
            "total_mu": mu,
            "epsilon": None,
            "delta": None,
        }
        if epsilon is not None and mu > 0:
            out["epsilon"] = epsilon
            out["delta"] = gdp_to_dp(mu, epsilon).delta
        elif delta is not None and mu > 0:
            eps = epsilon_for_delta(mu, delta)
            out["epsilon"] = eps
            out["delta"] = gdp_to_dp(mu, eps).delta
        return out

    def to_json(self, epsilon: float | None = None, delta: float | None = None) -> str:
        return json.dumps(self.to_dict(epsilon=epsilon, delta=delta), sort_keys=True)


def ledger_record(ledger: PrivacyLedger, label: str, mu: float) -> PrivacyLedger:
    """Functional alias for :meth:`PrivacyLedger.record`; returns the ledger."""
    ledger.record(label, mu)
    return ledger


def ledger_total(ledger: PrivacyLedger) -> GdpGuarantee:
    return ledger.total()


def composed_budget(k_p: int, mu_p: float, k_s: int, mu_s: float) -> float:
    """Total GDP cost of k_p releases at mu_p composed with k_s at mu_s."""
    return math.sqrt(k_p * mu_p ** 2 + k_s * mu_s ** 2)


def split_budget(epsilon: float, delta: float, s: int, mu_s: float = 0.02) -> tuple[float, float]:
    """Derive (mu_p, mu_s) from a target (epsilon, delta) budget.

    The total mu is found by bisection on the conversion formula, then mu_p is
    solved from the per-run release counts of the correlation-based solver:
    s + 1 p-dimensional releases (the initial correlation vector plus one
    covariance column per iteration) and 2s selected-support releases.
    """
    mu_total = mu_for_budget(epsilon, delta)
    rest = mu_total ** 2 - 2 * s * mu_s ** 2
    if rest <= 0:
        raise ValueError("budget too small for the requested sparsity and mu_s")
    return math.sqrt(rest / (s + 1)), mu_s

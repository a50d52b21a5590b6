"""Differentially private sparse basis recovery in a simulated federated setting."""

from .datagen import (ClientShard, Dataset, DiagnosticsConfig, clip_rescale,
                      generate_synthetic, generate_test_set, load_csv, shard,
                      write_csv)
from .privacy import (DpGuarantee, GdpGuarantee, PrivacyLedger, PrivacyParams,
                      compose, correlation_sensitivity, covariance_sensitivity,
                      epsilon_for_delta, gaussian_sigma, gdp_to_dp,
                      gradient_clip_bound, mu_for_budget)
from .rng import StreamKey, stable_seed
from .secureagg import AggregateResult, noisy_smpc, noisy_smpc_vector, pairwise_masks
from .sparse_recovery import (ModelEstimate, omp, private_ols, sprifed_omp,
                              sprifed_omp_grad, sprifed_omp_no_enhancement)
from .baselines import GcdConfig, SgdConfig, dp_gcd, dp_sgd_l1
from .metrics import (TrialResult, check_recovery_conditions, empirical_risk,
                      estimate_ric, estimation_error, support_recovery, test_mse)

__version__ = "0.1.0"

__all__ = [
    "AggregateResult", "ClientShard", "Dataset", "DiagnosticsConfig",
    "DpGuarantee", "GcdConfig", "GdpGuarantee", "ModelEstimate",
    "PrivacyLedger", "PrivacyParams", "SgdConfig", "StreamKey", "TrialResult",
    "check_recovery_conditions", "clip_rescale", "compose",
    "correlation_sensitivity", "covariance_sensitivity", "dp_gcd", "dp_sgd_l1",
    "empirical_risk", "epsilon_for_delta", "estimate_ric", "estimation_error",
    "gaussian_sigma", "gdp_to_dp", "generate_synthetic", "generate_test_set",
    "gradient_clip_bound", "load_csv", "mu_for_budget", "noisy_smpc",
    "noisy_smpc_vector", "omp", "pairwise_masks", "private_ols", "shard",
    "sprifed_omp", "sprifed_omp_grad", "sprifed_omp_no_enhancement",
    "stable_seed", "support_recovery", "test_mse", "write_csv",
]

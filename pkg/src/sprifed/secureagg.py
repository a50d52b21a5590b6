"""Simulated secure aggregation with distributed noise.

Each of n clients perturbs its local product with N(0, sigma0^2 / n); the
server learns only the sum, which therefore carries total noise N(0, sigma0^2).
Pairwise masks are simulated: antisymmetric real draws that cancel exactly in
the aggregate, standing in for the cryptographic key agreement of a real
secure-aggregation protocol.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import StreamKey


@dataclass(frozen=True)
class AggregateResult:
    """Outcome of one aggregation: the noisy sum plus its recorded noise level."""

    value: float
    sigma0: float
    n_participants: int


def pairwise_masks(n: int, key: StreamKey) -> np.ndarray:
    """Antisymmetric (n, n) mask matrix: m[j, i] = -m[i, j], zero diagonal."""
    gen = key.generator()
    m = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    draws = gen.standard_normal(len(iu[0]))
    m[iu] = draws
    m -= m.T
    return m


def _per_client_noise(n: int, sigma0: float, key: StreamKey) -> np.ndarray | None:
    if sigma0 == 0.0:
        return None
    # Client i's perturbation is element i of the coordinate's counter-based
    # stream, so it has variance sigma0^2/n and never depends on schedule.
    return key.child("noise").normal(sigma0 / math.sqrt(n), n)


def noisy_smpc(a, b, sigma0: float, key: StreamKey, *,
               clip: float | None = None,
               mask_fidelity: bool = False) -> AggregateResult:
    """Privately aggregate the dot product of two across-client columns.

    Each client i contributes ``a_i * b_i`` (optionally clipped to magnitude
    ``clip``) plus N(0, sigma0^2/n) noise; the returned value is the masked
    sum, distributed as ``a . b + N(0, sigma0^2)``.  ``mask_fidelity=True``
    runs the full mask protocol (client messages carry pairwise masks that
    cancel in aggregate, at O(n^2) cost); the default skips mask generation,
    which leaves the output unchanged.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError("inputs must be 1-d vectors of equal length")
    n = a.shape[0]
    if n < 1:
        raise ValueError("need at least one client")
    if sigma0 < 0:
        raise ValueError("sigma0 must be nonnegative")
    products = a * b
    if clip is not None and math.isfinite(clip):
        np.clip(products, -clip, clip, out=products)
    eta = _per_client_noise(n, sigma0, key)
    if mask_fidelity:
        messages = products if eta is None else products + eta
        masks = pairwise_masks(n, key.child("mask"))
        value = float(np.sum(messages + masks.sum(axis=1)))
    else:
        value = float(products.sum())
        if eta is not None:
            value += float(eta.sum())
    return AggregateResult(value=value, sigma0=sigma0, n_participants=n)


def noisy_smpc_vector(columns, b, sigma0: float, key: StreamKey, *,
                      clip: float | None = None,
                      mask_fidelity: bool = False) -> np.ndarray:
    """Aggregate every column of ``columns`` against ``b``: p independent
    noisy sums with per-coordinate sub-streams."""
    columns = np.asarray(columns, dtype=float)
    if columns.ndim != 2:
        raise ValueError("columns must be a 2-d array (clients x features)")
    p = columns.shape[1]
    out = np.empty(p)
    for k in range(p):
        out[k] = noisy_smpc(columns[:, k], b, sigma0, key.child(k),
                            clip=clip, mask_fidelity=mask_fidelity).value
    return out

"""Synthetic federated datasets and preprocessing.

Generates sparse-linear-model data (Gaussian design, Gaussian coefficients on
a random support), applies the clip-and-rescale preprocessing that enforces
bounded entries with unit empirical variance, loads external CSV datasets,
and splits rows into per-client shards.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .rng import StreamKey, as_key


class DegenerateInputError(ValueError):
    """Raised when preprocessing meets an input with no variance left."""


class CsvParseError(ValueError):
    """Raised with a row number when a dataset CSV is malformed."""


@dataclass
class Dataset:
    """One federated dataset: row i of ``X`` and entry i of ``y`` belong to client i.

    ``X`` and ``y`` are the preprocessed (clipped, standardized) arrays the
    algorithms consume.  ``alpha_star`` and ``support`` describe the raw-scale
    ground truth (``None`` for loaded data); the model in preprocessed
    coordinates is ``alpha_effective``.  ``x_bound``/``y_bound`` are the
    post-rescale maximum absolute entries, i.e. the effective bounds that
    sensitivity formulas may rely on.
    """

    X: np.ndarray
    y: np.ndarray
    alpha_star: np.ndarray | None
    support: np.ndarray | None
    x_bound: float
    y_bound: float
    sigma_eps: float | None
    seed: int | None
    x_scale: float = 1.0
    y_scale: float = 1.0
    x_clip: float | None = None
    y_clip: float | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def alpha_effective(self) -> np.ndarray | None:
        """Ground-truth model rescaled into the preprocessed coordinate system.

        Exact whenever the clip bounds did not bite (pure standardization);
        otherwise the best available linear reference.
        """
        if self.alpha_star is None:
            return None
        return self.alpha_star * (self.x_scale / self.y_scale)

    @property
    def sigma_eps_effective(self) -> float | None:
        if self.sigma_eps is None:
            return None
        return self.sigma_eps / self.y_scale


@dataclass(frozen=True)
class ClientShard:
    client_index: int
    x_row: np.ndarray
    y_value: float


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Failure probability and the derived max-of-Gaussians error bound.

    ``kappa_eps = sigma_eps * sqrt(2 log(2 n / p_b))`` bounds the largest of n
    additive-error draws with probability 1 - p_b.
    """

    p_b: float
    kappa_eps: float

    def __post_init__(self):
        if not 0.0 < self.p_b < 1.0:
            raise ValueError("p_b must lie in (0, 1)")
        if self.kappa_eps < 0:
            raise ValueError("kappa_eps must be nonnegative")

    @classmethod
    def for_noise(cls, sigma_eps: float, n: int, p_b: float = 0.01) -> "DiagnosticsConfig":
        return cls(p_b, sigma_eps * math.sqrt(2.0 * math.log(2.0 * n / p_b)))


def clip_rescale(values, bound: float | None):
    """Clip entries to [-bound, bound], then standardize to unit variance.

    Returns ``(out, scale_factor)`` where ``scale_factor`` is the post-clip
    population standard deviation the object was divided by.  Entries of the
    result may exceed the clip bound; callers needing a true bound should use
    the post-rescale maximum absolute entry.  ``bound=None`` skips clipping
    and standardizes only.
    """
    arr = np.array(values, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot preprocess an empty array")
    if bound is not None:
        if bound <= 0:
            raise ValueError("clip bound must be positive")
        np.clip(arr, -bound, bound, out=arr)
    scale = float(arr.std())
    if not np.isfinite(scale) or scale == 0.0:
        raise DegenerateInputError("input has zero variance after clipping")
    arr /= scale
    return arr, scale


def _synthetic_raw(n, p, s, sigma_eps, coef_mean, coef_std, seed):
    key = as_key(seed)
    X = key.child("design").generator().standard_normal((n, p))
    support = np.sort(key.child("support").generator().choice(p, size=s, replace=False))
    coefs = key.child("coefficients").generator().normal(coef_mean, coef_std, s)
    noise = key.child("noise").generator().normal(0.0, sigma_eps, n)
    y = X[:, support] @ coefs + noise
    alpha = np.zeros(p)
    alpha[support] = coefs
    return X, y, alpha, support


def generate_synthetic(n: int, p: int, s: int, sigma_eps: float,
                       coef_mean: float = 2.0, coef_std: float = 1.0,
                       seed: int = 0, x_clip: float | None = 1.0,
                       y_clip: float | None = 1.0) -> Dataset:
    """Generate a synthetic sparse-regression dataset, preprocessed.

    Design entries are i.i.d. standard normal, the support is drawn uniformly
    without replacement, nonzero coefficients are N(coef_mean, coef_std^2),
    and y = X alpha + e with e ~ N(0, sigma_eps^2) before preprocessing.
    All randomness is determined by ``seed``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < s <= p:
        raise ValueError("need 0 < s <= p")
    if sigma_eps < 0:
        raise ValueError("sigma_eps must be nonnegative")
    X_raw, y_raw, alpha, support = _synthetic_raw(n, p, s, sigma_eps,
                                                  coef_mean, coef_std, seed)
    X, x_scale = clip_rescale(X_raw, x_clip)
    y, y_scale = clip_rescale(y_raw, y_clip)
    return Dataset(
        X=X, y=y, alpha_star=alpha, support=support,
        x_bound=float(np.abs(X).max()), y_bound=float(np.abs(y).max()),
        sigma_eps=sigma_eps, seed=as_key(seed).seed,
        x_scale=x_scale, y_scale=y_scale, x_clip=x_clip, y_clip=y_clip,
    )


def generate_test_set(dataset: Dataset, n_test: int, seed: int) -> Dataset:
    """Fresh draw from the same ground-truth model.

    The test set is preprocessed with the *training* set's transform (same
    clip bounds, same scale divisors) so the two live in one coordinate
    system; its empirical variance is therefore close to, not exactly, 1.
    """
    if dataset.alpha_star is None or dataset.support is None:
        raise ValueError("test sets require a synthetic dataset with known truth")
    key = as_key(seed)
    X = key.child("design").generator().standard_normal((n_test, dataset.p))
    noise = key.child("noise").generator().normal(0.0, dataset.sigma_eps, n_test)
    y = X[:, dataset.support] @ dataset.alpha_star[dataset.support] + noise
    if dataset.x_clip is not None:
        np.clip(X, -dataset.x_clip, dataset.x_clip, out=X)
    if dataset.y_clip is not None:
        np.clip(y, -dataset.y_clip, dataset.y_clip, out=y)
    X /= dataset.x_scale
    y /= dataset.y_scale
    return Dataset(
        X=X, y=y, alpha_star=dataset.alpha_star, support=dataset.support,
        x_bound=float(np.abs(X).max()), y_bound=float(np.abs(y).max()),
        sigma_eps=dataset.sigma_eps, seed=key.seed,
        x_scale=dataset.x_scale, y_scale=dataset.y_scale,
        x_clip=dataset.x_clip, y_clip=dataset.y_clip,
    )


def shard(dataset: Dataset) -> list:
    """Split the dataset into one shard per client; shard i holds row i."""
    return [ClientShard(i, dataset.X[i], float(dataset.y[i]))
            for i in range(dataset.n)]


def write_csv(path, X, y) -> None:
    """Write raw (pre-preprocessing) data as ``x_0,...,x_{p-1},y`` rows.

    Floats are serialized with full round-trip precision so a load followed by
    the same preprocessing settings reproduces a generated dataset bit for bit.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{j}" for j in range(p)] + ["y"])
        for i in range(X.shape[0]):
            writer.writerow([repr(float(v)) for v in X[i]] + [repr(float(y[i]))])


def load_csv(path, x_clip: float | None = 1.0, y_clip: float | None = 1.0,
             preprocess: bool = True) -> Dataset:
    """Load a ``x_0,...,x_{p-1},y`` CSV into a Dataset (ground truth unknown)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("row 0: file is empty") from None
        header = [h.strip() for h in header]
        if "y" not in header:
            raise CsvParseError('row 0: header is missing the "y" column')
        y_col = header.index("y")
        x_cols = [i for i, h in enumerate(header) if i != y_col]
        expected = [f"x_{j}" for j in range(len(x_cols))]
        if [header[i] for i in x_cols] != expected:
            raise CsvParseError("row 0: feature columns must be named x_0..x_{p-1}")
        xs, ys = [], []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise CsvParseError(f"row {rownum}: expected {len(header)} cells, got {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise CsvParseError(f"row {rownum}: non-numeric cell ({exc})") from None
            ys.append(values[y_col])
            xs.append([values[i] for i in x_cols])
    if not xs:
        raise CsvParseError("row 1: file contains a header but no data rows")
    X_raw = np.asarray(xs, dtype=float)
    y_raw = np.asarray(ys, dtype=float)
    if preprocess:
        X, x_scale = clip_rescale(X_raw, x_clip)
        y, y_scale = clip_rescale(y_raw, y_clip)
    else:
        X, x_scale, y, y_scale = X_raw, 1.0, y_raw, 1.0
    return Dataset(
        X=X, y=y, alpha_star=None, support=None,
        x_bound=float(np.abs(X).max()), y_bound=float(np.abs(y).max()),
        sigma_eps=None, seed=None,
        x_scale=x_scale, y_scale=y_scale,
        x_clip=x_clip if preprocess else None,
        y_clip=y_clip if preprocess else None,
    )

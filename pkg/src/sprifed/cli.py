"""Experiment harness and command-line interface.

Parses TOML experiment configs, runs seeded multi-trial comparisons in which
every algorithm sees the identical dataset, writes deterministic JSON-lines
results, expands one-axis parameter sweeps, and aggregates results into
summary tables.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import baselines, datagen, metrics, privacy, sparse_recovery
from .rng import StreamKey, stable_seed

ALGORITHMS = ("omp", "sprifed_omp", "sprifed_omp_no_enhancement",
              "sprifed_omp_grad", "dp_sgd_l1", "dp_gcd")

# Per-run p-dimensional release counts, used for budget derivation and audit.
_P_EVENT_COUNTS = {
    "sprifed_omp": lambda s: s + 1,
    "sprifed_omp_no_enhancement": lambda s: s + 1,
    "sprifed_omp_grad": lambda s: s,
}
_S_EVENT_COUNTS = {
    "sprifed_omp": lambda s: 2 * s,
    "sprifed_omp_no_enhancement": lambda s: 0,
    "sprifed_omp_grad": lambda s: 2 * s,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: dataset source, algorithms, privacy budget, trials."""

    # dataset (exactly one source: synthetic dimensions or a csv path)
    n: int | None = None
    p: int | None = None
    s: int = 5
    sigma_eps: float = 0.001
    coef_mean: float = 2.0
    coef_std: float = 1.0
    x_clip: float | None = 1.0
    y_clip: float | None = 1.0
    csv: str | None = None
    test_csv: str | None = None
    n_test: int = 1000
    # algorithms
    algos: tuple = ("sprifed_omp",)
    # privacy: either (mu_p, mu_s) or a target (epsilon, delta)
    mu_p: float | None = None
    mu_s: float | None = 0.02
    epsilon: float | None = None
    delta: float = 1e-4
    clip_bound: float = 1.0
    # baseline hyperparameters
    learning_rate: float | None = None
    l1_coef: float = baselines.DEFAULT_SGD_L1_COEF
    mu_step: float | None = None
    total_steps: int | None = None
    gcd_rate_scale: float = baselines.DEFAULT_GCD_RATE_SCALE
    # harness
    trials: int = 1
    master_seed: int = 0
    output: str = "results.jsonl"

    def validate(self) -> None:
        if (self.csv is None) == (self.n is None or self.p is None):
            raise ConfigError("configure exactly one dataset source: csv, or n and p")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.s < 1:
            raise ConfigError("s must be at least 1")
        unknown = [a for a in self.algos if a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithms: {unknown}; choose from {ALGORITHMS}")
        if self.mu_p is None and self.epsilon is None:
            raise ConfigError("set either mu_p (and mu_s) or a target (epsilon, delta)")

    def resolved_privacy(self) -> tuple[float, float]:
        """(mu_p, mu_s), deriving them from the (epsilon, delta) target if set."""
        if self.mu_p is not None:
            return self.mu_p, (self.mu_s if self.mu_s is not None else 0.02)
        return privacy.split_budget(self.epsilon, self.delta, self.s,
                                    self.mu_s if self.mu_s is not None else 0.02)

    def budget_mu(self) -> float:
        mu_p, mu_s = self.resolved_privacy()
        return privacy.composed_budget(self.s + 1, mu_p, 2 * self.s, mu_s)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "algos" in raw:
        raw["algos"] = tuple(raw["algos"])
    cfg = ExperimentConfig(**raw)
    env_seed = os.environ.get("SPRIFED_SEED")
    if env_seed is not None:
        cfg = replace(cfg, master_seed=int(env_seed))
    cfg.validate()
    return cfg


def _build_dataset(config: ExperimentConfig, trial: int) -> datagen.Dataset:
    if config.csv is not None:
        return datagen.load_csv(config.csv, x_clip=config.x_clip, y_clip=config.y_clip)
    seed = stable_seed(config.master_seed, "dataset", trial)
    return datagen.generate_synthetic(
        config.n, config.p, config.s, config.sigma_eps,
        coef_mean=config.coef_mean, coef_std=config.coef_std, seed=seed,
        x_clip=config.x_clip, y_clip=config.y_clip)


def _build_test_set(config: ExperimentConfig, dataset, trial):
    if config.test_csv is not None:
        return datagen.load_csv(config.test_csv, x_clip=config.x_clip,
                                y_clip=config.y_clip)
    if dataset.alpha_star is None:
        return None
    seed = stable_seed(config.master_seed, "test", trial)
    return datagen.generate_test_set(dataset, config.n_test, seed)


def _run_algorithm(name, config: ExperimentConfig, dataset, trial: int):
    mu_p, mu_s = config.resolved_privacy()
    params = privacy.PrivacyParams(mu_p, mu_s)
    budget = config.budget_mu()
    key = StreamKey(stable_seed(config.master_seed, "algo", trial, name))
    s = config.s
    if name == "omp":
        return sparse_recovery.omp(dataset, s)
    if name == "sprifed_omp":
        return sparse_recovery.sprifed_omp(dataset, s, params, key)
    if name == "sprifed_omp_no_enhancement":
        return sparse_recovery.sprifed_omp_no_enhancement(dataset, s, params, key)
    if name == "sprifed_omp_grad":
        return sparse_recovery.sprifed_omp_grad(dataset, s, params,
                                                config.clip_bound, key)
    if name == "dp_sgd_l1":
        cfg = baselines.SgdConfig(
            learning_rate=config.learning_rate or baselines.DEFAULT_SGD_LEARNING_RATE,
            l1_coef=config.l1_coef,
            mu_step=config.mu_step or mu_p,
            clip_bound=config.clip_bound,
            max_budget_mu=budget)
        return baselines.dp_sgd_l1(dataset, s, cfg, key)
    if name == "dp_gcd":
        mu_step = config.mu_step or mu_p
        steps = config.total_steps or max(1, int(budget ** 2 // (2 * mu_step ** 2)))
        cfg = baselines.GcdConfig(
            learning_rate=config.learning_rate or config.gcd_rate_scale / dataset.n,
            total_steps=steps, mu_p=mu_step, clip_bound=config.clip_bound)
        return baselines.dp_gcd(dataset, s, cfg, key)
    raise ConfigError(f"unknown algorithm {name!r}")


def _audit_ledger(name: str, s: int, model) -> list:
    """Check event counts against the per-algorithm release formulas."""
    problems = []
    if name in _P_EVENT_COUNTS:
        want_p = _P_EVENT_COUNTS[name](s)
        got_p = model.ledger.count("sprifed")
        if got_p != want_p:
            problems.append(f"ledger_p_events[{got_p}!={want_p}]")
        want_s = _S_EVENT_COUNTS[name](s)
        got_s = model.ledger.count("private_ols")
        if got_s != want_s:
            problems.append(f"ledger_s_events[{got_s}!={want_s}]")
    return problems


def run_trial(config: ExperimentConfig, trial: int, config_index: int = 0,
              timings: bool = False) -> list:
    """Run every configured algorithm on one shared dataset; returns row dicts."""
    try:
        dataset = _build_dataset(config, trial)
        test_set = _build_test_set(config, dataset, trial)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return [{"config_index": config_index, "trial": trial, "algo": name,
                 "failed": f"dataset: {exc}"} for name in config.algos]
    mu_p, mu_s = config.resolved_privacy()
    budget = config.budget_mu()
    rows = []
    for name in config.algos:
        start = time.perf_counter()
        flags: list = []
        try:
            model = _run_algorithm(name, config, dataset, trial)
        except (np.linalg.LinAlgError, sparse_recovery.SolverError, FloatingPointError) as exc:
            rows.append({
                "algo": name, "trial": trial, "config_index": config_index,
                "failed": str(exc), "n": dataset.n, "p": dataset.p, "s": config.s,
            })
            continue
        runtime_ms = (time.perf_counter() - start) * 1000.0
        flags.extend(model.flags)
        flags.extend(_audit_ledger(name, config.s, model))
        total_mu = model.ledger.total().mu
        if total_mu > budget + mu_p + 1e-9:
            flags.append("budget_exceeded")
        truth = dataset.support
        recovered = (metrics.support_recovery(model.support, truth)
                     if truth is not None else None)
        mse = metrics.test_mse(model, test_set) if test_set is not None else None
        if dataset.alpha_effective is not None:
            delta_alpha = metrics.estimation_error(model, dataset.alpha_effective)
            delta_risk = metrics.empirical_risk(model, dataset)
            if delta_risk < metrics.risk_negativity_floor(dataset):
                flags.append("negative_risk")
        else:
            delta_alpha = None
            delta_risk = None
        dp = (privacy.gdp_to_dp(total_mu, privacy.epsilon_for_delta(total_mu, config.delta))
              if 0 < total_mu < math.inf else None)
        result = metrics.TrialResult(
            algo=name,
            correct_basis_count=recovered,
            test_mse=mse,
            delta_alpha=delta_alpha,
            delta_risk=delta_risk,
            mu=total_mu,
            epsilon=dp.epsilon if dp else None,
            delta=dp.delta if dp else None,
            seed=config.master_seed,
            runtime_ms=runtime_ms if timings else None,
            flags=tuple(flags),
        )
        rows.append(result.to_row(
            config_index=config_index,
            trial=trial,
            n=dataset.n, p=dataset.p, s=config.s,
            sigma_eps=config.sigma_eps,
            mu_p=mu_p, mu_s=mu_s,
            clip_bound=config.clip_bound,
            budget_mu=budget,
            mu_step_scale=mu_p,
            support=[int(j) for j in model.support],
        ))
    return rows


def _trial_worker(args):
    config, trial, config_index, timings = args
    return (config_index, trial), run_trial(config, trial, config_index, timings)


def run(config: ExperimentConfig, jobs: int = 1, timings: bool = False,
        config_index: int = 0) -> list:
    """Run all trials of one config; rows come back in deterministic order."""
    config.validate()
    tasks = [(config, t, config_index, timings) for t in range(config.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            keyed = dict(pool.map(_trial_worker, tasks))
    else:
        keyed = dict(map(_trial_worker, tasks))
    rows = []
    for key in sorted(keyed):
        rows.extend(keyed[key])
    return rows


def sweep(config: ExperimentConfig, axis: str, values, jobs: int = 1,
          timings: bool = False) -> list:
    """Cartesian expansion of one config along a single axis."""
    if axis not in {f.name for f in fields(ExperimentConfig)}:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for index, value in enumerate(values):
        cfg = replace(config, **{axis: value})
        cfg.validate()
        rows.extend(run(cfg, jobs=jobs, timings=timings, config_index=index))
    return rows


def write_results(rows, path) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


_METRIC_COLUMNS = ("correct_basis_count", "test_mse", "delta_alpha",
                   "delta_risk", "mu", "epsilon", "delta")
_GROUP_COLUMNS = ("config_index", "n", "p", "s", "sigma_eps", "mu_p", "mu_s",
                  "clip_bound")


def report(results_path, out_path=None):
    """Aggregate a JSON-lines results file into mean/std rows per (config, algo).

    Within one configuration, algorithms whose composed budgets differ by more
    than one step's mu are not comparable; the summary emits a warning row for
    that configuration instead of silently juxtaposing them.
    """
    with open(results_path) as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    rows = [r for r in rows if "failed" not in r]
    if not rows:
        raise ConfigError(f"no usable result rows in {results_path}")

    groups: dict = {}
    for row in rows:
        key = tuple(row.get(c) for c in _GROUP_COLUMNS) + (row["algo"],)
        groups.setdefault(key, []).append(row)

    summary = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        bucket = groups[key]
        entry = dict(zip(_GROUP_COLUMNS, key[:-1]))
        entry["algo"] = key[-1]
        entry["trials"] = len(bucket)
        for col in _METRIC_COLUMNS:
            vals = [r[col] for r in bucket if r.get(col) is not None]
            entry[f"{col}_mean"] = float(np.mean(vals)) if vals else None
            entry[f"{col}_std"] = float(np.std(vals)) if vals else None
        entry["warning"] = ""
        summary.append(entry)

    # budget-parity check per configuration
    by_config: dict = {}
    for entry in summary:
        by_config.setdefault(tuple(entry[c] for c in _GROUP_COLUMNS), []).append(entry)
    for config_key, entries in by_config.items():
        mus = [e["mu_mean"] for e in entries if e["mu_mean"]]
        if len(mus) >= 2:
            tol = max(r.get("mu_step_scale") or 0.0 for r in rows
                      if tuple(r.get(c) for c in _GROUP_COLUMNS) == config_key)
            if max(mus) - min(mus) > tol + 1e-9:
                for e in entries:
                    e["warning"] = ("budgets differ by more than one step mu; "
                                    "algorithms are not comparable")

    if out_path:
        columns = (list(_GROUP_COLUMNS) + ["algo", "trials"]
                   + [f"{c}_{k}" for c in _METRIC_COLUMNS for k in ("mean", "std")]
                   + ["warning"])
        with open(out_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            for entry in summary:
                writer.writerow({c: ("" if entry.get(c) is None else entry.get(c))
                                 for c in columns})
    return summary


def _print_summary(summary) -> None:
    cols = ["algo", "n", "p", "s", "trials", "correct_basis_count_mean",
            "test_mse_mean", "mu_mean", "epsilon_mean", "warning"]
    head = ["algo", "n", "p", "s", "trials", "recovered", "test_mse", "mu",
            "epsilon", "warning"]
    table = [head]
    for entry in summary:
        line = []
        for col in cols:
            val = entry.get(col)
            if isinstance(val, float):
                line.append(f"{val:.4g}")
            else:
                line.append("" if val is None else str(val))
        table.append(line)
    widths = [max(len(row[i]) for row in table) for i in range(len(head))]
    for row in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sprifed",
        description="Differentially private sparse basis recovery experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a raw synthetic dataset CSV")
    gen.add_argument("--out", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--s", type=int, required=True)
    gen.add_argument("--sigma-eps", type=float, default=0.001)
    gen.add_argument("--coef-mean", type=float, default=2.0)
    gen.add_argument("--coef-std", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)

    runp = sub.add_parser("run", help="run an experiment config")
    runp.add_argument("--config", required=True)
    runp.add_argument("--jobs", type=int, default=1)
    runp.add_argument("--out", default=None)
    runp.add_argument("--timings", action="store_true",
                      help="include runtime_ms (breaks byte-determinism)")

    sweepp = sub.add_parser("sweep", help="expand one config along an axis")
    sweepp.add_argument("--config", required=True)
    sweepp.add_argument("--axis", required=True)
    sweepp.add_argument("--values", required=True,
                        help="comma-separated values for the axis")
    sweepp.add_argument("--jobs", type=int, default=1)
    sweepp.add_argument("--out", default=None)
    sweepp.add_argument("--timings", action="store_true")

    rep = sub.add_parser("report", help="summarize a results file")
    rep.add_argument("results")
    rep.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "gen-data":
            X, y, _, _ = datagen._synthetic_raw(
                args.n, args.p, args.s, args.sigma_eps,
                args.coef_mean, args.coef_std, args.seed)
            datagen.write_csv(args.out, X, y)
            print(f"wrote {args.n} rows x {args.p} features to {args.out}")
        elif args.command == "run":
            config = load_config(args.config)
            rows = run(config, jobs=args.jobs, timings=args.timings)
            out = args.out or config.output
            write_results(rows, out)
            warned = sum(1 for r in rows if r.get("flags") or "failed" in r)
            print(f"wrote {len(rows)} rows to {out}"
                  + (f" ({warned} flagged)" if warned else ""))
        elif args.command == "sweep":
            config = load_config(args.config)
            values = []
            for chunk in args.values.split(","):
                chunk = chunk.strip()
                values.append(int(chunk) if chunk.isdigit() else float(chunk))
            rows = sweep(config, args.axis, values, jobs=args.jobs,
                         timings=args.timings)
            out = args.out or config.output
            write_results(rows, out)
            print(f"wrote {len(rows)} rows to {out}")
        elif args.command == "report":
            summary = report(args.results, args.out)
            _print_summary(summary)
            if args.out:
                print(f"\nwrote summary to {args.out}")
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

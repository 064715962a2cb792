"""Cross-validation harness: RMSE, repeated k-fold, paired significance, sweeps."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .boosting import BoostingConfig, train_vgbdt


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.size == 0:
        raise ValueError("rmse of empty sequences")
    if pred.size != truth.size:
        raise ValueError(f"length mismatch: {pred.size} != {truth.size}")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def paired_significance(rmse_a, rmse_b) -> float:
    """Two-sided paired t-test p-value on per-fold RMSE differences.

    Zero-variance differences: p = 1.0 when the lists are identical, 0.0
    when one is a constant offset of the other.
    """
    a = np.asarray(rmse_a, dtype=np.float64).ravel()
    b = np.asarray(rmse_b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} != {b.size}")
    if a.size < 2:
        raise ValueError("need at least two paired folds")
    diff = a - b
    sd = float(np.std(diff, ddof=1))
    mean = float(np.mean(diff))
    n = diff.size
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / np.sqrt(n))
    return float(2.0 * stats.t.sf(abs(t), df=n - 1))


@dataclass(frozen=True)
class CvReport:
    trait: str
    fold_rmse: tuple[float, ...]  # repeats * folds values, repeat-major
    mean_rmse: float
    std_rmse: float
    config: dict
    p_value: float | None = None
    baseline: str | None = None


def fold_partitions(n: int, folds: int, repeats: int, seed: int,
                    ) -> list[list[np.ndarray]]:
    """Per repeat, a fresh seeded shuffle split into ``folds`` disjoint,
    covering parts whose sizes differ by at most one."""
    if n < folds:
        raise ValueError(f"need at least {folds} samples, got {n}")
    out = []
    for repeat in range(repeats):
        rng = np.random.default_rng([seed, repeat])
        perm = rng.permutation(n)
        out.append(np.array_split(perm, folds))
    return out


def cross_validate(X: np.ndarray, y: np.ndarray, num_views: int,
                   config: BoostingConfig = BoostingConfig(),
                   folds: int = 10, repeats: int = 10, seed: int = 0,
                   trait: str = "") -> CvReport:
    """Repeated k-fold CV of the view-restricted booster; RMSE per held-out fold."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    fold_scores: list[float] = []
    for parts in fold_partitions(y.size, folds, repeats, seed):
        for held_out in parts:
            mask = np.ones(y.size, dtype=bool)
            mask[held_out] = False
            model = train_vgbdt(X[mask], y[mask], num_views, config)
            fold_scores.append(rmse(model.predict(X[held_out]), y[held_out]))
    scores = np.array(fold_scores)
    snapshot = {"num_views": num_views, "folds": folds, "repeats": repeats,
                "seed": seed, "n_rounds": config.n_rounds,
                "n_leaves": config.n_leaves, "shrinkage": config.shrinkage,
                "min_leaf": config.min_leaf,
                "distinct_views": config.distinct_views}
    return CvReport(trait=trait, fold_rmse=tuple(fold_scores),
                    mean_rmse=float(scores.mean()),
                    std_rmse=float(scores.std(ddof=1)) if scores.size > 1 else 0.0,
                    config=snapshot)


def best_single_view_report(X: np.ndarray, y: np.ndarray, num_views: int,
                            n_leaves: int = 5, min_leaf: int = 2,
                            folds: int = 10, repeats: int = 10, seed: int = 0,
                            trait: str = "") -> tuple[int, CvReport]:
    """CV each view with a one-round unshrunken tree (a plain CART on the
    view block); return the best view index and its report."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1] // num_views
    cart = BoostingConfig(n_rounds=1, n_leaves=n_leaves, shrinkage=1.0,
                          min_leaf=min_leaf)
    best: tuple[int, CvReport] | None = None
    for view in range(num_views):
        block = X[:, view * d:(view + 1) * d]
        report = cross_validate(block, y, 1, cart, folds=folds,
                                repeats=repeats, seed=seed, trait=trait)
        if best is None or report.mean_rmse < best[1].mean_rmse:
            best = (view, report)
    return best


def sweep(X: np.ndarray, y: np.ndarray, num_views: int, param: str,
          values, base: BoostingConfig = BoostingConfig(),
          folds: int = 10, repeats: int = 10, seed: int = 0,
          trait: str = "") -> list[tuple[float, CvReport]]:
    """CV once per value of ``param`` ("M" rounds or "J" leaves), everything
    else fixed. Each non-first entry carries a paired p-value against the
    first value's folds."""
    if param not in ("M", "J"):
        raise ValueError("param must be 'M' or 'J'")
    if not values:
        raise ValueError("empty sweep value list")
    out: list[tuple[float, CvReport]] = []
    baseline: CvReport | None = None
    for value in values:
        if param == "M":
            config = replace(base, n_rounds=int(value))
        else:
            config = replace(base, n_leaves=int(value))
        report = cross_validate(X, y, num_views, config, folds=folds,
                                repeats=repeats, seed=seed, trait=trait)
        if baseline is None:
            baseline = report
        else:
            report = replace(
                report,
                p_value=paired_significance(report.fold_rmse,
                                            baseline.fold_rmse),
                baseline=f"{param}={values[0]}")
        out.append((value, report))
    return out


def write_sweep_csv(entries: list[tuple[str, float, CvReport]],
                    path: str | Path) -> None:
    """Rows of (param, value, report) to the sweep CSV format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", "trait", "mean_rmse", "std_rmse",
                         "p_value"])
        for param, value, report in entries:
            writer.writerow([
                param, value, report.trait,
                f"{report.mean_rmse:.6f}", f"{report.std_rmse:.6f}",
                "" if report.p_value is None else f"{report.p_value:.6g}"])


def plot_sweep(entries: list[tuple[str, float, CvReport]],
               path: str | Path) -> None:
    """Optional line plot of mean RMSE per swept value (one line per trait)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_trait: dict[str, list[tuple[float, float]]] = {}
    param = entries[0][0] if entries else "value"
    for _, value, report in entries:
        by_trait.setdefault(report.trait or "all", []).append(
            (value, report.mean_rmse))
    fig, ax = plt.subplots(figsize=(6, 4))
    for trait, points in sorted(by_trait.items()):
        xs, ys = zip(*sorted(points))
        ax.plot(xs, ys, marker="o", label=trait)
    ax.set_xlabel(param)
    ax.set_ylabel("mean RMSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)

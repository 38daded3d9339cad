"""AUROC evaluation with record-level bootstrap confidence intervals.

Per-class AUROC is the rank statistic with ties credited 0.5 and is
undefined (None) when a class has no positives or no negatives in the
evaluated sample. The macro average is therefore undefined whenever any
class is; the weighted average instead weights each defined class by its
positive count in the sample, so it survives resamples that lose a rare
class entirely. Bootstrap resampling draws records with replacement using
a counter-based generator keyed by (seed, resample index), so intervals
are reproducible and resamples independent of evaluation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigurationError, DegenerateInputError

DEFAULT_RESAMPLES = 10_000
CI_PERCENTILES = (2.5, 97.5)


def auroc(scores, labels):
    """Rank-based AUROC; None when labels are single-class."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ConfigurationError(
            f"scores length {scores.size} vs labels length {labels.size}"
        )
    pos = labels > 0.5
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def per_class_auroc(scores, labels):
    """Column-wise AUROC for (N, C) score/label matrices; undefined -> nan."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape:
        raise ConfigurationError("scores and labels must have identical shape")
    n = scores.shape[0]
    ranks = rankdata(scores, axis=0)
    n_pos = labels.sum(axis=0)
    n_neg = n - n_pos
    rank_sums = (ranks * labels).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        auc = (rank_sums - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    auc[(n_pos == 0) | (n_neg == 0)] = np.nan
    return auc


def macro_auroc(per_class):
    """Unweighted mean; None when any class AUROC is undefined."""
    vals = np.asarray(per_class, dtype=np.float64)
    if np.isnan(vals).any():
        return None
    return float(vals.mean())


def weighted_auroc(per_class, positives):
    """Positive-count-weighted mean over the classes with defined AUROC."""
    vals = np.array(
        [np.nan if v is None else v for v in np.asarray(per_class, dtype=object)],
        dtype=np.float64,
    )
    weights = np.asarray(positives, dtype=np.float64)
    defined = ~np.isnan(vals)
    if not defined.any():
        raise DegenerateInputError("AUROC undefined for every class")
    return float((vals[defined] * weights[defined]).sum() / weights[defined].sum())


def resample_indices(seed: int, resample: int, n: int) -> np.ndarray:
    """Record indices for one bootstrap resample, keyed by (seed, index)."""
    gen = np.random.Generator(
        np.random.Philox(key=np.array([seed, resample], dtype=np.uint64))
    )
    return gen.integers(0, n, size=n)


@dataclass
class BootstrapResult:
    macro_values: np.ndarray     # defined resamples only
    weighted_values: np.ndarray
    per_class_values: list[np.ndarray]
    n_resamples: int

    @property
    def macro_undefined_fraction(self) -> float:
        return 1.0 - len(self.macro_values) / self.n_resamples


def bootstrap_metrics(scores, labels, n: int = DEFAULT_RESAMPLES, seed: int = 0,
                      collect_per_class: bool = True) -> BootstrapResult:
    """One pass of n resamples computing macro, weighted, and per-class AUROC."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if n < 1:
        raise ConfigurationError("need at least one resample")
    n_records, n_classes = scores.shape
    macro_vals, weighted_vals = [], []
    per_class_vals = [[] for _ in range(n_classes)] if collect_per_class else None
    for i in range(n):
        idx = resample_indices(seed, i, n_records)
        auc = per_class_auroc(scores[idx], labels[idx])
        defined = ~np.isnan(auc)
        if defined.all():
            macro_vals.append(auc.mean())
        if defined.any():
            pos = labels[idx].sum(axis=0)
            weighted_vals.append(
                float((auc[defined] * pos[defined]).sum() / pos[defined].sum())
            )
        if collect_per_class:
            for c in np.flatnonzero(defined):
                per_class_vals[c].append(auc[c])
    return BootstrapResult(
        macro_values=np.asarray(macro_vals),
        weighted_values=np.asarray(weighted_vals),
        per_class_values=[np.asarray(v) for v in per_class_vals] if collect_per_class else [],
        n_resamples=n,
    )


def percentile_ci(values) -> tuple[float, float]:
    lo, hi = np.percentile(np.asarray(values, dtype=np.float64), CI_PERCENTILES)
    return float(lo), float(hi)


def bootstrap_ci(scores, labels, metric: str, n: int = DEFAULT_RESAMPLES,
                 seed: int = 0) -> tuple[float, float]:
    """Percentile CI for 'macro' or 'weighted' AUROC over record resamples."""
    if metric not in ("macro", "weighted"):
        raise ConfigurationError(f"unknown metric {metric!r}")
    result = bootstrap_metrics(scores, labels, n=n, seed=seed, collect_per_class=False)
    values = result.macro_values if metric == "macro" else result.weighted_values
    if len(values) == 0:
        raise DegenerateInputError(f"{metric} AUROC undefined in every resample")
    return percentile_ci(values)


@dataclass
class EvalReport:
    codes: list[str]
    positives: list[int]
    per_class_auroc: list[float | None]
    per_class_ci: list[tuple[float, float] | None]
    macro_auroc: float | None
    macro_ci: tuple[float, float] | None
    macro_undefined_fraction: float
    weighted_auroc: float
    weighted_ci: tuple[float, float]
    n_resamples: int
    seed: int
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "version": 1,
            "seed": self.seed,
            "n_resamples": self.n_resamples,
            "macro_auroc": self.macro_auroc,
            "macro_ci": list(self.macro_ci) if self.macro_ci else None,
            "macro_undefined_fraction": self.macro_undefined_fraction,
            "weighted_auroc": self.weighted_auroc,
            "weighted_ci": list(self.weighted_ci),
            "classes": [
                {
                    "code": code,
                    "n_pos": n_pos,
                    "auroc": auc,
                    "ci": list(ci) if ci is not None else None,
                }
                for code, n_pos, auc, ci in zip(
                    self.codes, self.positives, self.per_class_auroc, self.per_class_ci
                )
            ],
            **self.extras,
        }, indent=2)

    def format_lines(self) -> list[str]:
        """Per-class listing in the 'code (n): AUROC (lo, hi)' convention."""
        lines = []
        for code, n_pos, auc, ci in zip(
            self.codes, self.positives, self.per_class_auroc, self.per_class_ci
        ):
            val = "undefined" if auc is None else f"{auc:.3f}"
            span = "(N/A)" if ci is None else f"({ci[0]:.3f}, {ci[1]:.3f})"
            lines.append(f"{code} ({n_pos}): {val} {span}")
        return lines


def evaluate_scores(scores, labels, codes, n_resamples: int = DEFAULT_RESAMPLES,
                    seed: int = 0) -> EvalReport:
    """Full report: per-class/macro/weighted AUROC with bootstrap CIs.

    Per-class CIs are reported as N/A for classes with a single positive
    example in the evaluated split.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    auc = per_class_auroc(scores, labels)
    positives = labels.sum(axis=0).astype(int)
    boot = bootstrap_metrics(scores, labels, n=n_resamples, seed=seed)
    per_class_ci: list[tuple[float, float] | None] = []
    for c in range(len(codes)):
        if positives[c] <= 1 or len(boot.per_class_values[c]) == 0:
            per_class_ci.append(None)
        else:
            per_class_ci.append(percentile_ci(boot.per_class_values[c]))
    if len(boot.weighted_values) == 0:
        raise DegenerateInputError("weighted AUROC undefined in every resample")
    return EvalReport(
        codes=list(codes),
        positives=positives.tolist(),
        per_class_auroc=[None if np.isnan(v) else float(v) for v in auc],
        per_class_ci=per_class_ci,
        macro_auroc=macro_auroc(auc),
        macro_ci=percentile_ci(boot.macro_values) if len(boot.macro_values) else None,
        macro_undefined_fraction=boot.macro_undefined_fraction,
        weighted_auroc=weighted_auroc(
            [None if np.isnan(v) else float(v) for v in auc], positives
        ),
        weighted_ci=percentile_ci(boot.weighted_values),
        n_resamples=n_resamples,
        seed=seed,
    )


def defined_class_mean(per_class) -> float | None:
    """Mean AUROC over defined classes; the trainer's monitoring metric.

    Unlike the strict macro average this stays usable on skewed validation
    folds where a rare class has no positives.
    """
    vals = np.asarray(per_class, dtype=np.float64)
    defined = ~np.isnan(vals)
    if not defined.any():
        return None
    return float(vals[defined].mean())

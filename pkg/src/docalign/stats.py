"""Statistical battery: labelled skewness, Spearman, Mann-Whitney, Cliff's delta, Bonferroni."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .io import write_table

ALPHA = 0.05
TWO_SIDED, A_GREATER, B_GREATER = "two-sided", "a-greater", "b-greater"
ALTERNATIVES = (TWO_SIDED, A_GREATER, B_GREATER)
EXACT_MAX_CELLS = 400
SKEWTEST_MIN_N = 8  # D'Agostino's skewness test is undefined below this


@dataclass(frozen=True)
class LabeledEstimate:
    value: float
    label: str
    p_value: float | None = None
    significant: bool | None = None
    method: str | None = None


def skew_label(g1: float) -> str:
    g = abs(g1)
    if g <= 0.5:
        return "almost symmetric"
    if g <= 1.0:
        return "slight skew"
    return "skew"


def spearman_label(rho: float) -> str:
    r = abs(rho)
    if r <= 0.10:
        return "negligible"
    if r <= 0.39:
        return "weak"
    if r <= 0.69:
        return "moderate"
    if r <= 0.89:
        return "strong"
    return "very strong"


def cliffs_label(d: float) -> str:
    d = abs(d)
    if d < 0.147:
        return "negligible"
    if d < 0.330:
        return "small"
    if d < 0.474:
        return "medium"
    return "large"


def _sample(values, name="sample") -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def skewness_g1(values, alpha: float = ALPHA) -> LabeledEstimate:
    """Adjusted Fisher-Pearson skewness with D'Agostino's significance test."""
    x = _sample(values)
    n = len(x)
    if n < 3:
        raise ValueError("skewness needs at least 3 values")
    dev = x - x.mean()
    m2 = np.mean(dev ** 2)
    if m2 == 0:
        raise ValueError("skewness of a constant sample")
    m3 = np.mean(dev ** 3)
    # m3 / m2**1.5 is the biased moment ratio; the factor adjusts for sample size
    g1 = math.sqrt(n * (n - 1)) / (n - 2) * m3 / m2 ** 1.5
    p = None
    if n >= SKEWTEST_MIN_N:
        p = float(sps.skewtest(x).pvalue)
    return LabeledEstimate(
        value=float(g1),
        label=skew_label(g1),
        p_value=p,
        significant=None if p is None else p < alpha,
        method="dagostino" if p is not None else None,
    )


def spearman(x, y, alpha: float = ALPHA) -> LabeledEstimate:
    """Spearman's rho on average ranks, two-sided p-value."""
    a, b = _sample(x, "x"), _sample(y, "y")
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 3:
        raise ValueError("spearman needs at least 3 pairs")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("spearman of a constant vector")
    res = sps.spearmanr(a, b)
    rho = float(np.clip(res.statistic, -1.0, 1.0))
    p = float(res.pvalue)
    return LabeledEstimate(rho, spearman_label(rho), p, p < alpha, "spearman")


def _rank_sum_distribution(doubled_ranks: np.ndarray, n_a: int) -> np.ndarray:
    """Null distribution of the doubled rank sum of ``n_a`` items drawn without replacement."""
    total = int(doubled_ranks.sum()) + 1
    counts = np.zeros((n_a + 1, total))
    counts[0, 0] = 1.0
    for r in doubled_ranks:
        nxt = counts.copy()
        nxt[1:, r:] += counts[:-1, : total - r]
        counts = nxt
    return counts[n_a] / counts[n_a].sum()


def _tail_p(lower: float, upper: float, alternative: str) -> float:
    if alternative == A_GREATER:
        return upper
    if alternative == B_GREATER:
        return lower
    return min(1.0, 2.0 * min(lower, upper))


def mann_whitney(a, b, alternative: str = TWO_SIDED, alpha: float = ALPHA, method: str = "auto") -> LabeledEstimate:
    """Mann-Whitney U test; the value is U of sample ``a``.

    ``method="auto"`` enumerates the exact null distribution (with ties
    kept as midranks) when ``n_a * n_b <= 400``, and otherwise uses the
    normal approximation with tie and continuity corrections.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    if method not in ("auto", "exact", "normal"):
        raise ValueError("method must be auto, exact or normal")
    x, y = _sample(a, "a"), _sample(b, "b")
    na, nb = len(x), len(y)
    pooled = np.concatenate([x, y])
    ranks = sps.rankdata(pooled)
    u = float(ranks[:na].sum() - na * (na + 1) / 2)
    if method == "auto":
        method = "exact" if na * nb <= EXACT_MAX_CELLS else "normal"

    if method == "exact":
        doubled = np.rint(2 * ranks).astype(np.int64)
        dist = _rank_sum_distribution(doubled, na)
        observed = int(doubled[:na].sum())
        upper = float(dist[observed:].sum())
        lower = float(dist[: observed + 1].sum())
        p = _tail_p(min(lower, 1.0), min(upper, 1.0), alternative)
    else:
        n = na + nb
        _, ties = np.unique(pooled, return_counts=True)
        tie_term = float((ties ** 3 - ties).sum()) / (n * (n - 1)) if n > 1 else 0.0
        var = na * nb / 12.0 * ((n + 1) - tie_term)
        mu = na * nb / 2.0
        if var <= 0:
            p = 1.0
        else:
            sd = math.sqrt(var)
            upper = float(sps.norm.sf((u - mu - 0.5) / sd))
            lower = float(sps.norm.cdf((u - mu + 0.5) / sd))
            if alternative == TWO_SIDED:
                p = min(1.0, 2.0 * float(sps.norm.sf((abs(u - mu) - 0.5) / sd)))
            else:
                p = _tail_p(lower, upper, alternative)
    return LabeledEstimate(u, alternative, p, p < alpha, method)


def cliffs_delta(a, b) -> LabeledEstimate:
    """Dominance effect size of ``a`` over ``b``."""
    x, y = _sample(a, "a"), _sample(b, "b")
    ys = np.sort(y)
    greater = np.searchsorted(ys, x, side="left").sum()
    less = (len(ys) - np.searchsorted(ys, x, side="right")).sum()
    d = float((greater - less) / (len(x) * len(y)))
    return LabeledEstimate(d, cliffs_label(d))


def bonferroni(p_values: Sequence[float], group_size: int) -> list[float]:
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    return [min(1.0, float(p) * group_size) for p in p_values]


# -- post-hoc comparison of awareness metrics across alignment classes ---------

AWARENESS_METRICS = ("attraction", "attention", "agreement")
FRACTION_METRICS = frozenset(("attraction", "agreement"))
COMPARISONS = (("convergent", "divergent"), ("convergent", "absent"), ("divergent", "absent"))
MEDIAN_MARGIN = 0.05


@dataclass(frozen=True)
class BatteryResult:
    first: str
    second: str
    metric: str
    sidedness: str  # "=", ">" or "<" between first and second
    p_raw: float | None
    p_adjusted: float | None
    reject: bool | None
    delta: float | None = None
    delta_label: str | None = None
    note: str = ""

    @property
    def comparison(self) -> str:
        return f"{self.first} vs {self.second}"


def _margin(metric: str, pooled: np.ndarray) -> float:
    if metric in FRACTION_METRICS:
        return MEDIAN_MARGIN
    return MEDIAN_MARGIN * abs(float(np.median(pooled)))


def awareness_battery(
    metric_values: Mapping[str, Mapping[str, float | None]],
    classes: Mapping[str, str],
    alpha: float = ALPHA,
    metrics: Sequence[str] = AWARENESS_METRICS,
    comparisons: Sequence[tuple[str, str]] = COMPARISONS,
) -> list[BatteryResult]:
    """Pairwise class comparisons of each awareness metric.

    ``metric_values`` maps metric name to per-KU values. A comparison is
    two-sided when the class medians differ by less than 5% (absolute for
    fractions, relative to the pooled median otherwise) and one-sided in the
    observed direction otherwise. P-values are Bonferroni-adjusted across the
    metrics of each comparison, and Cliff's delta is reported for every
    rejected null.
    """
    planned = []
    for first, second in comparisons:
        for metric in metrics:
            values = metric_values[metric]
            a = np.array([v for k, v in values.items() if classes.get(k) == first and v is not None], dtype=float)
            b = np.array([v for k, v in values.items() if classes.get(k) == second and v is not None], dtype=float)
            if len(a) < 2 or len(b) < 2:
                note = f"skipped: {first} has {len(a)}, {second} has {len(b)} KUs with values"
                planned.append((first, second, metric, None, None, None, note))
                continue
            diff = float(np.median(a) - np.median(b))
            if abs(diff) < _margin(metric, np.concatenate([a, b])):
                sidedness, alternative = "=", TWO_SIDED
            elif diff > 0:
                sidedness, alternative = ">", A_GREATER
            else:
                sidedness, alternative = "<", B_GREATER
            p = mann_whitney(a, b, alternative, alpha).p_value
            planned.append((first, second, metric, sidedness, p, (a, b), ""))

    group_sizes = {}
    for first, second, _, _, p, _, _ in planned:
        if p is not None:
            group_sizes[(first, second)] = group_sizes.get((first, second), 0) + 1

    results = []
    for first, second, metric, sidedness, p, samples, note in planned:
        if p is None:
            results.append(BatteryResult(first, second, metric, "", None, None, None, note=note))
            continue
        adjusted = bonferroni([p], group_sizes[(first, second)])[0]
        reject = adjusted < alpha
        delta = label = None
        if reject:
            est = cliffs_delta(*samples)
            delta, label = est.value, est.label
        results.append(BatteryResult(first, second, metric, sidedness, p, adjusted, reject, delta, label))
    return results


BATTERY_COLUMNS = ("comparison", "metric", "sidedness", "p_raw", "p_adjusted", "reject", "delta", "delta_label", "note")


def write_battery(results: Sequence[BatteryResult], path: str | Path) -> None:
    rows = [
        [r.comparison, r.metric, r.sidedness, r.p_raw, r.p_adjusted, r.reject, r.delta, r.delta_label, r.note]
        for r in results
    ]
    write_table(path, BATTERY_COLUMNS, rows)

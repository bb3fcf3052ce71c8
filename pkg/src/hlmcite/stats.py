"""Aggregation with bootstrap confidence intervals and significance tests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

DEFAULT_RESAMPLES = 1000


class StatsError(Exception):
    pass


@dataclass(frozen=True)
class Summary:
    mean: float
    ci_lo: float
    ci_hi: float
    n: int
    degenerate: bool = False  # n == 1: the interval carries no information


@dataclass(frozen=True)
class AggregateReport:
    overall: Summary
    per_field: dict[str, Summary]


def _bootstrap_ci(
    values: np.ndarray, resamples: int, rng: np.random.Generator
) -> tuple[float, float, bool]:
    n = len(values)
    if n == 1:
        v = float(values[0])
        return v, v, True
    idx = rng.integers(0, n, size=(resamples, n))
    means = values[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi), False


def aggregate(
    values: Sequence[float],
    field_labels: Sequence[str],
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> AggregateReport:
    """Per-field and overall means with percentile-bootstrap 95% CIs.

    The overall mean is the plain query-weighted mean; the bootstrap is a
    pure function of the seed and invariant to query order (values are
    grouped deterministically before resampling).
    """
    if len(values) == 0:
        raise StatsError("cannot aggregate zero values")
    if len(values) != len(field_labels):
        raise StatsError("values and field labels must align")
    # Canonical (field, value) arrangement so the seeded bootstrap cannot
    # depend on input query order.
    raw = np.asarray(values, dtype=np.float64)
    order = np.lexsort((raw, np.asarray(field_labels, dtype=object)))
    arr = raw[order]
    labels = [field_labels[i] for i in order]

    rng = np.random.default_rng(seed)
    lo, hi, degenerate = _bootstrap_ci(arr, resamples, rng)
    overall = Summary(mean=float(arr.mean()), ci_lo=lo, ci_hi=hi, n=len(arr), degenerate=degenerate)

    per_field: dict[str, Summary] = {}
    for name in sorted(set(labels)):
        group = arr[np.asarray([lab == name for lab in labels])]
        g_rng = np.random.default_rng([seed, len(name), *name.encode("utf-8")])
        lo, hi, degenerate = _bootstrap_ci(group, resamples, g_rng)
        per_field[name] = Summary(
            mean=float(group.mean()), ci_lo=lo, ci_hi=hi, n=len(group), degenerate=degenerate
        )
    return AggregateReport(overall=overall, per_field=per_field)


def two_tailed_ttest(values_a: Sequence[float], values_b: Sequence[float]) -> float:
    """Welch two-sample two-tailed p-value."""
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise StatsError("t-test requires at least 2 samples per side")
    if np.allclose(a.var(ddof=1) + b.var(ddof=1), 0.0) and np.isclose(a.mean(), b.mean()):
        return 1.0  # identical constant samples: no evidence of difference
    result = scipy_stats.ttest_ind(a, b, equal_var=False)
    return float(result.pvalue)


def significance_stars(p: float) -> str:
    """Markers matching the reporting convention: ** for p<0.01, * for p<0.1."""
    if p < 0.01:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def pairwise_pvalues(
    per_system_values: Mapping[str, Sequence[float]],
) -> dict[str, dict[str, float]]:
    systems = sorted(per_system_values)
    out: dict[str, dict[str, float]] = {s: {} for s in systems}
    for i, a in enumerate(systems):
        for b in systems[i + 1:]:
            p = two_tailed_ttest(per_system_values[a], per_system_values[b])
            out[a][b] = p
            out[b][a] = p
    return out

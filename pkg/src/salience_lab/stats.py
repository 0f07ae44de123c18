"""Correlations, effect sizes and multiplicity-adjusted group intervals."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as st

P_FLOOR = 1e-16


def format_p(p: float) -> str:
    if p < P_FLOOR:
        return "<2.2e-16"
    return f"{p:.4g}"


def _pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("constant input: correlation undefined")
    return x, y


def pearson(x, y) -> tuple[float, float]:
    """Product-moment correlation and two-sided p-value (t with n-2 df)."""
    x, y = _pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    r = max(-1.0, min(1.0, r))
    df = x.size - 2
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt(df / (1 - r * r))
    return r, float(2 * st.t.sf(abs(t), df))


def spearman(x, y) -> tuple[float, float]:
    """Pearson correlation of mean fractional ranks."""
    x, y = _pair(x, y)
    return pearson(st.rankdata(x), st.rankdata(y))


def welch_t_hedges(x0, x1) -> tuple[float, float, float]:
    """Welch t-test and Hedges' g for ``mean(x1) - mean(x0)``.

    Returns
    -------
    t : float
        Welch statistic.
    p : float
        Two-sided p-value with Welch-Satterthwaite degrees of freedom.
    g : float
        Pooled-sd standardized difference times ``1 - 3 / (4 df - 1)``
        with ``df = n0 + n1 - 2``.
    """
    a = np.asarray(x0, dtype=float)
    b = np.asarray(x1, dtype=float)
    n0, n1 = a.size, b.size
    if n0 < 2 or n1 < 2:
        raise ValueError("each group needs at least 2 observations")
    v0, v1 = a.var(ddof=1), b.var(ddof=1)
    df = n0 + n1 - 2
    pooled = math.sqrt(((n0 - 1) * v0 + (n1 - 1) * v1) / df)
    if pooled == 0:
        raise ValueError("zero pooled variance")
    diff = b.mean() - a.mean()
    g = diff / pooled * (1 - 3 / (4 * df - 1))
    se2 = v0 / n0 + v1 / n1
    if se2 == 0:
        t = math.copysign(math.inf, diff) if diff else 0.0
        return t, 0.0 if diff else 1.0, float(g)
    t = diff / math.sqrt(se2)
    dfw = se2**2 / ((v0 / n0) ** 2 / (n0 - 1) + (v1 / n1) ** 2 / (n1 - 1))
    return float(t), float(2 * st.t.sf(abs(t), dfw)), float(g)


@dataclass(frozen=True)
class GroupSummary:
    label: str
    n: int
    mean: float
    ci_low: float
    ci_high: float
    share_of_max_salience: float


def adjusted_group_cis(
    groups: Mapping[str, Sequence[float]],
    alpha: float = 0.05,
    max_value: float = 5,
) -> list[GroupSummary]:
    """Normal-approximation group means with Bonferroni-adjusted intervals.

    Each interval has level ``1 - alpha / m`` for the ``m`` non-empty
    groups. Empty groups are dropped with a ``UserWarning``; a
    single-observation group gets an unbounded interval.
    """
    kept = {}
    for label, vals in groups.items():
        arr = np.asarray(vals, dtype=float)
        if arr.size == 0:
            warnings.warn(f"group {label!r} is empty and was dropped", UserWarning, stacklevel=2)
            continue
        kept[label] = arr
    m = len(kept)
    if m == 0:
        return []
    z = st.norm.ppf(1 - alpha / (2 * m))
    out = []
    for label, arr in kept.items():
        mean = float(arr.mean())
        half = z * arr.std(ddof=1) / math.sqrt(arr.size) if arr.size > 1 else math.inf
        out.append(
            GroupSummary(str(label), int(arr.size), mean, mean - half, mean + half, float(np.mean(arr == max_value)))
        )
    return out


def write_group_summaries(rows: Sequence[GroupSummary], fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["group", "n", "mean", "ci_low", "ci_high", "share_of_max_salience"])
    for g in rows:
        writer.writerow([g.label, g.n, f"{g.mean:.6f}", f"{g.ci_low:.6f}", f"{g.ci_high:.6f}",
                         f"{g.share_of_max_salience:.6f}"])

"""Evaluation metrics and rank-based comparison tests.

Everything here is a pure function over plain sequences; nothing depends
on the learning code. The Wilcoxon implementation enumerates the exact
null distribution for small tie-free samples and otherwise falls back to
the tie-corrected normal approximation with continuity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence


class StatsError(ValueError):
    """Metric undefined for the given input."""


@dataclass(frozen=True)
class PairedSeries:
    """Measured values paired with model outputs for the same samples."""

    experimental: tuple[float, ...]
    computational: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "experimental", tuple(float(v) for v in self.experimental))
        object.__setattr__(self, "computational", tuple(float(v) for v in self.computational))
        if len(self.experimental) != len(self.computational):
            raise StatsError(
                f"series lengths differ: {len(self.experimental)} vs {len(self.computational)}"
            )
        if not self.experimental:
            raise StatsError("series must be non-empty")
        for v in self.experimental + self.computational:
            if not math.isfinite(v):
                raise StatsError(f"series entries must be finite, got {v!r}")

    def __len__(self) -> int:
        return len(self.experimental)


@dataclass(frozen=True)
class BoxSummary:
    """Five-number summary plus interquartile range."""

    min: float
    q1: float
    median: float
    q3: float
    max: float
    iqr: float

    def __post_init__(self):
        if not self.min <= self.q1 <= self.median <= self.q3 <= self.max:
            raise StatsError("box summary fields must be ordered")
        if not math.isclose(self.iqr, self.q3 - self.q1, rel_tol=0.0, abs_tol=1e-12):
            raise StatsError("iqr must equal q3 - q1")


@dataclass(frozen=True)
class RankSumResult:
    """Two-sided Wilcoxon rank-sum outcome.

    statistic is the rank-sum of the first sample; method records whether
    the p-value came from exact enumeration or the normal approximation.
    """

    statistic: float
    p_value: float
    method: str

    def __post_init__(self):
        if not 0.0 < self.p_value <= 1.0:
            raise StatsError(f"p-value must be in (0, 1], got {self.p_value!r}")
        if self.method not in ("exact", "normal-approximation"):
            raise StatsError(f"unknown method {self.method!r}")


def pearson_r(s: PairedSeries) -> float:
    """Correlation coefficient between experimental and computed values.

    R = (n·Σyy′ − Σy·Σy′) / (√(n·Σy² − (Σy)²) · √(n·Σy′² − (Σy′)²))
    """
    y, yp = s.experimental, s.computational
    n = len(s)
    if n < 2:
        raise StatsError("correlation needs at least 2 pairs")
    sy = sum(y)
    syp = sum(yp)
    syyp = sum(a * b for a, b in zip(y, yp))
    syy = sum(a * a for a in y)
    sypyp = sum(b * b for b in yp)
    den_y = n * syy - sy * sy
    den_yp = n * sypyp - syp * syp
    if den_y <= 0 or den_yp <= 0:
        raise StatsError("correlation undefined for a constant series")
    return (n * syyp - sy * syp) / (math.sqrt(den_y) * math.sqrt(den_yp))


def rmse(s: PairedSeries) -> float:
    """Root mean square error between experimental and computed values."""
    sq = sum((a - b) ** 2 for a, b in zip(s.experimental, s.computational))
    return math.sqrt(sq / len(s))


def relative_errors(s: PairedSeries) -> tuple[float, ...]:
    """Element-wise |y′ − y| / |y|; experimental values must be nonzero."""
    for v in s.experimental:
        if v == 0:
            raise StatsError("relative error undefined for a zero experimental value")
    return tuple(
        abs(b - a) / abs(a) for a, b in zip(s.experimental, s.computational)
    )


def _quantile(sorted_xs: Sequence[float], q: float) -> float:
    pos = (len(sorted_xs) - 1) * q
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return sorted_xs[lo]
    frac = pos - lo
    return sorted_xs[lo] * (1.0 - frac) + sorted_xs[hi] * frac


def box_summary(xs: Sequence[float]) -> BoxSummary:
    """Five-number summary with quartiles by linear interpolation.

    The q-th quantile sits at position (n−1)·q in the sorted data;
    fractional positions interpolate between neighbours.
    """
    if len(xs) == 0:
        raise StatsError("box summary needs at least one value")
    data = sorted(float(v) for v in xs)
    q1 = _quantile(data, 0.25)
    q3 = _quantile(data, 0.75)
    return BoxSummary(
        min=data[0],
        q1=q1,
        median=_quantile(data, 0.5),
        q3=q3,
        max=data[-1],
        iqr=q3 - q1,
    )


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


_EXACT_LIMIT = 12  # combined size up to which the exact null is enumerated


def wilcoxon_rank_sum(
    a: Sequence[float], b: Sequence[float], method: str | None = None
) -> RankSumResult:
    """Two-sided Wilcoxon rank-sum test; ties get midranks.

    With method=None the exact distribution is enumerated when the
    combined sample is small (≤ 12) and tie-free, otherwise the normal
    approximation with tie correction and continuity correction is used.
    Pass 'exact' or 'normal-approximation' to force a route.
    """
    if not a or not b:
        raise StatsError("both samples must be non-empty")
    if method not in (None, "exact", "normal-approximation"):
        raise StatsError(f"unknown method {method!r}")
    combined = [float(v) for v in a] + [float(v) for v in b]
    n_a, n = len(a), len(combined)
    n_b = n - n_a
    ranks = _midranks(combined)
    w = sum(ranks[:n_a])
    mu = n_a * (n + 1) / 2.0
    has_ties = len(set(combined)) < n

    if method == "exact" or (method is None and n <= _EXACT_LIMIT and not has_ties):
        threshold = abs(w - mu)
        hits = 0
        total = 0
        for picks in combinations(ranks, n_a):
            total += 1
            if abs(sum(picks) - mu) >= threshold:
                hits += 1
        return RankSumResult(statistic=w, p_value=hits / total, method="exact")

    tie_term = 0.0
    seen: dict[float, int] = {}
    for v in combined:
        seen[v] = seen.get(v, 0) + 1
    for count in seen.values():
        tie_term += count**3 - count
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return RankSumResult(statistic=w, p_value=1.0, method="normal-approximation")
    z = max(0.0, abs(w - mu) - 0.5) / math.sqrt(var)
    # erfc underflows to 0.0 for extreme separations; keep p strictly positive
    p = max(math.erfc(z / math.sqrt(2.0)), math.ulp(0.0))
    return RankSumResult(statistic=w, p_value=p, method="normal-approximation")

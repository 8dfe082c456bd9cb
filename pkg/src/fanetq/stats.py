"""Summary statistics over per-seed values."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import stats as _st


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    std: float
    median: float
    ci_low: float
    ci_high: float

    def as_row(self) -> list[float]:
        return [self.n, self.mean, self.std, self.median, self.ci_low, self.ci_high]


FIELDS = ("n", "mean", "std", "median", "ci_low", "ci_high")


def summarize(values: Iterable[float], confidence: float = 0.95) -> Summary:
    """Mean, sample std, median and a Student-t confidence interval; NaNs are ignored."""
    x = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    n = x.size
    if n == 0:
        nan = math.nan
        return Summary(0, nan, nan, nan, nan, nan)
    mean = float(x.mean())
    median = float(np.median(x))
    if n == 1:
        return Summary(1, mean, 0.0, median, mean, mean)
    std = float(x.std(ddof=1))
    half = float(_st.t.ppf(0.5 + confidence / 2, n - 1)) * std / math.sqrt(n)
    return Summary(n, mean, std, median, mean - half, mean + half)


def relative_gain(baseline: float, proposed: float) -> float:
    """``(baseline - proposed) / baseline``; positive means the proposal is cheaper."""
    if baseline == 0:
        return 0.0 if proposed == 0 else -math.inf
    return (baseline - proposed) / baseline

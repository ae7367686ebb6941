"""Rank aggregation across datasets: Friedman statistic and Nemenyi test.

Rank 1 is the best (highest) score in a row; ties share the mean rank.  The
critical distance uses the standard studentized-range-based table at
alpha = 0.05 for 2..10 methods; other levels are rejected rather than
approximated.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidSpec, UnsupportedStatistic

# q_alpha for alpha = 0.05, k = 2..10
_Q_05 = {
    2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850,
    7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164,
}

# chi-square critical values at alpha = 0.05 for df = 1..9
_CHI2_CRIT_05 = {
    1: 3.841, 2: 5.991, 3: 7.815, 4: 9.488, 5: 11.070,
    6: 12.592, 7: 14.067, 8: 15.507, 9: 16.919,
}


@dataclass(frozen=True)
class ScoreMatrix:
    """N datasets x k methods of higher-is-better scores."""

    methods: tuple
    datasets: tuple
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "scores", scores)
        if scores.shape != (len(self.datasets), len(self.methods)):
            raise InvalidSpec(
                f"scores shape {scores.shape} != ({len(self.datasets)}, {len(self.methods)})"
            )
        if len(self.methods) < 2:
            raise InvalidSpec("need at least 2 methods")
        if not np.all(np.isfinite(scores)):
            raise InvalidSpec("scores must be finite")


@dataclass(frozen=True)
class FriedmanResult:
    chi2: float
    significant: bool
    critical: float
    low_n: bool


@dataclass(frozen=True)
class RankReport:
    """Per-dataset ranks, averages, critical distance, and pairwise flags."""

    methods: tuple
    datasets: tuple
    ranks: np.ndarray
    avg_ranks: np.ndarray
    cd: float
    significant_pairs: tuple
    friedman: FriedmanResult
    alpha: float
    low_n: bool


def rank_rows(sm):
    """Fractional ranks per dataset; rank 1 = highest score."""
    return rankdata(-sm.scores, method="average", axis=1)


def friedman_statistic(sm):
    """Friedman chi-square over the rank matrix, vs the tabulated cutoff."""
    n, k = sm.scores.shape
    avg = rank_rows(sm).mean(axis=0)
    chi2 = 12.0 * n / (k * (k + 1)) * (float(np.dot(avg, avg)) - k * (k + 1) ** 2 / 4.0)
    df = k - 1
    if df not in _CHI2_CRIT_05:
        raise UnsupportedStatistic(f"no chi-square cutoff tabulated for df={df}")
    critical = _CHI2_CRIT_05[df]
    return FriedmanResult(float(chi2), bool(chi2 > critical), critical, n < 2)


def nemenyi_cd(k, n, alpha=0.05):
    """Critical distance q_alpha(k) * sqrt(k(k+1) / (6N))."""
    if alpha != 0.05:
        raise UnsupportedStatistic(f"only alpha=0.05 is tabulated, got {alpha}")
    if k not in _Q_05:
        raise UnsupportedStatistic(f"k={k} outside tabulated range 2..10")
    if n < 1:
        raise UnsupportedStatistic(f"need at least one dataset, got {n}")
    return _Q_05[k] * math.sqrt(k * (k + 1) / (6.0 * n))


def nemenyi_test(sm, alpha=0.05):
    """Average ranks, CD, and pairwise significance flags for a score matrix."""
    ranks = rank_rows(sm)
    avg = ranks.mean(axis=0)
    n, k = sm.scores.shape
    cd = nemenyi_cd(k, n, alpha)
    pairs = []
    for a in range(k):
        for b in range(a + 1, k):
            if abs(avg[a] - avg[b]) > cd:
                pairs.append((sm.methods[a], sm.methods[b]))
    return RankReport(
        methods=sm.methods,
        datasets=sm.datasets,
        ranks=ranks,
        avg_ranks=avg,
        cd=cd,
        significant_pairs=tuple(pairs),
        friedman=friedman_statistic(sm),
        alpha=alpha,
        low_n=n < 2,
    )


def rank_report_to_dict(report):
    """JSON-ready summary of a rank report."""
    return {
        "methods": list(report.methods),
        "avg_ranks": [float(r) for r in report.avg_ranks],
        "cd": float(report.cd),
        "significant_pairs": [list(p) for p in report.significant_pairs],
        "friedman_chi2": report.friedman.chi2,
        "friedman_significant": report.friedman.significant,
        "alpha": report.alpha,
        "low_n": report.low_n,
    }


def write_ranks_csv(report, path):
    """Per-dataset ranks, for critical-difference plotting by external tools."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset_id", *report.methods])
        for d, row in zip(report.datasets, report.ranks):
            writer.writerow([d, *[repr(float(r)) for r in row]])

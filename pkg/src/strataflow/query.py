"""Linear query estimators over weighted samples, with error bounds.

Every estimator works from per-stratum rows of (sampled items, effective
weight).  The implied source count of a stratum is always rows' Y * W,
never taken from a side channel.  Error bounds follow the 68-95-99.7 rule:
1, 2, or 3 standard deviations of the estimated variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyWindow, InsufficientSample
from .model import Item, SubStreamId

SUM = "SUM"
MEAN = "MEAN"
COUNT = "COUNT"

_Z_BY_CONFIDENCE = {68: 1.0, 95: 2.0, 99.7: 3.0}


@dataclass(frozen=True)
class StratumDiagnostic:
    """Per-stratum row of a query result."""
    substream: SubStreamId
    sample_size: int           # Y
    weight: float              # W
    sample_variance: float     # s^2 (0 and flagged when Y < 2)
    est_source_count: float    # Y * W
    variance_understated: bool = False


@dataclass(frozen=True)
class QueryResult:
    window_id: int
    query_kind: str
    estimate: float
    error_bound: float
    confidence: float
    per_substream: tuple[StratumDiagnostic, ...] = ()

    def to_record(self) -> dict:
        return {
            "window": self.window_id,
            "query": self.query_kind,
            "estimate": self.estimate,
            "error_bound": self.error_bound,
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class SampleRow:
    """One weighted stratum (or stratum fragment) handed to the estimators."""
    substream: SubStreamId
    items: tuple[Item, ...]
    weight: float


def estimate_substream_sum(items: Sequence[Item], weight: float) -> float:
    return sum(it.value for it in items) * weight


def estimate_total_sum(substream_sums: Sequence[float]) -> float:
    return sum(substream_sums)


def estimate_mean(per_substream: Sequence[tuple[float, float]]) -> float:
    """Count-weighted average of stratum means.

    ``per_substream`` holds (stratum mean, estimated source count) pairs.
    """
    if not per_substream:
        raise EmptyWindow("mean over zero strata")
    total = sum(c for _, c in per_substream)
    if total <= 0:
        raise EmptyWindow("mean with zero total estimated count")
    return sum(m * c for m, c in per_substream) / total


def sample_variance(items: Sequence[Item]) -> float:
    """Unbiased sample variance of the item values."""
    y = len(items)
    if y < 2:
        raise InsufficientSample(f"variance needs >= 2 items, got {y}")
    mean = sum(it.value for it in items) / y
    return sum((it.value - mean) ** 2 for it in items) / (y - 1)


def variance_of_sum(per_substream: Sequence[tuple[float, int, float]]) -> float:
    """Estimated variance of the total-sum estimator.

    Rows are (estimated source count, Y, s^2); each contributes
    c * (c - Y) * s^2 / Y, the with-replacement-free sampling variance with
    finite-population correction.
    """
    return sum(c * (c - y) * s2 / y for c, y, s2 in per_substream if y > 0)


def variance_of_mean(per_substream: Sequence[tuple[float, int, float, float]]
                     ) -> float:
    """Estimated variance of the count-weighted mean.

    Rows are (phi, Y, s^2, estimated source count).
    """
    return sum(phi * phi * (s2 / y) * (c - y) / c
               for phi, y, s2, c in per_substream if y > 0 and c > 0)


def error_bound(variance: float, confidence: float) -> float:
    z = _Z_BY_CONFIDENCE[confidence]
    return z * math.sqrt(variance)


def _diagnostics(rows: Sequence[SampleRow]) -> list[StratumDiagnostic]:
    out = []
    for row in rows:
        y = len(row.items)
        if y >= 2:
            s2, flagged = sample_variance(row.items), False
        else:
            s2, flagged = 0.0, True
        out.append(StratumDiagnostic(
            substream=row.substream, sample_size=y, weight=row.weight,
            sample_variance=s2, est_source_count=y * row.weight,
            variance_understated=flagged))
    return out


def evaluate_window(window_id: int, rows: Sequence[SampleRow],
                    confidence: float = 95) -> dict[str, QueryResult]:
    """Compute SUM, MEAN and COUNT with error bounds for one root window."""
    diags = tuple(_diagnostics(rows))
    sums = [estimate_substream_sum(r.items, r.weight) for r in rows]
    total_sum = estimate_total_sum(sums)
    var_sum = variance_of_sum([(d.est_source_count, d.sample_size,
                                d.sample_variance) for d in diags])

    total_count = sum(d.est_source_count for d in diags)
    results = {
        SUM: QueryResult(window_id, SUM, total_sum,
                         error_bound(var_sum, confidence), confidence, diags),
        COUNT: QueryResult(window_id, COUNT, total_count, 0.0, confidence,
                           diags),
    }
    if rows and total_count > 0:
        means = [(estimate_substream_sum(r.items, 1.0) / len(r.items),
                  d.est_source_count)
                 for r, d in zip(rows, diags) if r.items]
        mean_est = estimate_mean(means)
        phis = [d.est_source_count / total_count for d in diags]
        var_mean = variance_of_mean(
            [(phi, d.sample_size, d.sample_variance, d.est_source_count)
             for phi, d in zip(phis, diags)])
        results[MEAN] = QueryResult(window_id, MEAN, mean_est,
                                    error_bound(var_mean, confidence),
                                    confidence, diags)
    else:
        results[MEAN] = QueryResult(window_id, MEAN, math.nan, 0.0,
                                    confidence, diags)
    return results

"""Weighted hierarchical sampling.

Per interval, a node stratifies arrivals by substream, gives each stratum a
reservoir budget, samples, and produces per-stratum effective weights.  The
outgoing weight multiplies the incoming one by the local sampling ratio and
is calibrated by (incoming count / local arrivals) so that misaligned
intervals between nodes do not bias downstream estimates: a fragment of an
upstream batch still estimates the full source-interval count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import BudgetTooSmall, DegenerateArrival, InvalidWorkers
from .model import Item, SubStreamId
from .reservoir import Reservoir

EQUAL = "equal"
PROPORTIONAL = "proportional"


@dataclass(frozen=True)
class AllocationPolicy:
    """How a node's per-interval budget is split across strata."""
    kind: str = EQUAL

    def __post_init__(self):
        if self.kind not in (EQUAL, PROPORTIONAL):
            raise ValueError(f"unknown allocation policy {self.kind!r}")


# A sampling RNG is either one generator (shared by all strata) or a
# factory keyed by substream id.
RngSource = np.random.Generator | Callable[[SubStreamId], np.random.Generator]


def _rng_for(rng: RngSource, substream: SubStreamId) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng(substream)


def stratify(items: Sequence[Item]) -> dict[SubStreamId, list[Item]]:
    """Partition items by substream, preserving per-substream order."""
    strata: dict[SubStreamId, list[Item]] = {}
    for item in items:
        strata.setdefault(item.substream, []).append(item)
    return strata


def allocate_sample_sizes(total: int,
                          arrivals: Mapping[SubStreamId, int],
                          policy: AllocationPolicy) -> dict[SubStreamId, int]:
    """Split ``total`` reservoir slots across strata; every stratum gets >= 1.

    Equal: floor(total/k) each, remainder one-by-one in ascending id order.
    Proportional: largest-remainder rounding of total * c_i / sum(c), floored
    at one slot, ties broken by ascending id.
    """
    if not arrivals:
        return {}
    subs = sorted(arrivals)
    k = len(subs)
    if total < k:
        raise BudgetTooSmall(f"budget {total} < {k} strata")
    if policy.kind == EQUAL:
        base, rem = divmod(total, k)
        return {s: base + (1 if i < rem else 0) for i, s in enumerate(subs)}

    total_arrived = sum(arrivals.values())
    if total_arrived == 0:
        return allocate_sample_sizes(total, arrivals, AllocationPolicy(EQUAL))
    quotas = {s: total * arrivals[s] / total_arrived for s in subs}
    sizes = {s: max(1, int(quotas[s])) for s in subs}
    leftover = total - sum(sizes.values())
    if leftover > 0:
        by_remainder = sorted(subs, key=lambda s: (-(quotas[s] - int(quotas[s])), s))
        i = 0
        while leftover > 0:
            sizes[by_remainder[i % k]] += 1
            leftover -= 1
            i += 1
    while leftover < 0:
        # min-1 floors overshot the budget; shave the largest allocations
        victim = min(subs, key=lambda s: (-sizes[s], s))
        if sizes[victim] <= 1:
            raise BudgetTooSmall(f"budget {total} < {k} strata")
        sizes[victim] -= 1
        leftover += 1
    return sizes


def compute_local_weight(c: int, n: int) -> float:
    """Local sampling weight: c/n when the reservoir reduced the stream, else 1."""
    return c / n if c > n else 1.0


def calibrate_weight(w_in: float, w_local: float, c_in: int,
                     arrived: int) -> float:
    """Outgoing effective weight, corrected for interval misalignment.

    ``c_in`` is what the downstream node reported forwarding; ``arrived`` is
    what actually landed in this interval.  Their ratio rescales the weight
    so a partial batch still represents its full source interval.
    """
    if arrived == 0:
        raise DegenerateArrival("calibration with zero arrivals")
    return w_in * w_local * c_in / arrived


def sample_stratum(items: Sequence[Item], capacity: int, w_in: float,
                   c_in: int | None,
                   rng: np.random.Generator) -> tuple[list[Item], float, int]:
    """Reservoir-sample one stratum (or one epoch group of a stratum).

    Returns (sampled items, outgoing weight, outgoing count).  ``c_in`` of
    None means the items came straight from a source: no downstream node
    forwarded them, so the calibration ratio is 1.
    """
    arrived = len(items)
    res = Reservoir(capacity)
    res.offer_many(items, rng)
    sampled, seen = res.drain()
    w_local = compute_local_weight(arrived, capacity)
    if w_local > 1.0:
        w_out = calibrate_weight(
            w_in, w_local, arrived if c_in is None else c_in, arrived)
    else:
        w_out = w_in
    return sampled, w_out, len(sampled)


def whsamp(items: Sequence[Item], sample_size: int,
           w_in: Mapping[SubStreamId, float],
           c_in: Mapping[SubStreamId, int],
           policy: AllocationPolicy,
           rng: RngSource,
           ) -> tuple[dict[SubStreamId, list[Item]],
                      dict[SubStreamId, float],
                      dict[SubStreamId, int]]:
    """One synchronized-interval pass of weighted hierarchical sampling.

    Unknown substreams default to weight 1 and incoming count = arrivals,
    which is the source-attached case.
    """
    strata = stratify(items)
    arrivals = {s: len(v) for s, v in strata.items()}
    sizes = allocate_sample_sizes(sample_size, arrivals, policy)
    sample: dict[SubStreamId, list[Item]] = {}
    w_out: dict[SubStreamId, float] = {}
    c_out: dict[SubStreamId, int] = {}
    for sub in sorted(strata):
        sampled, w, c = sample_stratum(
            strata[sub], sizes[sub], w_in.get(sub, 1.0), c_in.get(sub),
            _rng_for(rng, sub))
        sample[sub] = sampled
        w_out[sub] = w
        c_out[sub] = c
    return sample, w_out, c_out


def shard_and_merge(items: Sequence[Item], n_i: int, workers: int,
                    rngs: Sequence[np.random.Generator],
                    ) -> tuple[list[Item], int]:
    """Round-robin a stratum over ``workers`` local reservoirs and merge.

    Each worker gets capacity floor(n_i / workers), so the merged sample can
    never exceed n_i.
    """
    if workers < 1:
        raise InvalidWorkers(f"workers must be >= 1, got {workers}")
    per_worker = n_i // workers
    if per_worker == 0:
        raise InvalidWorkers(f"budget {n_i} yields empty reservoirs "
                             f"for {workers} workers")
    if len(rngs) != workers:
        raise InvalidWorkers(f"need {workers} rngs, got {len(rngs)}")
    merged: list[Item] = []
    seen_total = 0
    for w in range(workers):
        res = Reservoir(per_worker)
        res.offer_many(items[w::workers], rngs[w])
        sampled, seen = res.drain()
        merged.extend(sampled)
        seen_total += seen
    return merged, seen_total

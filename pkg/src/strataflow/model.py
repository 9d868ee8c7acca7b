"""Core value types: items, per-interval metadata, and batches.

An interval batch is the unit of communication between nodes: for each
substream it carries a (weight, count) metadata record followed by the
sampled items of that interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import OverlappingSubstream

# Substream ids are opaque 64-bit integers; one id is one stratum and it
# travels exactly one root-ward path through the tree.
SubStreamId = int


@dataclass(frozen=True, slots=True)
class Item:
    """One stream record.

    ``source_seq`` is monotone per (substream, source); ``source_interval``
    is the source's interval index at emission time.  Both are diagnostic
    metadata and never feed sampling decisions.
    """
    substream: SubStreamId
    value: float
    source_seq: int = 0
    source_interval: int = 0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite item value: {self.value!r}")


@dataclass(frozen=True, slots=True)
class MetadataRecord:
    """Effective weight and forwarded-item count for one substream."""
    weight: float
    count: int

    def __post_init__(self):
        if self.weight < 1.0:
            raise ValueError(f"weight must be >= 1, got {self.weight}")
        if self.count < 0:
            raise ValueError(f"count must be >= 0, got {self.count}")


@dataclass(frozen=True, slots=True)
class IntervalBatch:
    """Per-interval message between nodes.

    ``entries`` maps substream id to its metadata record and sampled items.
    Every entry keeps ``metadata.count == len(items)``.
    """
    interval_id: int
    sender: int
    entries: dict[SubStreamId, tuple[MetadataRecord, tuple[Item, ...]]] = \
        field(default_factory=dict)

    def __post_init__(self):
        for sub, (meta, items) in self.entries.items():
            if meta.count != len(items):
                raise ValueError(
                    f"substream {sub}: declared count {meta.count} != "
                    f"{len(items)} items")

    @property
    def total_items(self) -> int:
        return sum(len(items) for _, items in self.entries.values())


def batch_merge(a: IntervalBatch, b: IntervalBatch) -> IntervalBatch:
    """Union of two batches targeting the same receiving interval.

    Substream key sets must be disjoint: one substream follows exactly one
    root-ward path, so a parent can never see it from two children.
    """
    overlap = a.entries.keys() & b.entries.keys()
    if overlap:
        raise OverlappingSubstream(
            f"substreams {sorted(overlap)} present in both batches")
    merged = dict(a.entries)
    merged.update(b.entries)
    return IntervalBatch(interval_id=a.interval_id, sender=a.sender,
                         entries=merged)

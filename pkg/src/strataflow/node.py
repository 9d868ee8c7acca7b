"""Per-node interval loop: buffer arrivals, sample at the window boundary,
forward upstream or hand the weighted sample to the query layer.

Windows are tumbling, with boundaries at multiples of the node's interval
length in its own (possibly offset) clock; nodes never coordinate.  Items
arriving under different downstream metadata records within one local
interval are kept in separate epoch groups, and each group is sampled and
weighted on its own so the misalignment calibration stays exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import rng as rngmod
from .errors import StaleBatch
from .model import IntervalBatch, Item, MetadataRecord, SubStreamId
from .query import SampleRow
from .whs import (AllocationPolicy, allocate_sample_sizes, calibrate_weight,
                  compute_local_weight, sample_stratum, shard_and_merge)
from .reservoir import srs_pass


@dataclass(frozen=True)
class NodeConfig:
    node_id: int
    parent: int | None
    interval_length: float = 1.0
    budget: int = 100
    policy: AllocationPolicy = field(default_factory=AllocationPolicy)
    workers: int = 1
    clock_offset: float = 0.0
    # When set, the node is part of the coin-flip baseline pipeline and
    # forwards each item independently with this probability.
    srs_p: float | None = None

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")


def cost_function(budget: int) -> int:
    """Map the resource budget to a per-interval sample size.

    Identity for now; kept as the hook where a real cost model would go.
    The budget may change between intervals.
    """
    return budget


@dataclass
class _EpochGroup:
    w_in: float
    c_in: int | None     # None: source-attached, no downstream metadata
    epoch: int
    items: list[Item] = field(default_factory=list)


@dataclass
class SubStreamWindowState:
    """Arrivals of one substream within the currently open interval."""
    substream: SubStreamId
    groups: list[_EpochGroup] = field(default_factory=list)

    @property
    def arrived(self) -> int:
        return sum(len(g.items) for g in self.groups)


@dataclass(frozen=True)
class RootSample:
    """Weighted sample handed to the query layer at a root window close."""
    window_id: int
    rows: tuple[SampleRow, ...]


class Node:
    """One logical node.  Single-owner mutable state; never shared."""

    def __init__(self, config: NodeConfig, run_seed: int):
        self.config = config
        self.run_seed = run_seed
        self.current_interval = 0
        self.window: dict[SubStreamId, SubStreamWindowState] = {}
        # Most recent downstream metadata, persisting across intervals.
        self._latest: dict[SubStreamId, tuple[float, int, int]] = {}
        self.stale_batches = 0
        self.degraded_windows = 0

    @property
    def is_root(self) -> bool:
        return self.config.parent is None

    # -- ingest ----------------------------------------------------------

    def ingest_metadata(self, substream: SubStreamId, weight: float,
                        count: int) -> None:
        prev = self._latest.get(substream)
        epoch = 0 if prev is None else prev[2] + 1
        self._latest[substream] = (weight, count, epoch)

    def ingest_items(self, substream: SubStreamId, items: list[Item]) -> None:
        if not items:
            return
        state = self.window.setdefault(substream,
                                       SubStreamWindowState(substream))
        meta = self._latest.get(substream)
        w_in, c_in, epoch = (1.0, None, -1) if meta is None else meta
        if not state.groups or state.groups[-1].epoch != epoch:
            state.groups.append(_EpochGroup(w_in, c_in, epoch))
        state.groups[-1].items.extend(items)

    def on_batch(self, batch: IntervalBatch, target_interval: int | None = None
                 ) -> None:
        """Buffer a whole batch into the open interval.

        ``target_interval`` is the local window the batch belongs to (by
        arrival time); batches for already-closed windows are dropped and
        counted rather than reordered.
        """
        if target_interval is not None and target_interval < self.current_interval:
            self.stale_batches += 1
            raise StaleBatch(
                f"node {self.config.node_id}: batch for window "
                f"{target_interval}, current {self.current_interval}")
        for sub in sorted(batch.entries):
            meta, items = batch.entries[sub]
            self.ingest_metadata(sub, meta.weight, meta.count)
            self.ingest_items(sub, list(items))

    # -- window close ----------------------------------------------------

    def close_interval(self) -> IntervalBatch | RootSample:
        interval = self.current_interval
        window, self.window = self.window, {}
        self.current_interval += 1
        if self.config.srs_p is not None:
            out = self._close_srs(window, interval)
        else:
            out = self._close_whs(window, interval)
        if self.is_root:
            return RootSample(window_id=interval, rows=tuple(out))
        entries = {}
        for sub in sorted({row.substream for row in out}):
            rows = [r for r in out if r.substream == sub]
            items = tuple(it for r in rows for it in r.items)
            total = len(items)
            if total == 0:
                continue
            if len({r.weight for r in rows}) == 1:
                weight = rows[0].weight
            else:
                # Fragments with unequal weights collapse to one wire entry;
                # the count-preserving average keeps sum(Y*W) intact.
                weight = sum(len(r.items) * r.weight for r in rows) / total
            entries[sub] = (MetadataRecord(weight=weight, count=total), items)
        return IntervalBatch(interval_id=interval,
                             sender=self.config.node_id, entries=entries)

    def _close_whs(self, window: dict[SubStreamId, SubStreamWindowState],
                   interval: int) -> list[SampleRow]:
        size = cost_function(self.config.budget)
        arrivals = {s: st.arrived for s, st in window.items() if st.arrived}
        if not arrivals:
            return []
        sizes = allocate_sample_sizes(size, arrivals, self.config.policy)
        rows: list[SampleRow] = []
        for sub in sorted(arrivals):
            state = window[sub]
            groups = [g for g in state.groups if g.items]
            n_i = sizes[sub]
            if n_i < len(groups):
                # Budget too thin to keep fragments apart; fold them into
                # one group under the oldest metadata.
                self.degraded_windows += 1
                merged = _EpochGroup(groups[0].w_in, groups[0].c_in,
                                     groups[0].epoch)
                merged.items = [it for g in groups for it in g.items]
                groups = [merged]
            splits = _split_capacity(n_i, [len(g.items) for g in groups])
            rng = rngmod.derive(self.run_seed, rngmod.KIND_SAMPLE,
                                self.config.node_id, sub, interval)
            for g, cap in zip(groups, splits):
                sampled, w_out = self._sample_group(g, cap, sub, interval, rng)
                rows.append(SampleRow(substream=sub, items=tuple(sampled),
                                      weight=w_out))
        return rows

    def _sample_group(self, group: _EpochGroup, capacity: int,
                      sub: SubStreamId, interval: int, rng):
        arrived = len(group.items)
        if self.config.workers > 1 and capacity >= self.config.workers:
            w = self.config.workers
            worker_rngs = [rngmod.derive(self.run_seed, rngmod.KIND_SAMPLE,
                                         self.config.node_id, sub, interval, k)
                           for k in range(w)]
            sampled, seen = shard_and_merge(group.items, capacity, w,
                                            worker_rngs)
            eff_capacity = w * (capacity // w)
        else:
            res_sampled, w_out, _ = sample_stratum(
                group.items, capacity, group.w_in, group.c_in, rng)
            return res_sampled, w_out
        w_local = compute_local_weight(seen, eff_capacity)
        if w_local > 1.0:
            c_in = arrived if group.c_in is None else group.c_in
            w_out = calibrate_weight(group.w_in, w_local, c_in, arrived)
        else:
            w_out = group.w_in
        return sampled, w_out

    def _close_srs(self, window: dict[SubStreamId, SubStreamWindowState],
                   interval: int) -> list[SampleRow]:
        p = self.config.srs_p
        rows: list[SampleRow] = []
        for sub in sorted(window):
            state = window[sub]
            items = [it for g in state.groups if g.items for it in g.items]
            if not items:
                continue
            w_in = state.groups[-1].w_in
            rng = rngmod.derive(self.run_seed, rngmod.KIND_SRS,
                                self.config.node_id, sub, interval)
            kept, hw = srs_pass(items, p, rng)
            if kept:
                rows.append(SampleRow(substream=sub, items=tuple(kept),
                                      weight=w_in * hw))
        return rows


def _split_capacity(total: int, group_sizes: list[int]) -> list[int]:
    """Split a stratum's budget across epoch groups, proportional to group
    arrivals with a floor of one slot each (largest-remainder rounding)."""
    if len(group_sizes) == 1:
        return [total]
    arrived = sum(group_sizes)
    quotas = [total * g / arrived for g in group_sizes]
    sizes = [max(1, int(q)) for q in quotas]
    leftover = total - sum(sizes)
    order = sorted(range(len(sizes)),
                   key=lambda i: (-(quotas[i] - int(quotas[i])), i))
    i = 0
    while leftover > 0:
        sizes[order[i % len(sizes)]] += 1
        leftover -= 1
        i += 1
    while leftover < 0:
        victim = max(range(len(sizes)), key=lambda i: (sizes[i], -i))
        sizes[victim] -= 1
        leftover += 1
    return sizes

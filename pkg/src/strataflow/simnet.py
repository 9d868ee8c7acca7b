"""Deterministic discrete-event simulator for sampling-tree pipelines.

Builds the logical tree, drives synthetic (or replayed) sub-streams through
per-node interval engines over latency/capacity-modeled FIFO links, and runs
the weighted-hierarchical and coin-flip pipelines in lockstep over identical
item streams.  Exact per-window answers come from generator-side tallies
plus ground-truth source-interval attribution.

Event order is the total order (time, priority, sequence); window closes
sort before arrivals at the same timestamp, so an item landing exactly on a
boundary belongs to the next window.
"""

from __future__ import annotations

import heapq
import math
import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import rng as rngmod
from .errors import (CycleDetected, MultipleRoots, OrphanSource,
                     UnknownScenario)
from .model import Item, SubStreamId
from .node import Node, NodeConfig, RootSample
from .query import COUNT, MEAN, SUM, QueryResult, evaluate_window
from .whs import EQUAL, AllocationPolicy

_PRIO_CLOSE = 0
_PRIO_META = 1
_PRIO_ITEMS = 2


@dataclass(frozen=True)
class GeneratorSpec:
    """Synthetic sub-stream source attached to a leaf node."""
    source_id: int
    substream: SubStreamId
    distribution: tuple            # ("gaussian", mu, sigma) | ("poisson", lam)
    rate: int                      # items per source interval
    interval_length: float = 1.0
    offset: float = 0.0
    latency: float = 0.0           # one-way delay to the attached leaf


@dataclass(frozen=True)
class ReplayFeed:
    """Pre-materialized timed item stream (see the ingest module)."""
    source_id: int
    events: tuple[tuple[float, Item], ...]
    interval_length: float = 1.0


@dataclass(frozen=True)
class Edge:
    child: int
    parent: int
    latency: float = 0.0
    capacity: float | None = None  # items per simulated second; None = instant


@dataclass(frozen=True)
class TopologyConfig:
    nodes: tuple[NodeConfig, ...]
    edges: tuple[Edge, ...] = ()
    sources: tuple[tuple[GeneratorSpec, int], ...] = ()  # (spec, leaf id)


def generate(spec: GeneratorSpec, interval: int,
             rng: np.random.Generator) -> list[Item]:
    """Deterministically generate one source interval's items."""
    if spec.rate <= 0:
        return []
    kind = spec.distribution[0]
    if kind == "gaussian":
        _, mu, sigma = spec.distribution
        values = rng.normal(mu, sigma, spec.rate)
    elif kind == "poisson":
        _, lam = spec.distribution
        values = rng.poisson(lam, spec.rate).astype(float)
    else:
        raise ValueError(f"unknown distribution {kind!r}")
    seq0 = interval * spec.rate
    sub = spec.substream
    return [Item(substream=sub, value=float(v), source_seq=seq0 + i,
                 source_interval=interval)
            for i, v in enumerate(values)]


def exact_oracle(items: list[Item]) -> dict[str, float]:
    """Full aggregation over a window's items; MEAN is NaN when empty."""
    n = len(items)
    total = math.fsum(it.value for it in items)
    return {COUNT: float(n), SUM: total,
            MEAN: total / n if n else math.nan}


@dataclass
class WindowRecord:
    window_id: int
    close_time: float
    whs: dict[str, QueryResult]
    srs: dict[str, QueryResult] | None
    exact: dict[str, float]
    attribution: tuple[tuple[SubStreamId, int], ...]
    accuracy_loss: float
    srs_accuracy_loss: float | None
    latency: float


@dataclass
class RunMetrics:
    forwarded_fraction: dict[tuple[int, int], float] = field(default_factory=dict)
    srs_forwarded_fraction: dict[tuple[int, int], float] = field(default_factory=dict)
    stale_batches: int = 0
    items_generated: int = 0
    items_per_wall_second: float = 0.0


@dataclass
class RunResult:
    windows: list[WindowRecord]
    metrics: RunMetrics


class _Link:
    """FIFO link: constant one-way delay plus item-serialization at the
    configured capacity; excess transmissions queue behind busy time."""

    def __init__(self, latency: float, capacity: float | None):
        self.latency = latency
        self.capacity = capacity
        self.busy_until = 0.0


class Simulation:
    """One deterministic run over a topology.

    The coin-flip baseline pipeline, when enabled, mirrors the tree shape
    and consumes the same generated items; leaves flip with ``srs_leaf_p``
    and interior nodes pass through.
    """

    def __init__(self, config: TopologyConfig, seed: int,
                 confidence: float = 95, srs_leaf_p: float | None = None,
                 gen_seed: int | None = None):
        self.config = config
        self.seed = seed
        # Sampling and generation draw from independent seeds so a fixed
        # stream can be re-sampled under many sampling seeds.
        self.gen_seed = seed if gen_seed is None else gen_seed
        self.confidence = confidence
        self._validate(config)
        self.nodes = {n.node_id: Node(replace(n, srs_p=None), seed)
                      for n in config.nodes}
        self._leaf_ids = {leaf for _, leaf in config.sources}
        self.srs_nodes = {}
        if srs_leaf_p is not None:
            for n in config.nodes:
                p = srs_leaf_p if n.node_id in self._leaf_ids else 1.0
                self.srs_nodes[n.node_id] = Node(replace(n, srs_p=p), seed)
        edge_params = {e.child: e for e in config.edges}
        self.links = {}
        self.srs_links = {}
        for n in config.nodes:
            if n.parent is None:
                continue
            e = edge_params.get(n.node_id, Edge(n.node_id, n.parent))
            self.links[n.node_id] = _Link(e.latency, e.capacity)
            self.srs_links[n.node_id] = _Link(e.latency, e.capacity)
        # ground truth: (substream, source interval) -> (count, sum)
        self.tally: dict[tuple[SubStreamId, int], tuple[int, float]] = {}
        self.edge_items: dict[int, int] = {c: 0 for c in self.links}
        self.srs_edge_items: dict[int, int] = {c: 0 for c in self.links}
        self.root_samples: dict[int, RootSample] = {}
        self.srs_root_samples: dict[int, RootSample] = {}
        self.root_close_times: dict[int, float] = {}
        self._heap: list = []
        self._seq = 0

    @property
    def instance_count(self) -> int:
        return len(self.nodes) + len(self.config.sources)

    @property
    def root_id(self) -> int:
        return next(n.node_id for n in self.config.nodes if n.parent is None)

    @staticmethod
    def _validate(config: TopologyConfig) -> None:
        ids = {n.node_id for n in config.nodes}
        roots = [n for n in config.nodes if n.parent is None]
        if len(roots) != 1:
            raise MultipleRoots(f"{len(roots)} parent-less nodes")
        parent_of = {n.node_id: n.parent for n in config.nodes}
        for n in config.nodes:
            if n.parent is not None and n.parent not in ids:
                raise CycleDetected(f"node {n.node_id} has unknown parent "
                                    f"{n.parent}")
            seen = set()
            cur = n.node_id
            while cur is not None:
                if cur in seen:
                    raise CycleDetected(f"cycle through node {cur}")
                seen.add(cur)
                cur = parent_of[cur]
        for spec, leaf in config.sources:
            if leaf not in ids:
                raise OrphanSource(f"source {spec.source_id} attached to "
                                   f"unknown node {leaf}")

    # -- event machinery -------------------------------------------------

    def _schedule(self, t: float, prio: int, fn: Callable[[], None]) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, prio, self._seq, fn))

    def _window_of(self, node: Node, t: float) -> int:
        cfg = node.config
        return int(math.floor((t - cfg.clock_offset) / cfg.interval_length))

    def run(self, horizon: int) -> RunResult:
        """Emit ``horizon`` source intervals, drain all events, and report
        every root window that saw data."""
        wall0 = _time.monotonic()
        self._schedule_sources(horizon)
        self._schedule_closes(horizon)
        while self._heap:
            _, _, _, fn = heapq.heappop(self._heap)
            fn()
        wall = _time.monotonic() - wall0
        return self._collect(wall)

    def _schedule_sources(self, horizon: int) -> None:
        for spec, leaf in self.config.sources:
            if isinstance(spec, ReplayFeed):
                for t, item in spec.events:
                    key = (item.substream, item.source_interval)
                    cnt, tot = self.tally.get(key, (0, 0.0))
                    self.tally[key] = (cnt + 1, tot + item.value)
                    self._schedule(t, _PRIO_ITEMS,
                                   lambda lf=leaf, it=item:
                                   self._deliver_raw(lf, it))
                continue
            for k in range(horizon):
                t_emit = spec.offset + (k + 1) * spec.interval_length
                t_arr = t_emit + spec.latency
                self._schedule(t_arr, _PRIO_ITEMS,
                               lambda s=spec, lf=leaf, kk=k:
                               self._emit_source(s, lf, kk))

    def _deliver_raw(self, leaf: int, item: Item) -> None:
        self.nodes[leaf].ingest_items(item.substream, [item])
        if self.srs_nodes:
            self.srs_nodes[leaf].ingest_items(item.substream, [item])

    def _emit_source(self, spec: GeneratorSpec, leaf: int, interval: int) -> None:
        rng = rngmod.derive(self.gen_seed, rngmod.KIND_GENERATE, spec.source_id,
                            spec.substream, interval)
        items = generate(spec, interval, rng)
        key = (spec.substream, interval)
        cnt, tot = self.tally.get(key, (0, 0.0))
        self.tally[key] = (cnt + len(items),
                           tot + math.fsum(it.value for it in items))
        self.nodes[leaf].ingest_items(spec.substream, items)
        if self.srs_nodes:
            self.srs_nodes[leaf].ingest_items(spec.substream, items)

    def _schedule_closes(self, horizon: int) -> None:
        t_final = self._final_time(horizon)
        for node in self.nodes.values():
            cfg = node.config
            k = 0
            while True:
                boundary = cfg.clock_offset + (k + 1) * cfg.interval_length
                if boundary > t_final:
                    break
                self._schedule(boundary, _PRIO_CLOSE,
                               lambda nid=cfg.node_id, kk=k:
                               self._close(nid, kk))
                k += 1

    def _final_time(self, horizon: int) -> float:
        def last_emission(s) -> float:
            if isinstance(s, ReplayFeed):
                return max((t for t, _ in s.events), default=0.0)
            return s.offset + horizon * s.interval_length + s.latency
        t_emit = max((last_emission(s) for s, _ in self.config.sources),
                     default=0.0)
        slack = sum(l.latency for l in self.links.values())
        for child, link in self.links.items():
            if link.capacity is not None:
                budget = self.nodes[child].config.budget
                slack += (horizon + 2) * budget / link.capacity
        l_max = max(n.interval_length for n in self.config.nodes)
        o_max = max(n.clock_offset for n in self.config.nodes)
        return t_emit + slack + (len(self.nodes) + 3) * l_max + o_max

    def _close(self, node_id: int, window: int) -> None:
        for pipeline, nodes, links, counters, samples in (
                ("whs", self.nodes, self.links, self.edge_items,
                 self.root_samples),
                ("srs", self.srs_nodes, self.srs_links, self.srs_edge_items,
                 self.srs_root_samples)):
            if node_id not in nodes:
                continue
            node = nodes[node_id]
            if node.current_interval != window:
                continue  # guard against double-scheduling
            out = node.close_interval()
            if isinstance(out, RootSample):
                if out.rows:
                    samples[out.window_id] = out
                    self.root_close_times[out.window_id] = (
                        node.config.clock_offset +
                        (window + 1) * node.config.interval_length)
                continue
            if not out.entries:
                continue
            counters[node_id] += out.total_items
            self._transmit(links[node_id], nodes[node.config.parent], out)

    def _transmit(self, link: _Link, receiver: Node, batch) -> None:
        t_send = (self.nodes[batch.sender].config.clock_offset +
                  (batch.interval_id + 1) *
                  self.nodes[batch.sender].config.interval_length)
        start = max(t_send, link.busy_until)
        lat = link.latency
        cursor = start
        for sub in sorted(batch.entries):
            meta, items = batch.entries[sub]
            self._schedule(cursor + lat, _PRIO_META,
                           lambda r=receiver, s=sub, m=meta:
                           r.ingest_metadata(s, m.weight, m.count))
            n = len(items)
            if link.capacity is None:
                self._deliver(receiver, sub, list(items), cursor + lat)
            else:
                arrivals = cursor + lat + (np.arange(1, n + 1) /
                                           link.capacity)
                wins = ((arrivals - receiver.config.clock_offset) //
                        receiver.config.interval_length).astype(np.int64)
                splits = np.nonzero(np.diff(wins))[0] + 1
                lo = 0
                for hi in list(splits) + [n]:
                    if hi > lo:
                        self._deliver(receiver, sub, list(items[lo:hi]),
                                      float(arrivals[hi - 1]))
                    lo = hi
                cursor += n / link.capacity
        link.busy_until = max(link.busy_until, cursor)

    def _deliver(self, receiver: Node, sub: SubStreamId, items: list[Item],
                 t_arr: float) -> None:
        def deliver():
            window = self._window_of(receiver, t_arr)
            if window < receiver.current_interval:
                receiver.stale_batches += 1
                return
            receiver.ingest_items(sub, items)
        self._schedule(t_arr, _PRIO_ITEMS, deliver)

    # -- result assembly -------------------------------------------------

    def _attribution(self, sample: RootSample) -> set[tuple[SubStreamId, int]]:
        return {(it.substream, it.source_interval)
                for row in sample.rows for it in row.items}

    def _collect(self, wall: float) -> RunResult:
        windows = []
        for wid in sorted(self.root_samples):
            whs_sample = self.root_samples[wid]
            pairs = self._attribution(whs_sample)
            exact_count = sum(self.tally[p][0] for p in pairs)
            exact_sum = math.fsum(self.tally[p][1] for p in pairs)
            exact = {COUNT: float(exact_count), SUM: exact_sum,
                     MEAN: exact_sum / exact_count if exact_count else math.nan}
            whs = evaluate_window(wid, whs_sample.rows, self.confidence)
            srs = None
            srs_loss = None
            if self.srs_nodes:
                srs_sample = self.srs_root_samples.get(
                    wid, RootSample(wid, ()))
                srs = evaluate_window(wid, srs_sample.rows, self.confidence)
                if exact_sum:
                    srs_loss = abs(srs[SUM].estimate - exact_sum) / abs(exact_sum)
            loss = (abs(whs[SUM].estimate - exact_sum) / abs(exact_sum)
                    if exact_sum else 0.0)
            close_t = self.root_close_times[wid]
            first_emit = min(
                (k + 1) * self._source_interval_length(s) for s, k in pairs)
            windows.append(WindowRecord(
                window_id=wid, close_time=close_t, whs=whs, srs=srs,
                exact=exact, attribution=tuple(sorted(pairs)),
                accuracy_loss=loss, srs_accuracy_loss=srs_loss,
                latency=close_t - first_emit))
        metrics = self._metrics(wall)
        return RunResult(windows=windows, metrics=metrics)

    def _source_interval_length(self, substream: SubStreamId) -> float:
        for spec, _ in self.config.sources:
            if getattr(spec, "substream", None) == substream:
                return spec.interval_length
        return 1.0

    def _metrics(self, wall: float) -> RunMetrics:
        m = RunMetrics()
        generated_by_sub: dict[SubStreamId, int] = {}
        for (sub, _), (cnt, _tot) in self.tally.items():
            generated_by_sub[sub] = generated_by_sub.get(sub, 0) + cnt
        below = {nid: set() for nid in self.nodes}
        for spec, leaf in self.config.sources:
            if isinstance(spec, ReplayFeed):
                subs = {it.substream for _, it in spec.events}
            else:
                subs = {spec.substream}
            nid = leaf
            while nid is not None:
                below[nid] |= subs
                nid = self.nodes[nid].config.parent
        for child in self.links:
            gen = sum(generated_by_sub.get(s, 0) for s in below[child])
            parent = self.nodes[child].config.parent
            if gen:
                m.forwarded_fraction[(child, parent)] = \
                    self.edge_items[child] / gen
                if self.srs_nodes:
                    m.srs_forwarded_fraction[(child, parent)] = \
                        self.srs_edge_items[child] / gen
        m.stale_batches = sum(n.stale_batches for n in self.nodes.values())
        m.items_generated = sum(generated_by_sub.values())
        total_offered = m.items_generated * (2 if self.srs_nodes else 1)
        m.items_per_wall_second = total_offered / wall if wall > 0 else 0.0
        return m


def build_topology(config: TopologyConfig, seed: int = 0,
                   confidence: float = 95,
                   srs_leaf_p: float | None = None) -> Simulation:
    return Simulation(config, seed, confidence=confidence,
                      srs_leaf_p=srs_leaf_p)


# -- scenario presets ----------------------------------------------------

_GAUSS_TYPES = (("gaussian", 10.0, 5.0), ("gaussian", 1000.0, 50.0),
                ("gaussian", 10000.0, 500.0), ("gaussian", 100000.0, 5000.0))
_POISSON_TYPES = (("poisson", 10.0), ("poisson", 100.0),
                  ("poisson", 1000.0), ("poisson", 10000.0))
_SKEW_TYPES = (("poisson", 10.0), ("poisson", 100.0),
               ("poisson", 1000.0), ("poisson", 10000000.0))

DEFAULT_SCALE = 0.02  # desk scale: 1/50 of the reference workload rates

#: scenario -> (per-type distributions, per-type rates at scale 1.0)
_PRESETS = {
    "gaussian": (_GAUSS_TYPES, (25000, 25000, 25000, 25000)),
    "uniform": (_GAUSS_TYPES, (25000, 25000, 25000, 25000)),
    "setting1": (_GAUSS_TYPES, (50000, 25000, 12500, 625)),
    "setting2": (_GAUSS_TYPES, (25000, 25000, 25000, 25000)),
    "setting3": (_GAUSS_TYPES, (625, 12500, 25000, 50000)),
    "poisson": (_POISSON_TYPES, (25000, 25000, 25000, 25000)),
    "skew": (_SKEW_TYPES, (80000, 19890, 100, 10)),
}

#: one-way delays per hop (half of the 20/40/80 ms round trips)
_HOP_LATENCY = (0.01, 0.02, 0.04)


def scenario_names() -> list[str]:
    return sorted(_PRESETS)


def scenario_presets(name: str, fraction: float, scale: float = DEFAULT_SCALE,
                     policy: AllocationPolicy | None = None,
                     workers: int = 1,
                     interval_length: float = 1.0) -> TopologyConfig:
    """Build a named workload on the reference 8/4/2/1 tree.

    Each node's budget is the sampling fraction times the source rate of its
    subtree (floored at its stratum count), so every tree edge carries about
    ``fraction`` of the traffic generated below it.
    """
    if name not in _PRESETS:
        raise UnknownScenario(
            f"unknown scenario {name!r}; valid: {', '.join(scenario_names())}")
    dists, rates = _PRESETS[name]
    policy = policy or AllocationPolicy(EQUAL)

    sources = []
    for s in range(8):
        t = s % 4
        # two sources per type share the type's scaled rate without loss
        total = max(1, round(rates[t] * scale)) if rates[t] else 0
        rate = (total + 1) // 2 if s < 4 else total // 2
        rate = max(1, rate)
        sources.append((GeneratorSpec(
            source_id=101 + s, substream=1 + s, distribution=dists[t],
            rate=rate, interval_length=interval_length,
            latency=_HOP_LATENCY[0]), 4 + s // 2))

    children = {1: [2, 3], 2: [4, 5], 3: [6, 7]}
    rate_below: dict[int, float] = {}
    subs_below: dict[int, int] = {}
    for nid in (4, 5, 6, 7):
        attached = [sp for sp, leaf in sources if leaf == nid]
        rate_below[nid] = sum(sp.rate for sp in attached)
        subs_below[nid] = len(attached)
    for nid in (2, 3, 1):
        rate_below[nid] = sum(rate_below[c] for c in children[nid])
        subs_below[nid] = sum(subs_below[c] for c in children[nid])

    def budget(nid: int) -> int:
        return max(subs_below[nid], round(fraction * rate_below[nid]))

    nodes = [NodeConfig(node_id=1, parent=None, budget=budget(1),
                        interval_length=interval_length, policy=policy,
                        workers=workers)]
    for nid in (2, 3):
        nodes.append(NodeConfig(node_id=nid, parent=1, budget=budget(nid),
                                interval_length=interval_length,
                                policy=policy, workers=workers))
    for nid in (4, 5, 6, 7):
        parent = 2 if nid in (4, 5) else 3
        nodes.append(NodeConfig(node_id=nid, parent=parent,
                                budget=budget(nid),
                                interval_length=interval_length,
                                policy=policy, workers=workers))
    edges = tuple(
        [Edge(nid, 1, latency=_HOP_LATENCY[2]) for nid in (2, 3)] +
        [Edge(nid, 2 if nid in (4, 5) else 3, latency=_HOP_LATENCY[1])
         for nid in (4, 5, 6, 7)])
    return TopologyConfig(nodes=tuple(nodes), edges=edges,
                          sources=tuple(sources))

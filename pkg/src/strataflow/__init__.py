"""Hierarchical weighted stream sampling with error-bounded linear queries."""

from .model import IntervalBatch, Item, MetadataRecord, SubStreamId, batch_merge
from .node import Node, NodeConfig, RootSample, cost_function
from .query import QueryResult, SampleRow, evaluate_window
from .reservoir import Reservoir, srs_pass
from .simnet import (Edge, GeneratorSpec, ReplayFeed, RunResult, Simulation,
                     TopologyConfig, build_topology, exact_oracle, generate,
                     scenario_presets)
from .whs import (AllocationPolicy, allocate_sample_sizes, calibrate_weight,
                  compute_local_weight, shard_and_merge, stratify, whsamp)

__all__ = [
    "AllocationPolicy", "Edge", "GeneratorSpec", "IntervalBatch", "Item",
    "MetadataRecord", "Node", "NodeConfig", "QueryResult", "ReplayFeed",
    "Reservoir", "RootSample", "RunResult", "SampleRow", "Simulation",
    "SubStreamId", "TopologyConfig", "allocate_sample_sizes", "batch_merge",
    "build_topology", "calibrate_weight", "compute_local_weight",
    "cost_function", "evaluate_window", "exact_oracle", "generate",
    "scenario_presets", "shard_and_merge", "srs_pass", "stratify", "whsamp",
]

__version__ = "0.1.0"

"""Run one tree node as a standalone process over TCP links.

Intervals are logical: every child sends exactly one batch frame per
interval (entries may be empty), and a node closes its interval once it has
heard from all children.  Item values and sampling draws use the same RNG
derivation as the simulator, so a process pipeline and an in-process run of
the same topology produce the same estimates.
"""

from __future__ import annotations

import json
import socket
import sys
import time

from . import rng as rngmod
from .errors import TransportError
from .node import Node, NodeConfig, RootSample
from .query import evaluate_window
from .simnet import GeneratorSpec, TopologyConfig, generate
from .transport import FrameReader, MSG_BATCH, decode_batch, encode_batch_frame

_CONNECT_RETRY_S = 0.1
_CONNECT_TIMEOUT_S = 30.0


def parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _listen(endpoint: str, n_children: int) -> list[socket.socket]:
    host, port = parse_endpoint(endpoint)
    server = socket.create_server((host, port))
    server.settimeout(_CONNECT_TIMEOUT_S)
    sessions = []
    try:
        for _ in range(n_children):
            conn, _addr = server.accept()
            conn.settimeout(_CONNECT_TIMEOUT_S)
            sessions.append(conn)
    finally:
        server.close()
    return sessions


def _connect(endpoint: str) -> socket.socket:
    host, port = parse_endpoint(endpoint)
    deadline = time.monotonic() + _CONNECT_TIMEOUT_S
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=5.0)
            sock.settimeout(_CONNECT_TIMEOUT_S)
            return sock
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(_CONNECT_RETRY_S)


def run_node(config: TopologyConfig, endpoints: dict[int, str], node_id: int,
             windows: int, seed: int, confidence: float = 95,
             out=sys.stdout) -> int:
    """Drive one node for ``windows`` logical intervals; returns exit code."""
    node_cfg = next(n for n in config.nodes if n.node_id == node_id)
    node = Node(node_cfg, seed)
    children = [n.node_id for n in config.nodes if n.parent == node_id]
    my_sources = [spec for spec, leaf in config.sources if leaf == node_id]

    sessions = _listen(endpoints[node_id], len(children)) if children else []
    upstream = None
    if node_cfg.parent is not None:
        upstream = _connect(endpoints[node_cfg.parent])
    readers = [FrameReader(s) for s in sessions]

    try:
        for k in range(windows):
            for spec in my_sources:
                rng = rngmod.derive(seed, rngmod.KIND_GENERATE,
                                    spec.source_id, spec.substream, k)
                node.ingest_items(spec.substream, generate(spec, k, rng))
            for reader in readers:
                frame = reader.read_frame()
                if frame is None:
                    print(f"node {node_id}: child session closed early",
                          file=sys.stderr)
                    return 2
                msg_type, payload = frame
                if msg_type == MSG_BATCH:
                    node.on_batch(decode_batch(payload))
            result = node.close_interval()
            if isinstance(result, RootSample):
                for kind in ("SUM", "MEAN", "COUNT"):
                    rec = evaluate_window(result.window_id, result.rows,
                                          confidence)[kind].to_record()
                    print(json.dumps(rec), file=out)
            else:
                upstream.sendall(encode_batch_frame(result))
        return 0
    except TransportError as exc:
        print(f"node {node_id}: protocol error: {exc}; closing session",
              file=sys.stderr)
        return 2
    finally:
        for s in sessions:
            s.close()
        if upstream is not None:
            upstream.close()


def demo_chain_config(rate: int = 600, sampler_budget: int = 60,
                      root_budget: int = 60) -> TopologyConfig:
    """Feeder -> sampler -> root chain used by tests and docs."""
    nodes = (
        NodeConfig(node_id=1, parent=None, budget=root_budget),
        NodeConfig(node_id=2, parent=1, budget=sampler_budget),
        NodeConfig(node_id=3, parent=2, budget=max(rate, 1)),
    )
    sources = ((GeneratorSpec(source_id=101, substream=1,
                              distribution=("gaussian", 1000.0, 50.0),
                              rate=rate), 3),)
    return TopologyConfig(nodes=nodes, sources=sources)

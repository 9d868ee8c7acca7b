"""Experiment runner and process entry points.

``simulate`` sweeps (fraction, seed) pairs over a scenario or a config
file and appends one JSON record per window per approach; ``report``
aggregates such record files; ``node`` runs one tree node as a standalone
process speaking the binary frame protocol over TCP.

Topology config files are YAML; see README for the schema.
"""

from __future__ import annotations

import json
import os
import statistics
import sys

import click
import yaml

from .errors import StrataflowError
from .ingest import ReplaySpec, replay
from .node import NodeConfig
from .procnode import run_node
from .query import SUM
from .simnet import (Edge, GeneratorSpec, ReplayFeed, Simulation,
                     TopologyConfig, scenario_presets)
from .whs import EQUAL, PROPORTIONAL, AllocationPolicy

_EXIT_USAGE = 1
_EXIT_RUNTIME = 2


def _default_seed() -> int:
    return int(os.environ.get("STRATAFLOW_SEED", "0"))


def _parse_int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _policy(name: str) -> AllocationPolicy:
    return AllocationPolicy(EQUAL if name == "equal" else PROPORTIONAL)


def load_topology(path: str, strict_ingest: bool = False) -> \
        tuple[TopologyConfig, dict[int, str]]:
    """Load a YAML topology file; returns (config, endpoints)."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    nodes = tuple(
        NodeConfig(node_id=n["id"], parent=n.get("parent"),
                   interval_length=float(n.get("interval_length", 1.0)),
                   budget=int(n.get("budget", 100)),
                   policy=_policy(n.get("policy", "equal")),
                   workers=int(n.get("workers", 1)),
                   clock_offset=float(n.get("clock_offset", 0.0)))
        for n in doc.get("nodes", []))
    edges = tuple(
        Edge(child=e["child"], parent=e["parent"],
             latency=float(e.get("latency", 0.0)),
             capacity=e.get("capacity"))
        for e in doc.get("edges", []))
    sources = []
    for s in doc.get("sources", []):
        leaf = s["leaf"]
        if "replay" in s:
            r = s["replay"]
            spec = ReplaySpec(
                path=r["path"], key_column=r["key_column"],
                value_column=r["value_column"],
                time_column=r.get("time_column"),
                delimiter=r.get("delimiter", ","),
                header=bool(r.get("header", True)),
                speed=float(r.get("speed", 1.0)),
                max_strata=int(r.get("max_strata", 64)),
                intervals=int(r.get("intervals", 1)),
                interval_length=float(r.get("interval_length", 1.0)),
                strict=strict_ingest)
            result = replay(spec)
            sources.append((ReplayFeed(source_id=s["id"],
                                       events=tuple(result.events),
                                       interval_length=spec.interval_length),
                            leaf))
        else:
            d = s["distribution"]
            if d["kind"] == "gaussian":
                dist = ("gaussian", float(d["mu"]), float(d["sigma"]))
            else:
                dist = ("poisson", float(d["lambda"]))
            sources.append((GeneratorSpec(
                source_id=s["id"], substream=s["substream"],
                distribution=dist, rate=int(s["rate"]),
                interval_length=float(s.get("interval_length", 1.0)),
                offset=float(s.get("offset", 0.0)),
                latency=float(s.get("latency", 0.0))), leaf))
    endpoints = {int(k): v for k, v in (doc.get("endpoints") or {}).items()}
    return (TopologyConfig(nodes=nodes, edges=edges,
                           sources=tuple(sources)), endpoints)


@click.group()
def main():
    """Hierarchical weighted stream sampling experiments."""


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="YAML topology file (overrides --scenario).")
@click.option("--scenario", default="gaussian", show_default=True)
@click.option("--fractions", default="10", show_default=True,
              help="Comma list of sampling fractions in percent.")
@click.option("--seeds", default=None,
              help="Comma list or lo..hi range; default STRATAFLOW_SEED.")
@click.option("--scale", default=0.02, show_default=True, type=float)
@click.option("--windows", default=4, show_default=True, type=int)
@click.option("--output", type=click.Path(), default=None,
              help="Append records here instead of stdout.")
@click.option("--confidence", type=click.Choice(["68", "95", "99.7"]),
              default="95", show_default=True)
@click.option("--policy", type=click.Choice(["equal", "proportional"]),
              default="equal", show_default=True)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--strict-ingest", is_flag=True, default=False)
def cmd_simulate(config_path, scenario, fractions, seeds, scale, windows,
                 output, confidence, policy, workers, strict_ingest):
    """Run WHS + SRS pipelines and the exact oracle; emit JSON records."""
    try:
        fraction_list = [f / 100.0 for f in _parse_int_list(fractions)]
        seed_list = (_parse_int_list(seeds) if seeds
                     else [_default_seed()])
        conf = float(confidence)
        records = []
        for fraction in fraction_list:
            for seed in seed_list:
                if config_path:
                    topo, _ = load_topology(config_path, strict_ingest)
                else:
                    topo = scenario_presets(scenario, fraction, scale=scale,
                                            policy=_policy(policy),
                                            workers=workers)
                sim = Simulation(topo, seed, confidence=conf,
                                 srs_leaf_p=fraction)
                result = sim.run(windows)
                records.extend(_records(scenario, fraction, seed, result))
        text = "".join(json.dumps(r) + "\n" for r in records)
        if output:
            with open(output, "a", encoding="utf-8") as fh:
                fh.write(text)
        else:
            click.echo(text, nl=False)
    except StrataflowError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_USAGE)


def _records(scenario, fraction, seed, result):
    whs_ff = _mean_or_zero(result.metrics.forwarded_fraction.values())
    srs_ff = _mean_or_zero(result.metrics.srs_forwarded_fraction.values())
    for w in result.windows:
        exact = w.exact[SUM]
        yield _record(scenario, fraction, seed, w, "whs",
                      w.whs[SUM].estimate, w.whs[SUM].error_bound, exact,
                      w.accuracy_loss, whs_ff)
        if w.srs is not None:
            yield _record(scenario, fraction, seed, w, "srs",
                          w.srs[SUM].estimate, w.srs[SUM].error_bound, exact,
                          w.srs_accuracy_loss, srs_ff)
        yield _record(scenario, fraction, seed, w, "exact", exact, 0.0,
                      exact, 0.0, 1.0)


def _record(scenario, fraction, seed, w, approach, estimate, bound, exact,
            loss, forwarded):
    return {
        "scenario": scenario, "fraction": fraction, "seed": seed,
        "window": w.window_id, "approach": approach, "estimate": estimate,
        "error_bound": bound, "exact": exact, "accuracy_loss": loss,
        "forwarded_fraction": forwarded, "sim_latency": w.latency,
    }


def _mean_or_zero(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


@main.command("node")
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
@click.option("--node", "node_id", type=int, required=True)
@click.option("--windows", default=4, show_default=True, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--confidence", type=click.Choice(["68", "95", "99.7"]),
              default="95", show_default=True)
@click.option("--output", type=click.Path(), default=None)
def cmd_node(config_path, node_id, windows, seed, confidence, output):
    """Run one node as a long-lived process over TCP frame sessions."""
    try:
        topo, endpoints = load_topology(config_path)
        if node_id not in {n.node_id for n in topo.nodes}:
            click.echo(f"error: node {node_id} not in config", err=True)
            sys.exit(_EXIT_USAGE)
        run_seed = seed if seed is not None else _default_seed()
        if output:
            with open(output, "w", encoding="utf-8") as fh:
                code = run_node(topo, endpoints, node_id, windows, run_seed,
                                float(confidence), out=fh)
        else:
            code = run_node(topo, endpoints, node_id, windows, run_seed,
                            float(confidence))
        sys.exit(code)
    except StrataflowError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_USAGE)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_RUNTIME)


@main.command("report")
@click.argument("records_path", type=click.Path(exists=True))
def cmd_report(records_path):
    """Summarize a records file by (scenario, fraction, approach)."""
    groups: dict[tuple, list[dict]] = {}
    try:
        with open(records_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                key = (rec["scenario"], rec["fraction"], rec["approach"])
                groups.setdefault(key, []).append(rec)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_RUNTIME)
    header = (f"{'scenario':<12} {'fraction':>8} {'approach':>8} "
              f"{'n':>6} {'median_loss':>12} {'mean_loss':>12} "
              f"{'coverage':>9} {'fwd_frac':>9}")
    click.echo(header)
    for key in sorted(groups):
        rows = groups[key]
        losses = [r["accuracy_loss"] for r in rows
                  if r["accuracy_loss"] is not None]
        covered = [abs(r["estimate"] - r["exact"]) <= r["error_bound"]
                   for r in rows]
        ff = [r["forwarded_fraction"] for r in rows]
        click.echo(f"{key[0]:<12} {key[1]:>8.2f} {key[2]:>8} "
                   f"{len(rows):>6} {statistics.median(losses):>12.6f} "
                   f"{statistics.fmean(losses):>12.6f} "
                   f"{sum(covered) / len(covered):>9.3f} "
                   f"{statistics.fmean(ff):>9.3f}")


if __name__ == "__main__":
    main()

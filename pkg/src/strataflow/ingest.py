"""Replay of delimited-text datasets as timed sub-streams.

Rows become items in file order.  The key column picks the stratum: distinct
key values map to substream ids in first-seen order, capped at a configured
maximum with the overflow merged into one "other" stratum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .errors import MalformedRow, MissingColumn
from .model import Item

OTHER_STRATUM = 0


@dataclass
class ReplaySpec:
    path: str
    key_column: str
    value_column: str
    time_column: str | None = None
    delimiter: str = ","
    header: bool = True
    speed: float = 1.0            # divides timestamps; higher = faster replay
    max_strata: int = 64
    intervals: int = 1            # used when there is no time column
    interval_length: float = 1.0
    strict: bool = False
    key_mapping: dict[str, int] = field(default_factory=dict)


@dataclass
class ReplayResult:
    events: list[tuple[float, Item]]
    malformed: int
    key_to_substream: dict[str, int]


def replay(spec: ReplaySpec) -> ReplayResult:
    """Read the file and return (emission time, item) pairs in row order.

    Without a time column, rows are spread uniformly across the configured
    intervals.  Malformed rows are skipped and counted (or raise, in strict
    mode).
    """
    rows = _read_rows(spec)
    n = len(rows)
    key_map: dict[str, int] = dict(spec.key_mapping)
    next_id = max(key_map.values(), default=0) + 1
    events: list[tuple[float, Item]] = []
    malformed = 0
    seqs: dict[int, int] = {}
    t0: float | None = None
    for idx, row in enumerate(rows):
        try:
            value = float(row[spec.value_column])
            if not math.isfinite(value):
                raise ValueError("non-finite value")
            if spec.time_column is not None:
                t_raw = float(row[spec.time_column])
            else:
                t_raw = None
        except (ValueError, TypeError) as exc:
            if spec.strict:
                raise MalformedRow(f"row {idx}: {exc}") from exc
            malformed += 1
            continue
        key = row[spec.key_column]
        if key not in key_map:
            if len(key_map) < spec.max_strata:
                key_map[key] = next_id
                next_id += 1
            else:
                key_map[key] = OTHER_STRATUM
        sub = key_map[key]
        if t_raw is not None:
            if t0 is None:
                t0 = t_raw
            t = (t_raw - t0) / spec.speed
        else:
            span = spec.intervals * spec.interval_length
            t = (idx + 0.5) / max(n, 1) * span
        interval = int(t // spec.interval_length)
        seq = seqs.get(sub, 0)
        seqs[sub] = seq + 1
        events.append((t, Item(substream=sub, value=value, source_seq=seq,
                               source_interval=interval)))
    return ReplayResult(events=events, malformed=malformed,
                        key_to_substream=key_map)


def _read_rows(spec: ReplaySpec) -> list[dict[str, str]]:
    with open(spec.path, newline="", encoding="utf-8") as fh:
        if spec.header:
            reader = csv.DictReader(fh, delimiter=spec.delimiter)
            fields = reader.fieldnames or []
            for col in (spec.key_column, spec.value_column, spec.time_column):
                if col is not None and col not in fields:
                    raise MissingColumn(f"column {col!r} not in {fields}")
            return list(reader)
        plain = csv.reader(fh, delimiter=spec.delimiter)
        rows = []
        for raw in plain:
            rows.append({str(i): v for i, v in enumerate(raw)})
        for col in (spec.key_column, spec.value_column, spec.time_column):
            if col is not None and rows and col not in rows[0]:
                raise MissingColumn(f"column index {col!r} out of range")
        return rows

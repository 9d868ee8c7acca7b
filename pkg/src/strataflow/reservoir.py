"""Single-stream reservoir sampling (algorithm R) and the coin-flip baseline.

The per-item rule: the i-th offered item (1-based) draws j uniformly from
{1..i}; it replaces slot j when j <= capacity, otherwise it is discarded.
Each item therefore ends the interval retained with probability
capacity/i.  One uniform double is consumed per post-fill item, so the
batched and one-at-a-time paths read the same random stream.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InvalidFraction
from .model import Item


class Reservoir:
    """Fixed-capacity uniform sample of the items offered this interval."""

    __slots__ = ("capacity", "slots", "seen")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.slots: list[Item] = []
        self.seen = 0

    def offer(self, item: Item, rng: np.random.Generator) -> None:
        self.offer_many([item], rng)

    def offer_many(self, items: Sequence[Item], rng: np.random.Generator) -> None:
        m = len(items)
        if m == 0:
            return
        fill = min(m, max(0, self.capacity - self.seen))
        if fill:
            self.slots.extend(items[:fill])
        rest = m - fill
        if rest:
            # i = 1-based offer index of each post-fill item
            i = np.arange(self.seen + fill + 1, self.seen + m + 1)
            j = (rng.random(rest) * i).astype(np.int64) + 1
            for k in np.nonzero(j <= self.capacity)[0]:
                self.slots[j[k] - 1] = items[fill + k]
        self.seen += m

    def drain(self) -> tuple[list[Item], int]:
        """Return (retained items, offered count) and reset for the next interval."""
        items, seen = self.slots, self.seen
        self.slots = []
        self.seen = 0
        return items, seen


def srs_pass(items: Sequence[Item], fraction: float,
             rng: np.random.Generator) -> tuple[list[Item], float]:
    """Keep each item independently with probability ``fraction``.

    Returns the kept items (order preserved) and the Horvitz-Thompson
    weight 1/fraction.
    """
    if not 0.0 < fraction <= 1.0:
        raise InvalidFraction(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(items), 1.0
    if not items:
        return [], 1.0 / fraction
    mask = rng.random(len(items)) < fraction
    kept = [it for it, keep in zip(items, mask) if keep]
    return kept, 1.0 / fraction

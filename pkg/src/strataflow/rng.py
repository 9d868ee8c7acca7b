"""Deterministic RNG derivation.

Every random draw in the system comes from a PCG64 generator seeded with
``SeedSequence([run_seed, kind, owner_id, substream_id, interval_id])``.
The same derivation is used by the in-process simulator and by standalone
node processes, so both modes consume identical random streams.
"""

import numpy as np

# Namespaces for independent draw streams.
KIND_GENERATE = 1   # synthetic item generation (owner = source index)
KIND_SAMPLE = 2     # reservoir sampling (owner = node id)
KIND_SRS = 3        # coin-flip baseline (owner = node id)


def derive(run_seed: int, kind: int, owner_id: int, substream_id: int,
           interval_id: int, *extra: int) -> np.random.Generator:
    seq = np.random.SeedSequence(
        [run_seed, kind, owner_id, substream_id, interval_id, *extra])
    return np.random.Generator(np.random.PCG64(seq))

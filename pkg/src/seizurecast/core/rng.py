"""
Seeded RNG streams.

Every random draw in the toolkit comes from a stream addressed by a root
seed plus an index tuple. Streams are built from ``SeedSequence`` spawn keys,
so a stream's output depends only on its address, never on how many other
streams were drawn first or on which thread consumed it.

Monte-Carlo draws use ``stream(root_seed, draw_index)``. Training and
synthesis mix a Purpose tag into the entropy so they can never alias a
draw stream that happens to share the root seed.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    INIT = 1
    SHUFFLE = 2
    WEIGHT_NOISE = 3
    BALANCE = 4
    SYNTH = 5


def stream(root_seed: int, *index: int) -> np.random.Generator:
    """Independent PCG64 generator for ``(root_seed, *index)``."""
    seq = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.PCG64(seq))


def purpose_stream(root_seed: int, purpose: Purpose, *index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(
        entropy=[int(root_seed), int(purpose)],
        spawn_key=tuple(int(i) for i in index),
    )
    return np.random.Generator(np.random.PCG64(seq))

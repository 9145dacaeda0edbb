"""Seedable, splittable random streams.

Every randomized operation derives its generator from a root seed plus a
small integer key path, so any repetition or stage can be reproduced in
isolation without replaying the rest of the pipeline.
"""

import numpy as np

# Stream tags. Keeping them distinct means no two stages ever share a stream.
SYNTH = 0
SPLIT = 1
TEACHER = 2
VOTE = 3
STUDENT = 4
FLIP = 5
SWEEP = 6


def substream(root_seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by (root_seed, *key)."""
    seq = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def derive_seed(root_seed: int, *key: int) -> int:
    """A 64-bit seed derived from (root_seed, *key), stable across runs."""
    seq = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in key))
    state = seq.generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)

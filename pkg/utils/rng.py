"""
Random streams for replications.

Every replication owns a Philox (counter-based) generator seeded from
SeedSequence(master_seed, spawn_key=(index,)), so its stream is a pure
function of (master_seed, index). Streams are reproducible within one numpy
build; no cross-platform bitstream is promised.
"""
import numpy as np

# one uniform each for arrival, sampling and acceptance
DRAWS_PER_ROUND = 3


def replication_generator(master_seed: int, index: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(sequence))


def replication_uniforms(master_seed: int, index: int, horizon: int) -> np.ndarray:
    """All draws of one replication, shape (horizon, 3)"""
    return replication_generator(master_seed, index).random((horizon, DRAWS_PER_ROUND))


def chunk_uniforms(master_seed: int, start: int, stop: int, horizon: int) -> np.ndarray:
    """Draws of replications start..stop-1, shape (stop - start, horizon, 3)"""
    block = np.empty((stop - start, horizon, DRAWS_PER_ROUND))
    for offset, index in enumerate(range(start, stop)):
        block[offset] = replication_uniforms(master_seed, index, horizon)
    return block


def instance_generator(seed: int) -> np.random.Generator:
    """Generator used to draw random instances"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))

"""
Seeded random stream for the slot simulator.

Every slot consumes exactly `DRAWS_PER_SLOT` uniforms, in a fixed order, from
numpy's PCG64 bit generator. Uniforms are produced in blocks for speed; since
`Generator.random` fills its output sequentially from the stream, the values a
slot sees do not depend on the block size.
"""

from typing import List

import numpy as np

# Per-slot draw order.
S_ATTEMPT, R_ATTEMPT, S_TO_D, S_TO_R, ACCEPT, R_TO_D, S_ARRIVAL, R_ARRIVAL = range(8)
DRAWS_PER_SLOT = 8

DEFAULT_BLOCK_SLOTS = 65536


class SlotRng:
    """
    Wrapper around a PCG64 generator handing out one row of uniforms per slot.

    Attributes:
        seed (int): The 64-bit seed the stream was created from.
    """

    def __init__(self, seed: int, block_slots: int = DEFAULT_BLOCK_SLOTS):
        if not 0 <= seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self._seed = seed
        self._generator = np.random.Generator(np.random.PCG64(seed))
        self._block_slots = block_slots
        self._block: List[List[float]] = []
        self._cursor = 0

    @property
    def seed(self) -> int:
        return self._seed

    def next_slot(self) -> List[float]:
        """Returns the uniforms for the next slot, in draw order."""
        if self._cursor == len(self._block):
            self._block = self._generator.random((self._block_slots, DRAWS_PER_SLOT)).tolist()
            self._cursor = 0
        row = self._block[self._cursor]
        self._cursor += 1
        return row

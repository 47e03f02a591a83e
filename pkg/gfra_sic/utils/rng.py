"""
Seeded random streams for one run cell.

A run cell is one (scenario, seed index) pair. Its root SeedSequence is split
into independent children so that drawing more activity frames never shifts
the channel draw, and every method in the cell can replay the same activity
sequence.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CellStreams:
    """Independent seed sequences of a run cell."""

    channel_seq: np.random.SeedSequence
    activity_seq: np.random.SeedSequence
    init_seq: np.random.SeedSequence
    mc_seq: np.random.SeedSequence

    @classmethod
    def from_seed(cls, seed: int, cell_index: int = 0) -> "CellStreams":
        root = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(cell_index),))
        channel_seq, activity_seq, init_seq, mc_seq = root.spawn(4)
        return cls(channel_seq, activity_seq, init_seq, mc_seq)

    # Every call returns a fresh generator positioned at the start of its stream.
    def channel(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.channel_seq))

    def activity(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.activity_seq))

    def init(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.init_seq))

    def monte_carlo(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.mc_seq))

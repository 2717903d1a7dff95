"""BIA transmission block and precoder types."""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class TransmissionBlock(BaseModel):
    """A BIA supersymbol for (L, G).

    Slots, groups, modes and alignment blocks are all 0-based.
    ``mode_schedule[g, n]`` is the reception mode group g's users select in
    slot n. ``alignment_blocks[g][z]`` lists the L slots of group g's
    alignment block z, ordered by the mode the group uses in them.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    num_modes: int = Field(ge=2, description="L")
    num_groups: int = Field(ge=1, description="G")
    num_slots: int
    subblock1_len: int
    subblock2_len: int
    alignment_blocks: List[List[Tuple[int, ...]]]
    mode_schedule: np.ndarray

    @property
    def blocks_per_group(self) -> int:
        return (self.num_modes - 1) ** (self.num_groups - 1)

    def groups_in_slot(self, slot: int) -> List[int]:
        """Groups whose alignment blocks contain *slot*."""
        return [
            g
            for g, blocks in enumerate(self.alignment_blocks)
            if any(slot in b for b in blocks)
        ]


class PrecodingMatrix(BaseModel):
    """Block-sparse precoder of one group.

    Stored as the (slot, block) positions of its L x L identity blocks.
    """

    model_config = ConfigDict(frozen=True)

    group: int
    num_modes: int
    num_slots: int
    num_blocks: int
    placements: List[Tuple[int, int]]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.num_modes * self.num_slots, self.num_modes * self.num_blocks)

    def support(self) -> np.ndarray:
        """(num_slots, num_blocks) 0/1 pattern of identity blocks."""
        pattern = np.zeros((self.num_slots, self.num_blocks), dtype=int)
        for slot, block in self.placements:
            pattern[slot, block] = 1
        return pattern

    def to_dense(self) -> np.ndarray:
        return np.kron(self.support(), np.eye(self.num_modes))

"""Blind interference alignment block construction and verification.

The block for (L, G) has two parts:
    - sub-block 1: one slot per mode tuple a in {0..L-2}^G, group g uses a_g
    - sub-block 2: per group g, one slot per tuple ζ in {0..L-2}^(G-1) of
      the other groups' modes; group g switches to mode L-1 there

Group g's alignment block ζ is the L-1 sub-block-1 slots whose other
coordinates equal ζ plus the matching sub-block-2 slot.
"""

import itertools
import logging
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from app.common.cache import cache_service
from app.common.errors import BlockSizeError, DomainError
from app.common.reports import Report, Violation, build_report

from .schemas import PrecodingMatrix, TransmissionBlock

logger = logging.getLogger(__name__)

DEFAULT_MAX_SLOTS = 1_000_000

cache_service.register("bia_blocks", maxsize=64)


def block_size(L: int, G: int) -> int:
    """Number of slots (L-1)^G + G(L-1)^(G-1), exact integer arithmetic."""
    return (L - 1) ** G + G * (L - 1) ** (G - 1)


def alignment_ratio(L: int, G: int) -> Fraction:
    """Fraction of the block carrying each group's data: 1/(L+G-1)."""
    if L < 2 or G < 1:
        raise DomainError(f"alignment ratio needs L >= 2 and G >= 1, got L={L}, G={G}")
    return Fraction(1, L + G - 1)


def build_block(L: int, G: int, max_slots: int = DEFAULT_MAX_SLOTS) -> TransmissionBlock:
    """Construct (or fetch from cache) the transmission block for (L, G).

    Raises:
        DomainError: If L < 2 or G < 1.
        BlockSizeError: If the block would exceed *max_slots*.
    """
    if L < 2:
        raise DomainError(f"BIA needs at least two reception modes, got L={L}")
    if G < 1:
        raise DomainError(f"BIA needs at least one group, got G={G}")
    num_slots = block_size(L, G)
    if num_slots > max_slots:
        raise BlockSizeError(num_slots, max_slots)

    def _build() -> TransmissionBlock:
        block = _construct(L, G, num_slots)
        logger.debug(f"Built BIA block L={L} G={G}: {num_slots} slots")
        return block

    return cache_service.get_or_build("bia_blocks", (L, G), _build)


def _construct(L: int, G: int, num_slots: int) -> TransmissionBlock:
    base = L - 1
    sub1 = base**G
    per_group = base ** (G - 1)

    schedule = np.zeros((G, num_slots), dtype=int)
    sub1_index = {}
    for slot, a in enumerate(itertools.product(range(base), repeat=G)):
        sub1_index[a] = slot
        schedule[:, slot] = a

    alignment_blocks: List[List[Tuple[int, ...]]] = []
    for g in range(G):
        blocks = []
        for z, zeta in enumerate(itertools.product(range(base), repeat=G - 1)):
            completion = sub1 + g * per_group + z
            others = list(zeta)
            schedule[:, completion] = others[:g] + [L - 1] + others[g:]
            slots = [sub1_index[tuple(others[:g] + [mode] + others[g:])] for mode in range(base)]
            blocks.append(tuple(slots + [completion]))
        alignment_blocks.append(blocks)

    schedule.setflags(write=False)
    return TransmissionBlock(
        num_modes=L,
        num_groups=G,
        num_slots=num_slots,
        subblock1_len=sub1,
        subblock2_len=G * per_group,
        alignment_blocks=alignment_blocks,
        mode_schedule=schedule,
    )


def precoding_matrix(block: TransmissionBlock, g: int) -> PrecodingMatrix:
    """Precoder of group *g*: identity at (slot, ζ) for every slot of block ζ."""
    if not 0 <= g < block.num_groups:
        raise IndexError(f"group {g} out of range for G={block.num_groups}")
    placements = sorted(
        (slot, z) for z, slots in enumerate(block.alignment_blocks[g]) for slot in slots
    )
    return PrecodingMatrix(
        group=g,
        num_modes=block.num_modes,
        num_slots=block.num_slots,
        num_blocks=len(block.alignment_blocks[g]),
        placements=placements,
    )


def schedule_rows(block: TransmissionBlock) -> List[Tuple[int, int, int]]:
    """(slot, group, mode) rows for every slot a group transmits in."""
    rows = []
    for slot in range(block.num_slots):
        for g in block.groups_in_slot(slot):
            rows.append((slot, g, int(block.mode_schedule[g, slot])))
    return rows


# ==================== Verification ====================


def verify_decodability(block: TransmissionBlock) -> Report:
    """Every alignment block spans L slots with pairwise distinct owner modes."""
    violations = []
    for g, blocks in enumerate(block.alignment_blocks):
        for z, slots in enumerate(blocks):
            modes = [int(block.mode_schedule[g, s]) for s in slots]
            if len(slots) != block.num_modes or len(set(modes)) != block.num_modes:
                violations.append(
                    Violation(
                        rule="decodability",
                        message=f"group {g} block {z} modes {modes} are not L distinct values",
                        location={"group": g, "block": z, "slots": list(slots)},
                    )
                )
    data = {"num_slots": block.num_slots, "blocks_checked": sum(len(b) for b in block.alignment_blocks)}
    return build_report(violations, data=data, subject="decodability")


def verify_alignment(block: TransmissionBlock) -> Report:
    """Over each alignment block of g, every other group keeps one mode."""
    violations = []
    for g, blocks in enumerate(block.alignment_blocks):
        for z, slots in enumerate(blocks):
            for other in range(block.num_groups):
                if other == g:
                    continue
                modes = {int(block.mode_schedule[other, s]) for s in slots}
                if len(modes) != 1:
                    violations.append(
                        Violation(
                            rule="alignment",
                            message=f"group {other} switches modes {sorted(modes)} inside group {g} block {z}",
                            location={"group": g, "block": z, "other_group": other, "slots": list(slots)},
                        )
                    )
    data = {"num_slots": block.num_slots, "blocks_checked": sum(len(b) for b in block.alignment_blocks)}
    return build_report(violations, data=data, subject="alignment")

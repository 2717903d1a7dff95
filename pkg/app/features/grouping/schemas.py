"""Grouping types: distance weights and weak-strong pairings."""

from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class WeightMatrix(BaseModel):
    """Planar distances, rows = strong users, columns = weak users."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    weights: np.ndarray
    strong_ids: List[int]
    weak_ids: List[int]
    coordinates: Dict[int, Tuple[float, float]] = Field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.strong_ids), len(self.weak_ids))


class GroupAssignment(BaseModel):
    """G pairs (weak id, strong id); group g is ``pairs[g]``."""

    model_config = ConfigDict(frozen=True)

    pairs: List[Tuple[int, int]]
    weights: List[float] = Field(default_factory=list)

    @property
    def num_groups(self) -> int:
        return len(self.pairs)

    @property
    def total_weight(self) -> float:
        return float(sum(self.weights))

    def association(self, weak_ids: List[int], strong_ids: List[int]) -> np.ndarray:
        """x[i, j] = 1 iff weak_ids[i] is paired with strong_ids[j]."""
        x = np.zeros((len(weak_ids), len(strong_ids)), dtype=int)
        w_index = {u: n for n, u in enumerate(weak_ids)}
        s_index = {u: n for n, u in enumerate(strong_ids)}
        for i, j in self.pairs:
            x[w_index[i], s_index[j]] = 1
        return x

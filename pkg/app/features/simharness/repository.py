"""CSV/JSON persistence of harness results.

All writers go through app.common.storage, so output is atomic and the
float format is fixed; -inf table cells are written as empty cells.
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from app.common.storage import write_frame, write_json
from app.features.grouping.schemas import GroupAssignment
from app.features.grouping.service import assignment_rows
from app.features.power_alloc.schemas import AllocationTables

from .schemas import MetricsRecord, SweepRow

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _finite_or_nan(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float)
    out[~np.isfinite(out)] = np.nan
    return out


class ResultRepository:
    """Writes sweep rows, drop records, allocation tables and pairings."""

    SWEEP_COLUMNS = ["axis", "scheme", "mean_rate", "stderr", "jain", "ee", "groups", "t_star"]
    ASSIGNMENT_COLUMNS = ["group", "weak_id", "strong_id", "weight"]

    def sweep_frame(self, rows: Sequence[SweepRow]) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in rows], columns=self.SWEEP_COLUMNS)

    def save_sweep(self, rows: Sequence[SweepRow], path: PathLike) -> Path:
        logger.info(f"Writing {len(rows)} sweep rows to {path}")
        return write_frame(self.sweep_frame(rows), path)

    def records_frame(self, records: Sequence[MetricsRecord]) -> pd.DataFrame:
        frame = pd.DataFrame([r.model_dump() for r in records])
        if not frame.empty:
            frame["flags"] = frame["flags"].map(lambda f: ";".join(f))
        return frame

    def save_records(self, records: Sequence[MetricsRecord], path: PathLike) -> Path:
        return write_frame(self.records_frame(records), path)

    def save_assignment(self, assignment: GroupAssignment, path: PathLike) -> Path:
        frame = pd.DataFrame(assignment_rows(assignment), columns=self.ASSIGNMENT_COLUMNS)
        return write_frame(frame, path)

    def table_frames(self, tables: AllocationTables) -> Dict[str, pd.DataFrame]:
        """R as (groups x level); Tgt and Pw as (user x level) for the all-groups slice."""
        levels = [f"t{t}" for t in range(1, tables.levels.T + 1)]
        R = pd.DataFrame(_finite_or_nan(tables.R), columns=levels)
        R.insert(0, "groups", range(1, tables.num_groups + 1))
        frames = {"R": R}
        for name, matrix in (("Tgt", tables.Tgt), ("Pw", tables.Pw)):
            frame = pd.DataFrame(_finite_or_nan(matrix), columns=levels)
            frame.insert(0, "user_id", tables.user_ids)
            frames[name] = frame
        return frames

    def save_tables(self, tables: AllocationTables, directory: PathLike, prefix: str = "allocation") -> List[Path]:
        """Three CSV tables plus a JSON summary carrying the seed and selection."""
        directory = Path(directory)
        paths = [
            write_frame(frame, directory / f"{prefix}_{name}.csv")
            for name, frame in self.table_frames(tables).items()
        ]
        summary = {
            "seed": tables.seed,
            "order": tables.order,
            "levels": tables.levels.levels,
            "p_max": tables.levels.p_max,
            "selected": list(tables.selected) if tables.selected else None,
            "best_rate": self._best_rate(tables),
        }
        paths.append(write_json(summary, directory / f"{prefix}_summary.json"))
        return paths

    @staticmethod
    def _best_rate(tables: AllocationTables):
        if tables.selected is None:
            return None
        rate = float(tables.R_full[tables.selected[0] - 1, tables.selected[1] - 1])
        return rate if math.isfinite(rate) else None

"""Export of BIA slot schedules."""

from pathlib import Path
from typing import Union

import pandas as pd

from app.common.storage import write_frame

from .schemas import TransmissionBlock
from .service import schedule_rows


class ScheduleRepository:
    """Writes (slot, group, mode) schedules, 0-based, one row per transmitting group."""

    COLUMNS = ["slot", "group", "mode"]

    def to_frame(self, block: TransmissionBlock) -> pd.DataFrame:
        return pd.DataFrame(schedule_rows(block), columns=self.COLUMNS)

    def save(self, block: TransmissionBlock, path: Union[str, Path]) -> Path:
        return write_frame(self.to_frame(block), path)

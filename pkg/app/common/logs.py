"""Logging bootstrap shared by the CLI and the test-suite."""

import logging
from typing import Optional

from rich.logging import RichHandler

from app.common.config import settings

_configured = False


def configure_logging(level: Optional[str] = None) -> None:
    """Install a rich handler on the root logger.

    Idempotent: later calls only adjust the level.

    Args:
        level: Level name such as "INFO". Falls back to ``settings.LOG_LEVEL``.
    """
    global _configured
    resolved = (level or settings.LOG_LEVEL).upper()
    root = logging.getLogger()
    if not _configured:
        handler = RichHandler(rich_tracebacks=False, show_path=False)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
        _configured = True
    root.setLevel(resolved)

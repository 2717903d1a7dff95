"""Atomic file output for result tables and documents.

Writers stage into a temporary file next to the target and replace the
target only when the write succeeds, so a failed run never leaves a
half-written CSV behind.

Usage:
    with atomic_path(out) as tmp:
        frame.to_csv(tmp, index=False)
"""

import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Union

import pandas as pd

from app.common.errors import PersistenceError

PathLike = Union[str, Path]

# Fixed float format keeps repeated runs byte-identical.
FLOAT_FORMAT = "%.12g"


@contextmanager
def atomic_path(target: PathLike) -> Iterator[Path]:
    """Yield a staging path; move it onto *target* on success, discard it on error.

    Raises:
        PersistenceError: If the directory cannot be created or the file written.
    """
    target = Path(target)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, staging = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
        os.close(fd)
    except OSError as e:
        raise PersistenceError(f"cannot prepare {target}: {e}", path=str(target)) from e

    staging_path = Path(staging)
    try:
        yield staging_path
        os.replace(staging_path, target)
    except OSError as e:
        raise PersistenceError(f"cannot write {target}: {e}", path=str(target)) from e
    finally:
        if staging_path.exists():
            staging_path.unlink()


def write_frame(frame: pd.DataFrame, target: PathLike) -> Path:
    """Write a DataFrame as CSV with the deterministic float format.

    NaN cells are written empty.
    """
    with atomic_path(target) as tmp:
        frame.to_csv(tmp, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return Path(target)


def write_json(document: Any, target: PathLike) -> Path:
    with atomic_path(target) as tmp:
        tmp.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return Path(target)


def read_text(source: PathLike) -> str:
    """Read a UTF-8 document, wrapping I/O failures with the path."""
    try:
        return Path(source).read_text(encoding="utf-8")
    except OSError as e:
        raise PersistenceError(f"cannot read {source}: {e}", path=str(source)) from e

"""
===============================================================================
LOGGING HELPERS - CONSOLE SETUP AND LINE-DELIMITED RECORDS
===============================================================================

Purpose:
    - configure_logging(): one-time basicConfig for CLI runs
    - JsonLinesWriter: appends one JSON object per line to a progress file and
      echoes each record through a named logger

Notes:
    - Library modules never call basicConfig themselves; they only fetch a
      named logger (logging.getLogger("Trainer"), "SceneBuilder", ...).
    - Records are written with sorted keys; non-finite floats become null.

===============================================================================
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional


LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"


def configure_logging(level: str = "INFO") -> None:
    """Configure root logging once for command-line runs."""
    numeric = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric, int):
        numeric = logging.INFO
    logging.basicConfig(level=numeric, format=LOG_FORMAT)


def _jsonable(value: Any) -> Any:
    # numpy scalars and non-finite floats are not valid JSON as-is
    if hasattr(value, "item") and callable(value.item):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class JsonLinesWriter:
    """Append-only JSON-lines sink used for training progress."""

    def __init__(self, path: Optional[Path], logger_name: str = "Trainer"):
        self.path = Path(path) if path is not None else None
        self.logger = logging.getLogger(logger_name)
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            # start a fresh stream for every run
            self.path.write_text("", encoding="utf-8")

    def write(self, record: Dict[str, Any]) -> str:
        line = json.dumps({k: _jsonable(v) for k, v in record.items()}, sort_keys=True)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        self.logger.info("%s", line)
        return line

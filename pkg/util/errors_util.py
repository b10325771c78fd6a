"""
===============================================================================
ERRORS - PROJECT EXCEPTION KINDS
===============================================================================

Purpose:
    One place for every failure kind the pipeline raises. Each class extends
    the matching builtin so callers that only know about ValueError,
    RuntimeError or FileNotFoundError still catch them.

Notes:
    - The CLI catches TrajPredError and turns it into a one-line diagnostic.
    - Messages always carry the offending value (shape, path, line, label).

===============================================================================
"""


class TrajPredError(Exception):
    """Base class for all errors raised by this package."""


# =============================================================================
# INPUT / CONTRACT ERRORS (ValueError family)
# =============================================================================
class DimensionError(TrajPredError, ValueError):
    pass


class ConfigError(TrajPredError, ValueError):
    pass


class ContractError(TrajPredError, ValueError):
    pass


class ParseError(TrajPredError, ValueError):
    def __init__(self, message: str, *, path=None, line: int = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class DataError(TrajPredError, ValueError):
    pass


class CropError(TrajPredError, ValueError):
    pass


# =============================================================================
# RUNTIME ERRORS
# =============================================================================
class NumericError(TrajPredError, RuntimeError):
    pass


class TrainingError(TrajPredError, RuntimeError):
    pass


class DeterminismError(TrajPredError, RuntimeError):
    pass


class EmptyContextError(TrajPredError, RuntimeError):
    pass


class EmptyMetricError(TrajPredError, RuntimeError):
    pass


class LoadError(TrajPredError, RuntimeError):
    pass


class PathError(TrajPredError, FileNotFoundError):
    def __init__(self, missing):
        if isinstance(missing, (str, bytes)) or not hasattr(missing, "__iter__"):
            missing = [missing]
        self.missing = [str(m) for m in missing]
        super().__init__("missing path(s): " + ", ".join(self.missing))

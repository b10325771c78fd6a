"""
Whitespace-delimited annotation files -> pandas DataFrame with source line numbers.

Shared by the ETH/UCY and SDD parsers. Blank lines and '#' comments are
skipped; every kept row carries its 1-based line number in the "line" column so
malformed values can be reported precisely.
"""

import io
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from util.errors_util import ParseError, PathError

_OVERFLOW = "__overflow__"
_TOKENIZER_LINE = re.compile(r"line (\d+)")


def read_annotation_table(path, columns: Sequence[str], *, numeric: Iterable[str] = ()) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise PathError(path)

    lines = pd.Series(path.read_text(encoding="utf-8").splitlines(), dtype=object).str.strip()
    kept = lines[(lines != "") & ~lines.str.startswith("#")]
    line_numbers = kept.index.to_numpy(dtype=np.int64) + 1

    names = list(columns) + [_OVERFLOW]
    if kept.empty:
        df = pd.DataFrame(columns=names, dtype=object)
    else:
        try:
            df = pd.read_csv(
                io.StringIO("\n".join(kept)),
                sep=r"\s+",
                header=None,
                names=names,
                dtype=str,
                keep_default_na=False,
                skip_blank_lines=False,
            )
        except pd.errors.ParserError as exc:
            # the tokenizer counts rows of the filtered buffer
            m = _TOKENIZER_LINE.search(str(exc))
            line = int(line_numbers[int(m.group(1)) - 1]) if m else None
            raise ParseError(f"expected {len(columns)} fields: {exc}", path=path, line=line) from exc

    counts = df.notna().sum(axis=1).to_numpy()
    bad = counts != len(columns)
    if bad.any():
        row = int(np.argmax(bad))
        raise ParseError(
            f"expected {len(columns)} fields, got {int(counts[row])}", path=path, line=int(line_numbers[row])
        )
    df = df.drop(columns=_OVERFLOW)
    df.insert(0, "line", line_numbers)

    for col in numeric:
        values = pd.to_numeric(df[col], errors="coerce").astype(np.float64)
        bad = ~np.isfinite(values.to_numpy())
        if bad.any():
            row = int(np.argmax(bad))
            raise ParseError(
                f"field '{col}' is not a finite number: {df[col].iloc[row]!r}",
                path=path,
                line=int(df["line"].iloc[row]),
            )
        df[col] = values
    return df


def require_integral(df: pd.DataFrame, col: str, path) -> None:
    """Raise ParseError on the first non-integral value of a numeric column."""
    values = df[col].to_numpy()
    bad = values != np.round(values)
    if bad.any():
        row = int(np.argmax(bad))
        raise ParseError(
            f"field '{col}' must be an integer, got {values[row]!r}",
            path=path,
            line=int(df["line"].iloc[row]),
        )

"""Delimited-text writing with configurable delimiter and decimal mark."""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

import numpy as np

DELIMITERS = {"comma": ",", "semicolon": ";", ",": ",", ";": ";"}
DECIMAL_MARKS = {"period": ".", "comma": ",", ".": ".", ",": ","}


def resolve_format(delimiter: str = ",", decimal_mark: str = ".") -> tuple[str, str]:
    try:
        return DELIMITERS[delimiter], DECIMAL_MARKS[decimal_mark]
    except KeyError as exc:
        raise ValueError(f"unsupported delimiter/decimal mark {exc.args[0]!r}") from None


def format_number(x, decimal_mark: str = ".") -> str:
    """Shortest round-tripping text for ``x``; integers stay integral."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    s = repr(float(x))
    if decimal_mark != ".":
        s = s.replace(".", decimal_mark)
    return s


def format_rows(header: Sequence[str], columns: Sequence[np.ndarray],
                delimiter: str = ",", decimal_mark: str = ".") -> str:
    """Render columns as delimited text, quoting cells that contain the delimiter."""
    delimiter, decimal_mark = resolve_format(delimiter, decimal_mark)
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    n = len(columns[0]) if columns else 0
    cols = [np.asarray(c) for c in columns]
    ints = [np.issubdtype(c.dtype, np.integer) for c in cols]
    for i in range(n):
        w.writerow([str(int(c[i])) if is_int else format_number(float(c[i]), decimal_mark)
                    for c, is_int in zip(cols, ints)])
    return buf.getvalue()


def write_table(path, header: Sequence[str], columns: Sequence[np.ndarray],
                delimiter: str = ",", decimal_mark: str = ".") -> None:
    text = format_rows(header, columns, delimiter, decimal_mark)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def rows_from_text(text: str, delimiter: str) -> Iterable[list[str]]:
    return csv.reader(io.StringIO(text), delimiter=delimiter)

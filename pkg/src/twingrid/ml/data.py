"""Ingestion, cleaning, labeling, scaling and exploratory statistics."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from ..errors import DegenerateDataError, IngestionError, SchemaError, ShapeError
from ..tables import resolve_format

NON_FEATURE_COLUMNS = ("t_ms", "label")


@dataclass(eq=False)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    t_ms: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ShapeError(f"X must be 2-D, got shape {self.X.shape}")
        if len(self.y) != len(self.X):
            raise ShapeError(f"{len(self.X)} rows but {len(self.y)} labels")
        if self.X.shape[1] != len(self.feature_names):
            raise ShapeError(f"{self.X.shape[1]} columns but {len(self.feature_names)} feature names")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("dataset contains NaN or Inf")
        if len(self.y) and not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("labels must be 0 or 1")
        self.feature_names = list(self.feature_names)

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        t = None if self.t_ms is None else self.t_ms[idx]
        return LabeledDataset(self.X[idx], self.y[idx], self.feature_names, t)

    def select(self, names: Sequence[str]) -> "LabeledDataset":
        cols = [self.feature_names.index(n) for n in names]
        return LabeledDataset(self.X[:, cols], self.y, list(names), self.t_ms)

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.y.sum())
        return len(self.y) - n1, n1


# ---------------------------------------------------------------------------
# ingestion


@dataclass
class RawTable:
    header: list[str]
    rows: list[list[str]]


@dataclass
class Table:
    """Numeric table produced by :func:`clean_table`."""

    header: list[str]
    values: np.ndarray
    dropped: int = 0

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.header.index(name)]


def read_raw(text: str, delimiter: str = ",") -> RawTable:
    delimiter, _ = resolve_format(delimiter, ".")
    if not text.strip():
        raise IngestionError("empty input")
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    return RawTable(header, rows)


def sniff_format(text: str) -> tuple[str, str]:
    """Guess (delimiter, decimal mark) from the header and first data row."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise IngestionError("empty input")
    sample = lines[1] if len(lines) > 1 else lines[0]
    delimiter = ";" if sample.count(";") >= max(1, sample.count(",") // 2) and ";" in sample else ","
    if delimiter == ";":
        return ";", "," if "," in sample else "."
    # with comma delimiters a comma decimal mark only survives inside quotes
    return ",", "," if '"' in sample and any("," in c for c in next(csv.reader([sample]))) else "."


def _parse_cell(cell: str, decimal_mark: str) -> float:
    s = cell.strip()
    if decimal_mark == ",":
        s = s.replace(",", ".")
    return float(s)


def clean_table(raw: RawTable | str, delimiter: str = ",", decimal_mark: str = ".") -> Table:
    """Parse cells to float64, dropping rows with any missing or invalid entry."""
    delimiter, decimal_mark = resolve_format(delimiter, decimal_mark)
    if isinstance(raw, str):
        raw = read_raw(raw, delimiter)
    ncol = len(raw.header)
    if ncol == 0 or not any(raw.header):
        raise IngestionError("missing header row")
    kept = []
    dropped = 0
    for row in raw.rows:
        if len(row) != ncol:
            dropped += 1
            continue
        try:
            vals = [_parse_cell(c, decimal_mark) for c in row]
        except ValueError:
            dropped += 1
            continue
        if not all(np.isfinite(vals)):
            dropped += 1
            continue
        kept.append(vals)
    if raw.rows and not kept:
        raise DegenerateDataError(f"all {dropped} rows were dropped during cleaning")
    values = np.array(kept, dtype=np.float64).reshape(len(kept), ncol)
    return Table(list(raw.header), values, dropped)


def load_table(path, delimiter: str | None = None, decimal_mark: str | None = None) -> Table:
    """Read and clean a delimited file, sniffing the format when not given."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}") from exc
    if not text.strip():
        raise IngestionError(f"{path}: empty file")
    if delimiter is None or decimal_mark is None:
        d, m = sniff_format(text)
        delimiter = delimiter or d
        decimal_mark = decimal_mark or m
    return clean_table(text, delimiter, decimal_mark)


def table_to_dataset(table: Table, labels: np.ndarray | None = None) -> LabeledDataset:
    """Split a cleaned table into features, labels and timestamps."""
    names = [h for h in table.header if h not in NON_FEATURE_COLUMNS]
    X = np.column_stack([table.column(n) for n in names]) if names else np.empty((len(table.values), 0))
    if labels is None:
        if "label" not in table.header:
            raise SchemaError("table has no label column")
        labels = table.column("label")
    t = table.column("t_ms").astype(np.int64) if "t_ms" in table.header else None
    return LabeledDataset(X.reshape(len(table.values), len(names)), np.asarray(labels).astype(np.int64),
                          names, t)


def load_dataset(path, delimiter: str | None = None, decimal_mark: str | None = None) -> LabeledDataset:
    return table_to_dataset(load_table(path, delimiter, decimal_mark))


def label_and_merge(normal: Table, attack: Table) -> LabeledDataset:
    """Label normal rows 0 and attack rows 1, then concatenate them."""
    if list(normal.header) != list(attack.header):
        raise SchemaError(f"header mismatch: {normal.header} vs {attack.header}")
    merged = Table(list(normal.header), np.vstack([normal.values, attack.values]))
    y = np.concatenate([np.zeros(len(normal.values), np.int64), np.ones(len(attack.values), np.int64)])
    return table_to_dataset(merged, labels=y)


# ---------------------------------------------------------------------------
# z-score


@dataclass(frozen=True, eq=False)
class ScalerParams:
    mu: np.ndarray
    sigma: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return apply_zscore(self, X)

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "sigma": self.sigma.tolist()}

    @classmethod
    def from_dict(cls, d) -> "ScalerParams":
        return cls(np.asarray(d["mu"], float), np.asarray(d["sigma"], float))


def zscore(X: np.ndarray) -> ScalerParams:
    """Fit per-feature mean and sample (n-1) standard deviation."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise ShapeError("z-score fitting needs a 2-D array with at least two rows")
    mu = X.mean(axis=0)
    sigma = X.std(axis=0, ddof=1)
    const = sigma == 0
    if np.any(const):
        warnings.warn(f"constant features {np.flatnonzero(const).tolist()} map to z=0",
                      RuntimeWarning, stacklevel=2)
    return ScalerParams(mu, sigma)


def apply_zscore(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(params.mu):
        raise ShapeError(f"scaler fitted on {len(params.mu)} features, got {X.shape[-1]}")
    safe = np.where(params.sigma == 0, 1.0, params.sigma)
    Z = (X - params.mu) / safe
    if np.any(params.sigma == 0):
        Z[..., params.sigma == 0] = 0.0
    return Z


# ---------------------------------------------------------------------------
# exploratory analysis


@dataclass
class FeatureStats:
    name: str
    mean: float
    median: float
    variance: float
    iqr: float

    @property
    def constant(self) -> bool:
        return self.variance == 0.0


@dataclass
class EdaReport:
    stats: list[FeatureStats]
    correlation: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    @property
    def constant_features(self) -> list[str]:
        return [s.name for s in self.stats if s.constant]

    def stats_table(self) -> tuple[list[str], list[np.ndarray]]:
        header = ["feature", "mean", "median", "variance", "iqr", "constant"]
        return header, [np.array([s.name for s in self.stats]),
                        np.array([s.mean for s in self.stats]),
                        np.array([s.median for s in self.stats]),
                        np.array([s.variance for s in self.stats]),
                        np.array([s.iqr for s in self.stats]),
                        np.array([int(s.constant) for s in self.stats])]


def pearson_matrix(X: np.ndarray) -> np.ndarray:
    """Pearson correlation; rows/columns of constant features are 0 off the diagonal."""
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    norm = np.sqrt(np.sum(Xc * Xc, axis=0))
    safe = np.where(norm == 0, 1.0, norm)
    U = Xc / safe
    R = U.T @ U
    R[norm == 0, :] = 0.0
    R[:, norm == 0] = 0.0
    R = np.clip(R, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return R


def eda_report(data: LabeledDataset) -> EdaReport:
    X = data.X
    if len(X) < 2:
        raise ShapeError("EDA needs at least two rows")
    q1, med, q3 = np.percentile(X, [25, 50, 75], axis=0)
    var = X.var(axis=0, ddof=1)
    stats = [FeatureStats(n, float(m), float(md), float(v), float(b - a))
             for n, m, md, v, a, b in zip(data.feature_names, X.mean(axis=0), med, var, q1, q3)]
    return EdaReport(stats, pearson_matrix(X), list(data.feature_names))


def svg_timeseries(t: np.ndarray, series: dict[str, np.ndarray], width: int = 900,
                   panel_height: int = 120, max_points: int = 2000) -> str:
    """Self-contained SVG with one stacked panel and one polyline per channel."""
    t = np.asarray(t, dtype=float)
    step = max(1, len(t) // max_points)
    idx = np.arange(0, len(t), step)
    margin = 60
    height = panel_height * max(1, len(series)) + 20
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">']
    t0, t1 = (t[idx[0]], t[idx[-1]]) if len(idx) else (0.0, 1.0)
    tspan = (t1 - t0) or 1.0
    for k, (name, y) in enumerate(series.items()):
        y = np.asarray(y, dtype=float)[idx]
        top = 10 + k * panel_height
        lo, hi = (float(y.min()), float(y.max())) if len(y) else (0.0, 1.0)
        span = (hi - lo) or 1.0
        xs = margin + (t[idx] - t0) / tspan * (width - margin - 10)
        ys = top + panel_height - 15 - (y - lo) / span * (panel_height - 30)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
        parts.append(f'<text x="4" y="{top + 14}" font-size="11">{escape(name)}</text>')
        parts.append(f'<polyline fill="none" stroke="black" stroke-width="0.8" points="{pts}"/>')
    parts.append("</svg>")
    return "\n".join(parts)

"""OHLC ingestion, mid-price and rolling features, standard scaling, splits."""
from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

REQUIRED_COLUMNS = ("date", "open", "high", "low", "close")
NUMERIC_COLUMNS = ("open", "high", "low", "close")
_MISSING = {"", "na", "n/a", "nan", "null", "none", "-"}
STD_FLOOR = 1e-12


class DataError(ValueError):
    """Raised for malformed market data or invalid preprocessing requests."""


@dataclass(frozen=True)
class OhlcBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        for name in NUMERIC_COLUMNS:
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise DataError(f"bar {self.date}: {name}={v!r} must be finite and > 0")
        if self.low > self.high:
            raise DataError(f"bar {self.date}: low {self.low} > high {self.high}")

    @property
    def mid(self) -> float:
        return (self.high + self.low) / 2


@dataclass(frozen=True)
class PriceSeries:
    symbol: str
    bars: tuple[OhlcBar, ...]
    mid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bars = tuple(self.bars)
        if not bars:
            raise DataError(f"{self.symbol}: series must contain at least one bar")
        for prev, cur in zip(bars, bars[1:]):
            if cur.date <= prev.date:
                raise DataError(
                    f"{self.symbol}: dates must be strictly increasing ({prev.date} then {cur.date})"
                )
        mid = np.array([b.mid for b in bars], dtype=np.float64)
        mid.setflags(write=False)
        object.__setattr__(self, "bars", bars)
        object.__setattr__(self, "mid", mid)

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def dates(self) -> list[dt.date]:
        return [b.date for b in self.bars]

    def column(self, name: str) -> np.ndarray:
        if name == "mid":
            return self.mid
        return np.array([getattr(b, name) for b in self.bars], dtype=np.float64)

    def slice(self, start: int | None = None, stop: int | None = None) -> "PriceSeries":
        return PriceSeries(self.symbol, self.bars[start:stop])

    def to_dict(self) -> dict:
        return {
            "symbol": self.symbol,
            "bars": [
                {
                    "date": b.date.isoformat(),
                    "open": b.open,
                    "high": b.high,
                    "low": b.low,
                    "close": b.close,
                    "mid": b.mid,
                }
                for b in self.bars
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "PriceSeries":
        try:
            bars = [
                OhlcBar(
                    dt.date.fromisoformat(b["date"]),
                    float(b["open"]),
                    float(b["high"]),
                    float(b["low"]),
                    float(b["close"]),
                )
                for b in data["bars"]
            ]
            return cls(str(data["symbol"]), tuple(bars))
        except KeyError as exc:
            raise DataError(f"series JSON missing field {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "PriceSeries":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FeatureMatrix:
    names: tuple[str, ...]
    rows: np.ndarray  # (n_bars, n_features)
    valid_from: int

    def valid_rows(self) -> np.ndarray:
        return self.rows[self.valid_from:]


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.mean)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ScalerParams":
        return cls(np.asarray(data["mean"], dtype=np.float64), np.asarray(data["std"], dtype=np.float64))


def _parse_number(raw: str, line: int, column: str) -> float:
    if raw.strip().lower() in _MISSING:
        return math.nan
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"row {line}: column {column!r} has non-numeric value {raw!r}") from None


def load_series(csv_text: bytes | str, symbol: str) -> PriceSeries:
    """Parse an OHLC CSV into a date-sorted :class:`PriceSeries`.

    Header names are matched case-insensitively in any order. Missing numeric
    fields are forward-filled from the previous bar after sorting; bars before
    the first complete row are dropped. Row numbers in error messages are
    1-based file lines (the header is line 1).
    """
    if isinstance(csv_text, bytes):
        csv_text = csv_text.decode("utf-8-sig")
    if not csv_text.strip():
        raise DataError(f"{symbol}: empty CSV")

    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader)
    index = {name.strip().lower(): i for i, name in enumerate(header)}
    missing = [c for c in REQUIRED_COLUMNS if c not in index]
    if missing:
        raise DataError(f"{symbol}: CSV missing required column(s): {', '.join(missing)}")

    records = []
    for line, row in enumerate(reader, start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        raw_date = row[index["date"]].strip()
        try:
            date = dt.date.fromisoformat(raw_date[:10])
        except ValueError:
            raise DataError(f"{symbol}: row {line}: unparseable date {raw_date!r}") from None
        values = [_parse_number(row[index[c]], line, c) for c in NUMERIC_COLUMNS]
        records.append((date, line, values))
    if not records:
        raise DataError(f"{symbol}: CSV has a header but no data rows")

    records.sort(key=lambda r: r[0])
    bars = []
    prev: list[float] | None = None
    prev_date = None
    for date, line, values in records:
        if date == prev_date:
            raise DataError(f"{symbol}: row {line}: duplicate date {date}")
        prev_date = date
        if any(math.isnan(v) for v in values):
            if prev is None:
                continue
            values = [p if math.isnan(v) else v for v, p in zip(values, prev)]
        try:
            bars.append(OhlcBar(date, *values))
        except DataError as exc:
            raise DataError(f"{symbol}: row {line}: {exc}") from None
        prev = values
    if not bars:
        raise DataError(f"{symbol}: no complete rows to seed forward-fill")
    return PriceSeries(symbol, tuple(bars))


def derive_features(series: PriceSeries, windows: Sequence[int] = (3, 7, 30)) -> FeatureMatrix:
    """Trailing rolling mean and population std of mid for each window.

    Windows include the current bar. Rows before ``valid_from`` hold NaN for
    any window that is not yet full.
    """
    windows = list(windows)
    if not windows:
        raise DataError("at least one window is required")
    n = len(series)
    for w in windows:
        if w <= 0 or w >= n:
            raise DataError(f"window {w} must satisfy 0 < window < series length {n}")

    mid = series.mid
    names, cols = [], []
    for w in windows:
        view = np.lib.stride_tricks.sliding_window_view(mid, w)
        mean = np.full(n, np.nan)
        std = np.full(n, np.nan)
        mean[w - 1:] = view.mean(axis=1)
        std[w - 1:] = view.std(axis=1)
        names += [f"ma_{w}", f"std_{w}"]
        cols += [mean, std]
    return FeatureMatrix(tuple(names), np.column_stack(cols), max(windows) - 1)


def _as_2d(rows) -> tuple[np.ndarray, bool]:
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim == 1:
        return arr[:, None], True
    if arr.ndim != 2:
        raise DataError(f"expected 1-D or 2-D rows, got shape {arr.shape}")
    return arr, False


def fit_scaler(rows) -> ScalerParams:
    """Per-column mean and population std; near-zero std is replaced by 1."""
    arr, _ = _as_2d(rows)
    if arr.shape[0] < 2:
        raise DataError("scaler needs at least 2 rows")
    if not np.all(np.isfinite(arr)):
        raise DataError("scaler rows must be finite (slice off the warm-up rows first)")
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return ScalerParams(mean, std)


def apply_scaler(params: ScalerParams, rows, direction: str = "forward") -> np.ndarray:
    arr, flat = _as_2d(rows)
    if arr.shape[1] != params.n_features:
        raise DataError(f"rows have {arr.shape[1]} columns, scaler has {params.n_features}")
    if direction == "forward":
        out = (arr - params.mean) / params.std
    elif direction == "inverse":
        out = arr * params.std + params.mean
    else:
        raise DataError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return out[:, 0] if flat else out


def split_train_test(series: PriceSeries, test_len: int) -> tuple[PriceSeries, PriceSeries]:
    n = len(series)
    if not 0 < test_len < n:
        raise DataError(f"test_len must be in (0, {n}), got {test_len}")
    cut = n - test_len
    return series.slice(None, cut), series.slice(cut, None)


def load_series_file(path) -> PriceSeries:
    """Read a canonical JSON series, or a CSV (symbol taken from the file stem)."""
    from pathlib import Path

    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_series(path.read_bytes(), path.stem)
    return PriceSeries.from_json(path.read_text())


def align_series(series: Iterable[PriceSeries]) -> list[PriceSeries]:
    """Restrict several series to their common dates."""
    series = list(series)
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    if not common:
        raise DataError("series share no common dates")
    return [PriceSeries(s.symbol, tuple(b for b in s.bars if b.date in common)) for s in series]

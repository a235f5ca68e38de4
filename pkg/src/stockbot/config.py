"""Flat ``key = value`` run configuration."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .lstm import LstmConfig

OUTPUT_DIR_ENV = "STOCKBOT_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _int_tuple(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        # inclusive range with optional step: 30..90:10
        span, _, step = text.partition(":")
        lo, hi = (int(x) for x in span.split(".."))
        return tuple(range(lo, hi + 1, int(step) if step else 1))
    return tuple(int(x) for x in text.split(",") if x.strip())


@dataclass
class RunConfig:
    """Every recognised key with its default.

    data           per-symbol input paths, written as ``data.SYMBOL = path``
    test_len       bars held out at the end of each series (250)
    model          arima | lstm-mse | lstm-directional (lstm-mse)
    window .. seed LSTM settings (50, 1, 4, 64, 0.3, 5e-3, 256, 400, mse, 0)
    max_p/d/q      ARIMA grid maxima (5, 2, 5); criterion aic | bic (bic)
    initial_wealth starting cash for the trading bot (1000)
    backtest_days  cap on traded days, 0 = whole test span
    sweep_windows  window grid, ``30..90:10`` or a comma list
    sweep_horizons horizon grid (1..9)
    output_dir     default directory for outputs ($STOCKBOT_OUTPUT_DIR or ".")
    """

    data: dict = field(default_factory=dict)
    test_len: int = 250
    model: str = "lstm-mse"
    window: int = 50
    horizon: int = 1
    layers: int = 4
    hidden: int = 64
    dropout_rate: float = 0.30
    learning_rate: float = 5e-3
    batch_size: int = 256
    epochs: int = 400
    loss: str = "mse"
    seed: int = 0
    max_p: int = 5
    max_d: int = 2
    max_q: int = 5
    criterion: str = "bic"
    initial_wealth: float = 1000.0
    backtest_days: int = 0
    sweep_windows: tuple = (30, 40, 50, 60, 70, 80, 90)
    sweep_horizons: tuple = tuple(range(1, 10))
    output_dir: str = field(default_factory=lambda: os.environ.get(OUTPUT_DIR_ENV, "."))

    def __post_init__(self):
        if self.model not in ("arima", "lstm-mse", "lstm-directional"):
            raise ConfigError(f"model must be arima, lstm-mse or lstm-directional, got {self.model!r}")
        if self.criterion not in ("aic", "bic"):
            raise ConfigError(f"criterion must be aic or bic, got {self.criterion!r}")
        if self.test_len < 1:
            raise ConfigError("test_len must be >= 1")
        if self.initial_wealth <= 0:
            raise ConfigError("initial_wealth must be > 0")
        try:
            self.lstm_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def lstm_config(self, loss: str | None = None) -> LstmConfig:
        return LstmConfig(
            window=self.window, horizon=self.horizon, layers=self.layers, hidden=self.hidden,
            dropout_rate=self.dropout_rate, learning_rate=self.learning_rate,
            batch_size=self.batch_size, epochs=self.epochs, loss=loss or self.loss, seed=self.seed,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        out["data"] = dict(sorted(self.data.items()))
        return out

    def to_text(self) -> str:
        lines = [f"data.{sym} = {path}" for sym, path in sorted(self.data.items())]
        for f in fields(self):
            if f.name == "data":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            return _int_tuple(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    values: dict = {"data": {}}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = key.strip(), raw.strip()
        if key.startswith("data."):
            values["data"][key[5:]] = raw
        elif key in _TYPES and key != "data":
            values[key] = _convert(key, raw)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    for key, raw in (overrides or {}).items():
        if key not in _TYPES or key == "data":
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _convert(key, str(raw)) if isinstance(raw, str) else raw
    return RunConfig(**values)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    text = "" if path is None else open(path, encoding="utf-8").read()
    return parse_config(text, overrides)

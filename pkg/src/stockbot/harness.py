"""Walk-forward evaluation, window/horizon sweeps and strategy comparison."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Protocol

import numpy as np

from .arima import ArimaModel, arima_forecast, auto_arima
from .lstm import LstmConfig, LstmModel, fit_lstm, predict_many
from .market_data import PriceSeries, split_train_test
from .trader import decision_log_csv, hold_strategy, run_backtest

log = logging.getLogger(__name__)

DEFAULT_WINDOWS = (30, 40, 50, 60, 70, 80, 90)
DEFAULT_HORIZONS = tuple(range(1, 10))


class HarnessError(ValueError):
    pass


class Forecaster(Protocol):
    kind: str

    def forecast(self, history: np.ndarray, horizon: int) -> np.ndarray: ...


class PersistenceForecaster:
    kind = "persistence"

    def forecast(self, history, horizon):
        return np.full(horizon, history[-1], dtype=np.float64)


class ArimaForecaster:
    kind = "arima"

    def __init__(self, model: ArimaModel):
        self.model = model

    def forecast(self, history, horizon):
        return arima_forecast(self.model, history, horizon)


class LstmForecaster:
    def __init__(self, model: LstmModel):
        self.model = model
        self.kind = f"lstm-{model.config.loss}"
        self.window = model.config.window

    def forecast(self, history, horizon):
        return self.forecast_many(np.asarray(history)[None, -self.window:], horizon)[0]

    def forecast_many(self, windows, horizon):
        if horizon != self.model.config.horizon:
            raise HarnessError(f"model predicts {self.model.config.horizon} steps, asked for {horizon}")
        return predict_many(self.model, windows)


@dataclass
class EvalResult:
    symbol: str
    model: str
    dates: list[str]            # date of the first predicted day, per origin
    predictions: np.ndarray     # (n_origins, H) raw prices
    actuals: np.ndarray         # (n_origins, H)
    anchors: np.ndarray         # last realised price before each origin
    origin_date: str            # date of the bar preceding the first prediction
    mse_raw: float
    config: dict = field(default_factory=dict)

    def recompute_mse(self) -> float:
        return float(np.mean((self.predictions - self.actuals) ** 2))

    def to_dict(self) -> dict:
        return {
            "symbol": self.symbol,
            "model": self.model,
            "mse_raw": self.mse_raw,
            "origin_date": self.origin_date,
            "config": self.config,
            "predictions": [
                {"date": d, "values": p.tolist(), "actual": a.tolist(), "anchor": float(x)}
                for d, p, a, x in zip(self.dates, self.predictions, self.actuals, self.anchors)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalResult":
        rows = data["predictions"]
        return cls(
            symbol=data["symbol"],
            model=data["model"],
            dates=[r["date"] for r in rows],
            predictions=np.array([r["values"] for r in rows], dtype=np.float64),
            actuals=np.array([r["actual"] for r in rows], dtype=np.float64),
            anchors=np.array([r["anchor"] for r in rows], dtype=np.float64),
            origin_date=data["origin_date"],
            mse_raw=float(data["mse_raw"]),
            config=data.get("config", {}),
        )


def walk_forward_eval(forecaster, train: PriceSeries, test: PriceSeries, window: int | None,
                      horizon: int, config: dict | None = None) -> EvalResult:
    """Rolling-origin evaluation of a fixed forecaster over the test span.

    For test index t the forecaster sees only realised mid-prices strictly
    before t: the last ``window`` of them, or all of them when ``window`` is
    None. It predicts test days t .. t+H-1.
    """
    if horizon < 1:
        raise HarnessError(f"horizon must be >= 1, got {horizon}")
    if len(test) < horizon:
        raise HarnessError(f"test span of {len(test)} bars is shorter than horizon {horizon}")
    if window is not None and len(train) < window:
        raise HarnessError(f"training span of {len(train)} bars is shorter than window {window}")
    full = np.concatenate([train.mid, test.mid])
    n_train = len(train)
    n_origins = len(test) - horizon + 1
    ends = n_train + np.arange(n_origins)

    if window is not None and hasattr(forecaster, "forecast_many"):
        windows = np.stack([full[e - window:e] for e in ends])
        preds = np.asarray(forecaster.forecast_many(windows, horizon), dtype=np.float64)
    else:
        preds = np.stack([
            np.asarray(forecaster.forecast(full[(0 if window is None else e - window):e], horizon))
            for e in ends
        ])
    actuals = np.stack([full[e:e + horizon] for e in ends])
    dates = [d.isoformat() for d in test.dates[:n_origins]]
    mse = float(np.mean((preds - actuals) ** 2))
    return EvalResult(
        symbol=test.symbol,
        model=getattr(forecaster, "kind", type(forecaster).__name__),
        dates=dates,
        predictions=preds,
        actuals=actuals,
        anchors=full[ends - 1].copy(),
        origin_date=train.bars[-1].date.isoformat(),
        mse_raw=mse,
        config=dict(config or {}),
    )


def fit_forecaster(kind: str, train_mid, lstm_config: LstmConfig | None = None,
                   arima_grid=(5, 2, 5), criterion: str = "bic"):
    """Fit one forecaster on the training mid series; returns ``(forecaster, window, info)``."""
    if kind == "arima":
        model = auto_arima(train_mid, *arima_grid, criterion=criterion)
        return ArimaForecaster(model), None, model.to_dict()
    if kind in ("lstm-mse", "lstm-directional"):
        cfg = replace(lstm_config or LstmConfig(), loss=kind.split("-", 1)[1])
        model, history = fit_lstm(train_mid, cfg)
        return LstmForecaster(model), cfg.window, {"config": asdict(cfg), "final_loss":
                                                   history[-1]["train_loss"] if history else None}
    if kind == "persistence":
        return PersistenceForecaster(), 1, {}
    raise HarnessError(f"unknown model kind {kind!r}")


@dataclass
class SweepGrid:
    windows: tuple[int, ...]
    horizons: tuple[int, ...]
    cells: dict = field(default_factory=dict)      # (W, H) -> mse_raw, NaN if failed
    errors: dict = field(default_factory=dict)     # (W, H) -> message

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window", "horizon", "mse"])
        for w in self.windows:
            for h in self.horizons:
                v = self.cells.get((w, h), math.nan)
                writer.writerow([w, h, "nan" if math.isnan(v) else repr(v)])
        return buf.getvalue()

    def best(self):
        finite = {k: v for k, v in self.cells.items() if math.isfinite(v)}
        return min(finite, key=finite.get) if finite else None


def sweep_cell(train: PriceSeries, test: PriceSeries, window: int, horizon: int,
               template: LstmConfig) -> float:
    cfg = replace(template, window=window, horizon=horizon)
    model, _ = fit_lstm(train.mid, cfg)
    return walk_forward_eval(LstmForecaster(model), train, test, window, horizon).mse_raw


def _run_cell(args):
    train, test, w, h, template = args
    try:
        return (w, h), sweep_cell(train, test, w, h, template), None
    except Exception as exc:  # a failed cell must not stop the sweep
        return (w, h), math.nan, f"{type(exc).__name__}: {exc}"


def sweep_grid(series: PriceSeries, test_len: int, windows=DEFAULT_WINDOWS,
               horizons=DEFAULT_HORIZONS, template: LstmConfig | None = None,
               n_jobs: int = 1) -> SweepGrid:
    """Independent seeded LSTM per (window, horizon) cell, scored by walk-forward MSE."""
    template = template or LstmConfig()
    train, test = split_train_test(series, test_len)
    grid = SweepGrid(tuple(windows), tuple(horizons))
    jobs = [(train, test, w, h, template) for w in grid.windows for h in grid.horizons]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    for key, mse, err in results:
        grid.cells[key] = mse
        if err:
            grid.errors[key] = err
            log.warning("sweep cell %s failed: %s", key, err)
    return grid


def _realised_prices(results, symbols, T) -> np.ndarray:
    """(T+1, N): the bar before the first test day, then the realised test-day prices."""
    first = results[next(iter(results))]
    return np.column_stack([np.r_[first[s].anchors[0], first[s].actuals[:T, 0]] for s in symbols])


def _one_step_forecasts(by_symbol, symbols, T) -> np.ndarray:
    return np.column_stack([by_symbol[s].predictions[:T, 0] for s in symbols])


def compare_strategies(results: dict[str, dict[str, EvalResult]], initial_wealth: float = 1000.0,
                       exclude=(), days: int | None = None) -> dict:
    """Backtest every model's one-step forecasts against HOLD on the same assets and dates.

    ``results`` maps model kind -> symbol -> EvalResult. Symbols in ``exclude``
    are dropped before anything is aligned, so HOLD re-weights over the rest.
    """
    if not results:
        raise HarnessError("no evaluation results to compare")
    models = list(results)
    symbols = [s for s in results[models[0]] if s not in set(exclude)]
    if not symbols:
        raise HarnessError("every symbol was excluded")
    ref = results[models[0]][symbols[0]]
    for m in models:
        for s in symbols:
            r = results[m].get(s)
            if r is None:
                raise HarnessError(f"model {m} has no result for symbol {s}")
            if r.dates != ref.dates or r.origin_date != ref.origin_date:
                raise HarnessError(f"dates for symbol {s} under model {m} do not align")
            if not np.array_equal(r.actuals[:, 0], results[models[0]][s].actuals[:, 0]):
                raise HarnessError(f"actual prices for symbol {s} differ between models")

    T = len(ref.dates) if days is None else min(days, len(ref.dates))
    actuals = _realised_prices(results, symbols, T)
    curves = {}
    for m in models:
        curves[m] = run_backtest(_one_step_forecasts(results[m], symbols, T), actuals,
                                 initial_wealth).net_worth
    curves["hold"] = hold_strategy(initial_wealth, actuals)
    dates = [ref.origin_date] + ref.dates[:T]
    return {
        "symbols": symbols,
        "excluded": [s for s in exclude],
        "initial_wealth": initial_wealth,
        "days": T,
        "dates": dates,
        "curves": {k: v.tolist() for k, v in curves.items()},
        "final": {k: float(v[-1]) for k, v in curves.items()},
        "mse_raw": {m: {s: results[m][s].mse_raw for s in symbols} for m in models},
    }


def decision_logs(results: dict[str, dict[str, EvalResult]], report: dict) -> dict[str, str]:
    """Per-model decision CSVs replaying the trades behind a :func:`compare_strategies` report."""
    symbols, T = report["symbols"], report["days"]
    actuals = _realised_prices(results, symbols, T)
    return {
        m: decision_log_csv(
            run_backtest(_one_step_forecasts(results[m], symbols, T), actuals, report["initial_wealth"]),
            symbols, report["dates"][:T])
        for m in results
    }

"""Daily rebalancing optimizer, the HOLD baseline and the backtest loop.

The daily program maximises the expected profit of the new portfolio,

    max_s  sum_i s_i * (pred_i - price_i)
    s.t.   s . price + cash = value,  s >= 0,  cash >= 0,

which, measured per dollar allocated, is the predicted relative change
``(pred_i - price_i) / price_i``. Its optimum sits on a vertex: everything in
the asset with the largest predicted relative change if that change is
positive, otherwise everything in cash.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


class TraderError(ValueError):
    pass


@dataclass(frozen=True)
class PortfolioState:
    shares: np.ndarray
    cash: float

    def __post_init__(self):
        shares = np.asarray(self.shares, dtype=np.float64)
        if np.any(shares < 0) or self.cash < 0:
            raise TraderError("shares and cash must be non-negative")
        object.__setattr__(self, "shares", shares)

    def net_worth(self, prices) -> float:
        return float(self.shares @ np.asarray(prices, dtype=np.float64) + self.cash)

    @classmethod
    def all_cash(cls, n_assets: int, wealth: float) -> "PortfolioState":
        return cls(np.zeros(n_assets), float(wealth))


@dataclass(frozen=True)
class TradeDecision:
    new_shares: np.ndarray
    new_cash: float
    expected_return: float   # expected currency profit, new_shares . (pred - price)
    objective: float         # same quantity, the LP optimum
    asset: int | None        # chosen asset index, None for all-cash

    @property
    def state(self) -> PortfolioState:
        return PortfolioState(self.new_shares, self.new_cash)


def _check_prices(prices, name):
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim != 1 or not np.all(np.isfinite(prices)):
        raise TraderError(f"{name} must be a finite 1-D price vector")
    return prices


def predicted_returns(prices, predicted) -> np.ndarray:
    prices = _check_prices(prices, "prices")
    predicted = _check_prices(predicted, "predicted prices")
    if prices.shape != predicted.shape:
        raise TraderError(f"prices {prices.shape} and predictions {predicted.shape} differ in shape")
    if np.any(prices <= 0):
        raise TraderError(f"prices must be > 0, got {prices}")
    return (predicted - prices) / prices


def optimize_portfolio(prices, predicted, state: PortfolioState) -> TradeDecision:
    r = predicted_returns(prices, predicted)
    prices = np.asarray(prices, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if state.shares.shape != prices.shape:
        raise TraderError(f"state holds {len(state.shares)} assets, prices have {len(prices)}")
    value = state.net_worth(prices)
    best = int(np.argmax(r))
    shares = np.zeros_like(prices)
    if r[best] > 0:
        shares[best] = value / prices[best]
        profit = shares[best] * (predicted[best] - prices[best])
        return TradeDecision(shares, 0.0, float(profit), float(profit), best)
    return TradeDecision(shares, value, 0.0, 0.0, None)


def hold_strategy(initial_wealth: float, prices) -> np.ndarray:
    """Equal-dollar buy at ``prices[0]``, never rebalanced; net worth per row."""
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim == 1:
        prices = prices[:, None]
    if len(prices) < 1 or np.any(prices <= 0):
        raise TraderError("HOLD needs at least one row of positive prices")
    shares = initial_wealth / prices.shape[1] / prices[0]
    return prices @ shares


@dataclass(frozen=True)
class BacktestResult:
    net_worth: np.ndarray          # length T+1
    decisions: list[TradeDecision]
    value_before: np.ndarray       # per day, net worth at the rebalance instant before trading
    value_after: np.ndarray        # same instant, after trading


def run_backtest(forecasts, actuals, initial_wealth: float = 1000.0) -> BacktestResult:
    """Trade day by day: decide with ``actuals[t]`` and ``forecasts[t]``, mark to ``actuals[t+1]``."""
    forecasts = np.asarray(forecasts, dtype=np.float64)
    actuals = np.asarray(actuals, dtype=np.float64)
    if forecasts.ndim == 1:
        forecasts = forecasts[:, None]
    if actuals.ndim == 1:
        actuals = actuals[:, None]
    T, N = forecasts.shape
    if actuals.shape != (T + 1, N):
        raise TraderError(f"actuals must have shape {(T + 1, N)}, got {actuals.shape}")
    if np.any(actuals <= 0):
        raise TraderError("actual prices must be > 0")

    state = PortfolioState.all_cash(N, initial_wealth)
    worth = np.empty(T + 1)
    worth[0] = initial_wealth
    before, after = np.empty(T), np.empty(T)
    decisions = []
    for t in range(T):
        before[t] = state.net_worth(actuals[t])
        decision = optimize_portfolio(actuals[t], forecasts[t], state)
        state = decision.state
        after[t] = state.net_worth(actuals[t])
        worth[t + 1] = state.net_worth(actuals[t + 1])
        decisions.append(decision)
    return BacktestResult(worth, decisions, before, after)


def net_worth_csv(curves: dict[str, np.ndarray], dates=None) -> str:
    """Long-format CSV: day_index, date, strategy, net_worth."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["day_index", "date", "strategy", "net_worth"])
    for name, curve in curves.items():
        for i, value in enumerate(curve):
            date = "" if dates is None else str(dates[i])
            writer.writerow([i, date, name, repr(float(value))])
    return buf.getvalue()


def decision_log_csv(result: BacktestResult, symbols, dates=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["day_index", "date", "asset", *[f"shares_{s}" for s in symbols], "cash"])
    for t, d in enumerate(result.decisions):
        asset = "" if d.asset is None else symbols[d.asset]
        date = "" if dates is None else str(dates[t])
        writer.writerow([t, date, asset, *[repr(float(x)) for x in d.new_shares], repr(d.new_cash)])
    return buf.getvalue()

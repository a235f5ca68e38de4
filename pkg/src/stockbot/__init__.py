"""Forecast-driven portfolio backtesting: ARIMA and LSTM price forecasts feeding a
daily rebalancing bot, compared against buy-and-hold."""

__version__ = "0.1.0"

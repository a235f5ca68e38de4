"""Full comparison on a folder of OHLC CSVs: ARIMA, LSTM (MSE), LSTM (directional) and HOLD.

Fits one model per symbol and method on the training split, evaluates by
walk-forward on the test split, then trades $1000 with each model's one-day
forecasts. The backtest is run on all symbols and again without ``--drop``.

    python scripts/make_synthetic_market.py --out-dir data
    python scripts/run_pipeline.py --data-dir data --out-dir results
"""
import argparse
import json
import logging
import time
from pathlib import Path

from stockbot.harness import compare_strategies, fit_forecaster, walk_forward_eval
from stockbot.lstm import LstmConfig
from stockbot.market_data import load_series_file, split_train_test
from stockbot.trader import net_worth_csv

MODELS = ("arima", "lstm-mse", "lstm-directional")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--test-len", type=int, default=250)
    parser.add_argument("--days", type=int, default=None, help="trade only the first N test days")
    parser.add_argument("--drop", default="TSLA", help="symbol left out in the second backtest")
    parser.add_argument("--window", type=int, default=50)
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--hidden", type=int, default=16)
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    lstm_cfg = LstmConfig(window=args.window, layers=args.layers, hidden=args.hidden,
                          epochs=args.epochs, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    results = {m: {} for m in MODELS}
    for path in sorted(Path(args.data_dir).glob("*.csv")):
        series = load_series_file(path)
        train, test = split_train_test(series, args.test_len)
        for kind in MODELS:
            t0 = time.perf_counter()
            forecaster, window, info = fit_forecaster(kind, train.mid, lstm_cfg)
            r = walk_forward_eval(forecaster, train, test, window, 1, info)
            results[kind][series.symbol] = r
            (out / f"{series.symbol}_{kind}.eval.json").write_text(r.to_json() + "\n")
            extra = f" order={info['order']}" if kind == "arima" else ""
            logging.info("%-5s %-17s mse=%10.4f  (%.1fs)%s", series.symbol, kind, r.mse_raw,
                         time.perf_counter() - t0, extra)

    for label, exclude in (("all", ()), (f"without_{args.drop}", (args.drop,))):
        report = compare_strategies(results, 1000.0, exclude=exclude, days=args.days)
        (out / f"comparison_{label}.json").write_text(json.dumps(report, indent=1) + "\n")
        (out / f"net_worth_{label}.csv").write_text(net_worth_csv(report["curves"], report["dates"]))
        print(f"\n{label} ({', '.join(report['symbols'])}; {report['days']} days)")
        for name, value in sorted(report["final"].items(), key=lambda kv: -kv[1]):
            print(f"  {name:>17}: ${value:,.2f}")


if __name__ == "__main__":
    main()

"""Window x horizon sweep for one symbol; writes the grid CSV and prints it as a table."""
import argparse
import math
from pathlib import Path

from stockbot.harness import DEFAULT_HORIZONS, DEFAULT_WINDOWS, sweep_grid
from stockbot.lstm import LstmConfig
from stockbot.market_data import load_series_file


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("series", help="OHLC CSV or canonical JSON series")
    parser.add_argument("--out", default="sweep.csv")
    parser.add_argument("--test-len", type=int, default=250)
    parser.add_argument("--layers", type=int, default=1)
    parser.add_argument("--hidden", type=int, default=16)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    series = load_series_file(args.series)
    template = LstmConfig(layers=args.layers, hidden=args.hidden, epochs=args.epochs)
    grid = sweep_grid(series, args.test_len, DEFAULT_WINDOWS, DEFAULT_HORIZONS, template, args.jobs)
    Path(args.out).write_text(grid.to_csv())

    print("W \\ H " + "".join(f"{h:>10}" for h in grid.horizons))
    for w in grid.windows:
        cells = (grid.cells[(w, h)] for h in grid.horizons)
        print(f"{w:>6} " + "".join("      fail" if math.isnan(v) else f"{v:>10.4f}" for v in cells))
    print(f"best (window, horizon): {grid.best()}; {len(grid.errors)} failed cells -> {args.out}")


if __name__ == "__main__":
    main()

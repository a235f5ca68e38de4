"""Write a small synthetic OHLC market (four daily CSVs) for the pipeline scripts.

Prices follow geometric random walks with a slow cycle on top; one symbol is
much more volatile than the others so the exclusion experiment has a target.
"""
import argparse
import datetime as dt
from pathlib import Path

import numpy as np

# symbol: (start price, daily drift, daily volatility, cycle amplitude)
PROFILES = {
    "F": (12.0, 0.0002, 0.018, 0.04),
    "GM": (35.0, 0.0003, 0.017, 0.05),
    "TM": (130.0, 0.0002, 0.011, 0.03),
    "TSLA": (60.0, 0.0012, 0.040, 0.08),
}


def business_days(start: dt.date, n: int) -> list[dt.date]:
    days, d = [], start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def ohlc_rows(rng, n, start, drift, vol, amp):
    steps = rng.normal(drift, vol, n)
    cycle = amp * np.sin(2 * np.pi * np.arange(n) / rng.uniform(60, 120))
    close = start * np.exp(np.cumsum(steps) + cycle)
    open_ = np.r_[start, close[:-1]] * np.exp(rng.normal(0, vol / 4, n))
    wick = np.abs(rng.normal(0, vol / 2, (2, n)))
    high = np.maximum(open_, close) * np.exp(wick[0])
    low = np.minimum(open_, close) * np.exp(-wick[1])
    return open_, high, low, close


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="data")
    parser.add_argument("--days", type=int, default=1500)
    parser.add_argument("--seed", type=int, default=2019)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dates = business_days(dt.date(2013, 1, 2), args.days)
    rng = np.random.default_rng(args.seed)
    for sym, profile in PROFILES.items():
        cols = ohlc_rows(rng, args.days, *profile)
        lines = ["Date,Open,High,Low,Close"]
        for d, *vals in zip(dates, *cols):
            lines.append(f"{d.isoformat()}," + ",".join(f"{v:.4f}" for v in vals))
        path = out / f"{sym}.csv"
        path.write_text("\n".join(lines) + "\n")
        print(f"{sym}: {args.days} bars -> {path}")


if __name__ == "__main__":
    main()

"""Batch command line: ingest | fit | eval | backtest | sweep | report."""
from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .arima import ArimaModel
from .config import ConfigError, RunConfig, load_config
from .harness import (
    ArimaForecaster,
    EvalResult,
    LstmForecaster,
    compare_strategies,
    decision_logs,
    fit_forecaster,
    sweep_grid,
    walk_forward_eval,
)
from .lstm import LstmModel
from .market_data import PriceSeries, load_series, load_series_file, split_train_test
from .trader import net_worth_csv

log = logging.getLogger("stockbot")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"stockbot: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _files(paths) -> list[dict]:
    return [{"path": str(p), "sha256": _sha256(Path(p))} for p in paths]


def write_manifest(path: Path, command: str, config: RunConfig | None, inputs, outputs,
                   extra: dict | None = None) -> Path:
    """Deterministic manifest; the wall-clock time goes to a ``.timestamp`` sidecar."""
    manifest = {
        "stockbot_version": __version__,
        "command": command,
        "config": None if config is None else config.to_dict(),
        "seed": None if config is None else config.seed,
        "inputs": _files(inputs),
        "outputs": _files(outputs),
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    path.with_name(path.name + ".timestamp").write_text(
        dt.datetime.now(dt.timezone.utc).isoformat() + "\n")
    return path


def _config(args) -> RunConfig:
    overrides = {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return load_config(getattr(args, "config", None), overrides)


def _out_path(args, cfg: RunConfig | None, default_name: str) -> Path:
    if getattr(args, "out", None):
        out = Path(args.out)
    else:
        out = Path(cfg.output_dir if cfg else ".") / default_name
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def cmd_ingest(args) -> None:
    src = Path(args.csv)
    series = load_series(src.read_bytes(), args.symbol)
    out = _out_path(args, None, f"{args.symbol}.json")
    out.write_text(series.to_json() + "\n")
    write_manifest(_manifest_path(out), "ingest", None, [src], [out],
                   {"symbol": args.symbol, "bars": len(series)})
    print(f"{args.symbol}: {len(series)} bars -> {out}")


def _resolve_kind(model: str, cfg: RunConfig) -> str:
    if model == "lstm":
        return f"lstm-{cfg.loss}"
    return model


def cmd_fit(args) -> None:
    cfg = _config(args)
    kind = _resolve_kind(args.model or cfg.model, cfg)
    series = load_series_file(args.series)
    train, _ = split_train_test(series, cfg.test_len)
    forecaster, _, info = fit_forecaster(
        kind, train.mid, cfg.lstm_config(), (cfg.max_p, cfg.max_d, cfg.max_q), cfg.criterion)
    out = _out_path(args, cfg, f"{series.symbol}_{kind}.model.json")
    model = forecaster.model
    out.write_text(model.to_json() + "\n")
    extra = {"model": kind, "symbol": series.symbol, "train_len": len(train)}
    if kind == "arima":
        extra["order"] = info["order"]
    else:
        extra["lstm"] = info["config"]
    write_manifest(_manifest_path(out), "fit", cfg, [Path(args.series)], [out], extra)
    print(f"fitted {kind} on {series.symbol} ({len(train)} bars) -> {out}")


def load_model(path) -> ArimaModel | LstmModel:
    data = json.loads(Path(path).read_text())
    if data.get("kind") == "arima":
        return ArimaModel.from_dict(data)
    if str(data.get("kind", "")).startswith("lstm"):
        return LstmModel.from_dict(data)
    raise CliError(f"{path}: unrecognised model file")


def cmd_eval(args) -> None:
    cfg = _config(args)
    model = load_model(args.model_file)
    series = load_series_file(args.series)
    train, test = split_train_test(series, cfg.test_len)
    if isinstance(model, ArimaModel):
        forecaster, window, horizon = ArimaForecaster(model), None, cfg.horizon
    else:
        forecaster = LstmForecaster(model)
        window, horizon = model.config.window, model.config.horizon
    result = walk_forward_eval(forecaster, train, test, window, horizon,
                               {"test_len": cfg.test_len, "window": window, "horizon": horizon})
    out = _out_path(args, cfg, f"{series.symbol}_{forecaster.kind}.eval.json")
    out.write_text(result.to_json() + "\n")
    write_manifest(_manifest_path(out), "eval", cfg, [Path(args.model_file), Path(args.series)],
                   [out], {"model": result.model, "symbol": result.symbol, "mse_raw": result.mse_raw})
    print(f"{result.symbol} {result.model}: mse_raw={result.mse_raw:.6g} over {len(result.dates)} days")


def cmd_backtest(args) -> None:
    cfg = _config(args)
    grouped: dict[str, dict[str, EvalResult]] = {}
    for path in args.eval:
        r = EvalResult.from_dict(json.loads(Path(path).read_text()))
        if r.symbol in grouped.setdefault(r.model, {}):
            raise CliError(f"duplicate result for {r.model}/{r.symbol} in {path}")
        grouped[r.model][r.symbol] = r
    wealth = cfg.initial_wealth if args.wealth is None else args.wealth
    days = args.days if args.days is not None else (cfg.backtest_days or None)
    report = compare_strategies(grouped, wealth, exclude=args.exclude or (), days=days)

    out_dir = Path(args.out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "comparison.json"
    curves_path = out_dir / "net_worth.csv"
    report_path.write_text(json.dumps(report, indent=1) + "\n")
    curves_path.write_text(net_worth_csv(report["curves"], report["dates"]))
    outputs = [report_path, curves_path]
    if args.decision_log:
        for model, text in decision_logs(grouped, report).items():
            p = out_dir / f"decisions_{model}.csv"
            p.write_text(text)
            outputs.append(p)
    write_manifest(out_dir / "backtest.manifest.json", "backtest", cfg,
                   [Path(p) for p in args.eval], outputs,
                   {"initial_wealth": wealth, "exclude": list(args.exclude or []), "days": report["days"]})
    for name, value in report["final"].items():
        print(f"{name:>18}: {value:,.2f}")


def cmd_sweep(args) -> None:
    cfg = _config(args)
    series = load_series_file(args.series)
    grid = sweep_grid(series, cfg.test_len, cfg.sweep_windows, cfg.sweep_horizons,
                      cfg.lstm_config(), n_jobs=args.jobs)
    out = _out_path(args, cfg, f"{series.symbol}_sweep.csv")
    out.write_text(grid.to_csv())
    write_manifest(_manifest_path(out), "sweep", cfg, [Path(args.series)], [out],
                   {"symbol": series.symbol, "cells": len(grid.cells),
                    "failed": {f"{w},{h}": e for (w, h), e in sorted(grid.errors.items())}})
    best = grid.best()
    print(f"{len(grid.cells)} cells -> {out}; best (window, horizon) = {best}")


def cmd_report(args) -> None:
    merged = []
    for path in sorted(args.inputs):
        p = Path(path)
        text = p.read_text()
        try:
            content = json.loads(text)
        except json.JSONDecodeError:
            content = text
        merged.append({"path": str(p), "sha256": _sha256(p), "content": content})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"stockbot_version": __version__, "files": merged},
                              indent=1, sort_keys=True) + "\n")
    write_manifest(_manifest_path(out), "report", None, [Path(p) for p in sorted(args.inputs)], [out])
    print(f"merged {len(merged)} files -> {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stockbot", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(p):
        p.add_argument("--config", help="key = value run configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        return p

    p = sub.add_parser("ingest", help="OHLC CSV -> canonical JSON series")
    p.add_argument("--csv", required=True)
    p.add_argument("--symbol", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = with_config(sub.add_parser("fit", help="fit a forecaster on the training split"))
    p.add_argument("--model", choices=["arima", "lstm", "lstm-mse", "lstm-directional"])
    p.add_argument("--series", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = with_config(sub.add_parser("eval", help="walk-forward evaluation over the test split"))
    p.add_argument("--model-file", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = with_config(sub.add_parser("backtest", help="trading bot vs HOLD from eval results"))
    p.add_argument("--eval", nargs="+", required=True, help="eval JSON files (all models x symbols)")
    p.add_argument("--wealth", type=float)
    p.add_argument("--exclude", action="append", metavar="SYMBOL")
    p.add_argument("--days", type=int, help="trade only the first N test days")
    p.add_argument("--out-dir")
    p.add_argument("--decision-log", action="store_true")
    p.set_defaults(func=cmd_backtest)

    p = with_config(sub.add_parser("sweep", help="window x horizon LSTM MSE grid"))
    p.add_argument("--series", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="merge outputs and manifests into one JSON")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CliError, ConfigError, ValueError, OSError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"stockbot {args.command}: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

"""Command-line frontend: ledger summaries, per-month fits, out-of-sample
comparison, shuffle significance, synthetic data, and a bundled report.

Subcommands: summarize, fit, forecast, correlate, simulate, report.
Every command is deterministic given (inputs, config, seed) and writes
its CSVs atomically.  Flat key=value config files supply defaults; CLI
flags override file values.  Exit codes: 0 ok, 2 validation, 3 I/O,
4 numerical.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, replace

from . import correlation, curves, fitting, forecast, ledger, synth
from .errors import NumericalError, ValidationError
from .fileio import parse_bool
from .models import ModelKind

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

_FITTED_CLASSES = {
    "fb": (ledger.TradeClass.FB,),
    "fs": (ledger.TradeClass.FS,),
    "both": (ledger.TradeClass.FB, ledger.TradeClass.FS),
}
_KIND_CHOICES = {
    "pl": (ModelKind.PL,),
    "lg": (ModelKind.LG,),
    "both": (ModelKind.PL, ModelKind.LG),
}


@dataclass(frozen=True)
class RunConfig:
    """Pipeline options shared by the analysis commands."""

    inputs: tuple[str, ...] = ()
    out_dir: str = "out"
    bins: tuple[int, ...] = (12, 15, 18)
    model: str = "both"
    trade_classes: str = "both"
    shuffles: int = 500
    seed: int = 0
    holdout_last: bool = True
    holdout_index: int = -1
    formats: tuple[str, ...] = ("csv", "txt")

    def __post_init__(self) -> None:
        if not self.bins:
            raise ValidationError("need at least one M value")
        if any(m < 3 for m in self.bins):
            raise ValidationError("every M must be >= 3")
        if self.model not in _KIND_CHOICES:
            raise ValidationError(f"model must be one of {sorted(_KIND_CHOICES)}")
        if self.trade_classes not in _FITTED_CLASSES:
            raise ValidationError(f"class must be one of {sorted(_FITTED_CLASSES)}")
        if self.shuffles < 0:
            raise ValidationError("shuffles must be >= 0")

    @property
    def kinds(self):
        return _KIND_CHOICES[self.model]

    @property
    def classes(self):
        return _FITTED_CLASSES[self.trade_classes]


def read_flat_config(path: str) -> dict[str, str]:
    """Parse a flat key=value config file ('#' starts a comment)."""
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_num, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path} line {line_num}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def _run_config_from_entries(entries: dict[str, str]) -> RunConfig:
    kwargs: dict = {}
    for key, value in entries.items():
        try:
            if key == "input":
                kwargs["inputs"] = tuple(s.strip() for s in value.split(",") if s.strip())
            elif key == "out":
                kwargs["out_dir"] = value
            elif key == "bins":
                kwargs["bins"] = tuple(int(s) for s in value.split(",") if s.strip())
            elif key == "model":
                kwargs["model"] = value.lower()
            elif key == "class":
                kwargs["trade_classes"] = value.lower()
            elif key == "shuffles":
                kwargs["shuffles"] = int(value)
            elif key == "seed":
                kwargs["seed"] = int(value)
            elif key == "holdout_last":
                kwargs["holdout_last"] = parse_bool(value)
            elif key == "holdout_index":
                kwargs["holdout_index"] = int(value)
            elif key == "formats":
                kwargs["formats"] = tuple(s.strip() for s in value.split(",") if s.strip())
            else:
                raise ValidationError(f"unknown run config key {key!r}")
        except ValueError as exc:
            raise ValidationError(f"bad value for config key {key!r}: {exc}") from None
    return RunConfig(**kwargs)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """File values first, CLI flags override."""
    entries = read_flat_config(args.config) if args.config else {}
    config = _run_config_from_entries(entries)
    overrides: dict = {}
    if args.input:
        overrides["inputs"] = tuple(args.input)
    if args.out is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "bins", None):
        overrides["bins"] = tuple(args.bins)
    if getattr(args, "model", None):
        overrides["model"] = args.model
    if getattr(args, "trade_class", None):
        overrides["trade_classes"] = args.trade_class
    if getattr(args, "shuffles", None) is not None:
        overrides["shuffles"] = args.shuffles
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "holdout_last", False):
        overrides["holdout_last"] = True
    config = replace(config, **overrides)
    if not config.inputs:
        raise ValidationError("no input ledger given (use --input or a config file)")
    return config


def _asset_name(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _load_segments(path: str):
    records = ledger.read_ledger(path)
    if not records:
        raise ValidationError(f"{path}: ledger has no trades")
    return records, curves.segment_monthly(records)


def run_summarize(path: str, config: RunConfig) -> list[ledger.SummaryRow]:
    records = ledger.read_ledger(path)
    rows = ledger.summarize(records)
    asset = _asset_name(path)
    ledger.write_summary(rows, os.path.join(config.out_dir, f"summary_{asset}.csv"))
    if "txt" in config.formats:
        table = ledger.format_summary_table(rows, title=f"Summary statistics of trades: {asset}")
        from .fileio import atomic_writer

        with atomic_writer(os.path.join(config.out_dir, f"summary_{asset}.txt")) as handle:
            handle.write(table)
    return rows


def run_fit(path: str, config: RunConfig) -> dict[int, list]:
    """Per-(segment, class, kind) fits on the in-sample months, one report per M."""
    _, segments = _load_segments(path)
    in_sample = _in_sample(segments, config)
    asset = _asset_name(path)
    reports: dict[int, list] = {}
    for m_bins in config.bins:
        rows = []
        for segment in in_sample:
            for trade_class in config.classes:
                try:
                    points = curves.build_curve(segment, trade_class, m_bins)
                except (ValidationError, NumericalError) as exc:
                    log.warning("skipping %s/%s at M=%d: %s",
                                segment.label, trade_class.name, m_bins, exc)
                    for kind in config.kinds:
                        rows.append((segment.label, trade_class.name, kind, None))
                    continue
                curves.write_curve(points, os.path.join(
                    config.out_dir, curves.curve_filename(trade_class, segment.label, m_bins)))
                for kind in config.kinds:
                    rows.append((segment.label, trade_class.name, kind,
                                 fitting.fit(kind, points)))
        fitting.write_fit_report(rows, os.path.join(
            config.out_dir, f"fit_report_{asset}_M{m_bins}.csv"))
        reports[m_bins] = rows
    return reports


def _in_sample(segments, config: RunConfig):
    if not config.holdout_last:
        return segments
    holdout = _holdout_segment(segments, config)
    return [s for s in segments if s.label != holdout.label]


def _holdout_segment(segments, config: RunConfig):
    if len(segments) < 3:
        raise ValidationError(
            f"need at least 3 monthly segments for a held-out comparison, got {len(segments)}")
    return segments[config.holdout_index]


def run_forecast(path: str, config: RunConfig) -> list[forecast.ForecastReport]:
    if config.model != "both":
        raise ValidationError("forecast compares both models; run with --model both")
    _, segments = _load_segments(path)
    holdout = _holdout_segment(segments, config)
    in_sample = [s for s in segments if s.label != holdout.label]
    asset = _asset_name(path)
    reports = []
    for m_bins in config.bins:
        for trade_class in config.classes:
            fits = {kind: [] for kind in config.kinds}
            for segment in in_sample:
                points = curves.build_curve(segment, trade_class, m_bins)
                for kind in config.kinds:
                    fits[kind].append(fitting.fit(kind, points))
            pl_pred = forecast.mean_params(fits[ModelKind.PL], ModelKind.PL)
            lg_pred = forecast.mean_params(fits[ModelKind.LG], ModelKind.LG)
            held_points = curves.build_curve(holdout, trade_class, m_bins)
            report = forecast.compare(
                trade_class.name, m_bins,
                forecast.predict_mse(pl_pred, held_points),
                forecast.predict_mse(lg_pred, held_points),
                pl_pred, lg_pred,
            )
            reports.append(report)
            pl_fit = fitting.fit(ModelKind.PL, held_points)
            lg_fit = fitting.fit(ModelKind.LG, held_points)
            forecast.write_prediction_curve(
                held_points, pl_pred.as_model_params(), lg_pred.as_model_params(),
                pl_fit.params, lg_fit.params,
                os.path.join(config.out_dir,
                             f"forecast_curve_{asset}_{trade_class.name.lower()}_M{m_bins}.csv"))
    forecast.write_forecast_report(reports, asset,
                                   os.path.join(config.out_dir, f"forecast_{asset}.csv"))
    return reports


def run_correlate(path: str, config: RunConfig):
    if config.shuffles < 1:
        raise ValidationError("correlate needs shuffles >= 1 (degenerate null otherwise)")
    records = ledger.read_ledger(path)
    fb = [r for r in records if ledger.classify(r) is ledger.TradeClass.FB]
    fs = [r for r in records if ledger.classify(r) is ledger.TradeClass.FS]
    asset = _asset_name(path)
    m_bins = config.bins[0]
    verdicts = correlation.shuffle_test_all(
        fb, fs, m_bins, n_shuffles=config.shuffles, seed=config.seed, kinds=config.kinds)
    correlation.write_verdicts(verdicts, os.path.join(config.out_dir, f"verdicts_{asset}.csv"))
    for (kind, param), verdict in verdicts.items():
        correlation.write_null_rhos(verdict, os.path.join(
            config.out_dir, f"null_rhos_{asset}_{kind.value}_{param}.csv"))
    return verdicts


def run_simulate(gen_config: synth.GenConfig, out_path: str) -> int:
    records = synth.generate(gen_config)
    ledger.write_ledger(records, out_path)
    return len(records)


def run_report(path: str, config: RunConfig) -> None:
    run_summarize(path, config)
    run_fit(path, config)
    run_forecast(path, config)
    run_correlate(path, config)


def _add_common(parser: argparse.ArgumentParser, with_bins: bool = True) -> None:
    parser.add_argument("--input", action="append", default=None, metavar="LEDGER.csv",
                        help="input ledger (repeatable for multiple assets)")
    parser.add_argument("--out", default=None, metavar="DIR", help="output directory")
    parser.add_argument("--config", default=None, metavar="FILE", help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None)
    if with_bins:
        parser.add_argument("--bins", action="append", type=int, default=None, metavar="M",
                            help="bin count M (repeatable; default 12,15,18)")
        parser.add_argument("--model", choices=sorted(_KIND_CHOICES), default=None)
        parser.add_argument("--class", dest="trade_class", choices=sorted(_FITTED_CLASSES), default=None)
        parser.add_argument("--holdout-last", action="store_true",
                            help="hold out the last monthly segment (default)")
        parser.add_argument("--shuffles", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impactlab",
                                     description="Immediate price impact estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("summarize", "per-class trade summary"),
        ("fit", "per-month model fits and curve exports"),
        ("forecast", "out-of-sample model comparison"),
        ("correlate", "buy/sell parameter correlation significance"),
        ("report", "run the full pipeline"),
    ):
        command = sub.add_parser(name, help=help_text)
        _add_common(command, with_bins=name != "summarize")
    simulate = sub.add_parser("simulate", help="generate a synthetic ledger")
    simulate.add_argument("--config", default=None, metavar="FILE", help="generator config file")
    simulate.add_argument("--out", required=True, metavar="LEDGER.csv")
    simulate.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            entries = read_flat_config(args.config) if args.config else {}
            gen_config = synth.config_from_mapping(entries)
            if args.seed is not None:
                gen_config = replace(gen_config, seed=args.seed)
            count = run_simulate(gen_config, args.out)
            print(f"wrote {count} trades to {args.out}")
            return EXIT_OK

        config = build_run_config(args)
        runner = {
            "summarize": run_summarize,
            "fit": run_fit,
            "forecast": run_forecast,
            "correlate": run_correlate,
            "report": run_report,
        }[args.command]
        for path in config.inputs:
            runner(path, config)
        print(f"{args.command}: outputs in {config.out_dir}")
        return EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

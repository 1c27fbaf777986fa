"""Command-line entry point.

Subcommands read and write the documented CSV/JSON formats so each stage
can run on its own. Exit codes: 0 success, 1 hard error, 2 success with
soft failures (outlier or insufficient points in the tallies).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from .config import load_config
from .dfa import default_scales, dfa
from .errors import AnalysisError
from .ingest import filter_active_stocks, minute_series_from_ticks, parse_ticks, read_calendar, write_minute_csv
from .intervals import intervals_frame, IntervalSet
from .pipeline import build_report, has_soft_failures, run_pipeline, synth_units
from .report import read_report, write_report
from .synth import RNG_NAME, sample_se_intervals
from .volatility import VolatilitySeries, read_volatility_csv, volatility_from_minutes, write_volatility_csv

log = logging.getLogger("return_intervals")

EXIT_OK, EXIT_ERROR, EXIT_SOFT = 0, 1, 2


def cmd_ingest(args) -> int:
    batch = parse_ticks(args.ticks)
    cal = read_calendar(args.calendar) if args.calendar else None
    series = filter_active_stocks(minute_series_from_ticks(batch, cal), args.min_trades)
    write_minute_csv(series, args.out)
    if args.volatility_out:
        write_volatility_csv([volatility_from_minutes(s) for s in series], args.volatility_out)
    print(f"{len(series)} symbols written to {args.out} ({batch.n_malformed} malformed rows dropped)")
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"kind": args.kind, "alpha": args.alpha, "length": args.length, "count": args.count,
                "seed": args.seed, "rng": RNG_NAME, "magnitude": args.magnitude, "shuffle": args.shuffle}
    if args.kind == "se_intervals":
        isets = [IntervalSet.from_intervals(sample_se_intervals(args.gamma, args.length, args.seed + i),
                                            f"SYN{i:03d}") for i in range(args.count)]
        intervals_frame(isets).to_csv(out / "intervals.csv", index=False)
        manifest["gamma"] = args.gamma
    else:
        cfg = load_config(overrides=[
            f"input.synth.kind={args.kind}", f"input.synth.alpha={args.alpha}",
            f"input.synth.length={args.length}", f"input.synth.count={args.count}",
            f"input.synth.seed={args.seed}", f"input.synth.magnitude={str(args.magnitude).lower()}",
            f"input.synth.shuffle={str(args.shuffle).lower()}"])
        units = synth_units(cfg)
        write_volatility_csv([VolatilitySeries(u.symbol, u.values) for u in units], out / "volatility.csv")
    manifest["seeds"] = [args.seed + i for i in range(args.count)]
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    print(f"wrote {args.count} series to {out}")
    return EXIT_OK


def _overrides(args) -> list[str]:
    ov = list(args.set or [])
    if getattr(args, "input", None):
        ov.append(f"input.path={args.input}")
    if getattr(args, "metadata", None):
        ov.append(f"input.metadata={args.metadata}")
    if getattr(args, "calendar", None):
        ov.append(f"input.calendar={args.calendar}")
    if getattr(args, "workers", None):
        ov.append(f"workers={args.workers}")
    return ov


def cmd_analyze(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    report = run_pipeline(cfg)
    write_report(report, args.out)
    t = report.tallies
    print(f"se fits: {t.se_fits.valid} valid, {t.se_fits.outlier} outlier, "
          f"{t.se_fits.insufficient} insufficient of {t.se_fits.attempted}")
    print(f"delta fits: {t.delta_fits.valid} valid, {t.delta_fits.outlier} outlier, "
          f"{t.delta_fits.insufficient} insufficient of {t.delta_fits.attempted}")
    return EXIT_SOFT if has_soft_failures(report) else EXIT_OK


def cmd_aggregate(args) -> int:
    reports = [read_report(p) for p in args.report]
    stocks, seen = [], set()
    for r in reports:
        for s in r.stocks:
            if s.symbol in seen:
                raise AnalysisError(f"symbol {s.symbol} appears in more than one report")
            seen.add(s.symbol)
            stocks.append(s)
    if args.config or args.set:
        cfg = load_config(args.config, args.set or [])
    else:
        from .config import AnalysisConfig
        cfg = AnalysisConfig.model_validate(reports[0].metadata.config)
    seeds = sorted({x for r in reports for x in r.metadata.seeds})
    merged = build_report(stocks, cfg, seeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(merged, out / "report.json")
    for c in merged.aggregate.curves:
        tag = "q" if c.exponent == "gamma" else "m"
        pd.DataFrame({"bin_center": c.bin_centers, "mean": c.means, "std": c.stds, "count": c.counts}) \
            .to_csv(out / f"curve_{c.exponent}_{c.factor}_{tag}{c.key:g}.csv", index=False)
    (out / "regressions.json").write_text(json.dumps(
        [r.model_dump(mode="json") for r in merged.aggregate.regressions], indent=1))
    print(f"aggregated {len(stocks)} stocks into {out}")
    return EXIT_SOFT if has_soft_failures(merged) else EXIT_OK


def cmd_figures(args) -> int:
    from .figures import emit_figure_tables
    table = emit_figure_tables(read_report(args.report), args.fig)
    table.to_csv(args.out, index=False)
    print(f"fig{args.fig}: {len(table)} rows -> {args.out}")
    return EXIT_OK


def cmd_dfa(args) -> int:
    series = read_volatility_csv(args.input)
    out = Path(args.out)
    multi = len(series) > 1
    if multi:
        out.mkdir(parents=True, exist_ok=True)
    for s in series:
        scales = default_scales(len(s), args.min_scale, args.n_scales)
        res = dfa(s.values, scales, args.order, tuple(args.fit_range) if args.fit_range else None)
        target = out / f"{s.symbol}.csv" if multi else out
        pd.DataFrame({"scale": res.scales, "F": res.fluctuations}).to_csv(target, index=False)
        g = 2.0 * (1.0 - res.alpha)
        print(f"{s.symbol}: alpha={res.alpha:.4f} 2(1-alpha)={g:.4f} "
              f"(order {res.detrend_order}, scales {res.fit_range[0]}..{res.fit_range[1]})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="return-intervals", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="ticks -> canonical minute bars")
    s.add_argument("--ticks", required=True)
    s.add_argument("--calendar")
    s.add_argument("--min-trades", type=int, default=500)
    s.add_argument("--out", required=True)
    s.add_argument("--volatility-out")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", help="seeded synthetic series in volatility CSV form")
    s.add_argument("--kind", choices=["correlated_gaussian", "white_noise", "se_intervals"],
                   default="correlated_gaussian")
    s.add_argument("--alpha", type=float, default=0.85)
    s.add_argument("--gamma", type=float, default=0.5, help="SE exponent for se_intervals")
    s.add_argument("--length", type=int, default=2 ** 20)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--count", type=int, default=8)
    s.add_argument("--magnitude", action="store_true", help="emit |x| at unit std")
    s.add_argument("--shuffle", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("analyze", help="run the full pipeline and write report.json")
    s.add_argument("--input")
    s.add_argument("--config")
    s.add_argument("--metadata")
    s.add_argument("--calendar")
    s.add_argument("--workers", type=int)
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("aggregate", help="merge reports and write factor curves")
    s.add_argument("--report", nargs="+", required=True)
    s.add_argument("--config")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("figures", help="plot-ready CSV for one figure")
    s.add_argument("--report", required=True)
    s.add_argument("--fig", type=int, required=True, choices=range(1, 7))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_figures)

    s = sub.add_parser("dfa", help="DFA fluctuation function per series")
    s.add_argument("--input", required=True)
    s.add_argument("--order", type=int, default=2, choices=[1, 2])
    s.add_argument("--min-scale", type=int, default=10)
    s.add_argument("--n-scales", type=int, default=20)
    s.add_argument("--fit-range", type=int, nargs=2)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dfa)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AnalysisError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end analysis: inputs -> volatility -> intervals -> fits -> report."""

from __future__ import annotations

import contextlib
import datetime as _dt
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import AnalysisConfig
from .dfa import default_scales, dfa
from .errors import (AnalysisError, DegenerateRegressorError, DegenerateSeriesError,
                     DomainError, InsufficientDataError, StageError)
from .factors import (FACTORS, StockFactors, bin_and_aggregate, compute_factors,
                      read_metadata, regress_delta_gamma)
from .ingest import (TICK_COLUMNS, default_calendar, filter_active_stocks, minute_series_from_ticks,
                     parse_ticks, read_calendar, read_minute_csv)
from .report import (Aggregate, AnalysisReport, CurveRecord, DeltaRecord, DfaRecord, FactorRecord,
                     GammaRecord, GammaSummary, Metadata, PdfTable, RegressionRecord, StockRecord,
                     Tallies, clean, tally)
from .scaling import fit_delta, fit_threshold, moment_points, MomentScalingResult
from .synth import RNG_NAME, SynthSpec, generate_correlated, magnitude, shuffle, white_noise
from .volatility import (VOLATILITY_COLUMNS, VolatilitySeries, daily_series, read_volatility_csv,
                         volatility_from_minutes)

log = logging.getLogger(__name__)


@dataclass
class Unit:
    """One symbol ready for analysis."""

    symbol: str
    values: np.ndarray | None
    factors: StockFactors | None = None
    error: str | None = None


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except (AnalysisError, OSError, ValueError) as exc:
        raise StageError(name, exc) from exc


def _detect_kind(path) -> str:
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8", "replace").strip().lower().replace(" ", "")
    cols = header.split(",")
    if cols == TICK_COLUMNS:
        return "ticks"
    if cols == VOLATILITY_COLUMNS:
        return "volatility"
    if cols[:4] == ["symbol", "date", "minute_index", "price"]:
        return "minutes"
    raise StageError("ingest", f"cannot recognise CSV header {header!r}")


def synth_seeds(cfg: AnalysisConfig) -> list[int]:
    s = cfg.input.synth
    return [s.seed + i for i in range(s.count)]


def synth_units(cfg: AnalysisConfig) -> list[Unit]:
    s = cfg.input.synth
    units = []
    for i, seed in enumerate(synth_seeds(cfg)):
        spec = SynthSpec(s.length, s.alpha, seed, s.kind)
        x = generate_correlated(spec) if s.kind == "correlated_gaussian" else white_noise(spec)
        if s.shuffle:
            x = shuffle(x, seed)
        if s.magnitude:
            x = magnitude(x)
        units.append(Unit(f"SYN{i:03d}", x))
    return units


def _minute_units(series, cfg: AnalysisConfig) -> list[Unit]:
    meta = {}
    if cfg.input.metadata:
        with stage("factors"):
            meta = read_metadata(cfg.input.metadata)
    with stage("ingest"):
        series = filter_active_stocks(series, cfg.ingest.min_daily_trades)
        if not series:
            raise StageError("ingest", f"no symbols left after the {cfg.ingest.min_daily_trades}"
                                       "-trades-per-day filter")
    units = []
    for ms in series:
        try:
            with stage("volatility"):
                vol = volatility_from_minutes(ms)
        except StageError as exc:
            if not isinstance(exc.cause, DegenerateSeriesError):
                raise
            log.warning("%s excluded: %s", ms.symbol, exc.cause)
            units.append(Unit(ms.symbol, None, error=str(exc.cause)))
            continue
        facs = None
        if ms.n_days >= 2:
            with stage("factors"):
                facs = compute_factors(daily_series(ms), ms, meta.get(ms.symbol))
        units.append(Unit(ms.symbol, vol.values, facs))
    return units


def load_units(cfg: AnalysisConfig) -> list[Unit]:
    kind = cfg.input.kind
    if kind == "synth":
        return synth_units(cfg)
    if cfg.input.path is None:
        raise StageError("ingest", "no input path configured")
    with stage("ingest"):
        if kind == "auto":
            kind = _detect_kind(cfg.input.path)
        if kind == "volatility":
            return [Unit(v.symbol, v.values) for v in read_volatility_csv(cfg.input.path)]
        if kind == "minutes":
            series = read_minute_csv(cfg.input.path)
        else:
            batch = parse_ticks(cfg.input.path, max_malformed_fraction=cfg.ingest.max_malformed_fraction)
            if cfg.input.calendar:
                cal = read_calendar(cfg.input.calendar)
            else:
                cal = default_calendar(batch.frame["timestamp"].to_numpy(),
                                       cfg.ingest.timezone, cfg.ingest.open_time) if len(batch) else None
            series = minute_series_from_ticks(batch, cal)
    return _minute_units(series, cfg)


def _gamma_record(res, keep_pdf: bool) -> GammaRecord:
    pdf = None
    if keep_pdf and res.pdf is not None:
        p = res.pdf
        pdf = PdfTable(x=p.bin_centers.tolist(), width=p.bin_widths.tolist(),
                       density=p.densities.tolist(), count=p.bin_counts.astype(int).tolist())
    return GammaRecord(q=res.q, status=res.status, n_intervals=res.n_intervals,
                       mean_interval=clean(res.mean_interval), gamma=clean(res.gamma),
                       a=clean(res.a), c=clean(res.c), rms_error=clean(res.rms_error),
                       converged=res.converged, n_bins=res.n_bins, pdf=pdf)


def _delta_record(res: MomentScalingResult) -> DeltaRecord:
    return DeltaRecord(m=res.m, status=res.status, delta=clean(res.delta),
                       intercept=clean(res.intercept), rms_error=clean(res.rms_error),
                       n_fit=res.n_fit, points=[(float(t), float(mu)) for t, mu in res.points])


def _factor_record(f: StockFactors | None) -> FactorRecord | None:
    if f is None:
        return None
    return FactorRecord(capitalization=f.capitalization, risk=f.risk,
                        mean_return=f.mean_return, trades_per_day=f.trades_per_day)


def analyze_unit(unit: Unit, cfg: AnalysisConfig) -> StockRecord:
    """All per-symbol analysis; pure given (unit, cfg)."""
    iv, se, dc = cfg.intervals, cfg.se_fit, cfg.delta
    if unit.values is None:
        return StockRecord(
            symbol=unit.symbol, n_points=0, error=unit.error, factors=_factor_record(unit.factors),
            gamma_by_q=[GammaRecord(q=q, status="insufficient", n_intervals=0) for q in iv.q_grid],
            delta_by_m=[DeltaRecord(m=m, status="insufficient") for m in dc.m_values])
    vol = VolatilitySeries(unit.symbol, unit.values)
    isets, gammas = [], []
    for q in iv.q_grid:
        iset, res = fit_threshold(
            vol, q, bins_per_decade=iv.bins_per_decade, min_intervals=iv.min_intervals,
            x_min=se.x_min, min_count=se.min_bin_count, gamma_bounds=tuple(se.gamma_bounds),
            rms_threshold=se.rms_threshold, tol=se.tol)
        isets.append(iset)
        gammas.append(_gamma_record(res, cfg.keep_pdfs))
    deltas = []
    for m in dc.m_values:
        pts = moment_points(isets, m, iv.min_intervals)
        try:
            res = fit_delta(pts, dc.range_low, dc.range_high, rms_threshold=dc.rms_threshold,
                            symbol=unit.symbol, m=m)
        except InsufficientDataError:
            res = MomentScalingResult.insufficient(unit.symbol, m, pts)
        deltas.append(_delta_record(res))
    dfa_rec = None
    if cfg.dfa.enabled:
        try:
            scales = default_scales(len(vol), cfg.dfa.min_scale, cfg.dfa.n_scales)
            d = dfa(vol.values, scales, cfg.dfa.order, cfg.dfa.fit_range)
            dfa_rec = DfaRecord(alpha=d.alpha, gamma_from_alpha=2.0 * (1.0 - d.alpha),
                                detrend_order=d.detrend_order, fit_range=d.fit_range,
                                scales=d.scales.tolist(), fluctuations=d.fluctuations.tolist())
        except DomainError as exc:
            log.warning("%s: DFA skipped: %s", unit.symbol, exc)
    return StockRecord(symbol=unit.symbol, n_points=len(vol), error=unit.error,
                       factors=_factor_record(unit.factors), gamma_by_q=gammas,
                       delta_by_m=deltas, dfa=dfa_rec)


def _analyze_star(args):
    return analyze_unit(*args)


def analyze_units(units, cfg: AnalysisConfig) -> list[StockRecord]:
    units = sorted(units, key=lambda u: u.symbol)
    if cfg.workers <= 1 or len(units) <= 1:
        return [analyze_unit(u, cfg) for u in units]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_analyze_star, [(u, cfg) for u in units]))


def _lookup(records, attr, key):
    for r in records:
        if math.isclose(getattr(r, attr), key, abs_tol=1e-9):
            return r
    return None


def _as_factors(s: StockRecord) -> StockFactors | None:
    f = s.factors
    if f is None:
        return None
    return StockFactors(s.symbol, f.capitalization, f.risk, f.mean_return, f.trades_per_day)


def gamma_summary(stocks, q_grid) -> list[GammaSummary]:
    out = []
    for q in q_grid:
        recs = [_lookup(s.gamma_by_q, "q", q) for s in stocks]
        valid = [r.gamma for r in recs if r is not None and r.status == "valid"]
        fitted = [r.gamma for r in recs if r is not None and r.gamma is not None]
        out.append(GammaSummary(
            q=q, n_valid=len(valid),
            mean=clean(np.mean(valid)) if valid else None,
            std=clean(np.std(valid)) if valid else None,
            n_fitted=len(fitted),
            mean_fitted=clean(np.mean(fitted)) if fitted else None,
            std_fitted=clean(np.std(fitted)) if fitted else None))
    return out


def _curve(stocks, exponent, key, cfg, notes) -> list[CurveRecord]:
    fc = cfg.factors
    attr, field = ("gamma_by_q", "q") if exponent == "gamma" else ("delta_by_m", "m")
    entries = []
    for s in stocks:
        f = _as_factors(s)
        r = _lookup(getattr(s, attr), field, key)
        if f is None or r is None or r.status != "valid":
            continue
        entries.append((f, getattr(r, exponent)))
    out = []
    for name in FACTORS:
        n_bins = fc.linear_bins if name == "mean_return" else fc.log_bins
        try:
            c = bin_and_aggregate(entries, name, n_bins, fc.min_occupancy)
        except InsufficientDataError as exc:
            notes.append(f"{exponent} {field}={key} {name}: {exc}")
            continue
        out.append(CurveRecord(
            exponent=exponent, key=key, factor=name, fit_kind=c.fit_kind,
            slope=clean(c.slope), intercept=clean(c.intercept),
            bin_centers=c.bin_centers.tolist(), means=[clean(v) for v in c.means],
            stds=[clean(v) for v in c.stds], counts=c.counts.astype(int).tolist()))
    return out


def dually_valid_pairs(stocks, q, m):
    pairs = []
    for s in stocks:
        g = _lookup(s.gamma_by_q, "q", q)
        d = _lookup(s.delta_by_m, "m", m)
        if g is not None and d is not None and g.status == "valid" and d.status == "valid":
            pairs.append((s.symbol, g.gamma, d.delta))
    return pairs


def aggregate(stocks, cfg: AnalysisConfig) -> tuple[Aggregate, Tallies]:
    """Order-independent reduction over per-stock records."""
    stocks = sorted(stocks, key=lambda s: s.symbol)
    notes = []
    curves = []
    if any(s.factors is not None for s in stocks):
        for q in cfg.factors.curve_q:
            curves += _curve(stocks, "gamma", q, cfg, notes)
        for m in cfg.factors.curve_m:
            curves += _curve(stocks, "delta", m, cfg, notes)
    else:
        notes.append("no per-stock factors; factor curves skipped")
    regs = []
    m = cfg.factors.regression_m
    for q in cfg.factors.regression_q:
        pairs = dually_valid_pairs(stocks, q, m)
        try:
            r = regress_delta_gamma([(g, d) for _, g, d in pairs], q, m)
            regs.append(RegressionRecord(q=q, m=m, status="ok", slope=r.slope, intercept=r.intercept,
                                         residual_rms=r.residual_rms, n_points=r.n_points))
        except InsufficientDataError:
            regs.append(RegressionRecord(q=q, m=m, status="insufficient", n_points=len(pairs)))
        except DegenerateRegressorError:
            regs.append(RegressionRecord(q=q, m=m, status="degenerate", n_points=len(pairs)))
    agg = Aggregate(gamma_vs_q=gamma_summary(stocks, cfg.intervals.q_grid),
                    curves=curves, regressions=regs, notes=notes)
    tallies = Tallies(
        se_fits=tally(r.status for s in stocks for r in s.gamma_by_q),
        delta_fits=tally(r.status for s in stocks for r in s.delta_by_m))
    return agg, tallies


def build_report(stocks, cfg: AnalysisConfig, seeds=()) -> AnalysisReport:
    stocks = sorted(stocks, key=lambda s: s.symbol)
    agg, tallies = aggregate(stocks, cfg)
    meta = Metadata(
        created_utc=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        code_version=__version__,
        # worker count is an execution detail; leaving it out keeps reports
        # from 1 and N workers identical
        config=cfg.model_dump(mode="json", exclude={"workers"}),
        rng=RNG_NAME,
        seeds=list(seeds))
    return AnalysisReport(metadata=meta, stocks=stocks, aggregate=agg, tallies=tallies)


def run_pipeline(cfg: AnalysisConfig) -> AnalysisReport:
    units = load_units(cfg)
    with stage("scaling"):
        stocks = analyze_units(units, cfg)
    with stage("aggregate"):
        seeds = synth_seeds(cfg) if cfg.input.kind == "synth" else []
        return build_report(stocks, cfg, seeds)


def has_soft_failures(report: AnalysisReport) -> bool:
    t = report.tallies
    return bool(t.se_fits.outlier or t.se_fits.insufficient
                or t.delta_fits.outlier or t.delta_fits.insufficient)

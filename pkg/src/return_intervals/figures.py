"""Plot-ready tables derived from a report."""

from __future__ import annotations

import pandas as pd

from .errors import MissingSectionError
from .pipeline import dually_valid_pairs
from .report import AnalysisReport


def _fig1(report):
    rows = []
    for s in report.stocks:
        for g in s.gamma_by_q:
            if g.pdf is None:
                continue
            for x, w, d, c in zip(g.pdf.x, g.pdf.width, g.pdf.density, g.pdf.count):
                rows.append((s.symbol, g.q, x, w, d, c))
    if not rows:
        raise MissingSectionError("fig1 needs stored interval PDFs (run analyze with keep_pdfs: true)")
    return pd.DataFrame(rows, columns=["symbol", "q", "x", "width", "density", "count"])


def _fig2(report):
    rows = [(g.q, g.n_valid, g.mean, g.std, g.n_fitted, g.mean_fitted, g.std_fitted)
            for g in report.aggregate.gamma_vs_q]
    if not rows:
        raise MissingSectionError("fig2 needs gamma-vs-q summaries")
    return pd.DataFrame(rows, columns=["q", "n_valid", "mean_gamma", "std_gamma",
                                       "n_fitted", "mean_gamma_fitted", "std_gamma_fitted"])


def _factor_fig(report, exponent, fig):
    key = "q" if exponent == "gamma" else "m"
    rows = []
    for c in report.aggregate.curves:
        if c.exponent != exponent:
            continue
        for x, mu, sd, n in zip(c.bin_centers, c.means, c.stds, c.counts):
            rows.append((c.factor, c.key, x, mu, sd, n, c.fit_kind, c.slope, c.intercept))
    if not rows:
        raise MissingSectionError(
            f"fig{fig} needs {exponent} factor curves; analyze minute or tick data with metadata")
    return pd.DataFrame(rows, columns=["factor", key, "bin_center", "mean", "std", "count",
                                       "fit_kind", "slope", "intercept"])


def _fig4(report):
    rows = []
    cfg = report.metadata.config.get("delta", {})
    lo, hi = cfg.get("range_low", 10.0), cfg.get("range_high", 100.0)
    for s in report.stocks:
        for d in s.delta_by_m:
            for t, mu in d.points:
                rows.append((s.symbol, d.m, t, mu, lo < t <= hi))
    if not rows:
        raise MissingSectionError("fig4 needs moment points")
    return pd.DataFrame(rows, columns=["symbol", "m", "mean_interval", "moment", "in_fit_range"])


def _fig6(report):
    regs = [r for r in report.aggregate.regressions]
    if not regs:
        raise MissingSectionError("fig6 needs delta-gamma regressions")
    rows = []
    for r in regs:
        for sym, g, d in dually_valid_pairs(report.stocks, r.q, r.m):
            fit = r.slope * g + r.intercept if r.slope is not None else None
            rows.append((r.q, r.m, sym, g, d, fit))
    return pd.DataFrame(rows, columns=["q", "m", "symbol", "gamma", "delta", "fit_delta"])


def emit_figure_tables(report: AnalysisReport, figure_id: int) -> pd.DataFrame:
    builders = {
        1: _fig1,
        2: _fig2,
        3: lambda r: _factor_fig(r, "gamma", 3),
        4: _fig4,
        5: lambda r: _factor_fig(r, "delta", 5),
        6: _fig6,
    }
    if figure_id not in builders:
        raise MissingSectionError(f"unknown figure {figure_id}; choose 1-6")
    return builders[figure_id](report)

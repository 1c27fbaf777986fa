"""Versioned JSON report schema.

Unknown fields are rejected on read; a report whose ``schema_version``
differs from this module's is refused.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .errors import AnalysisError

SCHEMA_VERSION = "1.0"

# Published TAQ 2001-2002 values, for comparison when equivalent data are supplied.
REFERENCE_VALUES = {
    "gamma_q1": 0.49,
    "gamma_q3": 0.28,
    "gamma_plateau_q3_to_q6": 0.26,
    "delta_gamma_slope_m2": {"2": -0.63, "3": -0.75, "4": -0.74, "5": -0.62},
    "se_outliers": {"count": 730, "attempted": 22740},
    "delta_outliers": {"count": 215, "attempted": 4548},
}

Status = Literal["valid", "outlier", "insufficient"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def clean(x):
    """float -> float or None (NaN/inf become None)."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


class PdfTable(_Strict):
    x: list[float]
    width: list[float]
    density: list[float]
    count: list[int]


class GammaRecord(_Strict):
    q: float
    status: Status
    n_intervals: int
    mean_interval: Optional[float] = None
    gamma: Optional[float] = None
    a: Optional[float] = None
    c: Optional[float] = None
    rms_error: Optional[float] = None
    converged: bool = False
    n_bins: int = 0
    pdf: Optional[PdfTable] = None


class DeltaRecord(_Strict):
    m: float
    status: Status
    delta: Optional[float] = None
    intercept: Optional[float] = None
    rms_error: Optional[float] = None
    n_fit: int = 0
    points: list[tuple[float, float]] = Field(default_factory=list)


class FactorRecord(_Strict):
    capitalization: Optional[float] = None
    risk: float
    mean_return: float
    trades_per_day: Optional[float] = None


class DfaRecord(_Strict):
    alpha: float
    gamma_from_alpha: float
    detrend_order: int
    fit_range: tuple[int, int]
    scales: list[int]
    fluctuations: list[float]


class StockRecord(_Strict):
    symbol: str
    n_points: int
    error: Optional[str] = None
    factors: Optional[FactorRecord] = None
    gamma_by_q: list[GammaRecord]
    delta_by_m: list[DeltaRecord]
    dfa: Optional[DfaRecord] = None


class GammaSummary(_Strict):
    q: float
    n_valid: int
    mean: Optional[float] = None
    std: Optional[float] = None
    n_fitted: int
    mean_fitted: Optional[float] = None
    std_fitted: Optional[float] = None


class CurveRecord(_Strict):
    exponent: Literal["gamma", "delta"]
    key: float
    factor: str
    fit_kind: str
    slope: Optional[float] = None
    intercept: Optional[float] = None
    bin_centers: list[float]
    means: list[Optional[float]]
    stds: list[Optional[float]]
    counts: list[int]


class RegressionRecord(_Strict):
    q: float
    m: float
    status: Literal["ok", "insufficient", "degenerate"]
    slope: Optional[float] = None
    intercept: Optional[float] = None
    residual_rms: Optional[float] = None
    n_points: int = 0


class Tally(_Strict):
    attempted: int
    valid: int
    outlier: int
    insufficient: int
    outlier_fraction: float
    insufficient_fraction: float


class Tallies(_Strict):
    se_fits: Tally
    delta_fits: Tally


class Aggregate(_Strict):
    gamma_vs_q: list[GammaSummary]
    curves: list[CurveRecord] = Field(default_factory=list)
    regressions: list[RegressionRecord] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)


class Metadata(_Strict):
    created_utc: str
    code_version: str
    config: dict
    rng: str
    seeds: list[int] = Field(default_factory=list)
    volatility_order: str = "intraday-pattern removal, then global standard-deviation normalization"
    reference_values: dict = Field(default_factory=lambda: dict(REFERENCE_VALUES))


class AnalysisReport(_Strict):
    schema_version: str = SCHEMA_VERSION
    metadata: Metadata
    stocks: list[StockRecord]
    aggregate: Aggregate
    tallies: Tallies


def tally(statuses) -> Tally:
    counts = {"valid": 0, "outlier": 0, "insufficient": 0}
    for s in statuses:
        counts[s] += 1
    n = sum(counts.values())
    return Tally(attempted=n, **counts,
                 outlier_fraction=counts["outlier"] / n if n else 0.0,
                 insufficient_fraction=counts["insufficient"] / n if n else 0.0)


def report_json(report: AnalysisReport) -> str:
    return report.model_dump_json(indent=1)


def report_body(report: AnalysisReport) -> str:
    """Serialized report with the creation timestamp blanked."""
    data = json.loads(report_json(report))
    data["metadata"]["created_utc"] = ""
    return json.dumps(data, indent=1, sort_keys=True)


def write_report(report: AnalysisReport, path) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".report-", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(report_json(report))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def read_report(path) -> AnalysisReport:
    text = Path(path).read_text()
    version = json.loads(text).get("schema_version")
    if version != SCHEMA_VERSION:
        raise AnalysisError(f"report schema {version!r} not supported (expected {SCHEMA_VERSION})")
    return AnalysisReport.model_validate_json(text)

"""Analysis configuration.

Every tunable default lives here and is echoed into the report. Files
are YAML (or JSON, which YAML reads too); ``key.sub=value`` overrides
are applied on top.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field

from .scaling import DEFAULT_M_VALUES, DEFAULT_Q_GRID


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SynthInput(_Strict):
    kind: Literal["correlated_gaussian", "white_noise"] = "correlated_gaussian"
    alpha: float = 0.85
    length: int = 2 ** 20
    count: int = 8
    seed: int = 7
    magnitude: bool = False
    shuffle: bool = False


class InputConfig(_Strict):
    path: Optional[str] = None
    kind: Literal["auto", "ticks", "minutes", "volatility", "synth"] = "auto"
    metadata: Optional[str] = None
    calendar: Optional[str] = None
    synth: SynthInput = Field(default_factory=SynthInput)


class IngestConfig(_Strict):
    min_daily_trades: int = 500
    timezone: str = "America/New_York"
    open_time: str = "09:30"
    max_malformed_fraction: float = 0.01


class IntervalConfig(_Strict):
    q_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_Q_GRID))
    bins_per_decade: int = 20
    min_intervals: int = 50


class SeFitConfig(_Strict):
    x_min: float = 0.1
    min_bin_count: int = 10
    gamma_bounds: tuple[float, float] = (0.05, 2.0)
    rms_threshold: float = 0.10
    tol: float = 1e-9


class DeltaConfig(_Strict):
    m_values: list[float] = Field(default_factory=lambda: list(DEFAULT_M_VALUES))
    range_low: float = 10.0
    range_high: float = 100.0
    rms_threshold: float = 0.22


class DfaConfig(_Strict):
    enabled: bool = False
    order: int = 2
    min_scale: int = 10
    n_scales: int = 20
    fit_range: Optional[tuple[int, int]] = None


class FactorConfig(_Strict):
    log_bins: int = 12
    linear_bins: int = 10
    min_occupancy: int = 5
    curve_q: list[float] = Field(default_factory=lambda: [2.0, 3.0, 4.0, 5.0])
    curve_m: list[float] = Field(default_factory=lambda: list(DEFAULT_M_VALUES))
    regression_m: float = 2.0
    regression_q: list[float] = Field(default_factory=lambda: [2.0, 3.0, 4.0, 5.0])


class AnalysisConfig(_Strict):
    input: InputConfig = Field(default_factory=InputConfig)
    ingest: IngestConfig = Field(default_factory=IngestConfig)
    intervals: IntervalConfig = Field(default_factory=IntervalConfig)
    se_fit: SeFitConfig = Field(default_factory=SeFitConfig)
    delta: DeltaConfig = Field(default_factory=DeltaConfig)
    dfa: DfaConfig = Field(default_factory=DfaConfig)
    factors: FactorConfig = Field(default_factory=FactorConfig)
    workers: int = 1
    keep_pdfs: bool = True


def _set_dotted(tree: dict, key: str, value) -> None:
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def load_config(path=None, overrides=()) -> AnalysisConfig:
    tree: dict = {}
    if path is not None:
        tree = yaml.safe_load(Path(path).read_text()) or {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} must look like key=value")
        _set_dotted(tree, key.strip(), yaml.safe_load(raw))
    return AnalysisConfig.model_validate(tree)


def dump_config(cfg: AnalysisConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)

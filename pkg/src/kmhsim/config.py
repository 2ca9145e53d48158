"""Flat ``key=value`` run configuration.

Precedence is defaults < file < command-line overrides. Time quantities are
given in nanoseconds and converted to seconds when building model objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import InvalidArgumentError
from .hbt import DetectorModel, RunConfig
from .sources import FILTERED_COHERENCE_TIME, SourceSpec

NS = 1e-9


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, line: int | None = None, source: str | None = None):
        where = f"{source}:{line}: " if line is not None else ""
        super().__init__(f"{where}{key}: {message}")
        self.key = key
        self.line = line


@dataclass(frozen=True)
class Config:
    alpha: float = 0.1
    pair_amp: float = 0.01
    phi: float = math.pi
    overlap_v: float = 1.0
    hom_delay_ns: float = 0.0
    coherence_time_ns: float = FILTERED_COHERENCE_TIME / NS
    cutoff: int = 6
    efficiency: float = 0.5
    dark_rate_hz: float = 0.0
    rep_rate_hz: float = 76e6
    duration_s: float = 60.0
    bin_ns: float = 1.0
    window_ns: float = 3.0
    side_peaks: int = 10
    max_lag_periods: int = 6
    seed: int = 0
    shards: int = 1
    target_side_counts: float = 0.0
    phi_steps: int = 13
    hom_max_ns: float = 0.003
    hom_steps: int = 13

    def source(self) -> SourceSpec:
        return SourceSpec(
            alpha=self.alpha,
            pair_amp=self.pair_amp,
            phi=self.phi,
            overlap_v=self.overlap_v,
            hom_delay=self.hom_delay_ns * NS,
            coherence_time=self.coherence_time_ns * NS,
            cutoff=self.cutoff,
        )

    def detectors(self) -> DetectorModel:
        return DetectorModel(efficiency=self.efficiency, dark_rate=self.dark_rate_hz)

    def run(self) -> RunConfig:
        return RunConfig(
            rep_rate=self.rep_rate_hz,
            duration=self.duration_s,
            bin_width=self.bin_ns * NS,
            window_halfwidth=self.window_ns * NS,
            seed=self.seed,
            shards=self.shards,
            max_lag_periods=self.max_lag_periods,
            n_side_peaks=self.side_peaks,
        )

    def validate(self) -> "Config":
        """Build every model object once so constraint violations surface with the key name."""
        checks = {
            "alpha": lambda: abs(self.alpha) < 1,
            "pair_amp": lambda: abs(self.pair_amp) < 1,
            "overlap_v": lambda: 0 <= self.overlap_v <= 1,
            "coherence_time_ns": lambda: self.coherence_time_ns > 0,
            "cutoff": lambda: self.cutoff >= 0,
            "efficiency": lambda: 0 <= self.efficiency <= 1,
            "dark_rate_hz": lambda: self.dark_rate_hz >= 0,
            "rep_rate_hz": lambda: self.rep_rate_hz > 0,
            "duration_s": lambda: self.duration_s > 0,
            "bin_ns": lambda: 0 < self.bin_ns < 1e9 / self.rep_rate_hz,
            "window_ns": lambda: 0 < self.window_ns <= 0.5e9 / self.rep_rate_hz,
            "side_peaks": lambda: self.side_peaks >= 1,
            "max_lag_periods": lambda: self.max_lag_periods >= 1,
            "shards": lambda: self.shards >= 1,
            "target_side_counts": lambda: self.target_side_counts >= 0,
            "phi_steps": lambda: self.phi_steps >= 1,
            "hom_steps": lambda: self.hom_steps >= 1,
        }
        for key, ok in checks.items():
            if not ok():
                raise ConfigError(key, f"value {getattr(self, key)!r} violates its constraint")
        try:
            self.source(), self.detectors(), self.run()
        except InvalidArgumentError as exc:
            raise ConfigError("config", str(exc)) from exc
        return self

    def header(self) -> str:
        return "".join(f"# {f.name}={_show(getattr(self, f.name))}\n" for f in fields(self))


_TYPES = {f.name: f.type for f in fields(Config)}


def _show(value: Any) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _convert(key: str, raw: str, line: int | None, source: str | None) -> Any:
    if key not in _TYPES:
        raise ConfigError(key, "unknown key", line, source)
    text = raw.strip()
    try:
        if _TYPES[key] == "int":
            return int(text)
        value = float(text)
    except ValueError:
        raise ConfigError(key, f"malformed number {raw!r}", line, source) from None
    if not math.isfinite(value):
        raise ConfigError(key, f"non-finite value {raw!r}", line, source)
    return value


def read_config_file(path: str | Path) -> dict[str, tuple[Any, int]]:
    values: dict[str, tuple[Any, int]] = {}
    source = str(path)
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(body, "expected key=value", lineno, source)
        key, raw = (s.strip() for s in body.split("=", 1))
        values[key] = (_convert(key, raw, lineno, source), lineno)
    return values


def parse_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> Config:
    """Resolve defaults, then ``path``, then ``overrides`` (``None`` values are skipped)."""
    file_values = read_config_file(path) if path else {}
    config = replace(Config(), **{k: v for k, (v, _) in file_values.items()})
    flags = {k: v for k, v in (overrides or {}).items() if v is not None}
    config = replace(config, **{k: _convert(k, str(v), None, None) for k, v in flags.items()})
    try:
        return config.validate()
    except ConfigError as exc:
        if exc.key in file_values and exc.key not in flags:
            raise ConfigError(
                exc.key, "value violates its constraint", file_values[exc.key][1], str(path)
            ) from None
        raise

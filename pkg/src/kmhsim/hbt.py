"""Event-driven Monte Carlo of the pulsed Hanbury-Brown Twiss measurement.

Each pulse carries ``n`` photons drawn from the output-beam distribution. Every
photon goes to APD-1 or APD-2 with probability 1/2 and is detected with the
detector efficiency; dark counts are Poisson per pulse period. Detectors are
threshold devices and all clicks sit on the pulse grid, so a pulse is fully
described by which detectors fired.

Pulses where nothing fires are skipped with geometric gaps, which makes a
60 s run at 76 MHz a few million events rather than billions of pulses.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgumentError, NoSolutionError, UndefinedStatisticError
from .pipeline import (
    RatioFit,
    fit_ratio_model,
    output_distribution,
    suppression_factor,
    visibility,
)
from .sources import SourceSpec

REP_RATE = 76e6

# click pattern codes
ONLY_1, ONLY_2, BOTH = 0, 1, 2


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 0.5
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidArgumentError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dark_rate < 0:
            raise InvalidArgumentError("dark_rate must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    """Timing and sampling settings; times in seconds."""

    rep_rate: float = REP_RATE
    duration: float = 60.0
    bin_width: float = 1e-9
    window_halfwidth: float = 3e-9
    seed: int = 0
    shards: int = 1
    max_lag_periods: int = 6
    n_side_peaks: int = 10

    def __post_init__(self):
        if not self.rep_rate > 0:
            raise InvalidArgumentError("rep_rate must be > 0")
        if not self.duration > 0:
            raise InvalidArgumentError("duration must be > 0")
        period = 1.0 / self.rep_rate
        if not 0 < self.bin_width < period:
            raise InvalidArgumentError("bin_width must be positive and below the pulse period")
        if not 0 < self.window_halfwidth <= period / 2:
            raise InvalidArgumentError("window_halfwidth must lie in (0, period/2]")
        if self.shards < 1:
            raise InvalidArgumentError("shards must be >= 1")
        if self.max_lag_periods < 1:
            raise InvalidArgumentError("max_lag_periods must be >= 1")
        if self.n_side_peaks < 1:
            raise InvalidArgumentError("n_side_peaks must be >= 1")
        if math.ceil(self.n_side_peaks / 2) > self.max_lag_periods:
            raise InvalidArgumentError("n_side_peaks needs more lags than max_lag_periods")

    @property
    def period(self) -> float:
        return 1.0 / self.rep_rate

    @property
    def n_pulses(self) -> int:
        return int(round(self.duration * self.rep_rate))


@dataclass(frozen=True)
class Histogram:
    """Coincidence counts versus ``t(APD-2) - t(APD-1)``; edges in seconds."""

    edges: np.ndarray
    counts: np.ndarray
    total_pulses: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_csv(self) -> str:
        lines = ["bin_center_ns,counts"]
        lines += [f"{c * 1e9:.3f},{int(n)}" for c, n in zip(self.centers, self.counts)]
        return "\n".join(lines) + "\n"

    def __add__(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise InvalidArgumentError("cannot merge histograms with different binning")
        return Histogram(self.edges, self.counts + other.counts, self.total_pulses + other.total_pulses)


@dataclass(frozen=True)
class RatioReport:
    central_counts: int
    side_mean: float
    side_stderr: float
    ratio: float
    n_side_peaks: int
    side_counts: tuple[int, ...] = ()

    @property
    def side_std(self) -> float:
        return float(np.std(self.side_counts, ddof=1)) if len(self.side_counts) > 1 else 0.0


@dataclass(frozen=True)
class PairReport:
    antibunched: RatioReport
    bunched: RatioReport
    visibility: float
    suppression_factor: float
    rho_fit: float
    v_fit: float
    fit_clamped: bool
    antibunched_hist: Histogram
    bunched_hist: Histogram

    def to_text(self) -> str:
        a, b = self.antibunched, self.bunched
        pairs = [
            ("central_counts", a.central_counts),
            ("side_mean", a.side_mean),
            ("side_stderr", a.side_stderr),
            ("ratio", a.ratio),
            ("bunched_central_counts", b.central_counts),
            ("bunched_side_mean", b.side_mean),
            ("bunched_side_stderr", b.side_stderr),
            ("bunched_ratio", b.ratio),
            ("visibility", self.visibility),
            ("suppression_factor", self.suppression_factor),
            ("rho_fit", self.rho_fit),
            ("v_fit", self.v_fit),
        ]
        return "".join(f"{k}={_fmt(v)}\n" for k, v in pairs)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


@lru_cache(maxsize=256)
def per_pulse_distribution(spec: SourceSpec) -> np.ndarray:
    """Photon-number distribution of one output pulse (cached per spec)."""
    probs = output_distribution(spec)
    probs = np.clip(probs, 0.0, None)
    probs.setflags(write=False)
    return probs


def click_probabilities(
    probs: np.ndarray, detectors: DetectorModel, period: float
) -> tuple[float, float, float]:
    """Exact per-pulse probabilities of (only APD-1, only APD-2, both) firing."""
    eta = detectors.efficiency
    dark = -math.expm1(-detectors.dark_rate * period)
    n = np.arange(len(probs))
    total = probs.sum()
    # P(a given detector silent) and P(both silent), marginalized over n.
    one_silent = float(probs @ (1 - eta / 2) ** n) * (1 - dark)
    both_silent = float(probs @ (1 - eta) ** n) * (1 - dark) ** 2
    only_one = one_silent - both_silent
    both = total - 2 * one_silent + both_silent
    return only_one, only_one, max(both, 0.0)


def _shard_bounds(n_pulses: int, shards: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n_pulses, shards + 1).round().astype(np.int64)
    return list(zip(edges[:-1].tolist(), edges[1:].tolist()))


def _sample_shard(
    start: int, stop: int, p_event: float, pattern_cdf: np.ndarray, seed_seq: np.random.SeedSequence
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed_seq)
    n = stop - start
    if p_event <= 0 or n <= 0:
        return np.empty(0, np.int64), np.empty(0, np.int8)
    chunks = []
    pos = start - 1
    expected = n * p_event
    batch = int(expected + 6 * math.sqrt(expected) + 64)
    while True:
        gaps = rng.geometric(p_event, size=batch)
        idx = pos + np.cumsum(gaps, dtype=np.int64)
        inside = idx[idx < stop]
        chunks.append(inside)
        if len(inside) < len(idx):
            break
        pos = int(idx[-1])
        batch = max(batch // 4, 64)
    pulses = np.concatenate(chunks)
    patterns = np.searchsorted(pattern_cdf, rng.random(len(pulses)), side="right").astype(np.int8)
    return pulses, patterns


def _lag_counts(
    pulses: np.ndarray, patterns: np.ndarray, max_lag: int
) -> np.ndarray:
    t1 = pulses[patterns != ONLY_2]
    t2 = pulses[patterns != ONLY_1]
    counts = np.zeros(2 * max_lag + 1, dtype=np.int64)
    for j, lag in enumerate(range(-max_lag, max_lag + 1)):
        if lag == 0:
            counts[j] = int(np.count_nonzero(patterns == BOTH))
            continue
        if len(t2) == 0:
            continue
        target = t1 + lag
        pos = np.minimum(np.searchsorted(t2, target), len(t2) - 1)
        counts[j] = int(np.count_nonzero(t2[pos] == target))
    return counts


def _binning(config: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    """Uniform bin edges centred on multiples of ``bin_width``, and the bin of each lag."""
    half_span = (config.max_lag_periods + 0.5) * config.period
    m = int(math.ceil(half_span / config.bin_width))
    edges = (np.arange(-m, m + 2) - 0.5) * config.bin_width
    lags = np.arange(-config.max_lag_periods, config.max_lag_periods + 1)
    lag_bins = np.rint(lags * config.period / config.bin_width).astype(np.int64) + m
    return edges, lag_bins


def simulate_run(
    spec: SourceSpec,
    detectors: DetectorModel,
    config: RunConfig,
    stream: int = 0,
    dead_time_filter: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None,
) -> Histogram:
    """Simulate ``config.duration`` seconds of HB-T detection.

    Shard ``k`` owns pulses in ``[k N / shards, (k+1) N / shards)`` and draws
    from the RNG substream keyed by ``(seed, stream, k)``; the result is
    bit-identical for the same ``(seed, shards, stream)``. ``dead_time_filter``
    may drop or alter events; it receives and returns ``(pulses, patterns)``.
    """
    probs = per_pulse_distribution(spec)
    only_1, only_2, both = click_probabilities(probs, detectors, config.period)
    p_event = only_1 + only_2 + both
    if p_event >= 1.0:
        raise InvalidArgumentError("click probability per pulse reached 1")
    pattern_cdf = np.cumsum([only_1, only_2, both]) / p_event if p_event > 0 else np.ones(3)
    pattern_cdf[-1] = 1.0

    bounds = _shard_bounds(config.n_pulses, config.shards)
    seeds = [
        np.random.SeedSequence(entropy=config.seed, spawn_key=(stream, k))
        for k in range(config.shards)
    ]
    jobs = [(lo, hi, p_event, pattern_cdf, ss) for (lo, hi), ss in zip(bounds, seeds)]
    if config.shards > 1:
        with ThreadPoolExecutor() as pool:
            parts = list(pool.map(lambda args: _sample_shard(*args), jobs))
    else:
        parts = [_sample_shard(*jobs[0])]
    pulses = np.concatenate([p for p, _ in parts])
    patterns = np.concatenate([c for _, c in parts])
    if dead_time_filter is not None:
        pulses, patterns = dead_time_filter(pulses, patterns)

    edges, lag_bins = _binning(config)
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    np.add.at(counts, lag_bins, _lag_counts(pulses, patterns, config.max_lag_periods))
    return Histogram(edges=edges, counts=counts, total_pulses=config.n_pulses)


def _side_lags(n_side_peaks: int) -> list[int]:
    # -1, +1, -2, +2, ... truncated to n_side_peaks entries
    lags = []
    k = 1
    while len(lags) < n_side_peaks:
        lags.append(-k)
        if len(lags) < n_side_peaks:
            lags.append(k)
        k += 1
    return lags


def integrate_peaks(
    hist: Histogram, rep_period: float, window_halfwidth: float, n_side_peaks: int = 10
) -> RatioReport:
    """Integrate the zero-delay peak and ``n_side_peaks`` side peaks nearest to it.

    Side peaks are taken alternately at ``-T, +T, -2T, +2T, ...``.
    """
    if n_side_peaks < 1:
        raise InvalidArgumentError("n_side_peaks must be >= 1")
    centers = hist.centers
    lags = _side_lags(n_side_peaks)
    reach = max(abs(k) for k in lags) * rep_period + window_halfwidth
    if hist.edges[0] > -reach or hist.edges[-1] < reach:
        raise InvalidArgumentError("histogram does not span the requested side peaks")

    def peak(t0: float) -> int:
        return int(hist.counts[np.abs(centers - t0) <= window_halfwidth].sum())

    central = peak(0.0)
    sides = np.array([peak(k * rep_period) for k in lags])
    side_mean = float(sides.mean())
    if side_mean <= 0:
        raise UndefinedStatisticError("side peaks are empty; ratio undefined")
    stderr = float(sides.std(ddof=1) / math.sqrt(len(sides))) if len(sides) > 1 else 0.0
    return RatioReport(
        central_counts=central,
        side_mean=side_mean,
        side_stderr=stderr,
        ratio=central / side_mean,
        n_side_peaks=len(sides),
        side_counts=tuple(int(s) for s in sides),
    )


def run_pair_and_report(
    spec: SourceSpec, detectors: DetectorModel, config: RunConfig
) -> PairReport:
    """Antibunched (``phi = pi``) and bunched (``phi = 0``) runs plus their analysis."""
    hist_anti = simulate_run(replace(spec, phi=math.pi), detectors, config, stream=0)
    hist_bunch = simulate_run(replace(spec, phi=0.0), detectors, config, stream=1)
    anti = integrate_peaks(hist_anti, config.period, config.window_halfwidth, config.n_side_peaks)
    bunch = integrate_peaks(hist_bunch, config.period, config.window_halfwidth, config.n_side_peaks)
    lo, hi = sorted((anti.ratio, bunch.ratio))
    try:
        fit = fit_ratio_model(lo, hi)
    except NoSolutionError:
        fit = RatioFit(rho=math.nan, v=math.nan, clamped=False)
    return PairReport(
        antibunched=anti,
        bunched=bunch,
        visibility=visibility(lo, hi),
        suppression_factor=suppression_factor(anti.ratio),
        rho_fit=fit.rho,
        v_fit=fit.v,
        fit_clamped=fit.clamped,
        antibunched_hist=hist_anti,
        bunched_hist=hist_bunch,
    )


def expected_side_counts(
    spec: SourceSpec, detectors: DetectorModel, config: RunConfig
) -> float:
    """Closed-form accidental count per side peak, ``N (eta <n> / 2)^2``."""
    return config.n_pulses * (detectors.efficiency * _mean_photons(spec) / 2) ** 2


def _mean_photons(spec: SourceSpec) -> float:
    # Output port gets half of the coherent light and half of the PDC kept
    # arm, which in turn carries half of the pair photons.
    g2 = abs(spec.pair_amp) ** 2
    return (abs(spec.alpha) ** 2 + g2 / (1 - g2)) / 2


def calibrate_alpha(
    spec: SourceSpec, detectors: DetectorModel, config: RunConfig, target_side_counts: float
) -> SourceSpec:
    """Rescale ``alpha`` (keeping rho and phases fixed) so each side peak expects the target."""
    if not target_side_counts > 0:
        raise InvalidArgumentError("target_side_counts must be > 0")
    rho = spec.rho if spec.alpha else 0.0
    unit_a = spec.alpha / abs(spec.alpha) if spec.alpha else 1.0
    unit_g = spec.pair_amp / abs(spec.pair_amp) if spec.pair_amp else 1.0

    def scaled(mag: float) -> SourceSpec:
        return replace(spec, alpha=unit_a * mag, pair_amp=unit_g * rho * mag**2)

    def excess(mag: float) -> float:
        return expected_side_counts(scaled(mag), detectors, config) - target_side_counts

    hi = 0.999 if rho <= 1 else min(0.999, math.sqrt(0.999 / rho))
    if excess(hi) < 0:
        raise InvalidArgumentError("target side counts unreachable with |alpha| < 1")
    return scaled(brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-14))

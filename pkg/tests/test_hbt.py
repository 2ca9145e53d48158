import itertools
import math

import numpy as np
import pytest

from kmhsim.errors import InvalidArgumentError, UndefinedStatisticError
from kmhsim.hbt import (
    DetectorModel,
    Histogram,
    RunConfig,
    calibrate_alpha,
    click_probabilities,
    expected_side_counts,
    integrate_peaks,
    per_pulse_distribution,
    run_pair_and_report,
    simulate_run,
)
from kmhsim.pipeline import engine_g2, predicted_g2
from kmhsim.sources import SourceSpec

PERIOD = 1 / 76e6


def coherent(alpha):
    return SourceSpec(alpha=alpha, pair_amp=0.0)


def ratio_sigma(report):
    """Combined Poisson sigma of central / side_mean."""
    c, s, n = report.central_counts, report.side_mean, report.n_side_peaks
    r = c / s
    return r * math.sqrt(1 / max(c, 1) + 1 / (s * n))


def synthetic(peaks: dict[int, int], config=RunConfig()) -> Histogram:
    """Histogram with the given counts at lag multiples of the period."""
    from kmhsim.hbt import _binning

    edges, lag_bins = _binning(config)
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    lags = range(-config.max_lag_periods, config.max_lag_periods + 1)
    for lag, b in zip(lags, lag_bins):
        counts[b] = peaks.get(lag, 0)
    return Histogram(edges, counts, 0)


# --- configuration ----------------------------------------------------------


def test_run_config_validation():
    with pytest.raises(InvalidArgumentError):
        RunConfig(bin_width=20e-9)
    with pytest.raises(InvalidArgumentError):
        RunConfig(window_halfwidth=7e-9)
    with pytest.raises(InvalidArgumentError):
        RunConfig(rep_rate=0)
    with pytest.raises(InvalidArgumentError):
        RunConfig(n_side_peaks=20, max_lag_periods=6)
    with pytest.raises(InvalidArgumentError):
        DetectorModel(efficiency=1.5)
    assert RunConfig().n_pulses == 60 * 76_000_000


# --- per-pulse statistics ---------------------------------------------------


def test_per_pulse_distribution_examples():
    assert per_pulse_distribution(SourceSpec(alpha=0.0, pair_amp=0.0))[0] == 1.0
    matched = SourceSpec(alpha=0.01, pair_amp=1e-4, phi=math.pi)
    assert per_pulse_distribution(matched)[2] <= 1e-12
    p1 = per_pulse_distribution(coherent(0.1))[1]
    assert p1 == pytest.approx(0.005 * math.exp(-0.005), rel=1e-9)
    assert p1 == pytest.approx(0.00497, abs=1e-5)


def test_per_pulse_distribution_is_cached_and_read_only():
    spec = coherent(0.2)
    assert per_pulse_distribution(spec) is per_pulse_distribution(spec)
    with pytest.raises(ValueError):
        per_pulse_distribution(spec)[0] = 0.0


def _click_oracle(probs, eta):
    """Enumerate per-photon outcomes: 0 lost, 1 to APD-1, 2 to APD-2."""
    weights = {0: 1 - eta, 1: eta / 2, 2: eta / 2}
    only1 = only2 = both = 0.0
    for n, pn in enumerate(probs):
        for outcome in itertools.product((0, 1, 2), repeat=n):
            w = pn * math.prod(weights[o] for o in outcome)
            hit1, hit2 = 1 in outcome, 2 in outcome
            only1 += w * (hit1 and not hit2)
            only2 += w * (hit2 and not hit1)
            both += w * (hit1 and hit2)
    return only1, only2, both


@pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
def test_click_probabilities_against_enumeration(eta):
    probs = np.array([0.6, 0.25, 0.1, 0.05])
    got = click_probabilities(probs, DetectorModel(eta), PERIOD)
    np.testing.assert_allclose(got, _click_oracle(probs, eta), atol=1e-15)


def test_dark_counts_add_clicks():
    probs = np.array([1.0])
    only1, only2, both = click_probabilities(probs, DetectorModel(0.5, dark_rate=1e5), PERIOD)
    p = -math.expm1(-1e5 * PERIOD)
    assert only1 == pytest.approx(p * (1 - p))
    assert both == pytest.approx(p * p)


# --- simulate_run ----------------------------------------------------------


def test_dark_vacuum_gives_empty_histogram():
    hist = simulate_run(SourceSpec(alpha=0.0, pair_amp=0.0), DetectorModel(), RunConfig(duration=1.0))
    assert hist.counts.sum() == 0
    assert hist.total_pulses == 76_000_000


def test_histogram_binning():
    hist = simulate_run(coherent(0.1), DetectorModel(), RunConfig(duration=0.01))
    widths = np.diff(hist.edges)
    np.testing.assert_allclose(widths, 1e-9, rtol=1e-12)
    assert hist.edges[0] <= -6.5 * PERIOD and hist.edges[-1] >= 6.5 * PERIOD
    assert np.all(hist.counts >= 0)


def test_coherent_ratio_is_one():
    cfg = RunConfig(duration=1.0, seed=3)
    report = integrate_peaks(simulate_run(coherent(0.3), DetectorModel(0.5), cfg), PERIOD, 3e-9, 10)
    assert report.side_mean > 5000
    assert abs(report.ratio - 1.0) <= 3 * ratio_sigma(report)


def test_ratio_matches_engine_g2_at_low_rate():
    spec = SourceSpec(alpha=0.1, pair_amp=0.005, phi=math.pi, overlap_v=0.8)
    cfg = RunConfig(duration=20.0, seed=11)
    report = integrate_peaks(simulate_run(spec, DetectorModel(0.5), cfg), PERIOD, 3e-9, 10)
    assert abs(report.ratio - engine_g2(spec)) <= 3 * ratio_sigma(report)


def test_seed_determinism():
    spec = SourceSpec(alpha=0.1, pair_amp=0.01, phi=math.pi)
    cfg = RunConfig(duration=0.5, seed=42, shards=3)
    a = simulate_run(spec, DetectorModel(), cfg)
    b = simulate_run(spec, DetectorModel(), cfg)
    assert a.to_csv() == b.to_csv()
    c = simulate_run(spec, DetectorModel(), cfg, stream=1)
    assert not np.array_equal(a.counts, c.counts)


def test_shard_counts_statistically_compatible():
    spec = coherent(0.2)
    det = DetectorModel(0.5)
    one = integrate_peaks(simulate_run(spec, det, RunConfig(duration=1.0, seed=5, shards=1)), PERIOD, 3e-9)
    four = integrate_peaks(simulate_run(spec, det, RunConfig(duration=1.0, seed=5, shards=4)), PERIOD, 3e-9)
    diff = one.side_mean - four.side_mean
    sigma = math.sqrt((one.side_mean + four.side_mean) / 10)
    assert abs(diff) <= 4 * sigma
    assert abs(one.ratio - four.ratio) <= 3 * math.hypot(ratio_sigma(one), ratio_sigma(four))


def test_side_peak_flatness():
    cfg = RunConfig(duration=1.0, seed=8)
    report = integrate_peaks(simulate_run(coherent(0.25), DetectorModel(0.5), cfg), PERIOD, 3e-9, 10)
    sides = np.array(report.side_counts)
    assert len(sides) >= 10
    z = max(abs(a - b) / math.sqrt(a + b) for a, b in itertools.combinations(sides, 2))
    assert z < 4


def test_efficiency_invariance():
    spec = SourceSpec(alpha=0.2, pair_amp=0.02, phi=math.pi, overlap_v=0.8)
    cfg = RunConfig(duration=2.0, seed=21)
    hi = integrate_peaks(simulate_run(spec, DetectorModel(0.5), cfg), PERIOD, 3e-9)
    lo = integrate_peaks(simulate_run(spec, DetectorModel(0.25), cfg), PERIOD, 3e-9)
    assert hi.side_mean == pytest.approx(4 * lo.side_mean, rel=0.05)
    assert abs(hi.ratio - lo.ratio) <= 3 * math.hypot(ratio_sigma(hi), ratio_sigma(lo))


def test_dead_time_filter_hook():
    spec = coherent(0.2)
    cfg = RunConfig(duration=0.1)
    hist = simulate_run(spec, DetectorModel(), cfg, dead_time_filter=lambda p, c: (p[:0], c[:0]))
    assert hist.counts.sum() == 0


def test_saturated_detectors_rejected():
    with pytest.raises(InvalidArgumentError):
        simulate_run(SourceSpec(alpha=0.0, pair_amp=0.0), DetectorModel(dark_rate=1e12), RunConfig(duration=0.01))


# --- integrate_peaks --------------------------------------------------------


def test_integrate_flat_peaks():
    hist = synthetic({lag: 1000 for lag in range(-6, 7)})
    report = integrate_peaks(hist, PERIOD, 3e-9, 10)
    assert report.ratio == 1.0
    assert report.side_stderr == 0.0
    assert report.n_side_peaks == 10


def test_integrate_measured_antibunched():
    rng = np.random.default_rng(0)
    sides = rng.poisson(948.8, size=10)
    sides[0] += 9488 - sides.sum()  # pin the mean to 948.8
    lags = [-1, 1, -2, 2, -3, 3, -4, 4, -5, 5]
    peaks = dict(zip(lags, sides.tolist()))
    peaks[0] = 346
    report = integrate_peaks(synthetic(peaks), PERIOD, 3e-9, 10)
    assert report.side_mean == pytest.approx(948.8)
    assert report.ratio == pytest.approx(0.365, abs=5e-4)


def test_integrate_measured_bunched():
    lags = [-1, 1, -2, 2, -3, 3, -4, 4, -5, 5]
    sides = [1002] * 10
    sides[0] += 4
    peaks = dict(zip(lags, sides))
    peaks[0] = 3351
    report = integrate_peaks(synthetic(peaks), PERIOD, 3e-9, 10)
    assert report.side_mean == pytest.approx(1002.4)
    assert report.ratio == pytest.approx(3351 / 1002.4, rel=1e-12)
    assert report.ratio == pytest.approx(3.343, abs=5e-4)


def test_integrate_stderr():
    lags = [-1, 1, -2, 2]
    peaks = dict(zip(lags, [90, 110, 95, 105]))
    peaks[0] = 50
    report = integrate_peaks(synthetic(peaks), PERIOD, 3e-9, 4)
    assert report.side_stderr == pytest.approx(np.std([90, 110, 95, 105], ddof=1) / 2)
    assert report.side_std == pytest.approx(np.std([90, 110, 95, 105], ddof=1))


def test_integrate_errors():
    with pytest.raises(UndefinedStatisticError):
        integrate_peaks(synthetic({0: 5}), PERIOD, 3e-9, 10)
    with pytest.raises(InvalidArgumentError):
        integrate_peaks(synthetic({1: 5}), PERIOD, 3e-9, 14)


# --- pair runs / calibration ------------------------------------------------


def test_ideal_pair_visibility_one():
    spec = SourceSpec(alpha=0.1, pair_amp=0.01)
    cfg = RunConfig(duration=2.0, seed=4)
    report = run_pair_and_report(spec, DetectorModel(0.5), cfg)
    b = report.bunched
    # visibility error is dominated by the small antibunched central peak
    sigma = 2 * math.sqrt(max(report.antibunched.central_counts, 1)) / b.central_counts
    assert abs(report.visibility - 1.0) <= 3 * sigma + 0.02


def test_indistinguishable_off_gives_no_visibility():
    spec = SourceSpec(alpha=0.1, pair_amp=0.01, overlap_v=0.0)
    cfg = RunConfig(duration=2.0, seed=6)
    report = run_pair_and_report(spec, DetectorModel(0.5), cfg)
    a, b = report.antibunched, report.bunched
    sigma_vis = math.hypot(ratio_sigma(a), ratio_sigma(b)) / (a.ratio + b.ratio)
    assert abs(report.visibility) <= 3 * sigma_vis


def test_pair_report_text_keys():
    spec = SourceSpec(alpha=0.1, pair_amp=0.009)
    report = run_pair_and_report(spec, DetectorModel(0.5), RunConfig(duration=0.5))
    keys = [line.split("=")[0] for line in report.to_text().splitlines()]
    for key in ("central_counts", "side_mean", "side_stderr", "ratio", "visibility",
                "suppression_factor", "rho_fit", "v_fit"):
        assert key in keys


def test_calibration_hits_target():
    spec = SourceSpec(alpha=0.1, pair_amp=0.009246, overlap_v=0.8053)
    det, cfg = DetectorModel(0.5), RunConfig()
    tuned = calibrate_alpha(spec, det, cfg, 948.8)
    assert expected_side_counts(tuned, det, cfg) == pytest.approx(948.8, rel=1e-10)
    assert tuned.rho == pytest.approx(spec.rho, rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        calibrate_alpha(spec, det, cfg, 1e30)


def test_expected_side_counts_matches_simulation():
    spec = SourceSpec(alpha=0.15, pair_amp=0.02, overlap_v=0.8)
    det, cfg = DetectorModel(0.5), RunConfig(duration=2.0, seed=9)
    report = integrate_peaks(simulate_run(spec, det, cfg), PERIOD, 3e-9)
    expected = expected_side_counts(spec, det, cfg)
    assert abs(report.side_mean - expected) <= 4 * math.sqrt(expected / 10) + 0.01 * expected


# --- export -----------------------------------------------------------------


def test_csv_format():
    hist = simulate_run(coherent(0.2), DetectorModel(), RunConfig(duration=0.01))
    lines = hist.to_csv().split("\n")
    assert lines[0] == "bin_center_ns,counts"
    assert lines[-1] == ""
    center, count = lines[1].split(",")
    assert center.count(".") == 1 and len(center.split(".")[1]) == 3
    assert int(count) >= 0
    zero_row = [l for l in lines[1:-1] if l.startswith("0.000,")]
    assert len(zero_row) == 1


def test_histogram_merge():
    hist = simulate_run(coherent(0.2), DetectorModel(), RunConfig(duration=0.01))
    merged = hist + hist
    assert np.array_equal(merged.counts, 2 * hist.counts)
    other = simulate_run(coherent(0.2), DetectorModel(), RunConfig(duration=0.01, bin_width=0.5e-9))
    with pytest.raises(InvalidArgumentError):
        hist + other


def test_predicted_ratio_at_fitted_point():
    # the engine at small amplitude agrees with the closed form used by the fit
    a = 0.01
    spec = SourceSpec(alpha=a, pair_amp=0.9246 * a * a, overlap_v=0.8053)
    assert engine_g2(spec) == pytest.approx(predicted_g2(0.9246, 0.8053, math.pi), rel=0.01)

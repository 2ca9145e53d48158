"""Command-line front end: ``kmhsim {g2,phase-scan,hbt,fit,rates,hom-scan}``."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .config import Config, ConfigError, parse_config
from .errors import InvalidArgumentError, NoSolutionError, UndefinedStatisticError
from .hbt import calibrate_alpha, run_pair_and_report
from .pipeline import (
    engine_g2,
    fit_ratio_model,
    phase_scan,
    predict,
    predicted_g2,
    suppression_factor,
    visibility,
)
from .rates import three_photon_contamination, two_source_rates
from .sources import gaussian_hom_overlap

# flag -> (config key, help)
CONFIG_FLAGS = {
    "--alpha": ("alpha", "coherent amplitude |alpha|"),
    "--gamma": ("pair_amp", "PDC pair amplitude g = gamma^2"),
    "--phi": ("phi", "relative two-photon phase [rad]"),
    "--overlap": ("overlap_v", "mode overlap v in [0, 1]"),
    "--cutoff": ("cutoff", "max photons per mode"),
    "--hom-delay-ns": ("hom_delay_ns", "signal-idler delay at the HOM splitter [ns]"),
    "--coherence-ns": ("coherence_time_ns", "filtered coherence time [ns]"),
    "--rep-rate-hz": ("rep_rate_hz", "pulse repetition rate [Hz]"),
    "--duration-s": ("duration_s", "integration time [s]"),
    "--efficiency": ("efficiency", "detector efficiency per photon"),
    "--dark-rate-hz": ("dark_rate_hz", "dark count rate per detector [Hz]"),
    "--bin-ns": ("bin_ns", "histogram bin width [ns]"),
    "--window-ns": ("window_ns", "peak integration half-width [ns]"),
    "--side-peaks": ("side_peaks", "number of side peaks averaged"),
    "--max-lag": ("max_lag_periods", "histogram span in pulse periods each side"),
    "--seed": ("seed", "RNG seed"),
    "--shards": ("shards", "number of RNG shards"),
    "--target-side-counts": ("target_side_counts", "calibrate alpha to this side-peak mean (0: off)"),
    "--phi-steps": ("phi_steps", "phase-scan grid points over [0, 2pi]"),
    "--hom-max-ns": ("hom_max_ns", "hom-scan delay range +/- [ns]"),
    "--hom-steps": ("hom_steps", "hom-scan grid points"),
}

ROUTING_NOTE = "# rates are per pulse; 1/2 routing and heralding prefactors are model choices\n"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _header(command: str, config: Config) -> str:
    return f"# kmhsim {command}\n" + config.header()


def _csv(header: str, columns: Sequence[str], rows) -> str:
    body = [",".join(columns)] + [",".join(_fmt(x) for x in row) for row in rows]
    return header + "\n".join(body) + "\n"


def cmd_g2(config: Config, args) -> None:
    spec = config.source()
    pred = predict(spec)
    text = (
        _header("g2", config)
        + f"g2_engine={_fmt(engine_g2(spec))}\n"
        + f"g2_engine_leading={_fmt(engine_g2(spec, max_total=2))}\n"
        + f"g2_closed_form={_fmt(pred.g2)}\n"
        + f"suppression_factor={_fmt(suppression_factor(pred.g2))}\n"
        + f"rho={_fmt(pred.rho)}\n"
    )
    _emit(text, args.report)


def cmd_phase_scan(config: Config, args) -> None:
    grid = np.linspace(0.0, 2 * math.pi, config.phi_steps).tolist()
    rows = phase_scan(config.source(), grid)
    table = [(r.phi, r.g2_engine, r.g2_closed_form, r.p2, r.mean_n) for r in rows]
    _emit(
        _csv(_header("phase-scan", config), ["phi", "g2_engine", "g2_closed", "p2", "mean_n"], table),
        args.out,
    )


def cmd_hom_scan(config: Config, args) -> None:
    spec = config.source()
    delays = np.linspace(-config.hom_max_ns, config.hom_max_ns, config.hom_steps) * 1e-9
    table = []
    for tau in delays:
        point = replace(spec, hom_delay=float(tau))
        table.append(
            (tau * 1e12, gaussian_hom_overlap(float(tau), spec.coherence_time), engine_g2(point))
        )
    _emit(_csv(_header("hom-scan", config), ["delay_ps", "v_hom", "g2"], table), args.out)


def _bunched_path(out: str) -> str:
    path = Path(out)
    return str(path.with_name(path.stem + ".bunched" + path.suffix))


def cmd_hbt(config: Config, args) -> None:
    spec, detectors, run = config.source(), config.detectors(), config.run()
    header = _header("hbt", config)
    if config.target_side_counts > 0:
        spec = calibrate_alpha(spec, detectors, run, config.target_side_counts)
        header += f"# calibrated alpha: {spec.alpha!r}\n# calibrated pair_amp: {spec.pair_amp!r}\n"
    report = run_pair_and_report(spec, detectors, run)
    _emit(header + report.antibunched_hist.to_csv(), args.out)
    if args.out is not None:
        _emit(header + report.bunched_hist.to_csv(), _bunched_path(args.out))
    _emit(header + report.to_text(), args.report)


def cmd_fit(config: Config, args) -> None:
    if args.g2min is None or args.g2max is None:
        raise InvalidArgumentError("fit needs --g2min and --g2max")
    fit = fit_ratio_model(args.g2min, args.g2max)
    text = (
        f"# kmhsim fit\n# g2min={args.g2min!r}\n# g2max={args.g2max!r}\n"
        f"rho_fit={fit.rho:.4f}\n"
        f"v_fit={fit.v:.4f}\n"
        f"visibility={visibility(args.g2min, args.g2max):.4f}\n"
        f"suppression_factor={suppression_factor(args.g2min):.4f}\n"
        f"g2_min_model={predicted_g2(fit.rho, fit.v, math.pi):.6g}\n"
        f"g2_max_model={predicted_g2(fit.rho, fit.v, 0.0):.6g}\n"
        f"clamped={int(fit.clamped)}\n"
    )
    _emit(text, args.report)


def cmd_rates(config: Config, args) -> None:
    alpha = abs(config.alpha)
    report = two_source_rates(alpha, alpha)
    contamination = three_photon_contamination(alpha, config.overlap_v)
    _emit(
        _header("rates", config) + ROUTING_NOTE + report.to_text(contamination.ratio),
        args.report,
    )


COMMANDS: dict[str, Callable[[Config, argparse.Namespace], None]] = {
    "g2": cmd_g2,
    "phase-scan": cmd_phase_scan,
    "hbt": cmd_hbt,
    "fit": cmd_fit,
    "rates": cmd_rates,
    "hom-scan": cmd_hom_scan,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value config file")
    common.add_argument("--out", metavar="PATH", help="CSV output (default: stdout)")
    common.add_argument("--report", metavar="PATH", help="key=value report (default: stdout)")
    for flag, (key, help_text) in CONFIG_FLAGS.items():
        common.add_argument(flag, dest=key, default=None, metavar="X", help=help_text)

    parser = argparse.ArgumentParser(
        prog="kmhsim", description="KMH quantum-interference single-photon source simulator"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "fit":
            p.add_argument("--g2min", type=float, help="antibunched central/side ratio")
            p.add_argument("--g2max", type=float, help="bunched central/side ratio")
    return parser


def dispatch(command: str, config: Config, args: argparse.Namespace) -> int:
    try:
        COMMANDS[command](config, args)
    except (InvalidArgumentError, NoSolutionError, UndefinedStatisticError) as exc:
        print(f"kmhsim {command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"kmhsim {command}: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {key: getattr(args, key) for key, _ in CONFIG_FLAGS.values()}
    try:
        config = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"kmhsim: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"kmhsim: cannot read config: {exc}", file=sys.stderr)
        return 2
    return dispatch(args.command, config, args)


if __name__ == "__main__":
    sys.exit(main())

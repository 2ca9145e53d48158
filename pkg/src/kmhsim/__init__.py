"""Simulation and analysis of the KMH quantum-interference single-photon source."""

from .errors import InvalidArgumentError, NoSolutionError, TruncationWarning, UndefinedStatisticError
from .fock import (
    BeamSplitter,
    FockState,
    apply_beamsplitter,
    apply_phase,
    g2_zero,
    make_vacuum,
    number_distribution,
    project,
    tensor,
)
from .hbt import (
    DetectorModel,
    Histogram,
    RatioReport,
    RunConfig,
    integrate_peaks,
    run_pair_and_report,
    simulate_run,
)
from .pipeline import (
    build_output_state,
    engine_g2,
    fit_ratio_model,
    phase_scan,
    predicted_g2,
    suppression_factor,
    visibility,
)
from .rates import source_single_rate, three_photon_contamination, two_source_rates
from .sources import SourceSpec, coherent_state, hom_combine, pdc_two_mode_state

__version__ = "0.1.0"

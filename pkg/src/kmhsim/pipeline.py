"""End-to-end KMH output state, leading-order predictions and ratio fitting.

Full network mode layout (``build_output_state``)::

    0 c        output port, matched submode (beam of interest)
    1 c_hom    output port, HOM-unmatched submode
    2 c_v      output port, overlap-unmatched submode
    3 d        other primary output, matched submode
    4 d_hom    other primary output, HOM-unmatched submode
    5 b'       HOM discard arm
    6 b'_hom   HOM discard arm, unmatched submode
    7 d_v      other primary output, overlap-unmatched submode

The detectors of the HB-T arrangement see modes ``OUTPUT_MODES`` summed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable

from .errors import InvalidArgumentError, NoSolutionError, TruncationWarning
from .fock import (
    FockState,
    append_vacuum,
    apply_beamsplitter,
    apply_phase,
    g2_from_distribution,
    number_distribution,
    tensor,
    truncate_total,
)
from .sources import (
    SourceSpec,
    coherent_state,
    distinguishability_embed,
    hom_combine,
    pdc_two_mode_state,
)

OUTPUT_MODES = (0, 1, 2)
TRUNCATION_WARN_LEVEL = 1e-6


@dataclass(frozen=True)
class KmhPrediction:
    g2: float
    p2: float
    mean_n: float
    rho: float
    v: float
    phi: float


@dataclass(frozen=True)
class RatioFit:
    rho: float
    v: float
    clamped: bool = False


@dataclass(frozen=True)
class PhaseScanRow:
    phi: float
    g2_engine: float
    g2_closed_form: float
    p2: float
    mean_n: float


def build_output_state(spec: SourceSpec, max_total: int | None = None) -> FockState:
    """Run the coherent and PDC inputs through the network and return the joint state.

    ``max_total`` drops every network component carrying more than that many
    photons before mixing; ``max_total=2`` keeps exactly the leading-order
    terms responsible for two-photon events.
    """
    cutoff = spec.cutoff
    pdc = pdc_two_mode_state(spec.pair_amp, cutoff)
    pdc = hom_combine(pdc, spec.hom_delay, spec.coherence_time)
    pdc = distinguishability_embed(pdc, spec.overlap_v)
    # pdc modes: b, b_hom, b', b'_hom, b_v
    coh = append_vacuum(coherent_state(spec.alpha, cutoff), 2)
    # Phase plate on the coherent arm: phi/2 per photon puts phi between the
    # two-photon amplitudes.
    coh = apply_phase(coh, 0, spec.phi / 2)
    state = tensor(coh, pdc)
    if max_total is not None:
        state = truncate_total(state, max_total)
    # modes: a, a_hom(vac), a_v(vac), b, b_hom, b', b'_hom, b_v
    state = apply_beamsplitter(state, 0, 3)
    state = apply_beamsplitter(state, 1, 4)
    state = apply_beamsplitter(state, 2, 7)
    if state.truncation_loss > TRUNCATION_WARN_LEVEL:
        warnings.warn(
            f"truncation discarded {state.truncation_loss:.3g} of the norm at cutoff {cutoff}",
            TruncationWarning,
            stacklevel=2,
        )
    return state


def output_distribution(spec: SourceSpec, max_total: int | None = None):
    """Photon-number distribution of the beam of interest."""
    return number_distribution(build_output_state(spec, max_total), OUTPUT_MODES)


def engine_g2(spec: SourceSpec, max_total: int | None = None) -> float:
    return g2_from_distribution(output_distribution(spec, max_total))


def predicted_g2(rho: float, v: float, phi: float) -> float:
    """Leading-order ``g2(0) = 1 + rho^2 + 2 rho v cos(phi)`` of the output beam."""
    if rho < 0:
        raise InvalidArgumentError("rho must be >= 0")
    if not 0.0 <= v <= 1.0:
        raise InvalidArgumentError("v must lie in [0, 1]")
    return max(1.0 + rho**2 + 2.0 * rho * v * math.cos(phi), 0.0)


def predict(spec: SourceSpec) -> KmhPrediction:
    """Leading-order statistics of the output beam for ``spec``."""
    a2 = abs(spec.alpha) ** 2
    if a2 == 0:
        raise InvalidArgumentError("closed form needs alpha != 0")
    rho = spec.rho
    phase = spec.relative_phase
    g2 = predicted_g2(rho, spec.overlap_v, phase)
    mean_n = a2 / 2
    return KmhPrediction(
        g2=g2, p2=g2 * mean_n**2 / 2, mean_n=mean_n, rho=rho, v=spec.overlap_v, phi=spec.phi
    )


def fit_ratio_model(g2_min: float, g2_max: float) -> RatioFit:
    """Invert ``predicted_g2`` at ``phi = pi`` and ``phi = 0`` for ``(rho, v)``."""
    if not 0.0 <= g2_min <= g2_max:
        raise InvalidArgumentError("need 0 <= g2_min <= g2_max")
    half_sum = (g2_min + g2_max) / 2
    if half_sum < 1.0:
        raise NoSolutionError(f"(g2_min + g2_max)/2 = {half_sum:.6g} < 1 has no real rho")
    rho = math.sqrt(half_sum - 1.0)
    if rho == 0.0:
        if g2_max != g2_min:
            raise NoSolutionError("rho = 0 cannot produce a phase-dependent g2")
        raise NoSolutionError("rho = 0: no PDC contribution, overlap v is undefined")
    v = (g2_max - g2_min) / (4.0 * rho)
    clamped = not 0.0 <= v <= 1.0
    return RatioFit(rho=rho, v=min(max(v, 0.0), 1.0), clamped=clamped)


def visibility(g2_min: float, g2_max: float) -> float:
    if not g2_max >= g2_min >= 0:
        raise InvalidArgumentError("need g2_max >= g2_min >= 0")
    if g2_max == 0:
        raise InvalidArgumentError("visibility undefined for g2_max = 0")
    return (g2_max - g2_min) / (g2_max + g2_min)


def suppression_factor(g2_min: float) -> float:
    """Two-photon suppression relative to a weak coherent state (``g2 = 1``)."""
    if g2_min < 0:
        raise InvalidArgumentError("g2_min must be >= 0")
    return math.inf if g2_min == 0 else 1.0 / g2_min


def phase_scan(spec: SourceSpec, phi_grid: Iterable[float]) -> list[PhaseScanRow]:
    grid = list(phi_grid)
    if not grid:
        raise InvalidArgumentError("phi_grid must not be empty")
    rows = []
    for phi in grid:
        point = replace(spec, phi=phi)
        probs = output_distribution(point)
        p2 = float(probs[2])
        mean_n = float(sum(n * p for n, p in enumerate(probs)))
        rows.append(
            PhaseScanRow(
                phi=phi,
                g2_engine=g2_from_distribution(probs),
                g2_closed_form=predicted_g2(point.rho, point.overlap_v, point.relative_phase),
                p2=p2,
                mean_n=mean_n,
            )
        )
    return rows

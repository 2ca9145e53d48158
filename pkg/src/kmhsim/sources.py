"""Input states of the KMH source: weak coherent state, PDC pairs, HOM combiner.

Partial distinguishability is represented with orthogonal temporal submodes:
a photon that only partly overlaps a reference mode is split by a fictitious
beam splitter into a matched submode (amplitude ``sqrt(v)``) and an unmatched
submode (amplitude ``sqrt(1 - v)``) that starts in vacuum.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import InvalidArgumentError
from .fock import (
    DEFAULT_CUTOFF,
    BeamSplitter,
    FockState,
    append_vacuum,
    apply_beamsplitter,
    permute_modes,
)

SPEED_OF_LIGHT = 299_792_458.0
CENTER_WAVELENGTH = 780e-9
FILTER_BANDWIDTH = 3e-9

# Coherence time of photons behind the 3 nm filter, lambda^2 / (c * dlambda).
FILTERED_COHERENCE_TIME = CENTER_WAVELENGTH**2 / (SPEED_OF_LIGHT * FILTER_BANDWIDTH)

# Mode layout returned by hom_combine.
HOM_KEPT, HOM_KEPT_UNMATCHED, HOM_DISCARD, HOM_DISCARD_UNMATCHED = range(4)


@dataclass(frozen=True)
class SourceSpec:
    """Physical parameters of one KMH source.

    ``pair_amp`` is the PDC pair amplitude ``g`` (the square of the
    single-photon amplitude usually written gamma). ``phi`` is the relative
    phase between the coherent and PDC two-photon amplitudes. Times are in
    seconds.
    """

    alpha: complex = 0.1
    pair_amp: complex = 0.01
    phi: float = math.pi
    overlap_v: float = 1.0
    hom_delay: float = 0.0
    coherence_time: float = FILTERED_COHERENCE_TIME
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if not abs(self.alpha) < 1:
            raise InvalidArgumentError(f"|alpha| must be < 1, got {abs(self.alpha)}")
        if not abs(self.pair_amp) < 1:
            raise InvalidArgumentError(f"|pair_amp| must be < 1, got {abs(self.pair_amp)}")
        if not 0.0 <= self.overlap_v <= 1.0:
            raise InvalidArgumentError(f"overlap_v must lie in [0, 1], got {self.overlap_v}")
        if not self.coherence_time > 0:
            raise InvalidArgumentError("coherence_time must be > 0")
        if self.cutoff < 0:
            raise InvalidArgumentError("cutoff must be >= 0")

    @property
    def rho(self) -> float:
        """Amplitude ratio ``|g| / |alpha|^2``; infinite when only the PDC source is on."""
        a2 = abs(self.alpha) ** 2
        if a2 == 0:
            return math.inf if self.pair_amp else 0.0
        return abs(self.pair_amp) / a2

    @property
    def relative_phase(self) -> float:
        """Two-photon relative phase including the phases carried by ``alpha`` and ``g``."""
        return self.phi + cmath.phase(self.pair_amp) - 2 * cmath.phase(self.alpha)


def coherent_state(alpha: complex, cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """Truncated single-mode coherent state, not renormalized."""
    if not abs(alpha) < 1:
        raise InvalidArgumentError(f"|alpha| must be < 1, got {abs(alpha)}")
    pre = math.exp(-abs(alpha) ** 2 / 2)
    amps = {(n,): pre * alpha**n / math.sqrt(math.factorial(n)) for n in range(cutoff + 1)}
    return FockState(1, cutoff, amps)


def pdc_two_mode_state(pair_amp: complex, cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """Signal/idler pair state ``sum_n g^n |n, n>`` normalized over the kept terms."""
    if not abs(pair_amp) < 1:
        raise InvalidArgumentError(f"|pair_amp| must be < 1, got {abs(pair_amp)}")
    weights = [pair_amp**n for n in range(cutoff + 1)]
    norm = math.sqrt(sum(abs(w) ** 2 for w in weights))
    return FockState(2, cutoff, {(n, n): w / norm for n, w in enumerate(weights)})


def gaussian_hom_overlap(hom_delay: float, coherence_time: float) -> float:
    """Temporal overlap of two filtered photons offset by ``hom_delay``."""
    if not coherence_time > 0:
        raise InvalidArgumentError("coherence_time must be > 0")
    return math.exp(-(hom_delay**2) / (2 * coherence_time**2))


def _overlap_splitter(v: float) -> BeamSplitter:
    # cos(theta) = sqrt(v): the matched fraction of each photon's amplitude.
    return BeamSplitter(theta=math.acos(math.sqrt(min(max(v, 0.0), 1.0))))


def hom_combine(
    pdc: FockState,
    hom_delay: float = 0.0,
    coherence_time: float = FILTERED_COHERENCE_TIME,
    overlap_fn: Callable[[float, float], float] = gaussian_hom_overlap,
) -> FockState:
    """Overlap signal and idler on a 50/50 splitter.

    The idler is delayed by ``hom_delay``; the part of it orthogonal to the
    signal's temporal mode travels in unmatched submodes. Output layout is
    ``(kept, kept_unmatched, discard, discard_unmatched)``; the discard arm is
    meant to be traced, never conditioned on.
    """
    if pdc.mode_count != 2:
        raise InvalidArgumentError("hom_combine expects a 2-mode signal/idler state")
    if not coherence_time > 0:
        raise InvalidArgumentError("coherence_time must be > 0")
    v_hom = overlap_fn(hom_delay, coherence_time)
    # modes: signal, idler, signal_unmatched, idler_unmatched
    state = append_vacuum(pdc, 2)
    state = apply_beamsplitter(state, 1, 3, _overlap_splitter(v_hom))
    state = apply_beamsplitter(state, 0, 1)
    state = apply_beamsplitter(state, 2, 3)
    return permute_modes(state, [0, 2, 1, 3])


def distinguishability_embed(
    state: FockState, overlap_v: float, modes: Sequence[int] = (HOM_KEPT,)
) -> FockState:
    """Give the photons in ``modes`` a two-photon overlap ``overlap_v`` with the reference mode.

    One vacuum submode is appended per entry of ``modes`` (in order). Each
    photon becomes ``sqrt(v) matched + sqrt(1 - v) unmatched``, so any
    two-photon interference term with light confined to the matched submode is
    scaled by exactly ``v``.
    """
    if not 0.0 <= overlap_v <= 1.0:
        raise InvalidArgumentError(f"overlap_v must lie in [0, 1], got {overlap_v}")
    splitter = _overlap_splitter(overlap_v)
    first_new = state.mode_count
    state = append_vacuum(state, len(modes))
    for k, mode in enumerate(modes):
        state = apply_beamsplitter(state, mode, first_new + k, splitter)
    return state

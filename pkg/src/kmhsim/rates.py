"""Data rates for feeding coincidence-basis gates with KMH sources.

The gate is a black box that needs one photon per input and fires only on a
full coincidence; its success probability multiplies every compared rate and
cancels from ratios. All absolute prefactors here are model choices: the
KMH single-photon rate carries the factor 1/2 of the primary beam splitter,
and the heralded-PDC comparison has a configurable prefactor (default 1).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UndefinedStatisticError
from .pipeline import output_distribution
from .sources import SourceSpec

MATCH_RTOL = 1e-9


@dataclass(frozen=True)
class RateReport:
    single_photon_prob_per_pulse: float
    kmh_two_source_rate: float
    heralded_two_source_rate: float
    advantage_ratio: float
    kmh_prefactor: float
    heralded_prefactor: float

    def to_text(self, contamination_ratio: float | None = None) -> str:
        lines = [
            f"kmh_rate={self.kmh_two_source_rate:.6g}",
            f"heralded_rate={self.heralded_two_source_rate:.6g}",
            f"advantage_ratio={self.advantage_ratio:.6g}",
        ]
        if contamination_ratio is not None:
            lines.append(f"contamination_ratio={contamination_ratio:.6g}")
        lines += [
            f"single_photon_prob={self.single_photon_prob_per_pulse:.6g}",
            f"kmh_prefactor={self.kmh_prefactor:.6g}  # model choice",
            f"heralded_prefactor={self.heralded_prefactor:.6g}  # model choice",
        ]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Contamination:
    desired_rate: float
    contamination_rate: float
    ratio: float
    three_photon_part: float
    two_photon_part: float


def matched_source(alpha: complex, overlap_v: float = 1.0, cutoff: int = 6) -> SourceSpec:
    """KMH source tuned for suppression: ``g = alpha^2`` at destructive phase."""
    return SourceSpec(
        alpha=alpha,
        pair_amp=abs(alpha) ** 2 * cmath.exp(2j * cmath.phase(alpha)) if alpha else 0.0,
        phi=math.pi,
        overlap_v=overlap_v,
        cutoff=cutoff,
    )


def _matched_distribution(alpha: complex, overlap_v: float = 1.0) -> np.ndarray:
    if not abs(alpha) < 1:
        raise InvalidArgumentError(f"|alpha| must be < 1, got {abs(alpha)}")
    return output_distribution(matched_source(alpha, overlap_v))


def source_single_rate(alpha: complex) -> float:
    """Per-pulse single-photon probability of a matched source's output beam.

    To leading order this is ``|alpha|^2 / 2``: half the coherent light leaves
    through the unused port of the primary beam splitter.
    """
    return float(_matched_distribution(alpha)[1])


def two_source_rates(
    alpha: complex, gamma: complex, heralded_prefactor: float = 1.0
) -> RateReport:
    """Two-fold coincidence rates: two KMH sources versus two heralded PDC sources.

    ``gamma`` is the single-photon PDC amplitude (pair amplitude ``gamma^2``);
    matched operation ``|alpha|^2 = |gamma|^2`` is required.
    """
    a2, g2 = abs(alpha) ** 2, abs(gamma) ** 2
    if not math.isclose(a2, g2, rel_tol=MATCH_RTOL, abs_tol=0.0):
        raise InvalidArgumentError(f"unmatched source: |alpha|^2={a2:.6g}, |gamma|^2={g2:.6g}")
    if heralded_prefactor < 0:
        raise InvalidArgumentError("heralded_prefactor must be >= 0")
    p1 = source_single_rate(alpha)
    kmh = p1**2
    heralded = heralded_prefactor * g2**4
    if heralded == 0:
        raise UndefinedStatisticError("heralded rate is zero; advantage ratio undefined")
    return RateReport(
        single_photon_prob_per_pulse=p1,
        kmh_two_source_rate=kmh,
        heralded_two_source_rate=heralded,
        advantage_ratio=kmh / heralded,
        kmh_prefactor=kmh / g2**2,
        heralded_prefactor=heralded_prefactor,
    )


def three_photon_contamination(alpha: complex, v: float = 1.0) -> Contamination:
    """Wanted versus unwanted three-fold events with three matched sources.

    A wanted event is one photon from each source. Unwanted three-folds come
    from one source emitting three or more photons while the others are
    silent-or-not, or one source leaking a residual pair alongside a single
    photon from another source.
    """
    probs = _matched_distribution(alpha, v)
    p1 = float(probs[1])
    if p1 == 0:
        raise UndefinedStatisticError("no single photons: contamination ratio undefined")
    p2 = float(probs[2])
    p3plus = float(probs[3:].sum())
    desired = p1**3
    three = 3 * p3plus
    two = 3 * p2 * p1
    return Contamination(
        desired_rate=desired,
        contamination_rate=three + two,
        ratio=(three + two) / desired,
        three_photon_part=three / desired,
        two_photon_part=two / desired,
    )

"""Sparse truncated Fock-space states and the linear-optics primitives acting on them.

A :class:`FockState` maps occupation tuples to complex amplitudes. Every
operation here is pure: it returns a new state and never mutates its inputs.

Beam-splitter convention (input creation operators ``a``, ``b`` on modes i, j;
output creation operators ``c``, ``d`` stored back on modes i, j)::

    a+ -> cos(t) c+ + sin(t) e^{+ix} d+
    b+ -> sin(t) e^{-ix} c+ - cos(t) d+

With ``x = 0`` and ``t = pi/4`` this is the real 50/50 convention under which
``(|2,0> - |0,2>)/sqrt(2)`` maps to ``|1,1>``. The mode matrix is Hermitian and
unitary, so every beam splitter is its own inverse.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError, UndefinedStatisticError

PRUNE_THRESHOLD = 1e-15
NORM_TOLERANCE = 1e-12
DEFAULT_CUTOFF = 6

Occupation = tuple[int, ...]


@dataclass(frozen=True)
class BeamSplitter:
    """Two-mode mixing element; ``theta = pi/4`` is the 50/50 case."""

    theta: float = math.pi / 4
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi / 2:
            raise InvalidArgumentError(f"theta must lie in [0, pi/2], got {self.theta}")


BALANCED = BeamSplitter()


@dataclass(frozen=True)
class FockState:
    """Sparse pure state over ``mode_count`` modes, each holding at most ``cutoff`` photons.

    ``truncation_loss`` accumulates the squared norm discarded by operations
    that generated occupations above the cutoff.
    """

    mode_count: int
    cutoff: int
    amplitudes: Mapping[Occupation, complex] = field(repr=False)
    truncation_loss: float = 0.0

    def __post_init__(self):
        if self.mode_count < 1:
            raise InvalidArgumentError("mode_count must be >= 1")
        if self.cutoff < 0:
            raise InvalidArgumentError("cutoff must be >= 0")
        clean = {}
        for occ, amp in self.amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != self.mode_count:
                raise InvalidArgumentError(
                    f"occupation {occ} does not have {self.mode_count} entries"
                )
            if any(n < 0 or n > self.cutoff for n in occ):
                raise InvalidArgumentError(f"occupation {occ} exceeds cutoff {self.cutoff}")
            if abs(amp) >= PRUNE_THRESHOLD:
                clean[occ] = complex(amp)
        norm_sq = sum(abs(a) ** 2 for a in clean.values())
        if norm_sq > 1.0 + NORM_TOLERANCE:
            raise InvalidArgumentError(f"squared norm {norm_sq!r} exceeds 1")
        object.__setattr__(self, "amplitudes", MappingProxyType(clean))

    @property
    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def amplitude(self, occ: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(occ), 0j)

    def __len__(self) -> int:
        return len(self.amplitudes)

    def inner(self, other: "FockState") -> complex:
        """Return <self|other>."""
        _check_compatible(self, other)
        return sum(
            (amp.conjugate() * other.amplitudes.get(occ, 0j) for occ, amp in self.amplitudes.items()),
            0j,
        )

    def total_photon_distribution(self, modes: Iterable[int] | None = None) -> dict[int, float]:
        """Probability of each total photon number summed over ``modes`` (default: all)."""
        idx = range(self.mode_count) if modes is None else _check_modes(self, modes)
        dist: dict[int, float] = {}
        for occ, amp in self.amplitudes.items():
            n = sum(occ[i] for i in idx)
            dist[n] = dist.get(n, 0.0) + abs(amp) ** 2
        return dist


def _check_compatible(a: FockState, b: FockState) -> None:
    if a.mode_count != b.mode_count or a.cutoff != b.cutoff:
        raise InvalidArgumentError("states live in different Fock spaces")


def _check_mode(state: FockState, mode: int) -> int:
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < state.mode_count:
        raise InvalidArgumentError(f"mode {mode!r} out of range for {state.mode_count} modes")
    return int(mode)


def _check_modes(state: FockState, modes: int | Iterable[int]) -> tuple[int, ...]:
    if isinstance(modes, (int, np.integer)):
        return (_check_mode(state, modes),)
    idx = tuple(_check_mode(state, m) for m in modes)
    if not idx or len(set(idx)) != len(idx):
        raise InvalidArgumentError(f"modes {modes!r} must be distinct and non-empty")
    return idx


def make_vacuum(mode_count: int, cutoff: int = DEFAULT_CUTOFF) -> FockState:
    if mode_count < 1:
        raise InvalidArgumentError("mode_count must be >= 1")
    return FockState(mode_count, cutoff, {(0,) * mode_count: 1.0})


def basis_state(occupation: Sequence[int], cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """The number state ``|n_0, n_1, ...>``."""
    occ = tuple(occupation)
    return FockState(len(occ), cutoff, {occ: 1.0})


def superposition(
    terms: Mapping[Sequence[int], complex], cutoff: int = DEFAULT_CUTOFF
) -> FockState:
    """Build a state from ``{occupation: amplitude}`` exactly as given (no normalization)."""
    terms = {tuple(k): v for k, v in terms.items()}
    if not terms:
        raise InvalidArgumentError("superposition needs at least one term")
    mode_count = len(next(iter(terms)))
    return FockState(mode_count, cutoff, terms)


def zero_state(mode_count: int, cutoff: int) -> FockState:
    return FockState(mode_count, cutoff, {})


def tensor(a: FockState, b: FockState) -> FockState:
    """Joint state ``a (x) b``; the modes of ``b`` follow those of ``a``."""
    if a.cutoff != b.cutoff:
        raise InvalidArgumentError(f"cutoff mismatch: {a.cutoff} vs {b.cutoff}")
    amps = {
        oa + ob: xa * xb
        for oa, xa in a.amplitudes.items()
        for ob, xb in b.amplitudes.items()
    }
    return FockState(
        a.mode_count + b.mode_count,
        a.cutoff,
        amps,
        truncation_loss=a.truncation_loss + b.truncation_loss,
    )


def append_vacuum(state: FockState, count: int = 1) -> FockState:
    """Append ``count`` empty modes at the end."""
    return tensor(state, make_vacuum(count, state.cutoff)) if count else state


def permute_modes(state: FockState, order: Sequence[int]) -> FockState:
    """Return the state whose mode ``k`` is the input's mode ``order[k]``."""
    if sorted(order) != list(range(state.mode_count)):
        raise InvalidArgumentError(f"{order!r} is not a permutation of the modes")
    amps = {tuple(occ[i] for i in order): amp for occ, amp in state.amplitudes.items()}
    return FockState(state.mode_count, state.cutoff, amps, state.truncation_loss)


@lru_cache(maxsize=4096)
def _bs_coefficients(n: int, m: int, theta: float, phase: float) -> tuple[tuple[int, complex], ...]:
    # Expansion of a+^n b+^m |0>/sqrt(n! m!) into |p, n+m-p>.
    if theta == math.pi / 4:
        cos = sin = math.sqrt(0.5)
    else:
        cos, sin = math.cos(theta), math.sin(theta)
    rot = cmath.exp(1j * phase) if phase else 1.0
    a_to_c, a_to_d = cos, sin * rot
    b_to_c, b_to_d = sin * rot.conjugate(), -cos
    total = n + m
    out = [0j] * (total + 1)
    for k in range(n + 1):
        ck = math.comb(n, k) * a_to_c**k * a_to_d ** (n - k)
        if ck == 0:
            continue
        for l in range(m + 1):
            cl = math.comb(m, l) * b_to_c**l * b_to_d ** (m - l)
            out[k + l] += ck * cl
    norm = math.sqrt(math.factorial(n) * math.factorial(m))
    coeffs = []
    for p, c in enumerate(out):
        c *= math.sqrt(math.factorial(p) * math.factorial(total - p)) / norm
        if c != 0:
            coeffs.append((p, complex(c)))
    return tuple(coeffs)


def apply_beamsplitter(
    state: FockState, mode_i: int, mode_j: int, bs: BeamSplitter = BALANCED
) -> FockState:
    """Mix modes ``mode_i`` (port a) and ``mode_j`` (port b).

    Output occupations above the cutoff are dropped; the squared norm they
    carried is added to ``truncation_loss`` of the result.
    """
    i = _check_mode(state, mode_i)
    j = _check_mode(state, mode_j)
    if i == j:
        raise InvalidArgumentError("beam splitter needs two distinct modes")
    cutoff = state.cutoff
    out: dict[Occupation, complex] = {}
    # Amplitudes above the cutoff are accumulated before squaring: distinct
    # input terms can feed the same truncated output.
    overflow: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        n, m = occ[i], occ[j]
        if n == 0 and m == 0:
            out[occ] = out.get(occ, 0j) + amp
            continue
        total = n + m
        base = list(occ)
        for p, c in _bs_coefficients(n, m, bs.theta, bs.phase):
            base[i], base[j] = p, total - p
            key = tuple(base)
            target = overflow if p > cutoff or total - p > cutoff else out
            target[key] = target.get(key, 0j) + amp * c
    lost = sum(abs(a) ** 2 for a in overflow.values())
    return FockState(state.mode_count, cutoff, out, state.truncation_loss + lost)


def apply_phase(state: FockState, mode: int, phi: float) -> FockState:
    """Multiply each amplitude by ``exp(i n phi)``, ``n`` the occupation of ``mode``."""
    k = _check_mode(state, mode)
    factors = [cmath.exp(1j * n * phi) for n in range(state.cutoff + 1)]
    amps = {occ: amp * factors[occ[k]] for occ, amp in state.amplitudes.items()}
    return FockState(state.mode_count, state.cutoff, amps, state.truncation_loss)


def number_distribution(state: FockState, mode: int | Iterable[int]) -> np.ndarray:
    """Marginal photon-number probabilities of ``mode`` with all other modes summed out.

    ``mode`` may be a collection of modes (submodes of one detector), in which
    case the total occupation across them is counted and the vector runs up to
    ``len(modes) * cutoff``.
    """
    idx = _check_modes(state, mode)
    probs = np.zeros(len(idx) * state.cutoff + 1)
    for occ, amp in state.amplitudes.items():
        probs[sum(occ[i] for i in idx)] += abs(amp) ** 2
    return probs


def g2_from_distribution(probs: Sequence[float]) -> float:
    """Zero-delay second-order correlation <n(n-1)>/<n>^2 of a photon-number distribution."""
    p = np.asarray(probs, dtype=float)
    n = np.arange(p.size)
    mean = float(n @ p)
    if mean <= 0.0:
        raise UndefinedStatisticError("g2 is undefined for a state with <n> = 0")
    return float((n * (n - 1)) @ p) / mean**2


def g2_zero(state: FockState, mode: int | Iterable[int]) -> float:
    return g2_from_distribution(number_distribution(state, mode))


def project(state: FockState, mode: int, n: int) -> tuple[FockState | None, float]:
    """Post-select ``mode`` on ``n`` photons.

    Returns the renormalized state of the remaining modes and the probability
    of the outcome. A zero-probability outcome returns an empty state. When
    ``mode`` is the only mode, the remaining state is ``None``.
    """
    k = _check_mode(state, mode)
    if not 0 <= n <= state.cutoff:
        raise InvalidArgumentError(f"occupation {n} outside [0, {state.cutoff}]")
    kept = {occ[:k] + occ[k + 1 :]: amp for occ, amp in state.amplitudes.items() if occ[k] == n}
    prob = float(sum(abs(a) ** 2 for a in kept.values()))
    if state.mode_count == 1:
        return None, prob
    if prob == 0.0:
        return zero_state(state.mode_count - 1, state.cutoff), 0.0
    scale = 1.0 / math.sqrt(prob)
    reduced = {occ: amp * scale for occ, amp in kept.items()}
    return FockState(state.mode_count - 1, state.cutoff, reduced), prob


def truncate_total(state: FockState, max_total: int) -> FockState:
    """Keep only components carrying at most ``max_total`` photons in total."""
    amps = {occ: a for occ, a in state.amplitudes.items() if sum(occ) <= max_total}
    return FockState(state.mode_count, state.cutoff, amps, state.truncation_loss)


def fidelity(a: FockState, b: FockState) -> float:
    """``|<a|b>|^2``."""
    return abs(a.inner(b)) ** 2

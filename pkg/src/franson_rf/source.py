"""Resonance-fluorescence input state and excitation-power calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy.constants import h as PLANCK

from .fock import FockState, ModeId, tensor, vacuum


@dataclass(frozen=True)
class RfParams:
    """Vacuum / one-photon weights of a single RF temporal mode."""

    p1: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError(f"p1 must lie in [0, 1], got {self.p1}")

    @property
    def p0(self) -> float:
        return 1.0 - self.p1


@dataclass(frozen=True)
class CalibrationParams:
    """Empirical map p1(nbar) = 1 - A / (1 + B nbar)."""

    A: float = 0.973
    B: float = 1.866

    def __post_init__(self) -> None:
        if not 0.0 < self.A <= 1.0:
            raise ValueError(f"A must lie in (0, 1], got {self.A}")
        if self.B <= 0.0:
            raise ValueError(f"B must be positive, got {self.B}")


@dataclass(frozen=True)
class EmitterConstants:
    T1: float = 67.2e-12
    nu: float = 328.91e12
    T2: float = 134.4e-12

    def __post_init__(self) -> None:
        for name in ("T1", "nu", "T2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_CALIBRATION = CalibrationParams()
DEFAULT_EMITTER = EmitterConstants()


def single_bin_state(p1: float, mode: ModeId) -> FockState:
    """sqrt(p0)|0> + sqrt(p1)|1> on one mode."""
    params = RfParams(p1)
    terms = {(): math.sqrt(params.p0), ((ModeId(*mode), 1),): math.sqrt(params.p1)}
    return FockState.from_counts(terms, [mode])


def rf_input_state(p1: float, bins: Sequence[ModeId]) -> FockState:
    """Product of vacuum/one-photon superpositions over ``bins``.

    The laser's global phase is dropped; only phase differences are observable.
    """
    RfParams(p1)
    bins = [ModeId(*b) for b in bins]
    if not bins:
        raise ValueError("at least one input bin is required")
    if len(set(bins)) != len(bins):
        raise ValueError("input bins must be distinct")
    state = vacuum()
    for b in bins:
        state = tensor(state, single_bin_state(p1, b), prune=0.0)
    return state


def p1_of_nbar(nbar: float, cal: CalibrationParams = DEFAULT_CALIBRATION) -> float:
    if nbar < 0:
        raise ValueError(f"mean photon number must be non-negative, got {nbar}")
    if math.isinf(nbar):
        return 1.0
    return 1.0 - cal.A / (1.0 + cal.B * nbar)


def nbar_of_p1(p1: float, cal: CalibrationParams = DEFAULT_CALIBRATION) -> float:
    """Inverse of :func:`p1_of_nbar` on its range [1 - A, 1)."""
    if not 1.0 - cal.A <= p1 < 1.0:
        raise ValueError(f"p1={p1} outside calibrated range [{1 - cal.A}, 1)")
    return (cal.A / (1.0 - p1) - 1.0) / cal.B


def mean_photon_number(P_in: float, T1: float = DEFAULT_EMITTER.T1,
                       nu: float = DEFAULT_EMITTER.nu) -> float:
    """Mean excitation number P_in T1 / (h nu)."""
    if P_in <= 0 or T1 <= 0 or nu <= 0:
        raise ValueError("power, lifetime and frequency must all be positive")
    return P_in * T1 / (PLANCK * nu)

"""Coincidence probabilities, peak bookkeeping, HBT correlations and histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fock import apply_annihilation, norm2
from .network import (
    NetworkSpec,
    as_detector,
    coincidence_operator,
    forward_coincidence_probability,
    grid_network,
    port_d_modes,
    prepare_output_state,
)
from .source import RfParams, rf_input_state


class PeakId(str, Enum):
    CENTER = "CENTER"
    TAU_P = "TAU_P"
    TAU_M = "TAU_M"
    OUTER = "OUTER"
    TAU_PM = "TAU_PM"


class PhaseClass(str, Enum):
    SUM_PHASE = "sum-phase"
    DIFF_PHASE = "difference-phase"
    INSENSITIVE = "insensitive"


class Method(str, Enum):
    BRUTE_FORCE = "BRUTE_FORCE"
    CLOSED_FORM = "CLOSED_FORM"
    FORWARD = "FORWARD"


@dataclass(frozen=True)
class Peak:
    delay_bins: int
    peak: PeakId
    phase_class: PhaseClass


@dataclass(frozen=True)
class CoincidenceResult:
    delta_t_bins: int
    value: float
    phases: Tuple[float, float, float]  # (phi_p, phi_a, phi_b)
    p1: float
    method: Method
    detectors: Tuple[str, str] = ("A1", "B1")


@dataclass(frozen=True)
class HistogramParams:
    T2: float = 134.4e-12
    bin_width: float = 10e-12
    range: float = 4.5e-9
    baseline: Optional[float] = None  # None: computed at a peak-free delay

    def __post_init__(self) -> None:
        if not 0 < self.bin_width < self.T2:
            raise ValueError("bin width must be positive and well below T2")
        if self.range <= 0:
            raise ValueError("histogram range must be positive")


def _grid_delta(delta_t) -> int:
    k = round(delta_t)
    if abs(delta_t - k) > 1e-9:
        raise ValueError(f"delay {delta_t} is not on the time-bin grid")
    return int(k)


def coincidence_probability(
    delta_t: int,
    phi_a: float,
    phi_b: float,
    phi_p: float,
    p1: float,
    det_a="A1",
    det_b="B1",
    *,
    tau_m_bins: int = 1,
    tau_p_bins: int = 2,
) -> float:
    """Alice/Bob coincidence probability at ``delta_t`` bins, by exact enumeration.

    Alice clicks at bin 0 and Bob at ``delta_t``. The input is the product RF
    state over exactly the bins the 16-term coincidence operator touches, so
    the window is 4, 5, 6 or 7 bins at |delta_t| = 0, tau_m, tau_p, tau_p + tau_m.
    Values carry the bare 1/32 operator prefactor (no normalization).
    """
    RfParams(p1)
    dt = _grid_delta(delta_t)
    net = grid_network(tau_m_bins, tau_p_bins, phi_p, phi_a, phi_b)
    op = coincidence_operator(det_a, 0, det_b, dt, net)
    return op.probability(rf_input_state(p1, op.input_modes()))


def closed_form_C(peak, phi_a: float, phi_b: float, p1: float, det_a="A1", det_b="B1") -> float:
    """Closed-form coincidence probability at phi_p = pi and tau_p = 2 tau_m."""
    RfParams(p1)
    peak = PeakId(peak)
    det_a, det_b = as_detector(det_a), as_detector(det_b)
    phi_a += math.pi if det_a.complementary else 0.0
    phi_b += math.pi if det_b.complementary else 0.0
    p0 = 1.0 - p1
    cd, cs = math.cos(phi_a - phi_b), math.cos(phi_a + phi_b)
    if peak is PeakId.CENTER:
        return p1**2 / 128 * (1 + p1**2 + p1**2 * cd + p0**2 * cs)
    if peak is PeakId.TAU_P:
        return p1**2 / 512 * (1 + 2 * p1 + 4 * p1**2 + p1**2 * cd + p0**2 * cs)
    if peak is PeakId.TAU_M:
        return p1**2 / 1024 * (5 + 2 * p1 + 8 * p1**2 + (-4 + 8 * p1 - 4 * p1**2) * cd - 4 * p1**2 * cs)
    if peak is PeakId.OUTER:
        return p1**2 / 1024 * (12 * p1**2 + 2 * p1 + 1)
    raise ValueError("no closed form exists for the tau_p - tau_m peak; use coincidence_probability")


def coincidence(
    delta_t: int,
    phi_a: float,
    phi_b: float,
    phi_p: float,
    p1: float,
    det_a="A1",
    det_b="B1",
    *,
    method: Method = Method.BRUTE_FORCE,
    tau_m_bins: int = 1,
    tau_p_bins: int = 2,
    trials: Optional[float] = None,
) -> CoincidenceResult:
    """Coincidence value wrapped with its metadata.

    ``trials`` rescales the probability to an expected count.
    """
    method = Method(method)
    dt = _grid_delta(delta_t)
    if method is Method.BRUTE_FORCE:
        value = coincidence_probability(dt, phi_a, phi_b, phi_p, p1, det_a, det_b,
                                        tau_m_bins=tau_m_bins, tau_p_bins=tau_p_bins)
    elif method is Method.FORWARD:
        net = grid_network(tau_m_bins, tau_p_bins, phi_p, phi_a, phi_b)
        value = forward_coincidence_probability(det_a, 0, det_b, dt, net, p1)
    else:
        if not math.isclose(math.cos(phi_p), -1.0, abs_tol=1e-12) or tau_p_bins != 2 * tau_m_bins:
            raise ValueError("closed forms assume phi_p = pi and tau_p = 2 tau_m")
        value = closed_form_C(peak_at(dt, tau_m_bins, tau_p_bins), phi_a, phi_b, p1, det_a, det_b)
    if trials is not None:
        value *= trials
    return CoincidenceResult(dt, value, (phi_p, phi_a, phi_b), p1, method,
                             (as_detector(det_a).value, as_detector(det_b).value))


def peak_table(tau_m_bins: int, tau_p_bins: int) -> List[Peak]:
    """Characteristic coincidence delays and how each responds to the analyzer phases.

    When tau_p = 2 tau_m the tau_m and tau_p - tau_m satellites coincide and
    interfere, so seven peaks remain and the tau_m pair follows the phase
    difference; otherwise nine peaks appear and only 0 and +-tau_p interfere.
    """
    m, p = int(tau_m_bins), int(tau_p_bins)
    if m < 1 or p < 1:
        raise ValueError("delays must be positive integers")
    if p <= m:
        raise ValueError("tau_p must exceed tau_m")
    merged = p == 2 * m
    rows = [(0, PeakId.CENTER, PhaseClass.SUM_PHASE),
            (p, PeakId.TAU_P, PhaseClass.SUM_PHASE),
            (m, PeakId.TAU_M, PhaseClass.DIFF_PHASE if merged else PhaseClass.INSENSITIVE),
            (p + m, PeakId.OUTER, PhaseClass.INSENSITIVE)]
    if not merged:
        rows.append((p - m, PeakId.TAU_PM, PhaseClass.INSENSITIVE))
    peaks = []
    for delay, pid, cls in rows:
        peaks.extend(Peak(sign * delay, pid, cls) for sign in ((1,) if delay == 0 else (-1, 1)))
    return sorted(peaks, key=lambda pk: pk.delay_bins)


def peak_at(delta_t: int, tau_m_bins: int = 1, tau_p_bins: int = 2) -> PeakId:
    for pk in peak_table(tau_m_bins, tau_p_bins):
        if pk.delay_bins == delta_t:
            return pk.peak
    raise ValueError(f"delay {delta_t} is not a characteristic peak")


def accidental_delay(tau_m_bins: int = 1, tau_p_bins: int = 2) -> int:
    """A delay past every peak, where the two detector operators share no input bin."""
    return tau_p_bins + 3 * tau_m_bins


# --- HBT autocorrelation of the prepared field ---------------------------


def hbt_g2(p1: float, phi_p: float, delta_t: int = 0) -> float:
    """Normalized intensity correlation of port d at a delay in units of tau_p.

    Numerator is the two-photon detection probability (the normally ordered
    <d^dag d^dag d d> at zero delay), denominator the product of the singles.
    """
    RfParams(p1)
    if p1 == 0:
        raise ValueError("g2 is undefined for a vacuum input")
    k = abs(_grid_delta(delta_t))
    state = prepare_output_state(p1, phi_p, max(3, k + 2))
    d0 = port_d_modes()[0]
    d1 = d0._replace(bin=d0.bin + k)
    single0 = apply_annihilation(state, d0)
    single1 = apply_annihilation(state, d1)
    pair = norm2(apply_annihilation(single0, d1))
    return pair / (norm2(single0) * norm2(single1))


def g2_zero_closed(p1: float) -> float:
    return 1.0 / p1**2


G2_SIDE_PEAK_FORMS: Dict[str, Callable[[float], float]] = {
    "+": lambda p1: (1 + 2 * p1) / (4 * p1**2),
    "-": lambda p1: (1 - 2 * p1) / (4 * p1**2),
}


def g2_side_closed(p1: float) -> float:
    """Side-peak g2 at +-tau_p for phi_p = pi, in the form exact enumeration reproduces."""
    return G2_SIDE_PEAK_FORMS["+"](p1)


def arbitrate_side_peak_form(p1_values: Sequence[float] = (0.01, 0.1, 0.3),
                             rtol: float = 1e-9) -> Dict[str, bool]:
    """Which of the two candidate side-peak g2 expressions matches enumeration."""
    brute = [hbt_g2(p, math.pi, 1) for p in p1_values]
    return {
        sign: all(math.isclose(b, form(p), rel_tol=rtol) for b, p in zip(brute, p1_values))
        for sign, form in G2_SIDE_PEAK_FORMS.items()
    }


# --- histogram synthesis --------------------------------------------------


class HistogramModel:
    """Continuous-delay coincidence histogram built from the discrete peak values.

    Each peak is a Gaussian exp(-(dt - t_j)^2 / T2^2) normalized to the
    accidental level, and the peaks are combined multiplicatively so that the
    histogram sits at the computed peak value at each peak center and at the
    accidental level between peaks.
    """

    def __init__(self, p1: float, phi_a: float, phi_b: float, hp: HistogramParams,
                 net: NetworkSpec, det_a="A1", det_b="B1") -> None:
        tm, tp = net.tau_m_bins, net.tau_p_bins
        if not hp.T2 < tm * net.grid_step:
            raise ValueError("T2 must be much shorter than the analyzer delay")
        phi_p = net.prep.phase
        self.hp = hp
        self.centers = []
        self.values = []
        for pk in peak_table(tm, tp):
            self.centers.append(pk.delay_bins * net.grid_step)
            self.values.append(coincidence_probability(
                pk.delay_bins, phi_a, phi_b, phi_p, p1, det_a, det_b, tau_m_bins=tm, tau_p_bins=tp))
        if hp.baseline is None:
            self.baseline = coincidence_probability(
                accidental_delay(tm, tp), phi_a, phi_b, phi_p, p1, det_a, det_b,
                tau_m_bins=tm, tau_p_bins=tp)
        else:
            self.baseline = hp.baseline
        self.centers = np.asarray(self.centers)
        self.values = np.asarray(self.values)

    def __call__(self, dt):
        dt = np.asarray(dt, dtype=float)
        shapes = np.exp(-((dt[..., None] - self.centers) / self.hp.T2) ** 2)
        if self.baseline > 0:
            ratios = self.values / self.baseline - 1.0
            return self.baseline * np.prod(1.0 + ratios * shapes, axis=-1)
        return np.sum((self.values - self.baseline) * shapes, axis=-1) + self.baseline


def synthesize_histogram(p1: float, phi_a: float, phi_b: float, hp: HistogramParams,
                         net: NetworkSpec, det_a="A1", det_b="B1") -> List[Tuple[float, float]]:
    """(delay in seconds, coincidence value) pairs on a symmetric grid of ``hp.bin_width``."""
    model = HistogramModel(p1, phi_a, phi_b, hp, net, det_a, det_b)
    n = int(round(hp.range / hp.bin_width))
    delays = np.arange(-n, n + 1) * hp.bin_width
    return list(zip(delays.tolist(), model(delays).tolist()))

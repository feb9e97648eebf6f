"""CHSH evaluation, fringe fitting, visibilities and excitation-power scans."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from .coincidence import PeakId, closed_form_C, coincidence_probability, g2_side_closed, g2_zero_closed
from .source import DEFAULT_CALIBRATION, CalibrationParams, RfParams, p1_of_nbar

SQRT2 = math.sqrt(2.0)
TSIRELSON = 2.0 * SQRT2
BELL_VISIBILITY = 1.0 / SQRT2

CHSH_PEAKS = (PeakId.CENTER, PeakId.TAU_P)
DETECTOR_PAIRS = (("A1", "B1"), ("A1", "B2"), ("A2", "B1"), ("A2", "B2"))


@dataclass(frozen=True)
class ChshSettings:
    phi_a: float = 0.0
    phi_a_prime: float = math.pi / 2
    phi_b: float = math.pi / 4
    phi_b_prime: float = 3 * math.pi / 4

    def pairs(self) -> List[Tuple[float, float]]:
        """Setting pairs in the order they enter :func:`chsh_S`."""
        return [(self.phi_a, self.phi_b_prime), (self.phi_a, self.phi_b),
                (self.phi_a_prime, self.phi_b_prime), (self.phi_a_prime, self.phi_b)]

    def shifted(self, delta: float) -> "ChshSettings":
        """All Alice settings advanced and all Bob settings retarded by ``delta``."""
        return ChshSettings(self.phi_a + delta, self.phi_a_prime + delta,
                            self.phi_b - delta, self.phi_b_prime - delta)


@dataclass(frozen=True)
class CorrelationCounts:
    """Coincidences at (A1,B1), (A1,B2), (A2,B1), (A2,B2) for one setting pair."""

    n_pp: float
    n_pm: float
    n_mp: float
    n_mm: float

    def __post_init__(self) -> None:
        if min(self.n_pp, self.n_pm, self.n_mp, self.n_mm) < 0:
            raise ValueError("coincidence counts must be non-negative")

    @property
    def total(self) -> float:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm


def correlation_E(c: CorrelationCounts) -> float:
    n = c.total
    if n <= 0:
        raise ValueError("correlation is undefined without coincidences")
    return (c.n_pp + c.n_mm - c.n_mp - c.n_pm) / n


def correlation_E_with_error(c: CorrelationCounts) -> Tuple[float, float]:
    """E and its standard error assuming independent Poisson counts.

    With P = n_pp + n_mm, M = n_pm + n_mp and N = P + M the propagated
    variance of (P - M)/N is 4 P M / N^3.
    """
    e = correlation_E(c)
    same, diff = c.n_pp + c.n_mm, c.n_pm + c.n_mp
    return e, 2.0 * math.sqrt(same * diff / c.total**3)


def chsh_S(e1: float, e2: float, e3: float, e4: float) -> float:
    """|E(a,b') - E(a,b) + E(a',b') + E(a',b)|."""
    for e in (e1, e2, e3, e4):
        if abs(e) > 1 + 1e-12:
            raise ValueError(f"correlation {e} outside [-1, 1]")
    return abs(e1 - e2 + e3 + e4)


@dataclass(frozen=True)
class ChshResult:
    peak: PeakId
    p1: float
    settings: ChshSettings
    S: float
    correlations: Tuple[float, float, float, float]
    # keyed by (setting-pair index, detector pair)
    coincidences: Dict[Tuple[int, str, str], float] = field(default_factory=dict)


def _peak_delays(peak: PeakId, tau_m_bins: int, tau_p_bins: int) -> Tuple[int, ...]:
    if peak is PeakId.CENTER:
        return (0,)
    if peak is PeakId.TAU_P:
        # both satellites are summed, as in a histogram integrated over +-tau_p
        return (-tau_p_bins, tau_p_bins)
    raise ValueError("CHSH is only defined on the CENTER and TAU_P peaks")


def model_counts(peak, p1: float, phi_a: float, phi_b: float, *, method: str = "brute",
                 phi_p: float = math.pi, tau_m_bins: int = 1, tau_p_bins: int = 2) -> CorrelationCounts:
    """Model coincidence probabilities at one setting pair, arranged as counts."""
    peak = PeakId(peak)
    delays = _peak_delays(peak, tau_m_bins, tau_p_bins)
    values = []
    for det_a, det_b in DETECTOR_PAIRS:
        if method == "brute":
            v = math.fsum(coincidence_probability(dt, phi_a, phi_b, phi_p, p1, det_a, det_b,
                                                  tau_m_bins=tau_m_bins, tau_p_bins=tau_p_bins)
                          for dt in delays)
        elif method == "closed":
            v = len(delays) * closed_form_C(peak, phi_a, phi_b, p1, det_a, det_b)
        else:
            raise ValueError(f"unknown method {method!r}")
        values.append(v)
    return CorrelationCounts(*values)


def chsh_record(peak, p1: float, s: ChshSettings = ChshSettings(), *, method: str = "brute",
                phi_p: float = math.pi, tau_m_bins: int = 1, tau_p_bins: int = 2) -> ChshResult:
    """S from the 16 model coincidences (four setting pairs times four port pairs)."""
    peak = PeakId(peak)
    if peak not in CHSH_PEAKS:
        raise ValueError("CHSH is only defined on the CENTER and TAU_P peaks")
    RfParams(p1)
    es, table = [], {}
    for k, (pa, pb) in enumerate(s.pairs()):
        counts = model_counts(peak, p1, pa, pb, method=method, phi_p=phi_p,
                              tau_m_bins=tau_m_bins, tau_p_bins=tau_p_bins)
        for (da, db), v in zip(DETECTOR_PAIRS, (counts.n_pp, counts.n_pm, counts.n_mp, counts.n_mm)):
            table[(k, da, db)] = v
        # at p1 = 0 nothing clicks; the vacuum limit of E is taken from p1 -> 0
        es.append(correlation_E(counts) if counts.total > 0 else _vacuum_E(peak, pa, pb))
    return ChshResult(peak, p1, s, chsh_S(*es), tuple(es), table)


def _vacuum_E(peak: PeakId, phi_a: float, phi_b: float) -> float:
    # both sum-phase peaks tend to a pure cos(phi_A + phi_B) correlation
    return math.cos(phi_a + phi_b)


def chsh_from_model(peak, p1: float, s: ChshSettings = ChshSettings(), **kwargs) -> float:
    return chsh_record(peak, p1, s, **kwargs).S


def closed_form_S(peak, p1: float) -> float:
    peak = PeakId(peak)
    p0 = RfParams(p1).p0
    if peak is PeakId.CENTER:
        return TSIRELSON * p0**2 / (1 + p1**2)
    if peak is PeakId.TAU_P:
        return TSIRELSON * p0**2 / (1 + 2 * p1 + 4 * p1**2)
    raise ValueError("CHSH is only defined on the CENTER and TAU_P peaks")


# --- fringes and visibilities ----------------------------------------------


class FringeModel(str, Enum):
    SUM_PHASE = "SUM_PHASE"
    DIFF_PHASE = "DIFF_PHASE"
    CONSTANT = "CONSTANT"


# shape function and its extrema over one period
_SHAPES = {
    FringeModel.SUM_PHASE: (lambda a, b: 1.0 + np.cos(a + b), 0.0, 2.0),
    FringeModel.DIFF_PHASE: (lambda a, b: 5.0 - 4.0 * np.cos(a - b), 1.0, 9.0),
}


@dataclass(frozen=True)
class FringeFit:
    N1: float
    N2: float
    model: FringeModel
    visibility: float
    residual_rms: float


def fit_fringe(samples: Sequence[Tuple[float, float, float]], model) -> FringeFit:
    """Least-squares fit of counts = N1 * shape(phi_A, phi_B) + N2."""
    model = FringeModel(model)
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3 or len(data) < 3:
        raise ValueError("need at least three (phi_A, phi_B, counts) samples")
    phi_a, phi_b, counts = data.T
    if model is FringeModel.CONSTANT:
        n2 = float(np.mean(counts))
        rms = float(np.sqrt(np.mean((counts - n2) ** 2)))
        return FringeFit(0.0, n2, model, 0.0, rms)
    shape, lo, hi = _SHAPES[model]
    design = np.column_stack([shape(phi_a, phi_b), np.ones_like(counts)])
    coef, _, rank, _ = np.linalg.lstsq(design, counts, rcond=None)
    if rank < 2:
        raise ValueError("samples do not resolve the fringe (all at one phase)")
    n1, n2 = (float(x) for x in coef)
    rms = float(np.sqrt(np.mean((design @ coef - counts) ** 2)))
    top, bottom = sorted((n1 * hi + n2, n1 * lo + n2), reverse=True)
    vis = (top - bottom) / (top + bottom) if top + bottom > 0 else 0.0
    return FringeFit(n1, n2, model, vis, rms)


def model_visibility(peak, p1: float) -> float:
    """Ideal fringe visibility of each peak at phi_p = pi.

    At TAU_M the small sum-phase term is dropped, so the value is the
    contrast of the difference-phase modulation about its mean.
    """
    peak = PeakId(peak)
    p0 = RfParams(p1).p0
    if peak is PeakId.CENTER:
        return p0**2 / (1 + p1**2)
    if peak is PeakId.TAU_P:
        return p0**2 / (1 + 2 * p1 + 4 * p1**2)
    if peak is PeakId.TAU_M:
        return 4 * p0**2 / (5 + 2 * p1 + 8 * p1**2)
    if peak is PeakId.OUTER:
        return 0.0
    raise ValueError("no ideal visibility for the tau_p - tau_m peak")


def visibility_threshold(peak=PeakId.CENTER, target: float = BELL_VISIBILITY) -> float:
    """p1 at which the ideal visibility falls to ``target``."""
    f = lambda p1: model_visibility(peak, p1) - target  # noqa: E731
    return bisect(f, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# --- excitation-power scans -------------------------------------------------


@dataclass(frozen=True)
class PowerScanRow:
    nbar: float
    p1: float
    S_center: float
    S_tau_p: float
    g2_0: float
    g2_tau_p: float


def power_scan(nbar_grid: Sequence[float], cal: CalibrationParams = DEFAULT_CALIBRATION) -> List[PowerScanRow]:
    grid = np.asarray(nbar_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("mean-photon-number grid must be positive and strictly increasing")
    rows = []
    for nbar in grid.tolist():
        p1 = p1_of_nbar(nbar, cal)
        rows.append(PowerScanRow(nbar, p1, closed_form_S(PeakId.CENTER, p1), closed_form_S(PeakId.TAU_P, p1),
                                 g2_zero_closed(p1), g2_side_closed(p1)))
    return rows


def find_crossing(target_S: float, peak, cal: CalibrationParams = DEFAULT_CALIBRATION,
                  nbar_range: Tuple[float, float] = (0.0, 10.0)) -> float:
    """Mean photon number where S(nbar) equals ``target_S`` (S falls monotonically)."""
    peak = PeakId(peak)
    lo, hi = nbar_range
    f = lambda nbar: closed_form_S(peak, p1_of_nbar(nbar, cal)) - target_S  # noqa: E731
    if not f(hi) <= 0 <= f(lo):
        raise ValueError(f"S = {target_S} is not reached for nbar in [{lo}, {hi}]")
    return bisect(f, lo, hi, xtol=1e-10)

"""Oracle-versus-closed-form self-check used by ``franson-rf validate``."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from .analysis import CHSH_PEAKS, chsh_from_model, closed_form_S, find_crossing
from .coincidence import (
    PeakId,
    arbitrate_side_peak_form,
    closed_form_C,
    coincidence_probability,
    g2_zero_closed,
    hbt_g2,
    peak_table,
)
from .network import forward_coincidence_probability, grid_network, port_d_density, port_d_modes
from .source import DEFAULT_CALIBRATION, CalibrationParams


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    reference: float
    tolerance: float
    passed: bool
    note: str = ""


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _closed_form_check(p1s: Iterable[float]) -> Check:
    delays = {PeakId.CENTER: 0, PeakId.TAU_M: 1, PeakId.TAU_P: 2, PeakId.OUTER: 3}
    phases = np.linspace(0, 2 * math.pi, 4, endpoint=False)
    worst = 0.0
    for p1, (peak, dt), pa, pb in itertools.product(p1s, delays.items(), phases, phases):
        worst = max(worst, _rel(coincidence_probability(dt, pa, pb, math.pi, p1),
                                closed_form_C(peak, pa, pb, p1)))
    return Check("closed_form_equivalence", worst, 0.0, 1e-10, worst <= 1e-10, "max relative error")


def _route_check(p1: float) -> Check:
    worst = 0.0
    for dt, (pa, pb, pp) in itertools.product((-3, 0, 1, 2), ((0.3, 1.1, math.pi), (2.0, -0.7, 1.3))):
        net = grid_network(phi_p=pp, phi_a=pa, phi_b=pb)
        h = coincidence_probability(dt, pa, pb, pp, p1)
        worst = max(worst, _rel(forward_coincidence_probability("A1", 0, "B1", dt, net, p1), h))
    return Check("heisenberg_vs_forward", worst, 0.0, 1e-10, worst <= 1e-10, "max relative error")


def _density_check(p1: float) -> Check:
    rho = port_d_density(p1, math.pi)
    d0, d1 = port_d_modes()
    v = rho.population({d0: 1, d1: 1})
    ref = p1**2 / 16
    return Check("density_rho11_phi_p_pi", v, ref, 1e-10, _rel(v, ref) <= 1e-10)


def run_validation(p1: float, cal: CalibrationParams = DEFAULT_CALIBRATION) -> List[Check]:
    """Quick self-consistency suite; every check carries its own tolerance."""
    p1s = sorted({0.01, 0.1, 0.3, p1} - {0.0})
    checks = [_closed_form_check(p1s), _route_check(p1), _density_check(p1)]
    for peak in CHSH_PEAKS:
        v, ref = chsh_from_model(peak, p1), closed_form_S(peak, p1)
        checks.append(Check(f"chsh_{peak.value}", v, ref, 1e-9, abs(v - ref) <= 1e-9))
    for peak, ref, tol in ((PeakId.CENTER, 0.077, 0.005), (PeakId.TAU_P, 0.032, 0.008)):
        v = find_crossing(2.0, peak, cal)
        checks.append(Check(f"S2_crossing_nbar_{peak.value}", v, ref, tol, abs(v - ref) <= tol))
    if p1 > 0:
        v, ref = hbt_g2(p1, math.pi, 0), g2_zero_closed(p1)
        checks.append(Check("g2_zero", v, ref, 1e-9, _rel(v, ref) <= 1e-9))
    forms = arbitrate_side_peak_form()
    matched = [sign for sign, ok in forms.items() if ok]
    note = f"brute force matches (1{matched[0]}2p1)/(4p1^2)" if len(matched) == 1 else "ambiguous"
    checks.append(Check("g2_side_peak_form", float(len(matched)), 1.0, 0.0, len(matched) == 1, note))
    for m, p, n in ((1, 2, 7), (1, 3, 9)):
        v = len(peak_table(m, p))
        checks.append(Check(f"peak_count_{m}_{p}", float(v), float(n), 0.0, v == n))
    return checks

"""Acceptance gate: one test per criterion, summarized at the end of the run."""

import itertools
import math
import time

import numpy as np
import pytest

from franson_rf.analysis import (
    TSIRELSON,
    FringeModel,
    chsh_from_model,
    closed_form_S,
    find_crossing,
    fit_fringe,
)
from franson_rf.coincidence import (
    G2_SIDE_PEAK_FORMS,
    PeakId,
    PhaseClass,
    closed_form_C,
    coincidence_probability,
    hbt_g2,
    peak_table,
)
from franson_rf.network import (
    forward_coincidence_probability,
    grid_network,
    heisenberg_coincidence_probability,
    port_d_density,
    port_d_modes,
    single_photon_probability_d,
)
from franson_rf.source import CalibrationParams, p1_of_nbar

PEAK_DELAYS = {PeakId.CENTER: 0, PeakId.TAU_M: 1, PeakId.TAU_P: 2, PeakId.OUTER: 3}
P1_GRID = (0.01, 0.05, 0.1, 0.3)


def rel_err(a, b):
    return abs(a - b) / abs(b)


@pytest.mark.criterion(1, "brute force equals closed forms on 4 peaks, 4 p1, 8x8 phases")
def test_closed_form_equivalence(record_property):
    phases = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    start = time.perf_counter()
    worst = 0.0
    for p1, (peak, dt), pa, pb in itertools.product(P1_GRID, PEAK_DELAYS.items(), phases, phases):
        brute = coincidence_probability(dt, pa, pb, math.pi, p1)
        worst = max(worst, rel_err(brute, closed_form_C(peak, pa, pb, p1)))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max rel err {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-10
    assert elapsed < 10


@pytest.mark.criterion(2, "operator and forward-propagation routes agree on 100 random points")
def test_route_agreement(record_property):
    rng = np.random.default_rng(20240611)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        dt = int(rng.integers(-5, 6))
        pp, pa, pb = rng.uniform(0, 2 * math.pi, 3)
        p1 = float(rng.uniform(0.001, 0.999))
        det_a, det_b = ("A1", "A2")[rng.integers(2)], ("B1", "B2")[rng.integers(2)]
        net = grid_network(phi_p=pp, phi_a=pa, phi_b=pb)
        h = heisenberg_coincidence_probability(det_a, 0, det_b, dt, net, p1)
        f = forward_coincidence_probability(det_a, 0, det_b, dt, net, p1)
        worst = max(worst, rel_err(f, h))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max rel err {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-10
    assert elapsed < 30


def _rho_formulas(p1, phi):
    p0, c, c2 = 1 - p1, math.cos(phi), math.cos(2 * phi)
    return {
        (0, 0): ((p0 + 3) * (p0**2 + p0 + 2) - 4 * p0 * p1 * (p0 + 3) * c + 2 * p0 * p1**2 * c2) / 16,
        (0, 1): p1 / 32 * ((p0 + 1) * (3 * p0 + 5) + 8 * p0 * (p0 + 1) * c - 4 * p0 * p1 * c2),
        (0, 2): p1**2 * (p0 + 3) / 32,
        (1, 1): p1**2 / 16 * ((2 * p0 + 1) + 4 * p0 * c + 2 * p0 * c2),
        (1, 2): p1**3 / 32,
    }


def _rho_at_pi(p1):
    return {
        (0, 0): 1 + (-11 + p1) * p1**2 / 16,
        (0, 1): -(-6 + p1) * p1**2 / 32,
        (0, 2): -(-4 + p1) * p1**2 / 32,
        (1, 1): p1**2 / 16,
        (1, 2): p1**3 / 32,
    }


@pytest.mark.criterion(3, "port-d density diagonals match the closed forms over phi_p and p1")
def test_density_matrix(record_property):
    d0, d1 = port_d_modes()
    worst = 0.0
    phis = list(np.linspace(0, 2 * math.pi, 10, endpoint=False)[1:]) + [math.pi]
    for p1, phi in itertools.product(P1_GRID, phis):
        rho = port_d_density(p1, phi)
        refs = [_rho_formulas(p1, phi)] + ([_rho_at_pi(p1)] if phi == math.pi else [])
        for ref in refs:
            for (n1, n2), value in ref.items():
                for a, b in {(n1, n2), (n2, n1)}:
                    got = rho.population({d0: a, d1: b})
                    worst = max(worst, rel_err(got, value))
    record_property("detail", f"max rel err {worst:.2e}")
    assert worst <= 1e-10


@pytest.mark.criterion(4, "model CHSH S matches closed forms for 21 p1 in [0, 0.5]")
def test_chsh(record_property):
    worst = 0.0
    for p1, peak in itertools.product(np.linspace(0, 0.5, 21), (PeakId.CENTER, PeakId.TAU_P)):
        worst = max(worst, abs(chsh_from_model(peak, p1) - closed_form_S(peak, p1)))
    limits = [chsh_from_model(peak, 1e-9) for peak in (PeakId.CENTER, PeakId.TAU_P)]
    record_property("detail", f"max abs err {worst:.2e}, S(p1=1e-9) = {limits[0]:.9f}, {limits[1]:.9f}")
    assert worst <= 1e-9
    assert all(abs(s - TSIRELSON) <= 1e-6 for s in limits)


@pytest.mark.criterion(5, "S = 2 crossings and g2(0) at the calibrated power")
def test_reference_numbers(record_property):
    cal = CalibrationParams(0.973, 1.866)
    center = find_crossing(2.0, PeakId.CENTER, cal)
    tau_p = find_crossing(2.0, PeakId.TAU_P, cal)
    p1 = p1_of_nbar(0.01, cal)
    g2 = hbt_g2(p1, math.pi, 0)
    record_property("detail", f"nbar_center={center:.4f}, nbar_tau_p={tau_p:.4f}, g2(0)={g2:.1f}")
    assert abs(center - 0.077) <= 0.005
    assert abs(tau_p - 0.032) <= 0.008
    assert g2 == pytest.approx(1 / p1**2, rel=1e-9)
    assert abs(g2 - 498) <= 0.05 * 498


@pytest.mark.criterion(6, "bunching ratio g2(0)/g2(tau_p) within 5% of 511/136")
def test_bunching_ratio(record_property):
    p1 = p1_of_nbar(0.01)
    ratio = hbt_g2(p1, math.pi, 0) / hbt_g2(p1, math.pi, 1)
    measured = 511 / 136
    record_property("detail", f"model {ratio:.4f} vs measured {measured:.4f}")
    assert abs(ratio - measured) <= 0.05 * measured


@pytest.mark.criterion(7, "7/9 peak structure and sum-phase invariance at CENTER/TAU_P")
def test_peak_structure(record_property):
    seven, nine = peak_table(1, 2), peak_table(1, 3)
    assert len(seven) == 7 and len(nine) == 9
    cls7 = {pk.delay_bins: pk.phase_class for pk in seven}
    assert {d for d, c in cls7.items() if c is PhaseClass.SUM_PHASE} == {-2, 0, 2}
    assert {d for d, c in cls7.items() if c is PhaseClass.DIFF_PHASE} == {-1, 1}
    assert {d for d, c in cls7.items() if c is PhaseClass.INSENSITIVE} == {-3, 3}
    cls9 = {pk.delay_bins: pk.phase_class for pk in nine}
    assert {d for d, c in cls9.items() if c is PhaseClass.SUM_PHASE} == {-3, 0, 3}

    # The sum-phase peaks also carry a p1^4 cos(phi_A - phi_B) term, so the
    # invariance is checked on the remainder and in the weak-excitation limit.
    worst_sum, worst_weak, literal = 0.0, 0.0, 0.0
    phases = np.linspace(0, 2 * math.pi, 5, endpoint=False)
    for p1, dt, pa, pb, delta in itertools.product(P1_GRID, (0, 2, -2), phases, phases, (0.3, 1.7)):
        norm = 128 if dt == 0 else 512
        a = coincidence_probability(dt, pa, pb, math.pi, p1)
        b = coincidence_probability(dt, pa + delta, pb - delta, math.pi, p1)
        diff_change = p1**4 * (math.cos(pa - pb + 2 * delta) - math.cos(pa - pb)) / norm
        worst_sum = max(worst_sum, abs(b - a - diff_change) / a)
        literal = max(literal, abs(b - a) / a)
    for dt, pa, pb in itertools.product((0, 2, -2), phases, phases):
        a = coincidence_probability(dt, pa, pb, math.pi, 1e-7)
        b = coincidence_probability(dt, pa + 0.9, pb - 0.9, math.pi, 1e-7)
        worst_weak = max(worst_weak, rel_err(b, a))
    record_property("detail", f"sum-phase part {worst_sum:.1e}, weak limit {worst_weak:.1e}, "
                              f"full value at p1<=0.3 {literal:.1e}")
    assert worst_sum <= 1e-12
    assert worst_weak <= 1e-12


@pytest.mark.criterion(8, "fringe fits recover N1, N2 and visibilities on noiseless data")
def test_fringe_machinery(record_property):
    phis = np.linspace(0, 2 * math.pi, 12, endpoint=False)
    sum_data = [(x, 0.0, 100 * (1 + math.cos(x)) + 5) for x in phis]
    diff_data = [(x, 0.0, 40 * (5 - 4 * math.cos(x)) + 3) for x in phis]
    const_data = [(x, 0.2, 7.0) for x in phis]
    fits = {
        FringeModel.SUM_PHASE: (fit_fringe(sum_data, "SUM_PHASE"), 100, 5),
        FringeModel.DIFF_PHASE: (fit_fringe(diff_data, "DIFF_PHASE"), 40, 3),
        FringeModel.CONSTANT: (fit_fringe(const_data, "CONSTANT"), 0, 7),
    }
    for fit, n1, n2 in fits.values():
        assert fit.N1 == pytest.approx(n1, abs=1e-9)
        assert fit.N2 == pytest.approx(n2, abs=1e-9)

    p1 = 1e-6
    tau_m = [(x, 0.0, closed_form_C("TAU_M", x, 0.0, p1)) for x in phis]
    v_diff = fit_fringe(tau_m, "DIFF_PHASE").visibility
    assert v_diff == pytest.approx(0.8, abs=1e-5)

    outer = [(pa, pb, closed_form_C("OUTER", pa, pb, 0.1)) for pa, pb in itertools.product(phis, phis[:3])]
    ratios = [abs(fit_fringe(outer, m).N1) / fit_fringe(outer, m).N2 for m in FringeModel]
    record_property("detail", f"TAU_M visibility {v_diff:.6f}, OUTER max N1/N2 {max(ratios):.1e}")
    assert max(ratios) < 1e-9


@pytest.mark.criterion(9, "single-photon probability slope 2 at phi_p=pi and 1 at phi_p=0")
def test_single_photon_scaling(record_property):
    p1s = np.geomspace(1e-3, 1e-2, 9)
    slopes = {}
    for phi in (math.pi, 0.0):
        probs = [single_photon_probability_d(p, phi) for p in p1s]
        slopes[phi] = np.polyfit(np.log(p1s), np.log(probs), 1)[0]
    record_property("detail", f"slope(pi)={slopes[math.pi]:.4f}, slope(0)={slopes[0.0]:.4f}")
    assert abs(slopes[math.pi] - 2) <= 0.01
    assert abs(slopes[0.0] - 1) <= 0.01


@pytest.mark.criterion(10, "brute-force side-peak g2 matches exactly one candidate form")
def test_side_peak_arbitration(record_property):
    matches = {}
    for sign, form in G2_SIDE_PEAK_FORMS.items():
        matches[sign] = all(rel_err(hbt_g2(p1, math.pi, 1), form(p1)) <= 1e-9 for p1 in (0.01, 0.1, 0.3))
    winner = [s for s, ok in matches.items() if ok]
    record_property("detail", f"matches (1{''.join(winner)}2p1)/(4p1^2)")
    assert len(winner) == 1

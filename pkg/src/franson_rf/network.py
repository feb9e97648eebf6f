"""Three-interferometer network: preparation AMZI followed by a Franson analyzer.

Two independent routes to the same coincidence probabilities live here:

* the Heisenberg route writes each detector mode as a four-term sum of input
  annihilation operators (:func:`detector_operator`) and applies the product
  to the raw input state;
* the Schrödinger route (:func:`forward_coincidence_probability`) pushes the
  input state through every beam splitter, phase shifter and delay line with
  explicit vacuum ports and annihilates at the detector output modes.

Port names follow the usual Franson schematic: ``a`` input, ``b``/``c`` long and
short preparation arms, ``d``/``e`` preparation outputs, ``d'``/``d''`` the two
fiber-splitter outputs, ``f``/``g`` long/short analyzer arms and ``h``/``j``
the analyzer outputs (one prime for Alice, two for Bob).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .fock import (
    DensityMatrix,
    FockState,
    ModeId,
    Occupation,
    add_vacuum,
    apply_annihilation,
    apply_beamsplitter,
    apply_phase,
    conditional_branches,
    norm2,
    reduced_density,
    relabel,
    tensor,
    vacuum,
)
from .source import rf_input_state, single_bin_state

INPUT_PORT = "a"
DETECTOR_PREFACTOR = 1.0 / (4.0 * math.sqrt(2.0))
COMMENSURATE_RTOL = 1e-9


class Detector(str, Enum):
    A1 = "A1"
    A2 = "A2"
    B1 = "B1"
    B2 = "B2"

    @property
    def side(self) -> str:
        return self.value[0]

    @property
    def complementary(self) -> bool:
        """Second analyzer output, equivalent to an extra pi on the analyzer phase."""
        return self.value[1] == "2"


def as_detector(det) -> Detector:
    try:
        return Detector(det.value if isinstance(det, Detector) else str(det).upper())
    except ValueError:
        raise ValueError(f"unknown detector {det!r}; expected one of A1, A2, B1, B2") from None


@dataclass(frozen=True)
class AmziSpec:
    """Asymmetric Mach-Zehnder: arm imbalance in grid bins and long-arm phase."""

    delay_bins: int
    phase: float = 0.0

    def __post_init__(self) -> None:
        if int(self.delay_bins) != self.delay_bins or self.delay_bins < 1:
            raise ValueError(f"delay_bins must be a positive integer, got {self.delay_bins}")


@dataclass(frozen=True)
class NetworkSpec:
    prep: AmziSpec = AmziSpec(2, math.pi)
    analyzer_A: AmziSpec = AmziSpec(1, 0.0)
    analyzer_B: AmziSpec = AmziSpec(1, 0.0)
    grid_step: float = 1.07e-9

    @classmethod
    def from_times(
        cls,
        tau_m: float = 1.07e-9,
        tau_p: float = 2.14e-9,
        tau_g: Optional[float] = None,
        phi_p: float = math.pi,
        phi_a: float = 0.0,
        phi_b: float = 0.0,
    ) -> "NetworkSpec":
        """Build from delays in seconds; every delay must be a multiple of ``tau_g``."""
        tau_g = tau_m if tau_g is None else tau_g
        if min(tau_m, tau_p, tau_g) <= 0:
            raise ValueError("delays must be positive")
        bins = []
        for name, tau in (("tau_m", tau_m), ("tau_p", tau_p)):
            k = round(tau / tau_g)
            if k < 1 or abs(tau / tau_g - k) > COMMENSURATE_RTOL * max(1, k):
                raise ValueError(f"{name}={tau:g} s is not an integer multiple of tau_g={tau_g:g} s")
            bins.append(k)
        m, p = bins
        return cls(AmziSpec(p, phi_p), AmziSpec(m, phi_a), AmziSpec(m, phi_b), tau_g)

    @property
    def tau_m_bins(self) -> int:
        return self.analyzer_A.delay_bins

    @property
    def tau_p_bins(self) -> int:
        return self.prep.delay_bins

    def with_phases(self, phi_p=None, phi_a=None, phi_b=None) -> "NetworkSpec":
        return replace(
            self,
            prep=self.prep if phi_p is None else replace(self.prep, phase=phi_p),
            analyzer_A=self.analyzer_A if phi_a is None else replace(self.analyzer_A, phase=phi_a),
            analyzer_B=self.analyzer_B if phi_b is None else replace(self.analyzer_B, phase=phi_b),
        )

    def analyzer(self, det: Detector) -> AmziSpec:
        return self.analyzer_A if det.side == "A" else self.analyzer_B


def grid_network(tau_m_bins: int = 1, tau_p_bins: int = 2, phi_p: float = math.pi,
                 phi_a: float = 0.0, phi_b: float = 0.0, grid_step: float = 1.07e-9) -> NetworkSpec:
    return NetworkSpec(AmziSpec(tau_p_bins, phi_p), AmziSpec(tau_m_bins, phi_a),
                       AmziSpec(tau_m_bins, phi_b), grid_step)


@dataclass(frozen=True)
class DetectionMonomial:
    coefficient: complex
    modes: Tuple[ModeId, ...]


@dataclass(frozen=True)
class DetectionOperator:
    """Sum of input-mode annihilation monomials representing detector clicks."""

    terms: Tuple[DetectionMonomial, ...]
    detectors: Tuple[Detector, ...]
    click_bins: Tuple[int, ...]

    @property
    def detector(self) -> Detector:
        return self.detectors[0]

    @property
    def click_bin(self) -> int:
        return self.click_bins[0]

    def input_bins(self) -> List[int]:
        return sorted({m.bin for t in self.terms for m in t.modes})

    def input_modes(self) -> List[ModeId]:
        return [ModeId(INPUT_PORT, b) for b in self.input_bins()]

    def apply(self, state: FockState) -> FockState:
        total: Dict[Occupation, complex] = {}
        for term in self.terms:
            s = state
            for m in term.modes:
                s = apply_annihilation(s, m)
            for occ, a in s.amplitudes.items():
                total[occ] = total.get(occ, 0j) + term.coefficient * a
        return FockState({o: a for o, a in total.items() if a != 0}, state.modes)

    def probability(self, state: FockState) -> float:
        """<psi| O^dag O |psi>, i.e. the normally ordered click probability."""
        return norm2(self.apply(state))


def detector_operator(det, click_bin: int, net: NetworkSpec) -> DetectionOperator:
    """Heisenberg-picture detector mode at ``click_bin`` in terms of input modes.

    The complementary output (A2/B2) is the same expression with pi added to
    the analyzer phase.
    """
    det = as_detector(det)
    amzi = net.analyzer(det)
    phi = amzi.phase + (math.pi if det.complementary else 0.0)
    phi_p = net.prep.phase
    tp, tm = net.prep.delay_bins, amzi.delay_bins
    t = int(click_bin)
    raw = (
        (phi + phi_p, t - tp - tm),
        (phi, t - tm),
        (phi_p, t - tp),
        (0.0, t),
    )
    terms = tuple(
        DetectionMonomial(DETECTOR_PREFACTOR * cmath.exp(1j * ph), (ModeId(INPUT_PORT, b),))
        for ph, b in raw
    )
    return DetectionOperator(terms, (det,), (t,))


def coincidence_operator(det_a, t_a: int, det_b, t_b: int, net: NetworkSpec) -> DetectionOperator:
    """Product of an Alice and a Bob detector operator: 16 two-mode monomials."""
    det_a, det_b = as_detector(det_a), as_detector(det_b)
    if det_a.side != "A" or det_b.side != "B":
        raise ValueError(f"coincidences need one Alice and one Bob detector, got {det_a.value}, {det_b.value}")
    op_a = detector_operator(det_a, t_a, net)
    op_b = detector_operator(det_b, t_b, net)
    terms = tuple(
        DetectionMonomial(x.coefficient * y.coefficient, x.modes + y.modes)
        for x in op_a.terms
        for y in op_b.terms
    )
    return DetectionOperator(terms, (det_a, det_b), (int(t_a), int(t_b)))


def heisenberg_coincidence_probability(det_a, t_a: int, det_b, t_b: int,
                                       net: NetworkSpec, p1: float) -> float:
    op = coincidence_operator(det_a, t_a, det_b, t_b, net)
    return op.probability(rf_input_state(p1, op.input_modes()))


# --- forward propagation -------------------------------------------------


def _bs(states: List[FockState], in1, in2, out1, out2) -> List[FockState]:
    """Beam splitter on every branch, inserting vacuum for absent input modes."""
    in1, in2 = ModeId(*in1), ModeId(*in2)
    out = []
    for s in states:
        missing = [m for m in (in1, in2) if m not in s.modes]
        if missing:
            s = add_vacuum(s, missing)
        out.append(apply_beamsplitter(s, in1, in2, out1, out2))
    return out


def _compress(branches: List[FockState]) -> List[FockState]:
    """Re-express an incoherent ensemble through the eigenvectors of its density matrix.

    Keeps the ensemble no larger than the dimension of the occupied basis.
    """
    if len(branches) <= 1:
        return branches
    modes = branches[0].modes
    basis = sorted({o for b in branches for o in b.amplitudes})
    if len(branches) <= len(basis):
        return branches
    index = {o: i for i, o in enumerate(basis)}
    phi = np.zeros((len(branches), len(basis)), dtype=complex)
    for r, b in enumerate(branches):
        for o, a in b.amplitudes.items():
            phi[r, index[o]] = a
    _, sv, vh = np.linalg.svd(phi, full_matrices=False)
    out = []
    for s, row in zip(sv, vh):
        if s <= 1e-15:
            continue
        vec = s * row
        out.append(FockState({basis[i]: complex(vec[i]) for i in np.flatnonzero(vec)}, modes))
    return out


def _trace(branches: List[FockState], drop: Iterable[ModeId]) -> List[FockState]:
    drop = {ModeId(*m) for m in drop}
    if not drop:
        return branches
    out: List[FockState] = []
    for b in branches:
        out.extend(c for c in conditional_branches(b, b.modes - drop) if c.amplitudes)
    return _compress(out)


def _map(branches: List[FockState], fn) -> List[FockState]:
    return [fn(b) for b in branches]


def forward_coincidence_probability(det_a, t_a: int, det_b, t_b: int,
                                    net: NetworkSpec, p1: float) -> float:
    """Coincidence probability by explicit forward propagation.

    Input bins are injected in time order; modes that can no longer reach
    either clicking detector are traced out as soon as they leave the last
    optical element that touches them, and the resulting incoherent ensemble
    is kept compact via its density-matrix eigenvectors. Tracing a mode that
    never interacts again does not change the detector statistics.
    """
    det_a, det_b = as_detector(det_a), as_detector(det_b)
    if det_a.side != "A" or det_b.side != "B":
        raise ValueError("coincidences need one Alice and one Bob detector")
    tp = net.prep.delay_bins
    sides = [
        (det_a, int(t_a), net.analyzer_A, "'"),
        (det_b, int(t_b), net.analyzer_B, "''"),
    ]
    live = {mark: {t, t - amzi.delay_bins} for _, t, amzi, mark in sides}
    live_d = live["'"] | live["''"]
    first, last = min(live_d) - tp, max(live_d)

    branches = [vacuum()]
    clicks = []
    for s in range(first, last + 1):
        # preparation AMZI fed one input bin at a time
        a, v = ModeId(INPUT_PORT, s), ModeId("v_prep", s)
        src = add_vacuum(single_bin_state(p1, a), [v])
        branches = _map(branches, lambda b: tensor(b, src))
        branches = _bs(branches, a, v, ("c", s), ("b", s))
        branches = _map(branches, lambda b: apply_phase(b, ("b", s), net.prep.phase))
        branches = _map(branches, lambda b: relabel(b, {ModeId("b", s): ModeId("b_late", s + tp)}))
        # arms that only feed dead output bins are discarded right away
        dead_arms = [("c", s)] * (s not in live_d) + [("b_late", s + tp)] * (s + tp not in live_d)
        branches = _trace(branches, dead_arms)
        if s not in live_d:
            continue
        branches = _bs(branches, ("c", s), ("b_late", s), ("d", s), ("e", s))
        branches = _trace(branches, [("e", s)])

        # fiber splitter feeding Alice (') and Bob ('')
        branches = _bs(branches, ("d", s), ("v_fbs", s), ("d'", s), ("d''", s))
        branches = _trace(branches, [(f"d{mark}", s) for mark in live if s not in live[mark]])

        # an analyzer runs once both of its input bins exist
        for det, t, amzi, mark in sides:
            if s != t:
                continue
            d, g, f, fl = f"d{mark}", f"g{mark}", f"f{mark}", f"f{mark}_late"
            h, j = f"h{mark}", f"j{mark}"
            for u in sorted(live[mark]):
                branches = _bs(branches, (d, u), (f"v{mark}", u), (g, u), (f, u))
                branches = _map(branches, lambda b: apply_phase(b, (f, u), amzi.phase))
                branches = _map(branches, lambda b: relabel(b, {ModeId(f, u): ModeId(fl, u + amzi.delay_bins)}))
            branches = _bs(branches, (g, t), (fl, t), (h, t), (j, t))
            click = ModeId(j if det.complementary else h, t)
            clicks.append(click)
            branches = _trace(branches, [m for m in branches[0].modes
                                         if m.port in (g, fl, h, j) and m != click])

    x, y = clicks
    return math.fsum(norm2(apply_annihilation(apply_annihilation(b, x), y)) for b in branches)


def prepare_output_state(p1: float, phi_p: float, window_bins: int,
                         delay_bins: int = 1) -> FockState:
    """Joint d/e output of the preparation AMZI for input bins ``0..window_bins-1``.

    Output bins run from 0 to ``window_bins - 1 + delay_bins``; the first and
    last ``delay_bins`` of them only see one arm.
    """
    if window_bins < 3:
        raise ValueError("window_bins must be at least 3")
    bins = range(window_bins)
    state = rf_input_state(p1, [ModeId(INPUT_PORT, s) for s in bins])
    state = add_vacuum(state, [ModeId("v_prep", s) for s in bins])
    for s in bins:
        state = apply_beamsplitter(state, ("a", s), ("v_prep", s), ("c", s), ("b", s))
        state = apply_phase(state, ("b", s), phi_p)
    state = relabel(state, {ModeId("b", s): ModeId("b_late", s + delay_bins) for s in bins})
    for s in range(window_bins + delay_bins):
        missing = [m for m in (ModeId("c", s), ModeId("b_late", s)) if m not in state.modes]
        state = add_vacuum(state, missing)
        state = apply_beamsplitter(state, ("c", s), ("b_late", s), ("d", s), ("e", s))
    return state


def port_d_modes(first_bin: int = 1, count: int = 2, delay_bins: int = 1) -> List[ModeId]:
    return [ModeId("d", first_bin + k * delay_bins) for k in range(count)]


def port_d_density(p1: float, phi_p: float, window_bins: int = 4) -> DensityMatrix:
    """Reduced state of port d on the two complete bins (t - tau_p, t)."""
    state = prepare_output_state(p1, phi_p, window_bins)
    return reduced_density(state, port_d_modes())


def single_photon_probability_d(p1: float, phi_p: float) -> float:
    """Probability that the two-bin port-d field holds exactly one photon."""
    rho = port_d_density(p1, phi_p)
    d0, d1 = port_d_modes()
    return rho.population({d0: 1}) + rho.population({d1: 1})

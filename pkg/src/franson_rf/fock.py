"""Sparse bosonic Fock states over labeled temporal-spatial modes.

A mode is a ``(port, bin)`` pair. A state maps canonical occupation tuples to
complex amplitudes and carries the set of modes it is defined on, so that
vacuum modes stay part of the mode universe even though zero counts are never
stored.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Tuple

import numpy as np

PRUNE_THRESHOLD = 1e-14
NORM_EPS = 1e-12


class ModeId(NamedTuple):
    """A spatial port label together with a time-bin index."""

    port: str
    bin: int

    def __repr__(self) -> str:
        return f"{self.port}[{self.bin}]"


Occupation = Tuple[Tuple[ModeId, int], ...]


def occupation(counts: Mapping[ModeId, int]) -> Occupation:
    """Canonical sparse occupation tuple: sorted by mode, zero counts dropped."""
    for m, n in counts.items():
        if n < 0:
            raise ValueError(f"negative photon count {n} in mode {m}")
    return tuple(sorted((ModeId(*m), int(n)) for m, n in counts.items() if n))


def photon_number(occ: Occupation) -> int:
    return sum(n for _, n in occ)


def _check_disjoint(a: Iterable[ModeId], b: Iterable[ModeId]) -> None:
    overlap = set(a) & set(b)
    if overlap:
        raise ValueError(f"mode sets overlap: {sorted(overlap)}")


@dataclass(frozen=True)
class FockState:
    """Immutable sparse state vector.

    ``amplitudes`` must not be mutated after construction; every operation in
    this module returns a new state.
    """

    amplitudes: Dict[Occupation, complex]
    modes: FrozenSet[ModeId] = field(default_factory=frozenset)

    @classmethod
    def from_counts(cls, terms: Mapping, modes: Iterable[ModeId] = ()) -> "FockState":
        """Build from ``{ {mode: count} or Occupation : amplitude }``.

        Modes mentioned by any term are added to the mode universe.
        """
        amps: Dict[Occupation, complex] = defaultdict(complex)
        universe = set(ModeId(*m) for m in modes)
        for key, amp in terms.items():
            occ = occupation(key) if isinstance(key, Mapping) else occupation(dict(key))
            universe.update(m for m, _ in occ)
            amps[occ] += complex(amp)
        return _make(amps, universe, 0.0)

    def __len__(self) -> int:
        return len(self.amplitudes)

    def amplitude(self, counts: Mapping[ModeId, int]) -> complex:
        return self.amplitudes.get(occupation(counts), 0j)

    def photon_numbers(self) -> List[int]:
        return sorted({photon_number(o) for o in self.amplitudes})

    def __add__(self, other: "FockState") -> "FockState":
        amps: Dict[Occupation, complex] = defaultdict(complex, self.amplitudes)
        for occ, a in other.amplitudes.items():
            amps[occ] += a
        return _make(amps, self.modes | other.modes, PRUNE_THRESHOLD)

    def scaled(self, c: complex) -> "FockState":
        return FockState({o: c * a for o, a in self.amplitudes.items()}, self.modes)

    def __repr__(self) -> str:
        terms = sorted(self.amplitudes.items(), key=lambda kv: -abs(kv[1]))
        shown = " + ".join(
            f"({a.real:.4g}{a.imag:+.4g}j)|{','.join(f'{m!r}:{n}' for m, n in o) or 'vac'}>"
            for o, a in terms[:6]
        )
        more = f" + ... ({len(terms) - 6} more)" if len(terms) > 6 else ""
        return f"FockState({shown or '0'}{more})"


def _make(amps: Mapping[Occupation, complex], modes, threshold: float) -> FockState:
    kept = {o: complex(a) for o, a in amps.items() if abs(a) >= threshold and a != 0}
    return FockState(kept, frozenset(modes))


def prune(s: FockState, threshold: float = PRUNE_THRESHOLD) -> FockState:
    """Drop amplitudes with magnitude below ``threshold``."""
    return _make(s.amplitudes, s.modes, threshold)


def vacuum(modes: Iterable[ModeId] = ()) -> FockState:
    return FockState({(): 1 + 0j}, frozenset(ModeId(*m) for m in modes))


def basis_state(counts: Mapping[ModeId, int], modes: Iterable[ModeId] = ()) -> FockState:
    return FockState.from_counts({occupation(counts): 1.0}, modes)


def zero_state(modes: Iterable[ModeId] = ()) -> FockState:
    return FockState({}, frozenset(modes))


def inner(s1: FockState, s2: FockState) -> complex:
    """Sesquilinear inner product <s1|s2> (antilinear in ``s1``)."""
    if len(s1.amplitudes) > len(s2.amplitudes):
        return sum((s1.amplitudes[o].conjugate() * a for o, a in s2.amplitudes.items()
                    if o in s1.amplitudes), 0j)
    return sum((a.conjugate() * s2.amplitudes[o] for o, a in s1.amplitudes.items()
                if o in s2.amplitudes), 0j)


def norm2(s: FockState) -> float:
    return math.fsum(a.real * a.real + a.imag * a.imag for a in s.amplitudes.values())


def tensor(s1: FockState, s2: FockState, *, prune: float = PRUNE_THRESHOLD) -> FockState:
    """Product state on the union of two disjoint mode sets."""
    _check_disjoint(s1.modes, s2.modes)
    amps = {}
    for o1, a1 in s1.amplitudes.items():
        for o2, a2 in s2.amplitudes.items():
            amps[tuple(sorted(o1 + o2))] = a1 * a2
    return _make(amps, s1.modes | s2.modes, prune)


def add_vacuum(s: FockState, modes: Iterable[ModeId]) -> FockState:
    """Extend the mode universe with modes in the vacuum state."""
    new = frozenset(ModeId(*m) for m in modes)
    _check_disjoint(s.modes, new)
    return FockState(s.amplitudes, s.modes | new)


@lru_cache(maxsize=None)
def _splitter_table(n1: int, n2: int) -> Tuple[Tuple[int, float], ...]:
    """Amplitudes of |m, n1+n2-m> produced from |n1, n2> by the 50:50 splitter.

    in1^dag -> (out1^dag + out2^dag)/sqrt2, in2^dag -> (out1^dag - out2^dag)/sqrt2.
    """
    total = n1 + n2
    coeffs = defaultdict(float)
    for k in range(n1 + 1):
        for l in range(n2 + 1):
            sign = -1.0 if (n2 - l) % 2 else 1.0
            coeffs[k + l] += sign * math.comb(n1, k) * math.comb(n2, l)
    pref = 2.0 ** (-total / 2) / math.sqrt(math.factorial(n1) * math.factorial(n2))
    return tuple(
        (m, pref * c * math.sqrt(math.factorial(m) * math.factorial(total - m)))
        for m, c in sorted(coeffs.items())
        if c != 0
    )


def apply_beamsplitter(
    s: FockState,
    in1: ModeId,
    in2: ModeId,
    out1: ModeId,
    out2: ModeId,
    *,
    prune: float = PRUNE_THRESHOLD,
) -> FockState:
    """Symmetric 50:50 beam splitter.

    Creation operators map as ``in1 -> (out1 + out2)/sqrt2`` and
    ``in2 -> (out1 - out2)/sqrt2``. The input modes are consumed; the output
    modes may reuse the input labels.

    Raises:
        ValueError: if an input mode is outside the state's universe, or an
            output mode collides with a mode that is not being consumed.
    """
    in1, in2, out1, out2 = (ModeId(*m) for m in (in1, in2, out1, out2))
    if in1 == in2 or out1 == out2:
        raise ValueError("beam splitter needs two distinct input and output modes")
    missing = {in1, in2} - s.modes
    if missing:
        raise ValueError(f"input modes not in state: {sorted(missing)}")
    remaining = s.modes - {in1, in2}
    _check_disjoint(remaining, {out1, out2})

    amps: Dict[Occupation, complex] = defaultdict(complex)
    for occ, a in s.amplitudes.items():
        n1 = n2 = 0
        rest = []
        for m, n in occ:
            if m == in1:
                n1 = n
            elif m == in2:
                n2 = n
            else:
                rest.append((m, n))
        if n1 == 0 and n2 == 0:
            amps[occ] += a
            continue
        total = n1 + n2
        for m, c in _splitter_table(n1, n2):
            new = list(rest)
            if m:
                new.append((out1, m))
            if total - m:
                new.append((out2, total - m))
            amps[tuple(sorted(new))] += c * a
    return _make(amps, remaining | {out1, out2}, prune)


def apply_phase(s: FockState, m: ModeId, phi: float) -> FockState:
    """Multiply every amplitude by exp(i n phi), n being the count in ``m``."""
    m = ModeId(*m)
    amps = {}
    for occ, a in s.amplitudes.items():
        n = next((k for mode, k in occ if mode == m), 0)
        amps[occ] = a * complex(math.cos(n * phi), math.sin(n * phi)) if n else a
    return FockState(amps, s.modes)


def apply_annihilation(s: FockState, m: ModeId) -> FockState:
    """Bosonic lowering operator on mode ``m``; the result is unnormalized."""
    m = ModeId(*m)
    amps = {}
    for occ, a in s.amplitudes.items():
        for i, (mode, n) in enumerate(occ):
            if mode == m:
                new = occ[:i] + ((mode, n - 1),) + occ[i + 1:] if n > 1 else occ[:i] + occ[i + 1:]
                amps[new] = a * math.sqrt(n)
                break
    return FockState(amps, s.modes)


def relabel(s: FockState, mapping: Mapping[ModeId, ModeId]) -> FockState:
    """Rename modes, e.g. to move a delay-line output onto a later time bin."""
    mapping = {ModeId(*k): ModeId(*v) for k, v in mapping.items()}
    if len(set(mapping.values())) != len(mapping):
        raise ValueError("relabeling is not injective")
    untouched = s.modes - set(mapping)
    _check_disjoint(untouched, mapping.values())
    amps = {
        tuple(sorted((mapping.get(m, m), n) for m, n in occ)): a
        for occ, a in s.amplitudes.items()
    }
    return FockState(amps, frozenset(mapping.get(m, m) for m in s.modes))


@dataclass(frozen=True)
class DensityMatrix:
    """Density matrix over the occupation basis of a subset of modes."""

    basis: Tuple[Occupation, ...]
    matrix: np.ndarray
    modes: FrozenSet[ModeId] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {o: i for i, o in enumerate(self.basis)})

    def element(self, row: Mapping[ModeId, int], col: Mapping[ModeId, int]) -> complex:
        i = self._index.get(occupation(row))
        j = self._index.get(occupation(col))
        if i is None or j is None:
            return 0j
        return complex(self.matrix[i, j])

    def population(self, counts: Mapping[ModeId, int]) -> float:
        return self.element(counts, counts).real

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def is_valid(self, herm_tol: float = 1e-12, trace_tol: float = 1e-10) -> bool:
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=herm_tol, rtol=0):
            return False
        if abs(self.trace() - 1.0) > trace_tol:
            return False
        diag = np.diag(m)
        return bool(np.all(np.abs(diag.imag) <= herm_tol) and np.all(diag.real >= -1e-12))


def _split(occ: Occupation, keep: FrozenSet[ModeId]) -> Tuple[Occupation, Occupation]:
    kept = tuple((m, n) for m, n in occ if m in keep)
    rest = tuple((m, n) for m, n in occ if m not in keep)
    return kept, rest


def conditional_branches(s: FockState, keep: Iterable[ModeId]) -> List[FockState]:
    """Unnormalized states of ``keep`` conditioned on each occupation of the rest.

    These are the branches whose outer products sum to the reduced density
    matrix on ``keep``.
    """
    keep = frozenset(ModeId(*m) for m in keep)
    groups: Dict[Occupation, Dict[Occupation, complex]] = defaultdict(dict)
    for occ, a in s.amplitudes.items():
        kept, rest = _split(occ, keep)
        groups[rest][kept] = a
    return [FockState(g, keep) for _, g in sorted(groups.items())]


def reduced_density(s: FockState, keep: Iterable[ModeId]) -> DensityMatrix:
    """Partial trace of ``|s><s|`` over every mode outside ``keep``."""
    keep = frozenset(ModeId(*m) for m in keep)
    if not keep:
        raise ValueError("keep set is empty")
    if not keep <= s.modes:
        raise ValueError(f"modes not in state: {sorted(keep - s.modes)}")
    branches = conditional_branches(s, keep)
    basis = tuple(sorted({o for b in branches for o in b.amplitudes}))
    index = {o: i for i, o in enumerate(basis)}
    rho = np.zeros((len(basis), len(basis)), dtype=complex)
    for b in branches:
        v = np.zeros(len(basis), dtype=complex)
        for o, a in b.amplitudes.items():
            v[index[o]] = a
        rho += np.outer(v, v.conj())
    return DensityMatrix(basis, rho, keep)

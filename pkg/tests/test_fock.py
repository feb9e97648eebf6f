import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from franson_rf.fock import (
    FockState,
    ModeId,
    add_vacuum,
    apply_annihilation,
    apply_beamsplitter,
    apply_phase,
    basis_state,
    conditional_branches,
    inner,
    norm2,
    reduced_density,
    relabel,
    tensor,
    vacuum,
)

X, Y, U, V = ModeId("x", 0), ModeId("y", 0), ModeId("u", 0), ModeId("v", 0)

amplitude = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@st.composite
def two_mode_states(draw, max_n=3):
    terms = {}
    for n1 in range(max_n + 1):
        for n2 in range(max_n + 1 - n1):
            terms[((X, n1), (Y, n2))] = draw(amplitude)
    s = FockState.from_counts({tuple((m, n) for m, n in k if n): a for k, a in terms.items()}, [X, Y])
    return s


def test_hong_ou_mandel_bunching():
    out = apply_beamsplitter(basis_state({X: 1, Y: 1}), X, Y, U, V)
    assert out.amplitude({U: 1, V: 1}) == 0
    assert out.amplitude({U: 2}) == pytest.approx(1 / math.sqrt(2))
    assert out.amplitude({V: 2}) == pytest.approx(-1 / math.sqrt(2))


def test_single_photon_splits_with_sign_on_second_input():
    a = apply_beamsplitter(add_vacuum(basis_state({X: 1}), [Y]), X, Y, U, V)
    b = apply_beamsplitter(add_vacuum(basis_state({Y: 1}), [X]), X, Y, U, V)
    assert a.amplitude({U: 1}) == pytest.approx(a.amplitude({V: 1}))
    assert b.amplitude({U: 1}) == pytest.approx(-b.amplitude({V: 1}))


@settings(max_examples=50, deadline=None)
@given(two_mode_states())
def test_beamsplitter_is_unitary(s):
    out = apply_beamsplitter(s, X, Y, U, V, prune=0.0)
    assert norm2(out) == pytest.approx(norm2(s), rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(two_mode_states(), two_mode_states())
def test_beamsplitter_preserves_inner_products(s1, s2):
    o1 = apply_beamsplitter(s1, X, Y, U, V, prune=0.0)
    o2 = apply_beamsplitter(s2, X, Y, U, V, prune=0.0)
    assert abs(inner(o1, o2) - inner(s1, s2)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(two_mode_states())
def test_beamsplitter_conserves_photon_number(s):
    out = apply_beamsplitter(s, X, Y, U, V)
    assert set(out.photon_numbers()) <= set(s.photon_numbers())


def test_beamsplitter_rejects_missing_input_and_collision():
    with pytest.raises(ValueError):
        apply_beamsplitter(basis_state({X: 1}), X, Y, U, V)
    s = basis_state({X: 1, Y: 0, U: 1}, [X, Y, U])
    with pytest.raises(ValueError):
        apply_beamsplitter(s, X, Y, U, V)


@given(st.integers(0, 4), st.floats(-10, 10))
def test_phase_shift(n, phi):
    out = apply_phase(basis_state({X: n}), X, phi)
    assert out.amplitude({X: n}) == pytest.approx(np.exp(1j * n * phi))


def test_annihilation_weights():
    s = apply_annihilation(basis_state({X: 3}), X)
    assert s.amplitude({X: 2}) == pytest.approx(math.sqrt(3))
    assert norm2(apply_annihilation(vacuum([X]), X)) == 0


def test_relabel_moves_and_rejects_collisions():
    s = relabel(basis_state({X: 2}), {X: ModeId("x", 5)})
    assert s.amplitude({ModeId("x", 5): 2}) == 1
    with pytest.raises(ValueError):
        relabel(basis_state({X: 1, Y: 0}, [X, Y]), {X: Y})


def test_tensor_rejects_shared_modes():
    with pytest.raises(ValueError):
        tensor(basis_state({X: 1}), basis_state({X: 1}))


def test_reduced_density_of_bell_like_state():
    s = FockState.from_counts({((X, 1),): 1 / math.sqrt(2), ((Y, 1),): 1 / math.sqrt(2)}, [X, Y])
    rho = reduced_density(s, [X])
    assert rho.is_valid()
    assert rho.population({X: 1}) == pytest.approx(0.5)
    assert rho.element({X: 1}, {}) == pytest.approx(0)
    assert sum(norm2(b) for b in conditional_branches(s, [X])) == pytest.approx(1)
    with pytest.raises(ValueError):
        reduced_density(s, [])
    with pytest.raises(ValueError):
        reduced_density(s, [U])

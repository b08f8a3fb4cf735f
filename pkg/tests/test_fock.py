from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monfermi import gaussian
from monfermi.fock import (
    MAX_DIM,
    FockEngine,
    build_basis,
    correlations,
    entanglement_entropy,
    many_body_matrix,
    neel_fock,
    occupations,
    oracle_qj_step,
    oracle_qsd_step,
    slater_to_fock,
)
from monfermi.gaussian import SlaterState, neel_state
from monfermi.lattice import build_hopping, qj_effective_propagator, unitary_propagator
from monfermi.noise import NoiseStream
from monfermi.unravelings import default_qj_dt, qj_step, qsd_step

from .helpers import random_orthonormal


def test_basis_dimension_and_order():
    b = build_basis(4, 2)
    assert len(b) == 6
    assert [b.configuration(k) for k in range(6)] == list(combinations(range(4), 2))
    assert b.index[0b0011] == 0


def test_basis_limits():
    with pytest.raises(ValueError):
        build_basis(4, 5)
    with pytest.raises(ValueError):
        build_basis(20, 10)
    assert comb(16, 8) > MAX_DIM
    with pytest.raises(ValueError):
        build_basis(4, 2, order=[0, 0, 1, 2, 3, 4])


def test_many_body_matrix_hermitian():
    M = many_body_matrix(build_hopping(6), build_basis(6, 3))
    assert np.abs(M - M.conj().T).max() == 0


@pytest.mark.parametrize("L,N", [(4, 2), (6, 3), (6, 2), (8, 3)])
def test_many_body_spectrum_is_sum_of_orbital_energies(L, N):
    H = build_hopping(L)
    eps = np.linalg.eigvalsh(H.entries)
    expected = np.sort([sum(eps[list(c)]) for c in combinations(range(L), N)])
    got = np.linalg.eigvalsh(many_body_matrix(H, build_basis(L, N)))
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_ground_state_energy_l8():
    H = build_hopping(8)
    E0 = np.linalg.eigvalsh(many_body_matrix(H, build_basis(8, 4)))[0]
    assert E0 == pytest.approx(np.sort(np.linalg.eigvalsh(H.entries))[:4].sum(), abs=1e-12)
    # cosine band, two degenerate orbitals at the Fermi level
    assert E0 == pytest.approx(-1 - 2 * np.cos(np.pi / 4), abs=1e-12)


def test_slater_embedding_normalized(rng):
    U = random_orthonormal(rng, 6, 3)
    b = build_basis(6, 3)
    psi = slater_to_fock(U, b)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-13)
    np.testing.assert_allclose(occupations(psi, b), gaussian.occupations(U), atol=1e-13)


def test_correlations_match_gaussian(rng):
    U = random_orthonormal(rng, 6, 3)
    b = build_basis(6, 3)
    G = correlations(slater_to_fock(U, b), b)
    C = gaussian.correlation_matrix(SlaterState(U))
    np.testing.assert_allclose(G, C.conj(), atol=1e-13)


def test_neel_embedding():
    b = build_basis(6, 3)
    np.testing.assert_allclose(slater_to_fock(neel_state(6).U, b), neel_fock(b), atol=1e-15)


def test_entropy_after_unitary_evolution_l8():
    L, t = 8, 10.0
    H = build_hopping(L)
    b = build_basis(L, L // 2)
    P = unitary_propagator(H, t).entries
    U = P @ neel_state(L).U
    psi = FockEngine(H, L // 2, t).propagator @ neel_fock(b)
    np.testing.assert_allclose(psi, slater_to_fock(U, b), atol=1e-10)
    for ell in (1, 2, 4, 6):
        Sf = entanglement_entropy(psi, b, ell)
        Sg = gaussian.entanglement_entropy(SlaterState(U), ell)
        assert Sf == pytest.approx(Sg, abs=1e-10)
    assert entanglement_entropy(psi, b) > 0.5


def test_entropy_of_product_state_is_zero():
    b = build_basis(6, 3)
    assert entanglement_entropy(neel_fock(b), b) == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_basis_order_independence(seed):
    rng = np.random.default_rng(seed)
    L, N = 4, 2
    H = build_hopping(L)
    order = rng.permutation(comb(L, N))
    e1, e2 = FockEngine(H, N, 0.1), FockEngine(H, N, 0.1, order=order)
    np.testing.assert_allclose(np.linalg.eigvalsh(e1.H_many), np.linalg.eigvalsh(e2.H_many),
                               atol=1e-12)
    U = random_orthonormal(rng, L, N)
    p1, p2 = slater_to_fock(U, e1.basis), slater_to_fock(U, e2.basis)
    a, b = NoiseStream(seed), NoiseStream(seed)
    for _ in range(20):
        p1 = oracle_qsd_step(p1, e1, 0.5, 0.1, a)
        p2 = oracle_qsd_step(p2, e2, 0.5, 0.1, b)
    np.testing.assert_allclose(occupations(p1, e1.basis), occupations(p2, e2.basis), atol=1e-12)
    assert entanglement_entropy(p1, e1.basis, 2) == pytest.approx(
        entanglement_entropy(p2, e2.basis, 2), abs=1e-10)


def test_oracle_qsd_agrees_short_run():
    L, g, dt = 6, 0.5, 0.05
    H = build_hopping(L)
    eng = FockEngine(H, 3, dt)
    prop = unitary_propagator(H, dt)
    s, psi = neel_state(L), neel_fock(eng.basis)
    a, b = NoiseStream(3), NoiseStream(3)
    for k in range(40):
        s = qsd_step(s, prop, g, dt, a, k)
        psi = oracle_qsd_step(psi, eng, g, dt, b)
        np.testing.assert_allclose(gaussian.occupations(s), occupations(psi, eng.basis),
                                   atol=1e-10)


def test_oracle_qj_agrees_short_run():
    L, g = 6, 0.5
    dt = default_qj_dt(L, g)
    H = build_hopping(L)
    eng = FockEngine(H, 3, dt)
    prop = qj_effective_propagator(H, g, dt)
    s, psi = neel_state(L), neel_fock(eng.basis)
    a, b = NoiseStream(8), NoiseStream(8)
    jumps = 0
    for k in range(600):
        s, e1 = qj_step(s, prop, g, dt, a, k)
        psi, e2 = oracle_qj_step(psi, eng, g, dt, b, k)
        assert e1 == e2
        jumps += e1.kind == "jump"
    assert jumps > 0
    np.testing.assert_allclose(gaussian.occupations(s), occupations(psi, eng.basis), atol=1e-10)

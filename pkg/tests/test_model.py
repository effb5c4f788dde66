import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.stats import poisson

from njcm.classical import classical_hamiltonian
from njcm.model import (
    BorderError,
    ModelParams,
    PhasePoint,
    TruncationError,
    build_basis,
    build_hamiltonian,
    build_operators,
    field_coherent_state,
    product_initial_state,
    spin_coherent_state,
    spin_matrices,
)
from njcm.quantum import linear_entropy, reduced_density_atom

from .conftest import ORBIT1


def comm(A, B):
    return A @ B - B @ A


@pytest.fixture(scope="module")
def ops_small():
    return build_operators(build_basis(4.5, 30))


def test_basis_dimensions():
    assert build_basis(4.5, 120).dim_total == 1210
    assert build_basis(0.5, 0).dim_total == 2
    b = build_basis(ModelParams(J=1.5), 7)
    assert (b.dim_spin, b.dim_field, b.dim_total) == (4, 8, 32)


def test_index_map_round_trips():
    b = build_basis(4.5, 120)
    seen = set()
    for flat in range(b.dim_total):
        m, n = b.labels(flat)
        assert b.index(m, n) == flat
        seen.add((m, n))
    assert len(seen) == 1210
    # field index runs fastest
    assert b.index(-4.5, 1) == 1
    assert b.index(-3.5, 0) == 121


@pytest.mark.parametrize("J", [0.0, -1.0, 0.3, 1.25])
def test_rejects_non_half_integer_spin(J):
    with pytest.raises(ValueError):
        build_basis(J, 5)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ModelParams(omega0=0.0)
    with pytest.raises(ValueError):
        ModelParams(G=-0.1)
    with pytest.raises(ValueError):
        build_basis(4.5, -1)


def test_spin_half_is_pauli_limit():
    ops = build_operators(build_basis(0.5, 2))
    Jp_s, _, _ = spin_matrices(0.5)
    np.testing.assert_array_equal(Jp_s, [[0, 0], [1, 0]])
    np.testing.assert_array_equal(ops.Jp, np.kron(Jp_s, np.eye(3)))


def test_spin_commutators_exact(ops_small):
    ops = ops_small
    assert np.max(np.abs(comm(ops.Jz, ops.Jp) - ops.Jp)) < 1e-14
    assert np.max(np.abs(comm(ops.Jz, ops.Jm) + ops.Jm)) < 1e-14
    assert np.max(np.abs(comm(ops.Jp, ops.Jm) - 2 * ops.Jz)) < 1e-12
    assert np.allclose(np.diag(ops.Jz).real, np.repeat(np.arange(10) - 4.5, 31))


def test_bosonic_commutator_except_top_level(ops_small):
    b = ops_small.basis
    c = comm(ops_small.a, ops_small.a_dag)
    top = np.array([b.labels(i)[1] == b.n_max for i in range(b.dim_total)])
    np.testing.assert_allclose(c[np.ix_(~top, ~top)], np.eye((~top).sum()), atol=1e-12)
    # truncation artefact: [a, a^dag] = -n_max on the last level
    np.testing.assert_allclose(np.diag(c)[top].real, -b.n_max)


def test_ladder_products_on_lowest_weight():
    Jp, Jm, _ = spin_matrices(4.5)
    low = np.zeros(10)
    low[0] = 1
    # Jp Jm |J,-J> = 0 ; Jm Jp |J,-J> = (J(J+1) - (-J)(-J+1)) |J,-J> = 2J
    assert low @ Jp @ Jm @ low == 0
    assert low @ Jm @ Jp @ low == pytest.approx(9.0, abs=1e-12)


def test_decoupled_hamiltonian_is_diagonal():
    p = ModelParams(G=0.0, Gprime=0.0, omega0=1.3, epsilon=0.7)
    b = build_basis(p, 15)
    H = build_hamiltonian(p, build_operators(b))
    assert np.max(np.abs(H - np.diag(np.diag(H)))) == 0.0
    for flat in range(b.dim_total):
        m, n = b.labels(flat)
        assert H[flat, flat].real == pytest.approx(1.3 * n + 0.7 * m, abs=1e-13)


@pytest.mark.parametrize("G,Gp,charge", [(0.5, 0.0, "total_excitation"), (0.0, 0.2, "relative_excitation")])
def test_integrable_limits_conserve_charge(G, Gp, charge):
    p = ModelParams(G=G, Gprime=Gp)
    ops = build_operators(build_basis(p, 40))
    H = build_hamiltonian(p, ops)
    P = getattr(ops, charge)()
    assert np.max(np.abs(comm(H, P))) < 1e-12


def test_nonintegrable_breaks_both_charges(params, ops_small):
    H = build_hamiltonian(params, ops_small)
    assert np.max(np.abs(comm(H, ops_small.total_excitation()))) > 0.1
    assert np.max(np.abs(comm(H, ops_small.relative_excitation()))) > 0.1


def test_hamiltonian_hermitian(params, ops_small):
    H = build_hamiltonian(params, ops_small)
    assert np.max(np.abs(H - H.conj().T)) == 0.0


def test_hamiltonian_dimension_mismatch(ops_small):
    with pytest.raises(ValueError):
        build_hamiltonian(ModelParams(J=1.5), ops_small)


def test_spin_coherent_state_at_origin_is_lowest_weight():
    psi = spin_coherent_state(0.0, 0.0, 4.5)
    expected = np.zeros(10)
    expected[0] = 1
    np.testing.assert_array_equal(psi, expected)


def test_spin_coherent_state_matches_exponential_oracle():
    # (1 + |w|^2)^-J exp(w J+) |J,-J> built with a matrix exponential
    J, q, p = 4.5, 1.3, -0.8
    w = complex(p, q) / math.sqrt(4 * J - q * q - p * p)
    Jp, _, _ = spin_matrices(J)
    low = np.zeros(10, dtype=complex)
    low[0] = 1
    oracle = (1 + abs(w) ** 2) ** (-J) * expm(w * Jp) @ low
    np.testing.assert_allclose(spin_coherent_state(q, p, J), oracle, atol=1e-13)


def test_spin_coherent_jz_example():
    _, _, Jz = spin_matrices(4.5)
    psi = spin_coherent_state(0.0, 2.261, 4.5)
    jz = np.vdot(psi, Jz @ psi).real
    assert jz == pytest.approx(2.261**2 / 2 - 4.5, abs=1e-12)
    assert jz == pytest.approx(-1.944, abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0.0, 0.999), phi=st.floats(0.0, 2 * math.pi), twoJ=st.integers(1, 40))
def test_spin_coherent_closed_form_jz(r, phi, twoJ):
    J = twoJ / 2
    R = r * math.sqrt(4 * J)
    q, p = R * math.cos(phi), R * math.sin(phi)
    psi = spin_coherent_state(q, p, J)
    m = np.arange(twoJ + 1) - J
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(np.abs(psi) ** 2 * m) == pytest.approx((q * q + p * p) / 2 - J, abs=1e-9 * max(1, J))


def test_spin_coherent_large_spin_does_not_overflow():
    psi = spin_coherent_state(3.0, 5.0, 200.0)
    assert np.all(np.isfinite(psi))
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("scale", [1.0, 1.0 - 1e-14, 1.001])
@pytest.mark.parametrize("phi", [0.0, 2.0, 4.0])
def test_spin_coherent_rejects_border(scale, phi):
    R = math.sqrt(18.0) * scale
    with pytest.raises(BorderError):
        spin_coherent_state(R * math.cos(phi), R * math.sin(phi), 4.5)


def test_field_vacuum():
    psi = field_coherent_state(0.0, 0.0, 10)
    assert psi[0] == 1 and np.all(psi[1:] == 0)


def test_field_coherent_is_poissonian():
    psi = field_coherent_state(0.0, 3.423276, 120)
    nbar = 3.423276**2 / 2
    n = np.arange(121)
    np.testing.assert_allclose(np.abs(psi) ** 2, poisson.pmf(n, nbar), atol=1e-15, rtol=1e-10)
    assert np.sum(n * np.abs(psi) ** 2) == pytest.approx(nbar, abs=1e-12)
    assert nbar == pytest.approx(5.859, abs=1e-3)


def test_field_coherent_phase_convention():
    # v = (p_f + i q_f)/sqrt(2), <a> = v
    psi = field_coherent_state(0.7, -1.1, 60)
    a = np.diag(np.sqrt(np.arange(1, 61)), 1)
    assert np.vdot(psi, a @ psi) == pytest.approx(complex(-1.1, 0.7) / math.sqrt(2), abs=1e-13)


def test_field_truncation_signal():
    with pytest.raises(TruncationError):
        field_coherent_state(0.0, 3.423276, 10)


def test_product_state_is_unentangled():
    b = build_basis(4.5, 120)
    psi = product_initial_state(ORBIT1, b)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)
    assert abs(linear_entropy(reduced_density_atom(psi, b))) < 1e-12


def test_product_state_energy_matches_reference(system):
    psi = system.initial_state(ORBIT1)
    e = np.vdot(psi, system.hamiltonian @ psi).real
    assert e == pytest.approx(8.5, abs=5e-3)
    assert e == pytest.approx(classical_hamiltonian(ORBIT1, system.params), abs=1e-10)


def test_quantum_classical_identity_random_points(system, rng):
    H = system.hamiltonian
    R = math.sqrt(18.0)
    worst = 0.0
    for _ in range(100):
        r, phi = R * math.sqrt(rng.uniform(0, 0.98)), rng.uniform(0, 2 * math.pi)
        pt = PhasePoint(r * math.cos(phi), r * math.sin(phi), *rng.uniform(-5, 5, 2))
        psi = system.initial_state(pt)
        worst = max(worst, abs(np.vdot(psi, H @ psi).real - classical_hamiltonian(pt, system.params)))
    assert worst < 1e-8


def test_truncation_monotonicity(params):
    pt = PhasePoint(1.0, -0.5, 2.0, 4.0)
    energies = []
    for n_max in (80, 100):
        b = build_basis(params, n_max)
        H = build_hamiltonian(params, build_operators(b))
        psi = product_initial_state(pt, b)
        energies.append(np.vdot(psi, H @ psi).real)
    assert abs(energies[1] - energies[0]) < 1e-10

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssh_coherence.eigensolve import eig_tridiagonal
from ssh_coherence.errors import InvalidInputError
from ssh_coherence.model import (
    LatticeState,
    ModelParams,
    build_hamiltonian,
    energy_gradient,
    site_density_matrix,
    total_energy,
)
from ssh_coherence.relax import adiabatic_energy, ground_state_occupation, occupied_density
from ssh_coherence.superpos import (
    SuperpositionSpec,
    build_superposition,
    fock_add,
    fock_oracle_1rdm,
    fock_slater,
)

from conftest import relaxed_chain


def test_default_parameters():
    p = ModelParams()
    assert (p.t0, p.alpha, p.springK, p.massM, p.latticeA) == (2.5, 4.1, 21.0, 1349.14, 1.22)
    assert p.hbar == pytest.approx(0.6582119569)


@pytest.mark.parametrize("n", [2, 5, 0, -4, 7.5])
def test_rejects_bad_chain_length(n):
    with pytest.raises(InvalidInputError):
        ModelParams(nSites=n)


@pytest.mark.parametrize("key,value", [("t0", 0.0), ("springK", -1.0), ("alpha", -0.1), ("massM", np.nan)])
def test_rejects_bad_constants(key, value):
    with pytest.raises(InvalidInputError):
        ModelParams(**{key: value})


def test_uniform_hopping():
    h = build_hamiltonian(np.zeros(4), ModelParams(nSites=4))
    np.testing.assert_array_equal(h.hopping, [-2.5, -2.5, -2.5])


def test_displaced_hopping():
    h = build_hamiltonian([0, 0.05, -0.05, 0], ModelParams(nSites=4))
    np.testing.assert_allclose(h.hopping, [-2.295, -2.91, -2.295], atol=1e-14)


def test_alpha_zero_ignores_geometry(rng):
    p = ModelParams(nSites=6, alpha=0.0)
    u = rng.normal(scale=0.1, size=6)
    np.testing.assert_array_equal(build_hamiltonian(u, p).hopping, build_hamiltonian(np.zeros(6), p).hopping)


def test_length_mismatch():
    with pytest.raises(InvalidInputError):
        build_hamiltonian(np.zeros(5), ModelParams(nSites=4))


@given(st.lists(st.floats(-0.3, 0.3), min_size=6, max_size=6))
def test_hamiltonian_structure(u):
    h = build_hamiltonian(u, ModelParams(nSites=6)).to_dense()
    np.testing.assert_array_equal(h, h.T)
    np.testing.assert_array_equal(np.diag(h), 0.0)
    np.testing.assert_array_equal(np.triu(h, 2), 0.0)


@pytest.mark.parametrize("n", [4, 10, 21, 64])
def test_uniform_chain_spectrum(n):
    # analytic levels of an open chain: -2 t0 cos(k pi / (N + 1))
    values = eig_tridiagonal(np.full(n - 1, -2.5)).values
    k = np.arange(1, n + 1)
    np.testing.assert_allclose(values, -5.0 * np.cos(k * np.pi / (n + 1)), atol=1e-10)


def test_matvec_matches_dense(rng):
    h = build_hamiltonian(rng.normal(scale=0.1, size=8), ModelParams(nSites=8))
    x = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
    np.testing.assert_allclose(h.matvec(x), h.to_dense() @ x, atol=1e-14)


def test_lattice_state_clamps_ends():
    s = LatticeState([1.0, 0.1, 0.2, 3.0], [4.0, 0.0, 1.0, 2.0])
    assert s.u[0] == s.u[-1] == s.p[0] == s.p[-1] == 0.0


# --- density matrix --------------------------------------------------------


def _uniform(n):
    p = ModelParams(nSites=n)
    return p, eig_tridiagonal(build_hamiltonian(np.zeros(n), p))


def test_half_filled_uniform_chain_density():
    p, eig = _uniform(4)
    f = ground_state_occupation(p)
    rho = site_density_matrix(eig.vectors, [np.diag(f[0]), np.diag(f[1])])
    np.testing.assert_allclose(np.diag(rho).real, 1.0, atol=1e-14)


def test_single_orbital_projector():
    p, eig = _uniform(6)
    g = np.zeros((6, 6))
    g[2, 2] = 1.0
    rho = site_density_matrix(eig.vectors, [g, np.zeros((6, 6))])
    v = eig.vectors[:, 2]
    np.testing.assert_allclose(rho, np.outer(v, v), atol=1e-15)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-14)


def test_rejects_non_hermitian_gamma():
    _, eig = _uniform(4)
    g = np.zeros((4, 4), dtype=complex)
    g[0, 1] = 0.5
    with pytest.raises(InvalidInputError):
        site_density_matrix(eig.vectors, [g])


@given(st.integers(0, 2**32 - 1))
def test_density_hermitian_with_trace(seed):
    rng = np.random.default_rng(seed)
    n = 6
    q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    gammas = []
    for _ in range(2):
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        gammas.append(a + a.conj().T)
    rho = site_density_matrix(q, gammas)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
    assert np.trace(rho) == pytest.approx(sum(np.trace(g) for g in gammas), abs=1e-12)


def test_superposition_density_matches_fock_oracle():
    # site-basis density of (|D_HOMO> + |D_LUMO>)/sqrt(2) built by explicit determinants
    p, eig = _uniform(4)
    c = eig.vectors
    gamma = build_superposition(SuperpositionSpec("GroundExcited"), p)
    rho = site_density_matrix(c, gamma)
    down = c[:, :2]
    first = fock_slater(c[:, [0, 1]], down)
    second = fock_slater(c[:, [0, 2]], down)
    state = fock_add((2**-0.5, first), (2**-0.5, second))
    oracle = fock_oracle_1rdm(state, 4).total
    np.testing.assert_allclose(rho, oracle, atol=1e-12)


# --- energy and gradient ---------------------------------------------------


def test_uniform_chain_energy():
    p, eig = _uniform(4)
    f = ground_state_occupation(p)
    rho = site_density_matrix(eig.vectors, [np.diag(f[0]), np.diag(f[1])])
    e = total_energy(LatticeState(np.zeros(4)), rho, p)
    expected = -2 * 5.0 * (np.cos(np.pi / 5) + np.cos(2 * np.pi / 5))
    assert e == pytest.approx(expected, abs=1e-12)
    assert e == pytest.approx(-11.180, abs=5e-4)


def test_energy_without_electrons_is_elastic(rng):
    p = ModelParams(nSites=8)
    u = rng.normal(scale=0.1, size=8)
    e = total_energy(LatticeState(u), np.zeros((8, 8)), p)
    u[0] = u[-1] = 0.0
    assert e == pytest.approx(0.5 * 21.0 * np.sum(np.diff(u) ** 2), rel=1e-14)


def test_relaxed_energy_matches_eigenvalue_sum():
    p, r = relaxed_chain(20)
    rho = occupied_density(r.orbitals, r.occupation)
    e = total_energy(LatticeState(r.u0), rho, p)
    # oracle: direct diagonalization at u0 and sum of occupied levels
    values = np.linalg.eigvalsh(build_hamiltonian(r.u0, p).to_dense())
    oracle = 2 * np.sum(values[:10]) + 0.5 * p.springK * np.sum(np.diff(r.u0) ** 2)
    assert e == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("trial", range(20))
def test_gradient_matches_finite_difference(trial):
    rng = np.random.default_rng(1000 + trial)
    p = ModelParams(nSites=8)
    f = ground_state_occupation(p)
    u = np.zeros(8)
    u[1:-1] = rng.normal(scale=0.08, size=6)
    eig = eig_tridiagonal(build_hamiltonian(u, p))
    grad = energy_gradient(u, occupied_density(eig.vectors, f), p)
    h = 1e-5
    fd = np.zeros(8)
    for m in range(1, 7):
        du = np.zeros(8)
        du[m] = h
        fd[m] = (adiabatic_energy(u + du, f, p) - adiabatic_energy(u - du, f, p)) / (2 * h)
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-5 * np.max(np.abs(fd)))
    assert grad[0] == grad[-1] == 0.0


def test_gradient_alpha_zero_is_elastic(rng):
    p = ModelParams(nSites=8, alpha=0.0)
    u = rng.normal(scale=0.1, size=8)
    u[0] = u[-1] = 0.0
    rho = rng.normal(size=(8, 8))
    g = energy_gradient(u, rho + rho.T, p)
    np.testing.assert_allclose(g[1:-1], 21.0 * (2 * u[1:-1] - u[:-2] - u[2:]), atol=1e-14)

"""SSH chain: parameters, one-electron Hamiltonian, energy and gradient.

Units are eV, Angstrom and fs throughout, so masses are in eV fs^2/A^2 and
momenta in eV fs/A.  Sites are stored 0-based; the two clamped end sites are
kept in every array as explicit zeros.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

HBAR = 0.6582119569  # eV fs

__all__ = [
    "HBAR",
    "ModelParams",
    "LatticeState",
    "SingleParticleHamiltonian",
    "build_hamiltonian",
    "hopping",
    "site_density_matrix",
    "bond_orders",
    "total_energy",
    "electronic_energy",
    "elastic_energy",
    "energy_gradient",
]


@dataclass(frozen=True)
class ModelParams:
    """SSH constants for trans-polyacetylene and the chain length."""

    t0: float = 2.5
    alpha: float = 4.1
    springK: float = 21.0
    massM: float = 1349.14
    latticeA: float = 1.22
    nSites: int = 20
    hbar: float = HBAR

    def __post_init__(self):
        n = self.nSites
        if isinstance(n, bool) or int(n) != n:
            raise InvalidInputError(f"nSites must be an integer, got {n!r}")
        object.__setattr__(self, "nSites", int(n))
        if self.nSites < 4 or self.nSites % 2:
            raise InvalidInputError(f"nSites must be even and >= 4, got {n}")
        for name in ("t0", "springK", "massM", "latticeA", "hbar"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidInputError(f"{name} must be positive, got {value}")
        # alpha = 0 is allowed: it decouples electrons from the lattice
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidInputError(f"alpha must be non-negative, got {self.alpha}")

    @property
    def n(self) -> int:
        return self.nSites

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass
class LatticeState:
    """Site displacements ``u`` (A) and momenta ``p`` (eV fs/A)."""

    u: np.ndarray
    p: np.ndarray = field(default=None)

    def __post_init__(self):
        self.u = np.array(self.u, dtype=float)
        if self.p is None:
            self.p = np.zeros_like(self.u)
        else:
            self.p = np.array(self.p, dtype=float)
        if self.u.ndim != 1 or self.u.shape != self.p.shape:
            raise InvalidInputError("u and p must be 1-d arrays of equal length")
        self.clamp()

    def clamp(self):
        for a in (self.u, self.p):
            a[0] = 0.0
            a[-1] = 0.0
        return self

    def copy(self) -> "LatticeState":
        return LatticeState(self.u.copy(), self.p.copy())


@dataclass(frozen=True)
class SingleParticleHamiltonian:
    """Zero-diagonal symmetric tridiagonal matrix given by its off-diagonal."""

    hopping: np.ndarray

    @property
    def size(self) -> int:
        return len(self.hopping) + 1

    def to_dense(self) -> np.ndarray:
        return np.diag(self.hopping, 1) + np.diag(self.hopping, -1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply to a vector or to the columns of a matrix."""
        h = self.hopping if x.ndim == 1 else self.hopping[:, None]
        y = np.zeros_like(x)
        y[:-1] += h * x[1:]
        y[1:] += h * x[:-1]
        return y


def _check_length(u, params):
    u = np.asarray(u, dtype=float)
    if u.shape != (params.nSites,):
        raise InvalidInputError(
            f"displacement vector has shape {u.shape}, expected ({params.nSites},)"
        )
    return u


def hopping(u, params: ModelParams) -> np.ndarray:
    """Bond matrix elements ``-t0 + alpha*(u[n+1]-u[n])``."""
    u = _check_length(u, params)
    return -params.t0 + params.alpha * np.diff(u)


def build_hamiltonian(u, params: ModelParams) -> SingleParticleHamiltonian:
    return SingleParticleHamiltonian(hopping(u, params))


def site_density_matrix(orbitals, gamma) -> np.ndarray:
    """Spin-summed one-electron density matrix in the site basis.

    ``orbitals[n, e]`` is the amplitude of orbital ``e`` on site ``n`` and
    ``gamma`` is an iterable of per-spin occupation matrices expressed in the
    same orbital basis.  Returns ``rho[n, m] = <c^dag_n c_m>`` summed over spin.
    """
    c = np.asarray(orbitals)
    rho = np.zeros((c.shape[0], c.shape[0]), dtype=complex)
    for g in gamma:
        g = np.asarray(g)
        if g.shape != (c.shape[1], c.shape[1]):
            raise InvalidInputError(
                f"occupation matrix shape {g.shape} does not match {c.shape[1]} orbitals"
            )
        if np.max(np.abs(g - g.conj().T), initial=0.0) > 1e-10:
            raise InvalidInputError("occupation matrix is not Hermitian")
        rho += c.conj() @ g @ c.T
    return rho


def bond_orders(rho: np.ndarray) -> np.ndarray:
    """``Re rho[n, n+1]`` for every bond."""
    return np.real(np.diagonal(rho, 1))


def elastic_energy(u, params: ModelParams) -> float:
    return 0.5 * params.springK * float(np.sum(np.diff(u) ** 2))


def electronic_energy(u, rho, params: ModelParams) -> float:
    """``Tr(h rho)`` for the real symmetric tridiagonal ``h``."""
    return 2.0 * float(np.dot(hopping(u, params), bond_orders(rho)))


def total_energy(state: LatticeState, rho, params: ModelParams) -> float:
    u = _check_length(state.u, params)
    rho = np.asarray(rho)
    if rho.shape != (params.nSites, params.nSites):
        raise InvalidInputError(f"density matrix has shape {rho.shape}")
    kinetic = float(np.sum(state.p**2)) / (2.0 * params.massM)
    return kinetic + elastic_energy(u, params) + electronic_energy(u, rho, params)


def energy_gradient(u, rho, params: ModelParams) -> np.ndarray:
    """dE/du for interior sites; the clamped ends are reported as zero."""
    u = _check_length(u, params)
    bond = bond_orders(np.asarray(rho))
    grad = np.zeros_like(u)
    grad[1:-1] = 2.0 * params.alpha * (bond[:-1] - bond[1:]) + params.springK * (
        2.0 * u[1:-1] - u[:-2] - u[2:]
    )
    return grad

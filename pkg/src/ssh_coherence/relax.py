"""Self-consistent minimum-energy geometry for a fixed orbital occupation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .eigensolve import eig_tridiagonal
from .errors import ConvergenceError, InvalidInputError
from .model import ModelParams, build_hamiltonian, hopping

UP, DOWN = 0, 1


def ground_state_occupation(params: ModelParams) -> np.ndarray:
    """Occupations ``f[spin, level]``: lowest N/2 levels filled in both spins."""
    n = params.nSites
    f = np.zeros((2, n))
    f[:, : n // 2] = 1.0
    return f


def excited_occupation(i: int, params: ModelParams, spin: int = UP) -> np.ndarray:
    """Ground occupation with one electron of ``spin`` moved HOMO -> level ``i``.

    Levels are numbered 1..N in ascending energy, so the HOMO is N/2.
    """
    n = params.nSites
    if int(i) != i or not n // 2 + 1 <= i <= n:
        raise InvalidInputError(f"target level must be in [{n // 2 + 1}, {n}], got {i}")
    f = ground_state_occupation(params)
    f[spin, n // 2 - 1] = 0.0
    f[spin, int(i) - 1] = 1.0
    return f


def check_occupation(f, params: ModelParams) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (2, params.nSites):
        raise InvalidInputError(f"occupation has shape {f.shape}, expected (2, {params.nSites})")
    if not np.all((f == 0) | (f == 1)):
        raise InvalidInputError("occupations must be 0 or 1")
    if f.sum() != params.nSites:
        raise InvalidInputError(f"occupation holds {f.sum():g} electrons, expected {params.nSites}")
    return f


def occupied_density(vectors: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Real spin-summed density matrix ``sum_e (f_up + f_down)[e] |e><e|``."""
    w = f.sum(axis=0)
    return (vectors * w) @ vectors.T


@dataclass
class RelaxedGeometry:
    u0: np.ndarray
    electronicEnergy: float  # adiabatic surface: band energy plus elastic term, eV
    iterations: int
    residual: float
    occupation: np.ndarray
    orbitalEnergies: np.ndarray
    orbitals: np.ndarray

    @property
    def gap(self) -> float:
        n = len(self.u0)
        return float(self.orbitalEnergies[n // 2] - self.orbitalEnergies[n // 2 - 1])


def _laplacian_banded(n_interior: int, k: float) -> np.ndarray:
    ab = np.empty((3, n_interior))
    ab[0] = -k
    ab[1] = 2.0 * k
    ab[2] = -k
    return ab


def optimize_geometry(
    f,
    params: ModelParams,
    maxIter: int = 5000,
    tol: float = 1e-10,
    mixing: float = 0.5,
    u_init=None,
) -> RelaxedGeometry:
    """Iterate the zero-gradient condition to self-consistency.

    Each sweep diagonalizes H(u), rebuilds the bond orders from the occupied
    orbitals and solves the clamped elastic problem
    ``K (2u_m - u_{m-1} - u_{m+1}) = -2 alpha (b_{m-1,m} - b_{m,m+1})``
    for the interior sites.  The new geometry is mixed linearly with the old
    one and the loop stops once the unmixed update is below ``tol`` (A).
    """
    f = check_occupation(f, params)
    if tol <= 0 or not 0 < mixing <= 1:
        raise InvalidInputError("tol must be positive and mixing in (0, 1]")
    n = params.nSites
    u = np.zeros(n) if u_init is None else np.array(u_init, dtype=float)
    u[0] = u[-1] = 0.0
    ab = _laplacian_banded(n - 2, params.springK)
    history = []
    for it in range(1, maxIter + 1):
        eig = eig_tridiagonal(build_hamiltonian(u, params))
        bond = np.diagonal(occupied_density(eig.vectors, f), 1)
        rhs = -2.0 * params.alpha * (bond[:-1] - bond[1:])
        target = np.zeros(n)
        target[1:-1] = scipy.linalg.solve_banded((1, 1), ab, rhs)
        residual = float(np.max(np.abs(target - u)))
        history.append(residual)
        if residual < tol:
            u = target
            break
        u = u + mixing * (target - u)
    else:
        raise ConvergenceError(
            f"geometry not converged after {maxIter} sweeps (residual {history[-1]:.3e} A)",
            history,
        )
    eig = eig_tridiagonal(build_hamiltonian(u, params))
    e_el = adiabatic_energy(u, f, params)
    return RelaxedGeometry(
        u0=u,
        electronicEnergy=e_el,
        iterations=it,
        residual=residual,
        occupation=f,
        orbitalEnergies=eig.values,
        orbitals=eig.vectors,
    )


def adiabatic_energy(u, f, params: ModelParams) -> float:
    """Potential energy on the surface with fixed level occupations."""
    eig = eig_tridiagonal(hopping(u, params))
    return float(np.sum(np.asarray(f).sum(axis=0) * eig.values)) + 0.5 * params.springK * float(
        np.sum(np.diff(u) ** 2)
    )

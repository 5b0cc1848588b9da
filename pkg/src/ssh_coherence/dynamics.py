"""Mean-field (Ehrenfest) propagation of a single quantum-classical trajectory.

Nuclei move on the force averaged over the time-dependent one-electron
density matrix, while every orbital obeys the single-particle Schrodinger
equation in the instantaneous Hamiltonian.  Two code paths exist:

* :func:`derivative` and :func:`rk8_step` work on a full orbital matrix and
  an arbitrary occupation matrix in plain numpy.  They are the readable
  reference.
* :func:`propagate_trajectory` first rotates the orbitals to the natural
  orbitals of the spin-summed occupation matrix, drops the ones with zero
  weight and hands the rest to a compiled loop.  Since the orbital equation
  is linear and the same for every orbital, the rotation commutes with the
  propagation and both paths give the same density matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._dop853 import A as RK_A
from ._dop853 import B as RK_B
from ._dop853 import STAGES
from .eigensolve import eig_tridiagonal
from .errors import InvalidInputError, NumericFailure
from .model import LatticeState, ModelParams, build_hamiltonian, hopping, site_density_matrix

WEIGHT_TOL = 1e-12


@dataclass
class TrajectoryState:
    lattice: LatticeState
    orbitals: np.ndarray  # orbitals[site, level], complex
    time: float = 0.0

    def copy(self) -> "TrajectoryState":
        return TrajectoryState(self.lattice.copy(), self.orbitals.copy(), self.time)

    def gram_deviation(self) -> float:
        c = self.orbitals
        return float(np.max(np.abs(c.conj().T @ c - np.eye(c.shape[1]))))


@dataclass
class RunSettings:
    """Integration and recording controls.

    ``recordStride`` counts integration steps between recorded samples.
    ``populationBasis`` is ``"instantaneous"`` (eigenorbitals of H(u(t))) or
    ``"initial"`` (the eigenorbitals at t = 0).
    """

    dt: float = 0.02
    tFinal: float = 300.0
    recordStride: int = 5
    watchedLevels: tuple = ()
    populationBasis: str = "instantaneous"
    chunkSteps: int = field(default=0, repr=False)

    def __post_init__(self):
        if not self.dt > 0 or not self.tFinal > 0:
            raise InvalidInputError("dt and tFinal must be positive")
        if int(self.recordStride) != self.recordStride or self.recordStride < 1:
            raise InvalidInputError("recordStride must be a positive integer")
        self.recordStride = int(self.recordStride)
        self.watchedLevels = tuple(int(i) for i in self.watchedLevels)
        if self.populationBasis not in ("instantaneous", "initial"):
            raise InvalidInputError(f"unknown population basis {self.populationBasis!r}")

    @property
    def nSteps(self) -> int:
        return int(round(self.tFinal / self.dt))

    @property
    def nRecords(self) -> int:
        return self.nSteps // self.recordStride + 1

    def times(self) -> np.ndarray:
        return np.arange(self.nRecords) * self.recordStride * self.dt


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    polarization: np.ndarray  # e A
    levelPopulations: np.ndarray  # (records, watched levels)
    totalEnergy: np.ndarray  # eV
    watchedLevels: tuple = ()
    gramDeviation: float = 0.0
    traceDrift: float = 0.0


# --- reference path --------------------------------------------------------


def _total_gamma(gamma) -> np.ndarray:
    if isinstance(gamma, np.ndarray) and gamma.ndim == 2:
        return gamma
    return sum(np.asarray(g) for g in gamma)


def derivative(state: TrajectoryState, gamma, params: ModelParams):
    """Time derivatives ``(du, dp, dC)`` of the coupled equations of motion."""
    u, p = state.lattice.u, state.lattice.p
    c = state.orbitals
    rho = site_density_matrix(c, [_total_gamma(gamma)])
    h = build_hamiltonian(u, params)
    du = p / params.massM
    dp = np.zeros_like(p)
    rr = np.real(rho)
    dp[1:-1] = -params.springK * (2.0 * u[1:-1] - u[2:] - u[:-2]) + 2.0 * params.alpha * (
        rr[1:-1, 2:].diagonal() - rr[1:-1, :-2].diagonal()
    )
    du[0] = du[-1] = 0.0
    dc = -1j / params.hbar * h.matvec(c)
    return du, dp, dc


def rk8_step(state: TrajectoryState, gamma, dt: float, params: ModelParams) -> TrajectoryState:
    """One fixed DOP853 step of lattice and orbitals."""
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    y0 = (state.lattice.u, state.lattice.p, state.orbitals)
    ks = []
    for s in range(STAGES):
        y = [x.copy() for x in y0]
        for j in range(s):
            if RK_A[s, j] != 0.0:
                for x, kx in zip(y, ks[j]):
                    x += dt * RK_A[s, j] * kx
        trial = TrajectoryState(LatticeState(y[0], y[1]), y[2], state.time)
        ks.append(derivative(trial, gamma, params))
    y = [x.copy() for x in y0]
    for s in range(STAGES):
        for x, kx in zip(y, ks[s]):
            x += dt * RK_B[s] * kx
    new = TrajectoryState(LatticeState(y[0], y[1]), y[2], state.time + dt)
    if not (np.all(np.isfinite(y[0])) and np.all(np.isfinite(y[1])) and np.all(np.isfinite(y[2]))):
        raise NumericFailure(f"non-finite state at t={new.time:.4f} fs", time=new.time)
    return new


# --- observables -----------------------------------------------------------


def compute_polarization(lattice: LatticeState, rho, params: ModelParams) -> float:
    """Dipole ``sum_n x_n (1 - rho_nn)`` in units of |e| A."""
    diag = np.real(np.diagonal(rho)) if np.ndim(rho) == 2 else np.asarray(rho)
    return _polarization(lattice.u, diag, params)


def _polarization(u, density, params):
    x = np.arange(1, len(u) + 1) * params.latticeA + u
    return float(np.dot(x, 1.0 - density))


def level_populations(state: TrajectoryState, gamma, watchedLevels, params: ModelParams, basis=None):
    """Spin-summed occupation of eigenorbitals ``watchedLevels`` (1-based).

    ``basis`` defaults to the eigenorbitals of H(u(t)).
    """
    levels = _check_levels(watchedLevels, params)
    if basis is None:
        basis = eig_tridiagonal(build_hamiltonian(state.lattice.u, params)).vectors
    proj = basis.T @ state.orbitals
    pops = np.real(np.einsum("ke,ef,kf->k", proj.conj(), _total_gamma(gamma).T, proj))
    return pops[levels - 1]


def _check_levels(levels, params):
    levels = np.asarray(levels, dtype=int).reshape(-1)
    if levels.size and (levels.min() < 1 or levels.max() > params.nSites):
        raise InvalidInputError(f"watched levels must lie in [1, {params.nSites}]")
    return levels


def initial_state(lattice: LatticeState, params: ModelParams) -> TrajectoryState:
    """Orbitals from diagonalizing H at the given lattice geometry."""
    eig = eig_tridiagonal(build_hamiltonian(lattice.u, params))
    return TrajectoryState(lattice.copy(), eig.vectors.astype(complex), 0.0)


# --- compiled path ---------------------------------------------------------


class Propagator:
    """Packed natural-orbital state advanced by the compiled integrator."""

    def __init__(self, state: TrajectoryState, gamma, params: ModelParams):
        g_tot = _total_gamma(gamma)
        if np.max(np.abs(g_tot - g_tot.conj().T)) > 1e-10:
            raise InvalidInputError("occupation matrix is not Hermitian")
        w, v = np.linalg.eigh(g_tot)
        keep = np.abs(w) > WEIGHT_TOL
        self.weights = np.ascontiguousarray(w[keep])
        nat = state.orbitals @ v[:, keep].conj()
        self.n = params.nSites
        self.k = int(keep.sum())
        self.params = params
        self.time = state.time
        self.y = np.concatenate(
            [state.lattice.u, state.lattice.p, nat.real.ravel(), nat.imag.ravel()]
        ).astype(float)
        self._args = (
            self.n,
            self.k,
            self.weights,
            float(params.t0),
            float(params.alpha),
            float(params.springK),
            float(params.massM),
            float(params.hbar),
        )

    @property
    def u(self):
        return self.y[: self.n]

    @property
    def p(self):
        return self.y[self.n : 2 * self.n]

    @property
    def natural(self) -> np.ndarray:
        nk = self.n * self.k
        o = 2 * self.n
        return (self.y[o : o + nk] + 1j * self.y[o + nk :]).reshape(self.n, self.k)

    def advance(self, nsteps: int, dt: float):
        _kernels.advance(self.y, int(nsteps), float(dt), *self._args)
        self.time += nsteps * dt
        if not np.all(np.isfinite(self.y)):
            raise NumericFailure(f"non-finite state at t={self.time:.4f} fs", time=self.time)

    def derivative(self) -> np.ndarray:
        dy = np.empty_like(self.y)
        _kernels.rhs(self.y, dy, *self._args)
        return dy

    def density_diagonal(self) -> np.ndarray:
        b = self.natural
        return (np.abs(b) ** 2) @ self.weights

    def bond_orders(self) -> np.ndarray:
        b = self.natural
        return np.real(np.sum(b[:-1].conj() * b[1:] * self.weights, axis=1))

    def density_matrix(self) -> np.ndarray:
        b = self.natural
        return (b.conj() * self.weights) @ b.T

    def polarization(self) -> float:
        return _polarization(self.u, self.density_diagonal(), self.params)

    def energy(self) -> float:
        prm = self.params
        u, p = self.u, self.p
        return (
            float(np.sum(p**2)) / (2.0 * prm.massM)
            + 0.5 * prm.springK * float(np.sum(np.diff(u) ** 2))
            + 2.0 * float(np.dot(hopping(u, prm), self.bond_orders()))
        )

    def populations(self, levels, basis=None) -> np.ndarray:
        """Occupations of 1-based ``levels``; instantaneous eigenbasis by default.

        Eigenvector signs do not matter here, so the compiled path skips the
        sign convention of :mod:`eigensolve`.
        """
        idx = np.asarray(levels, dtype=np.int64) - 1
        n, k, g = self._args[:3]
        if basis is None:
            return _kernels.populations(self.y, n, k, g, self._args[3], self._args[4], idx)
        return _kernels.project(self.y, n, k, g, np.ascontiguousarray(basis), idx)

    def gram_deviation(self) -> float:
        b = self.natural
        return float(np.max(np.abs(b.conj().T @ b - np.eye(self.k))))

    def lattice(self) -> LatticeState:
        return LatticeState(self.u.copy(), self.p.copy())


def propagate_trajectory(init, gamma, params: ModelParams, run: RunSettings) -> TrajectoryRecord:
    """Integrate one trajectory and record observables every ``recordStride`` steps.

    ``init`` is a :class:`~ssh_coherence.wigner.SampledInitialCondition` or a
    bare :class:`LatticeState`; the orbitals are the eigenorbitals of H at
    that geometry and ``gamma`` is expressed in that basis.
    """
    lattice = getattr(init, "state", init)
    if len(lattice.u) != params.nSites:
        raise InvalidInputError("initial condition does not match nSites")
    start = initial_state(lattice, params)
    levels = _check_levels(run.watchedLevels, params).astype(np.int64)
    prop = Propagator(start, gamma, params)
    fixed = run.populationBasis == "initial"

    nrec = run.nRecords
    pol = np.empty(nrec)
    energy = np.empty(nrec)
    count = np.empty(nrec)
    pops = np.zeros((nrec, levels.size))
    basis = np.ascontiguousarray(np.real(start.orbitals)) if fixed else np.zeros((1, 1))
    done = _kernels.trajectory(
        prop.y, nrec, run.recordStride, float(run.dt), *prop._args,
        float(params.latticeA), levels - 1, basis, fixed, pol, energy, count, pops,
    )
    if done < nrec:
        t = float(run.times()[done])
        raise NumericFailure(f"non-finite state before t={t:.4f} fs", time=t)
    prop.time = (nrec - 1) * run.recordStride * run.dt
    return TrajectoryRecord(
        times=run.times(),
        polarization=pol,
        levelPopulations=pops,
        totalEnergy=energy,
        watchedLevels=tuple(levels.tolist()),
        gramDeviation=prop.gram_deviation(),
        traceDrift=float(np.max(np.abs(count - np.sum(prop.weights)))),
    )

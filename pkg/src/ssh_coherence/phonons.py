"""Harmonic lattice around a relaxed geometry.

The electronic contribution to the Hessian is the second-order perturbative
response of the occupied determinant to bond-length changes; with the clamped
ends removed the force-constant matrix lives on the N-2 interior sites.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolve import eig_symmetric
from .errors import InvalidInputError, SingularityError, UnstableGeometryError
from .model import ModelParams
from .relax import RelaxedGeometry, check_occupation

DEGENERACY_TOL = 1e-9  # eV


@dataclass
class NormalModeBasis:
    frequencies: np.ndarray  # fs^-1, ascending
    modes: np.ndarray  # columns over interior sites
    zeroPointEnergy: float  # eV
    baseGeometry: RelaxedGeometry
    hbar: float
    mass: float

    @property
    def count(self) -> int:
        return len(self.frequencies)

    @property
    def energies(self) -> np.ndarray:
        """Vibrational quanta in eV."""
        return self.hbar * self.frequencies

    def participation(self) -> np.ndarray:
        """Inverse participation ratio turned into an effective site count."""
        return 1.0 / np.sum(self.modes**4, axis=0)

    def full_vectors(self) -> np.ndarray:
        """Mode vectors padded with the clamped end sites (zeros)."""
        n = self.modes.shape[0] + 2
        out = np.zeros((n, self.count))
        out[1:-1] = self.modes
        return out


def coupling_vectors(vectors: np.ndarray) -> np.ndarray:
    """``V^n(e, e')`` for interior sites, shape (N-2, N, N) indexed [n, e, e'].

    ``vectors[site, level]`` are real eigenorbitals; amplitudes outside the
    chain are zero.
    """
    n = vectors.shape[0]
    pad = np.zeros((n + 2, vectors.shape[1]))
    pad[1:-1] = vectors
    # pad index j+1 holds site j
    centre = pad[2:-2]  # sites 1..N-2
    diff = pad[1:-3] - pad[3:-1]  # <n-1|e> - <n+1|e>
    return centre[:, :, None] * diff[:, None, :] + diff[:, :, None] * centre[:, None, :]


def electronic_hessian(relaxed: RelaxedGeometry, f, params: ModelParams) -> np.ndarray:
    """Perturbative electronic part ``V_nm`` of the force constants."""
    f = check_occupation(f, params)
    eps = relaxed.orbitalEnergies
    vn = coupling_vectors(relaxed.orbitals)
    weight = np.zeros((params.nSites, params.nSites))
    for s in range(2):
        # factor f(e', s)(1 - f(e, s)), indexed [e, e']
        occ = (1.0 - f[s])[:, None] * f[s][None, :]
        if not occ.any():
            continue
        gap = eps[None, :] - eps[:, None]  # e' - e
        bad = (occ != 0) & (np.abs(gap) < DEGENERACY_TOL)
        if bad.any():
            e, ep = np.argwhere(bad)[0]
            raise SingularityError(
                f"levels {e + 1} (empty) and {ep + 1} (occupied) are degenerate in spin {s}",
                (int(e) + 1, int(ep) + 1),
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            weight += np.where(occ != 0, occ / np.where(occ != 0, gap, 1.0), 0.0)
    flat = vn.reshape(vn.shape[0], -1)
    return 2.0 * params.alpha**2 * (flat * weight.reshape(-1)) @ flat.T


def elastic_hessian(params: ModelParams) -> np.ndarray:
    m = params.nSites - 2
    return params.springK * (2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1))


def build_hessian(relaxed: RelaxedGeometry, f, params: ModelParams) -> np.ndarray:
    """Force constants (eV/A^2) over interior sites 2..N-1."""
    if len(relaxed.u0) != params.nSites:
        raise InvalidInputError("relaxed geometry does not match nSites")
    hess = electronic_hessian(relaxed, f, params) + elastic_hessian(params)
    return 0.5 * (hess + hess.T)


def normal_modes(hessian, params: ModelParams, relaxed: RelaxedGeometry | None = None) -> NormalModeBasis:
    eig = eig_symmetric(hessian)
    bad = np.flatnonzero(eig.values <= 0)
    if bad.size:
        raise UnstableGeometryError(
            f"{bad.size} non-positive Hessian eigenvalue(s): modes {list(bad + 1)}", bad + 1
        )
    omega = np.sqrt(eig.values / params.massM)
    zpe = 0.5 * params.hbar * float(np.sum(omega))
    return NormalModeBasis(omega, eig.vectors, zpe, relaxed, params.hbar, params.massM)


def analyze(relaxed: RelaxedGeometry, params: ModelParams) -> NormalModeBasis:
    """Hessian plus normal modes for the occupation the geometry was relaxed on."""
    return normal_modes(build_hessian(relaxed, relaxed.occupation, params), params, relaxed)

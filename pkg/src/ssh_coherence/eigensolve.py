"""Symmetric eigensolvers with a fixed eigenvector sign convention.

Both routines are thin wrappers over LAPACK (via scipy/numpy).  Eigenvalues
come back ascending and each eigenvector is flipped so that its first
component larger than ``SIGN_TOL`` in magnitude is positive.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NumericFailure
from .model import SingleParticleHamiltonian

SIGN_TOL = 1e-10


class EigenDecomposition(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the first non-negligible entry of every column positive (in place)."""
    mask = np.abs(vectors) > SIGN_TOL
    first = np.argmax(mask, axis=0)
    lead = vectors[first, np.arange(vectors.shape[1])]
    vectors *= np.where(lead < 0, -1.0, 1.0)
    return vectors


def eig_tridiagonal(h) -> EigenDecomposition:
    """Full spectrum of a zero-diagonal symmetric tridiagonal matrix.

    ``h`` is a :class:`SingleParticleHamiltonian` or the off-diagonal array.
    """
    offdiag = h.hopping if isinstance(h, SingleParticleHamiltonian) else np.asarray(h)
    offdiag = np.asarray(offdiag, dtype=float)
    n = offdiag.size + 1
    if n < 2:
        raise InvalidInputError("tridiagonal eigensolver needs at least 2 sites")
    try:
        values, vectors = scipy.linalg.eigh_tridiagonal(
            np.zeros(n), offdiag, lapack_driver="stev"
        )
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericFailure(f"tridiagonal eigensolver failed for n={n}: {exc}", size=n)
    if not np.all(np.isfinite(values)):
        raise NumericFailure(f"non-finite eigenvalues for n={n}", size=n)
    return EigenDecomposition(values, fix_signs(vectors))


def eig_symmetric(a, tol: float = 1e-10) -> EigenDecomposition:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if np.max(np.abs(a - a.T), initial=0.0) > tol * scale:
        raise InvalidInputError("matrix is not symmetric")
    try:
        values, vectors = np.linalg.eigh(0.5 * (a + a.T))
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"symmetric eigensolver failed: {exc}", size=a.shape[0])
    return EigenDecomposition(values, fix_signs(vectors))

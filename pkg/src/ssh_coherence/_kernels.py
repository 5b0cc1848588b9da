"""Compiled inner loop for one Ehrenfest trajectory.

The state is packed into one real vector ``y = [u, p, Re B, Im B]`` where
``B`` is an (N, K) block of orbitals stored row-major and ``g`` holds the
weight each orbital carries in the spin-summed density matrix
``rho = conj(B) diag(g) B^T``.
"""

import numpy as np
from numba import njit

from ._dop853 import A, B, STAGES

# nonzero tableau entries, row s uses _COLS[_START[s]:_START[s+1]]
_cols, _vals, _start = [], [], [0]
for _s in range(STAGES):
    for _j in range(_s):
        if A[_s, _j] != 0.0:
            _cols.append(_j)
            _vals.append(A[_s, _j])
    _start.append(len(_cols))
_COLS = np.array(_cols, dtype=np.int64)
_VALS = np.array(_vals)
_START = np.array(_start, dtype=np.int64)
_B = np.ascontiguousarray(B)
del _cols, _vals, _start, _s, _j


@njit(cache=True, fastmath=True)
def rhs(y, dy, n, k, g, t0, alpha, spring, mass, hbar):
    nk = n * k
    ore = 2 * n
    oim = ore + nk
    br = y[ore:oim].reshape((n, k))
    bi = y[oim:].reshape((n, k))
    dbr = dy[ore:oim].reshape((n, k))
    dbi = dy[oim:].reshape((n, k))
    hop = np.empty(n - 1)
    bond = np.empty(n - 1)
    for j in range(n - 1):
        hop[j] = -t0 + alpha * (y[j + 1] - y[j])
        s = 0.0
        for q in range(k):
            s += g[q] * (br[j, q] * br[j + 1, q] + bi[j, q] * bi[j + 1, q])
        bond[j] = s
    dy[0] = 0.0
    dy[n - 1] = 0.0
    dy[n] = 0.0
    dy[2 * n - 1] = 0.0
    for m in range(1, n - 1):
        dy[m] = y[n + m] / mass
        dy[n + m] = -spring * (2.0 * y[m] - y[m - 1] - y[m + 1]) + 2.0 * alpha * (
            bond[m] - bond[m - 1]
        )
    # d/dt B = -i h B / hbar, so dRe = (h Im)/hbar and dIm = -(h Re)/hbar
    inv = 1.0 / hbar
    for j in range(n):
        cu = hop[j] * inv if j < n - 1 else 0.0
        cd = hop[j - 1] * inv if j > 0 else 0.0
        ju = min(j + 1, n - 1)
        jd = max(j - 1, 0)
        for q in range(k):
            dbr[j, q] = cu * bi[ju, q] + cd * bi[jd, q]
            dbi[j, q] = -(cu * br[ju, q] + cd * br[jd, q])


@njit(cache=True, fastmath=True)
def advance(y, nsteps, dt, n, k, g, t0, alpha, spring, mass, hbar):
    """Take ``nsteps`` fixed DOP853 steps in place."""
    size = y.size
    stages = np.empty((STAGES, size))
    tmp = np.empty(size)
    for _ in range(nsteps):
        for s in range(STAGES):
            tmp[:] = y
            for e in range(_START[s], _START[s + 1]):
                c = dt * _VALS[e]
                row = stages[_COLS[e]]
                for i in range(size):
                    tmp[i] += c * row[i]
            rhs(tmp, stages[s], n, k, g, t0, alpha, spring, mass, hbar)
        for s in range(STAGES):
            c = dt * _B[s]
            if c != 0.0:
                row = stages[s]
                for i in range(size):
                    y[i] += c * row[i]
        y[0] = 0.0
        y[n - 1] = 0.0
        y[n] = 0.0
        y[2 * n - 1] = 0.0
    return y


@njit(cache=True)
def populations(y, n, k, g, t0, alpha, levels):
    """Spin-summed occupations of instantaneous eigenorbitals ``levels`` (0-based)."""
    h = np.zeros((n, n))
    for j in range(n - 1):
        v = -t0 + alpha * (y[j + 1] - y[j])
        h[j, j + 1] = v
        h[j + 1, j] = v
    _, vec = np.linalg.eigh(h)
    return project(y, n, k, g, vec, levels)


@njit(cache=True)
def project(y, n, k, g, basis, levels):
    nk = n * k
    ore = 2 * n
    out = np.zeros(levels.size)
    for a in range(levels.size):
        col = levels[a]
        for q in range(k):
            re = 0.0
            im = 0.0
            for j in range(n):
                re += basis[j, col] * y[ore + j * k + q]
                im += basis[j, col] * y[ore + nk + j * k + q]
            out[a] += g[q] * (re * re + im * im)
    return out


@njit(cache=True)
def observables(y, n, k, g, t0, alpha, spring, mass, lattice_a):
    """Polarization, total energy and electron count of a packed state."""
    nk = n * k
    ore = 2 * n
    br = y[ore : ore + nk].reshape((n, k))
    bi = y[ore + nk :].reshape((n, k))
    pol = 0.0
    count = 0.0
    for j in range(n):
        d = 0.0
        for q in range(k):
            d += g[q] * (br[j, q] * br[j, q] + bi[j, q] * bi[j, q])
        count += d
        pol += ((j + 1) * lattice_a + y[j]) * (1.0 - d)
    energy = 0.0
    for j in range(n):
        energy += y[n + j] * y[n + j] / (2.0 * mass)
    for j in range(n - 1):
        du = y[j + 1] - y[j]
        s = 0.0
        for q in range(k):
            s += g[q] * (br[j, q] * br[j + 1, q] + bi[j, q] * bi[j + 1, q])
        energy += 0.5 * spring * du * du + 2.0 * (-t0 + alpha * du) * s
    return pol, energy, count


@njit(cache=True)
def trajectory(y, nrec, stride, dt, n, k, g, t0, alpha, spring, mass, hbar, lattice_a,
               levels, fixed_basis, use_fixed, pol, energy, count, pops):
    """Advance ``nrec - 1`` blocks of ``stride`` steps, recording after each block."""
    for r in range(nrec):
        if r > 0:
            advance(y, stride, dt, n, k, g, t0, alpha, spring, mass, hbar)
            for i in range(y.size):
                if not np.isfinite(y[i]):
                    return r
        pol[r], energy[r], count[r] = observables(y, n, k, g, t0, alpha, spring, mass, lattice_a)
        if levels.size:
            if use_fixed:
                pops[r] = project(y, n, k, g, fixed_basis, levels)
            else:
                pops[r] = populations(y, n, k, g, t0, alpha, levels)
    return nrec

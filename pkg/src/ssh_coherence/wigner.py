"""Initial lattice conditions from the ground-state Wigner distribution.

In normal coordinates the distribution factorizes into independent Gaussians
with ``var(Q_j) = hbar / (2 M w_j)`` and ``var(P_j) = hbar M w_j / 2``.
Every trajectory index gets its own random stream derived from
``(masterSeed, trajectoryIndex)``, so samples do not depend on the order or
the process in which they are drawn.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import LatticeState
from .phonons import NormalModeBasis


@dataclass
class SampledInitialCondition:
    state: LatticeState
    trajectoryIndex: int
    seed: int
    Q: np.ndarray
    P: np.ndarray


def stream_seed(masterSeed: int, trajectoryIndex: int) -> int:
    """64-bit seed of the stream belonging to one trajectory."""
    ss = np.random.SeedSequence(entropy=int(masterSeed), spawn_key=(int(trajectoryIndex),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def mode_widths(modes: NormalModeBasis) -> tuple[np.ndarray, np.ndarray]:
    """Standard deviations of (Q_j, P_j)."""
    w = np.asarray(modes.frequencies)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise InvalidInputError("Wigner sampling needs strictly positive frequencies")
    hbar, mass = modes.hbar, modes.mass
    return np.sqrt(hbar / (2.0 * mass * w)), np.sqrt(hbar * mass * w / 2.0)


def sample_initial_condition(
    modes: NormalModeBasis,
    masterSeed: int,
    trajectoryIndex: int,
    zero_variance: bool = False,
) -> SampledInitialCondition:
    sq, sp = mode_widths(modes)
    seed = stream_seed(masterSeed, trajectoryIndex)
    if zero_variance:
        Q = np.zeros_like(sq)
        P = np.zeros_like(sp)
    else:
        z = stream(seed).standard_normal((2, sq.size))
        Q = sq * z[0]
        P = sp * z[1]
    vec = modes.full_vectors()
    u = modes.baseGeometry.u0 + vec @ Q
    p = vec @ P
    return SampledInitialCondition(LatticeState(u, p), int(trajectoryIndex), seed, Q, P)


def sample_ensemble(modes: NormalModeBasis, masterSeed: int, count: int):
    """Stack ``count`` samples: returns (u, p, Q, P) arrays with one row per trajectory."""
    rows = [sample_initial_condition(modes, masterSeed, i) for i in range(count)]
    return (
        np.array([r.state.u for r in rows]),
        np.array([r.state.p for r in rows]),
        np.array([r.Q for r in rows]),
        np.array([r.P for r in rows]),
    )


def harmonic_energy(u, p, modes: NormalModeBasis) -> np.ndarray:
    """``sum p^2/2M + eta^T F eta / 2`` with ``F`` rebuilt from the modes.

    ``u`` and ``p`` may be single states or stacks of them (last axis = site).
    """
    u = np.atleast_2d(u)
    p = np.atleast_2d(p)
    mass = modes.mass
    eta = (u - modes.baseGeometry.u0)[:, 1:-1]
    q = eta @ modes.modes
    lam = mass * modes.frequencies**2
    return np.sum(p**2, axis=1) / (2.0 * mass) + 0.5 * (q**2) @ lam


def write_samples_csv(path, modes: NormalModeBasis, masterSeed: int, count: int):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["trajectoryIndex", "site", "u", "p"])
        for i in range(count):
            s = sample_initial_condition(modes, masterSeed, i)
            for site, (u, p) in enumerate(zip(s.state.u, s.state.p), start=1):
                out.writerow([i, site, repr(float(u)), repr(float(p))])

"""Initial one-particle occupation matrices for two-determinant superpositions.

A superposition ``c0 |D_x> + c1 |D_y>`` of two determinants that differ by a
single spin-up orbital (``x`` in one, ``y`` in the other) has the one-particle
matrix of the common core plus the 2x2 block
``[[|c0|^2, c0* c1], [c1* c0, |c1|^2]]`` on levels ``(x, y)``.

The module also carries a brute-force Fock-space oracle used to check these
matrices on small chains.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import ModelParams
from .relax import UP, excited_occupation, ground_state_occupation

FOCK_MAX_SITES = 8


@dataclass
class OccupationMatrix:
    """Per-spin ``Gamma[e, e'] = <c^dag_e c_e'>`` in the initial eigenbasis."""

    gammaUp: np.ndarray
    gammaDown: np.ndarray

    def __iter__(self):
        yield self.gammaUp
        yield self.gammaDown

    @property
    def total(self) -> np.ndarray:
        return self.gammaUp + self.gammaDown

    @property
    def electrons(self) -> float:
        return float(np.real(np.trace(self.gammaUp) + np.trace(self.gammaDown)))

    @classmethod
    def from_occupation(cls, f) -> "OccupationMatrix":
        f = np.asarray(f, dtype=float)
        return cls(np.diag(f[0]).astype(complex), np.diag(f[1]).astype(complex))


class SuperpositionKind(str, enum.Enum):
    GROUND_EXCITED = "GroundExcited"
    PAIR_GROUND_GEOMETRY = "PairGroundGeometry"
    PAIR_EXCITED_GEOMETRY = "PairExcitedGeometry"


@dataclass(frozen=True)
class SuperpositionSpec:
    kind: SuperpositionKind = SuperpositionKind.GROUND_EXCITED
    level: int | None = None
    coefficients: tuple = (2**-0.5, 2**-0.5)

    def __post_init__(self):
        object.__setattr__(self, "kind", SuperpositionKind(self.kind))
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (2,) or abs(np.vdot(c, c) - 1) > 1e-12:
            raise InvalidInputError("coefficients must be a normalized pair")
        if self.kind is SuperpositionKind.GROUND_EXCITED:
            if self.level is not None:
                raise InvalidInputError("GroundExcited takes no level")
        elif self.level is None:
            raise InvalidInputError(f"{self.kind.value} requires a level")

    def validate(self, params: ModelParams):
        n = params.nSites
        if self.kind is not SuperpositionKind.GROUND_EXCITED:
            i = self.level
            if int(i) != i or not n // 2 + 1 <= i <= n - 1:
                raise InvalidInputError(
                    f"level must be in [{n // 2 + 1}, {n - 1}] for N={n}, got {i}"
                )
        return self

    def levels(self, params: ModelParams) -> tuple[int, int]:
        """1-based levels ``(x, y)`` swapped in the spin-up channel."""
        n = params.nSites
        if self.kind is SuperpositionKind.GROUND_EXCITED:
            return n // 2, n // 2 + 1
        return self.level, self.level + 1

    def nuclear_occupation(self, params: ModelParams) -> np.ndarray:
        """Occupation of the surface the lattice is relaxed and quantized on."""
        self.validate(params)
        if self.kind is SuperpositionKind.PAIR_EXCITED_GEOMETRY:
            return excited_occupation(self.level, params)
        return ground_state_occupation(params)


def build_superposition(spec: SuperpositionSpec, params: ModelParams) -> OccupationMatrix:
    spec.validate(params)
    n = params.nSites
    f = ground_state_occupation(params)
    x, y = spec.levels(params)
    homo = n // 2
    core = f[UP].copy()
    core[homo - 1] = 0.0
    gamma_up = np.diag(core).astype(complex)
    c0, c1 = np.asarray(spec.coefficients, dtype=complex)
    gamma_up[x - 1, x - 1] = abs(c0) ** 2
    gamma_up[y - 1, y - 1] = abs(c1) ** 2
    gamma_up[x - 1, y - 1] = np.conj(c0) * c1
    gamma_up[y - 1, x - 1] = np.conj(c1) * c0
    return OccupationMatrix(gamma_up, np.diag(f[1 - UP]).astype(complex))


# --- Fock-space oracle -----------------------------------------------------
#
# A many-body state is a dict {(up_bits, down_bits): amplitude}.  Modes are
# ordered all spin-up orbitals first, then spin-down, and a configuration
# stands for the product of creation operators in ascending mode order.


def _mode_sign(up: int, down: int, orb: int, spin: int) -> int:
    if spin == UP:
        below = bin(up & ((1 << orb) - 1)).count("1")
    else:
        below = bin(up).count("1") + bin(down & ((1 << orb) - 1)).count("1")
    return -1 if below % 2 else 1


def fock_create(state: dict, orb: int, spin: int) -> dict:
    out = {}
    for (up, down), amp in state.items():
        occ = up if spin == UP else down
        if occ >> orb & 1:
            continue
        sign = _mode_sign(up, down, orb, spin)
        key = (up | 1 << orb, down) if spin == UP else (up, down | 1 << orb)
        out[key] = out.get(key, 0) + sign * amp
    return out


def fock_annihilate(state: dict, orb: int, spin: int) -> dict:
    out = {}
    for (up, down), amp in state.items():
        occ = up if spin == UP else down
        if not occ >> orb & 1:
            continue
        sign = _mode_sign(up, down, orb, spin)
        key = (up & ~(1 << orb), down) if spin == UP else (up, down & ~(1 << orb))
        out[key] = out.get(key, 0) + sign * amp
    return out


def fock_add(*terms) -> dict:
    """Linear combination of states given as ``(coefficient, state)`` pairs."""
    out = {}
    for c, state in terms:
        for key, amp in state.items():
            out[key] = out.get(key, 0) + c * amp
    return out


def fock_ground(n: int) -> dict:
    """Closed-shell determinant with the lowest n/2 orbitals doubly occupied."""
    bits = (1 << (n // 2)) - 1
    return {(bits, bits): 1.0}


def fock_single_excitation(state: dict, target: int, source: int, spin: int = UP) -> dict:
    """``c^dag_target c_source |state>`` with 1-based orbital labels."""
    return fock_create(fock_annihilate(state, source - 1, spin), target - 1, spin)


def fock_slater(orbitals_up: np.ndarray, orbitals_down: np.ndarray) -> dict:
    """Expand a determinant of given orbitals in the site occupation basis."""
    n = orbitals_up.shape[0]
    _check_fock_size(n)

    def expand(phi):
        k = phi.shape[1]
        amps = {}
        for sites in itertools.combinations(range(n), k):
            amp = np.linalg.det(phi[list(sites), :]) if k else 1.0
            if amp != 0:
                amps[sum(1 << s for s in sites)] = amp
        return amps

    ups, downs = expand(orbitals_up), expand(orbitals_down)
    return {(a, b): x * y for a, x in ups.items() for b, y in downs.items()}


def _check_fock_size(n: int):
    if n > FOCK_MAX_SITES:
        raise InvalidInputError(f"Fock oracle limited to {FOCK_MAX_SITES} orbitals, got {n}")


def fock_oracle_1rdm(state: dict, n: int) -> OccupationMatrix:
    """One-particle matrices by explicit operator application."""
    _check_fock_size(n)
    gammas = []
    for spin in (UP, 1 - UP):
        g = np.zeros((n, n), dtype=complex)
        for b in range(n):
            lowered = fock_annihilate(state, b, spin)
            for a in range(n):
                moved = fock_create(lowered, a, spin)
                g[a, b] = sum(np.conj(state.get(k, 0)) * amp for k, amp in moved.items())
        gammas.append(g)
    return OccupationMatrix(gammas[0], gammas[1])


def fock_state_for(spec: SuperpositionSpec, params: ModelParams) -> dict:
    """The explicit many-body state that ``spec`` describes."""
    spec.validate(params)
    n = params.nSites
    ground = fock_ground(n)
    x, y = spec.levels(params)
    homo = n // 2
    c0, c1 = spec.coefficients
    first = ground if x == homo else fock_single_excitation(ground, x, homo)
    second = fock_single_excitation(ground, y, homo)
    return fock_add((c0, first), (c1, second))

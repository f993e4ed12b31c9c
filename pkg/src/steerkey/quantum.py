"""Minimal two-qubit quantum mechanics.

States are 4x4 density matrices, measurements are +/-1-valued projective
qubit observables given by Bloch directions, and the only channel is the
depolarizing channel.  Everything here is a pure function of its inputs;
values are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
BLOCH_NORM_TOL = 1e-12
PROB_TOL = 1e-12

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """A two-qubit density matrix: Hermitian, positive semidefinite, trace 1."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"density matrix must be 4x4, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian")
        trace = np.trace(m)
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace must be 1, got {trace}")
        if float(np.linalg.eigvalsh(m).min()) < -PSD_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True, eq=False)
class BinaryObservable:
    """A +/-1-valued projective qubit measurement along a unit Bloch vector."""

    bloch: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.bloch, dtype=float).reshape(3)
        if abs(np.linalg.norm(v) - 1.0) > BLOCH_NORM_TOL:
            raise ValueError(f"Bloch vector must have unit norm, got |v| = {np.linalg.norm(v)}")
        v.setflags(write=False)
        object.__setattr__(self, "bloch", v)

    @property
    def operator(self) -> np.ndarray:
        """The observable n . sigma as a 2x2 Hermitian matrix."""
        x, y, z = self.bloch
        return x * PAULI_X + y * PAULI_Y + z * PAULI_Z

    def projector(self, outcome: int) -> np.ndarray:
        """Eigenprojector (I + outcome * n.sigma) / 2 for outcome +1 or -1."""
        if outcome not in (1, -1):
            raise ValueError(f"outcome must be +1 or -1, got {outcome}")
        return 0.5 * (IDENTITY_2 + outcome * self.operator)


SIGMA_Z = BinaryObservable(np.array([0.0, 0.0, 1.0]))
SIGMA_X = BinaryObservable(np.array([1.0, 0.0, 0.0]))
# Diagonal directions (sigma_z +/- sigma_x)/sqrt(2), the CHSH-optimal pair
# against {sigma_z, sigma_x}.
DIAG_PLUS = BinaryObservable(np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0))
DIAG_MINUS = BinaryObservable(np.array([-1.0, 0.0, 1.0]) / np.sqrt(2.0))

OUTCOME_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint probabilities p(a, b) over the four +/-1 outcome pairs."""

    p: dict

    def __post_init__(self) -> None:
        if set(self.p) != set(OUTCOME_PAIRS):
            raise ValueError("joint distribution must cover exactly the four outcome pairs")
        cleaned = {}
        total = 0.0
        for pair in OUTCOME_PAIRS:
            value = float(self.p[pair])
            if value < -PROB_TOL or value > 1.0 + PROB_TOL:
                raise ValueError(f"probability for {pair} out of range: {value}")
            cleaned[pair] = min(max(value, 0.0), 1.0)
            total += cleaned[pair]
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        object.__setattr__(self, "p", cleaned)

    def marginal_a(self, a: int) -> float:
        return self.p[(a, 1)] + self.p[(a, -1)]

    def marginal_b(self, b: int) -> float:
        return self.p[(1, b)] + self.p[(-1, b)]

    def expectation(self) -> float:
        """E[a * b] under this distribution."""
        return sum(a * b * v for (a, b), v in self.p.items())


def bell_phi_plus() -> TwoQubitState:
    """The maximally entangled state (|00> + |11>)/sqrt(2) as a density matrix."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1.0 / np.sqrt(2.0)
    return TwoQubitState(np.outer(psi, psi.conj()))


def depolarize(rho: TwoQubitState, visibility: float) -> TwoQubitState:
    """Mix a state with white noise: V * rho + (1 - V) * I/4."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    return TwoQubitState(visibility * rho.matrix + (1.0 - visibility) * np.eye(4) / 4.0)


def born_joint(rho: TwoQubitState, a_obs: BinaryObservable, b_obs: BinaryObservable) -> JointDistribution:
    """Born-rule joint outcome distribution p(a, b) = Tr[(Pi_a x Pi_b) rho]."""
    p = {}
    for a, b in OUTCOME_PAIRS:
        op = np.kron(a_obs.projector(a), b_obs.projector(b))
        p[(a, b)] = float(np.trace(op @ rho.matrix).real)
    return JointDistribution(p)


def correlator(rho: TwoQubitState, a_obs: BinaryObservable, b_obs: BinaryObservable) -> float:
    """Expectation of the product of outcomes, E[a * b]."""
    return born_joint(rho, a_obs, b_obs).expectation()

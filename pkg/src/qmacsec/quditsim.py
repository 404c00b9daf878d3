"""Dense state-vector simulation of small qudit systems.

Conventions: ``X|j> = |j+1 mod d>``, ``Z|j> = w^j |j>`` with ``w = exp(2 pi i / d)``.
The Bell basis is ``|phi^{x,y}> = (X^x Z^y (x) I) |phi^{0,0}>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TOL = 1e-9


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PureState:
    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        size = int(np.prod(self.dims))
        if self.amplitudes.shape != (size,):
            raise SimulationError(f"amplitude vector of shape {self.amplitudes.shape} does not match dims {self.dims}")
        norm = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if abs(norm - 1.0) > TOL:
            raise SimulationError(f"state not normalised (|psi|^2 = {norm})")

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def inner(self, other: "PureState") -> complex:
        if self.dims != other.dims:
            raise SimulationError("dimension mismatch in inner product")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def equals_up_to_phase(self, other: "PureState", tol: float = TOL) -> bool:
        return self.dims == other.dims and abs(abs(self.inner(other)) - 1.0) < tol


@dataclass(frozen=True)
class LocalUnitary:
    target: int
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SimulationError("local operator must be square")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=TOL):
            raise SimulationError("local operator is not unitary")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def on(self, target: int) -> "LocalUnitary":
        return LocalUnitary(target, self.matrix)

    def __matmul__(self, other: "LocalUnitary") -> "LocalUnitary":
        return LocalUnitary(self.target, self.matrix @ other.matrix)


@dataclass(frozen=True)
class BellLabel:
    x: int
    y: int


def omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


@lru_cache(maxsize=None)
def _shift(d: int, a: int) -> np.ndarray:
    m = np.roll(np.eye(d, dtype=complex), a % d, axis=0)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def _clock(d: int, b: int) -> np.ndarray:
    m = np.diag(omega(d) ** ((np.arange(d) * (b % d)) % d))
    m.setflags(write=False)
    return m


def pauli_x(d: int, a: int = 1, target: int = 0) -> LocalUnitary:
    return LocalUnitary(target, _shift(d, a))


def pauli_z(d: int, b: int = 1, target: int = 0) -> LocalUnitary:
    return LocalUnitary(target, _clock(d, b))


def identity(d: int, target: int = 0) -> LocalUnitary:
    return LocalUnitary(target, np.eye(d, dtype=complex))


def basis_state(dims: tuple[int, ...], labels: tuple[int, ...]) -> PureState:
    amps = np.zeros(int(np.prod(dims)), dtype=complex)
    amps[np.ravel_multi_index(labels, dims)] = 1.0
    return PureState(tuple(dims), amps)


def bell_pair(d: int) -> PureState:
    if d < 2:
        raise SimulationError(f"qudit dimension must be >= 2, got {d}")
    amps = np.zeros(d * d, dtype=complex)
    amps[np.arange(d) * (d + 1)] = 1 / np.sqrt(d)
    return PureState((d, d), amps)


def apply_local(state: PureState, u: LocalUnitary) -> PureState:
    if not 0 <= u.target < len(state.dims):
        raise SimulationError(f"no subsystem {u.target} in a {len(state.dims)}-part state")
    if state.dims[u.target] != u.dim:
        raise SimulationError(f"operator of dim {u.dim} on subsystem of dim {state.dims[u.target]}")
    t = np.tensordot(u.matrix, state.tensor(), axes=([1], [u.target]))
    t = np.moveaxis(t, 0, u.target)
    return PureState(state.dims, t.reshape(-1))


def bell_basis_state(d: int, x: int, y: int) -> PureState:
    if not (0 <= x < d and 0 <= y < d):
        raise SimulationError(f"Bell label ({x},{y}) outside Z_{d}")
    return PureState((d, d), _bell_basis(d)[x * d + y].copy())


@lru_cache(maxsize=None)
def _bell_basis(d: int) -> np.ndarray:
    """Rows are the amplitude vectors of |phi^{x,y}>, row index x*d + y."""
    phi = bell_pair(d)
    rows = []
    for x in range(d):
        for y in range(d):
            op = LocalUnitary(0, _shift(d, x) @ _clock(d, y))
            rows.append(apply_local(phi, op).amplitudes)
    basis = np.array(rows)
    basis.setflags(write=False)
    return basis


def measure_bell_basis(state: PureState) -> dict[BellLabel, float]:
    if len(state.dims) != 2 or state.dims[0] != state.dims[1]:
        raise SimulationError(f"Bell measurement needs two equal-dimension qudits, got dims {state.dims}")
    d = state.dims[0]
    probs = np.abs(_bell_basis(d).conj() @ state.amplitudes) ** 2
    total = float(probs.sum())
    if abs(total - 1.0) > TOL:
        raise SimulationError(f"Bell probabilities sum to {total}")
    return {BellLabel(i // d, i % d): float(pr) for i, pr in enumerate(probs)}


def deterministic_outcome(probs: dict[BellLabel, float], tol: float = TOL) -> BellLabel:
    label, best = max(probs.items(), key=lambda kv: kv[1])
    if best < 1 - tol:
        raise SimulationError(f"measurement is not deterministic (max probability {best})")
    return label


def two_sum_state(d: int, alice: tuple[int, int], bob: tuple[int, int]) -> PureState:
    """Bell pair after Alice applies X^A1 Z^A2 and Bob applies X^-B1 Z^B2."""
    a1, a2 = alice
    b1, b2 = bob
    state = bell_pair(d)
    state = apply_local(state, LocalUnitary(0, _shift(d, a1) @ _clock(d, a2)))
    state = apply_local(state, LocalUnitary(1, _shift(d, d - b1 % d) @ _clock(d, b2)))
    return state

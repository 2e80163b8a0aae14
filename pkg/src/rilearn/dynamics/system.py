"""Hénon-Heiles Hamiltonian: energy, vector field, equilibria and linearization.

All functions are pure and operate on immutable value types. Scalar helpers
(potential, energy, vector field) also accept numpy arrays whose last axis
holds the four phase-space components, so grids can be evaluated in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from rilearn.errors import ConfigError, DataError, NonFiniteState, NotASaddle

# Eigenvalues with |Re| below this are treated as purely imaginary.
_REAL_TOL = 1e-9
# Below this the closed form for k2 divides by ~0.
_CLOSED_FORM_TOL = 1e-8


@dataclass(frozen=True)
class SystemParams:
    """Masses, frequencies and cubic coupling of the Hénon-Heiles family."""

    m_x: float = 1.0
    m_y: float = 1.0
    omega_x: float = 1.0
    omega_y: float = 1.0
    delta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("m_x", "m_y", "omega_x", "omega_y"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        if not math.isfinite(self.delta) or self.delta == 0:
            raise ConfigError(f"delta must be nonzero, got {self.delta}")


@dataclass(frozen=True)
class PhaseState:
    """A point (x, y, p_x, p_y) of the four-dimensional phase space."""

    x: float
    y: float
    p_x: float
    p_y: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.p_x, self.p_y)):
            raise NonFiniteState(f"non-finite phase state {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.p_x, self.p_y], dtype=float)

    @classmethod
    def from_array(cls, values) -> PhaseState:
        x, y, p_x, p_y = (float(v) for v in np.asarray(values, dtype=float)[:4])
        return cls(x, y, p_x, p_y)


class EquilibriumKind(Enum):
    CENTER_CENTER = "center-center"
    SADDLE_CENTER = "saddle-center"
    SADDLE_SADDLE = "saddle-saddle"


class EscapeChannel(IntEnum):
    """Escape label: 1 through x = -1.25, 2 through x = +1.25, 3 through y = +1.25."""

    NON_REACTIVE = 0
    LEFT = 1
    RIGHT = 2
    TOP = 3

    @property
    def mirror(self) -> EscapeChannel:
        """Image under the reflection x -> -x."""
        swap = {EscapeChannel.LEFT: EscapeChannel.RIGHT, EscapeChannel.RIGHT: EscapeChannel.LEFT}
        return swap.get(self, self)


class SaddleId(Enum):
    """Index-one saddles, named by their position around the well."""

    TOP = "top"
    LEFT = "left"
    RIGHT = "right"

    @property
    def channel(self) -> EscapeChannel:
        return EscapeChannel[self.name]


@dataclass(frozen=True)
class EquilibriumPoint:
    state: PhaseState
    kind: EquilibriumKind
    eigenvalues: tuple[complex, ...]
    saddle_id: SaddleId | None = None


@dataclass(frozen=True, eq=False)
class SaddleEigenbasis:
    """Growth rate, center frequency and eigenvectors at a saddle × center point."""

    lam: float
    omega: float
    v_plus: np.ndarray
    v_minus: np.ndarray
    v_center_re: np.ndarray
    v_center_im: np.ndarray

    @property
    def v_center(self) -> np.ndarray:
        return self.v_center_re + 1j * self.v_center_im


def _split(s) -> tuple:
    if isinstance(s, PhaseState):
        return s.x, s.y, s.p_x, s.p_y
    arr = np.asarray(s, dtype=float)
    return arr[..., 0], arr[..., 1], arr[..., 2], arr[..., 3]


def potential_energy(params: SystemParams, x, y):
    """V(x, y) = ½ωₓ²x² + ½ω_y²y² + x²y − (δ/3)y³."""
    return (
        0.5 * params.omega_x**2 * x * x
        + 0.5 * params.omega_y**2 * y * y
        + x * x * y
        - params.delta / 3.0 * y**3
    )


def kinetic_energy(params: SystemParams, p_x, p_y):
    return p_x * p_x / (2.0 * params.m_x) + p_y * p_y / (2.0 * params.m_y)


def hamiltonian_energy(params: SystemParams, s):
    """Total energy of a PhaseState or of an array of states (last axis = 4)."""
    x, y, p_x, p_y = _split(s)
    return kinetic_energy(params, p_x, p_y) + potential_energy(params, x, y)


def vector_field(params: SystemParams, s) -> np.ndarray:
    """Hamilton's equations (ẋ, ẏ, ṗₓ, ṗ_y) at one state or an array of states."""
    x, y, p_x, p_y = _split(s)
    return np.stack(
        [
            p_x / params.m_x,
            p_y / params.m_y,
            -params.omega_x**2 * x - 2.0 * x * y,
            -params.omega_y**2 * y - x * x + params.delta * y * y,
        ],
        axis=-1,
    )


def linearize(params: SystemParams, s) -> np.ndarray:
    """Jacobian of the vector field at `s` (4×4)."""
    x, y, _, _ = _split(s)
    return np.array(
        [
            [0.0, 0.0, 1.0 / params.m_x, 0.0],
            [0.0, 0.0, 0.0, 1.0 / params.m_y],
            [-params.omega_x**2 - 2.0 * y, -2.0 * x, 0.0, 0.0],
            [-2.0 * x, -params.omega_y**2 + 2.0 * params.delta * y, 0.0, 0.0],
        ]
    )


def _sorted_eigenvalues(matrix: np.ndarray) -> tuple[complex, ...]:
    values = np.linalg.eigvals(matrix)
    return tuple(complex(v) for v in sorted(values, key=lambda v: (round(v.real, 12), round(v.imag, 12))))


def _classify(eigenvalues: tuple[complex, ...]) -> EquilibriumKind:
    n_real = sum(1 for v in eigenvalues if abs(v.real) > _REAL_TOL)
    if n_real == 0:
        return EquilibriumKind.CENTER_CENTER
    if n_real == 2:
        return EquilibriumKind.SADDLE_CENTER
    return EquilibriumKind.SADDLE_SADDLE


def _equilibrium(params: SystemParams, x: float, y: float, saddle_id: SaddleId | None) -> EquilibriumPoint:
    state = PhaseState(x, y, 0.0, 0.0)
    eigenvalues = _sorted_eigenvalues(linearize(params, state))
    return EquilibriumPoint(state, _classify(eigenvalues), eigenvalues, saddle_id)


def equilibria(params: SystemParams) -> list[EquilibriumPoint]:
    """Origin, top saddle and the mirror pair of lower saddles.

    The lower pair solves ∇V = 0 with y = −ωₓ²/2, which gives
    x² = ωₓ²(ω_y²/2 + δωₓ²/4). The pair is absent when that is not positive.
    """
    points = [
        _equilibrium(params, 0.0, 0.0, None),
        _equilibrium(params, 0.0, params.omega_y**2 / params.delta, SaddleId.TOP),
    ]
    radicand = params.omega_y**2 / 2.0 + params.delta * params.omega_x**2 / 4.0
    if radicand > 0:
        x_e = params.omega_x * math.sqrt(radicand)
        y_e = -params.omega_x**2 / 2.0
        points.append(_equilibrium(params, -x_e, y_e, SaddleId.LEFT))
        points.append(_equilibrium(params, x_e, y_e, SaddleId.RIGHT))
    return points


def find_saddle(params: SystemParams, saddle_id: SaddleId) -> EquilibriumPoint:
    for eq in equilibria(params):
        if eq.saddle_id is saddle_id:
            return eq
    raise NotASaddle(f"no {saddle_id.value} saddle for {params}")


def saddle_energy(params: SystemParams, saddle_id: SaddleId) -> float:
    eq = find_saddle(params, saddle_id)
    return float(hamiltonian_energy(params, eq.state))


def orient_eigenvector(v: np.ndarray) -> np.ndarray:
    """Scale so the first component that is not ~0 is real and positive."""
    for component in v:
        if abs(component) > 1e-12:
            phase = component / abs(component)
            return v / phase
    return v


def _closed_form_eigenvector(params: SystemParams, eq: EquilibriumPoint, beta: complex) -> np.ndarray | None:
    x_e, y_e = eq.state.x, eq.state.y
    denom = -params.omega_y**2 + 2.0 * params.delta * y_e - beta * beta * params.m_y
    if abs(denom) < _CLOSED_FORM_TOL:
        return None
    k2 = 2.0 * x_e / denom
    return np.array([1.0, k2, beta * params.m_x, beta * params.m_y * k2], dtype=complex)


def _eigenvector(params: SystemParams, eq: EquilibriumPoint, matrix: np.ndarray, beta: complex) -> np.ndarray:
    v = _closed_form_eigenvector(params, eq, beta)
    if v is not None and np.linalg.norm(matrix @ v - beta * v) < 1e-10:
        return v
    # Decoupled blocks (x_e = 0): take the numerical eigenvector, unit norm.
    values, vectors = np.linalg.eig(matrix)
    idx = int(np.argmin(np.abs(values - beta)))
    v = vectors[:, idx]
    return orient_eigenvector(v / np.linalg.norm(v))


def saddle_eigenbasis(params: SystemParams, eq: EquilibriumPoint) -> SaddleEigenbasis:
    if eq.kind is not EquilibriumKind.SADDLE_CENTER:
        raise NotASaddle(f"equilibrium at ({eq.state.x}, {eq.state.y}) is {eq.kind.value}")
    matrix = linearize(params, eq.state)
    values = np.linalg.eigvals(matrix)
    lam = float(max(v.real for v in values if abs(v.real) > _REAL_TOL))
    omega = float(max(v.imag for v in values if abs(v.real) <= _REAL_TOL))

    v_plus = _eigenvector(params, eq, matrix, lam).real
    v_minus = _eigenvector(params, eq, matrix, -lam).real
    v_center = _eigenvector(params, eq, matrix, 1j * omega)
    return SaddleEigenbasis(
        lam=lam,
        omega=omega,
        v_plus=orient_eigenvector(v_plus),
        v_minus=orient_eigenvector(v_minus),
        v_center_re=v_center.real.copy(),
        v_center_im=v_center.imag.copy(),
    )


def linear_po_guess(
    params: SystemParams, eq: EquilibriumPoint, amplitude: float = 1e-4
) -> tuple[PhaseState, float]:
    """Seed for the Lyapunov orbit from the linear solution with A₁ = A₂ = 0, B = −A_x/2.

    Returns the state (x_e − A_x, y_e − A_x·k₂, 0, 0) and the period guess 2π/ω.
    """
    if amplitude < 0:
        raise DataError(f"amplitude must be non-negative, got {amplitude}")
    basis = saddle_eigenbasis(params, eq)
    direction = basis.v_center_re
    if abs(direction[0]) > 1e-12:
        direction = direction / direction[0]
    seed = eq.state.as_array() - amplitude * direction
    seed[2:] = 0.0
    return PhaseState.from_array(seed), 2.0 * math.pi / basis.omega

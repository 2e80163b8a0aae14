"""Adaptive integration of the Hamiltonian flow, with events and variational equations.

Integration is delegated to scipy's DOP853 (explicit Runge-Kutta 8(5,3) with
dense output). Backward integration negates the vector field, so reported
times always increase from 0 to ``t_max``; ``Trajectory.direction`` records
which way physical time ran. Event guards see the reported time and the
four-component state array ``(x, y, p_x, p_y)``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial

import numpy as np
from scipy.integrate import solve_ivp

from rilearn.dynamics.system import PhaseState, SystemParams, linearize
from rilearn.errors import ConfigError, NonFiniteState, StepSizeUnderflow

logger = logging.getLogger(__name__)

# Default escape lines: channel 1 at x = -1.25, channel 2 at x = +1.25, channel 3 at y = +1.25.
ESCAPE_BOUND = 1.25


class Direction(Enum):
    FORWARD = 1
    BACKWARD = -1


class Crossing(Enum):
    """Sign change of an event guard, in reported time."""

    RISING = 1
    FALLING = -1
    ANY = 0


@dataclass(frozen=True)
class IntegrationSettings:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = math.inf
    t_max: float = 30.0
    direction: Direction = Direction.FORWARD

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
        if not self.t_max > 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if not self.max_step > 0:
            raise ConfigError(f"max_step must be positive, got {self.max_step}")

    def with_(self, **changes) -> IntegrationSettings:
        return replace(self, **changes)


@dataclass(frozen=True)
class EventSpec:
    """A guard g(t, state) whose zero crossings are located during integration."""

    id: str
    guard: Callable[[float, np.ndarray], float]
    direction: Crossing = Crossing.ANY
    terminal: bool = False


@dataclass(frozen=True, eq=False)
class EventHit:
    id: str
    t: float
    state: PhaseState


class _DenseOutput:
    """Restricts a scipy OdeSolution to its first ``n`` components."""

    def __init__(self, solution, n: int) -> None:
        self._solution = solution
        self._n = n

    def __call__(self, t):
        return self._solution(t)[: self._n]


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    events: tuple[EventHit, ...] = ()
    terminated_by: str | None = None
    direction: Direction = Direction.FORWARD
    dense: Callable | None = field(default=None, repr=False)

    @property
    def initial(self) -> PhaseState:
        return PhaseState.from_array(self.states[0])

    @property
    def final(self) -> PhaseState:
        return PhaseState.from_array(self.states[-1])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def state_at(self, t) -> np.ndarray:
        """Interpolated state(s) at reported time(s) ``t``; shape (4,) or (4, n)."""
        if self.dense is None:
            raise ValueError("trajectory was integrated without dense output")
        return self.dense(t)

    def events_with(self, event_id: str) -> list[EventHit]:
        return [e for e in self.events if e.id == event_id]


@dataclass(frozen=True, eq=False)
class StmTrajectory:
    base: Trajectory
    stm: np.ndarray
    event_stms: tuple[np.ndarray, ...] = ()
    stm_dense: Callable | None = field(default=None, repr=False)

    def stm_at(self, t) -> np.ndarray:
        if self.stm_dense is None:
            raise ValueError("trajectory was integrated without dense output")
        return np.asarray(self.stm_dense(t))[4:].reshape(4, 4)


# --- event helpers ---

def _coordinate_guard(index: int, value: float, t: float, state: np.ndarray) -> float:
    return state[index] - value


def coordinate_event(
    event_id: str, index: int, value: float,
    direction: Crossing = Crossing.ANY, terminal: bool = False,
) -> EventSpec:
    """Event on ``state[index] == value``. Picklable, unlike a lambda guard."""
    return EventSpec(event_id, partial(_coordinate_guard, index, value), direction, terminal)


def escape_events(bound: float = ESCAPE_BOUND) -> list[EventSpec]:
    """Terminal events on the three escape lines, as seen in forward time."""
    return [
        coordinate_event(f"x=-{bound:g}", 0, -bound, Crossing.FALLING, terminal=True),
        coordinate_event(f"x=+{bound:g}", 0, bound, Crossing.RISING, terminal=True),
        coordinate_event(f"y=+{bound:g}", 1, bound, Crossing.RISING, terminal=True),
    ]


# --- right-hand sides ---

def _flow(t: float, y: np.ndarray, params: SystemParams, sign: float) -> np.ndarray:
    x, yy, p_x, p_y = y[0], y[1], y[2], y[3]
    return sign * np.array(
        [
            p_x / params.m_x,
            p_y / params.m_y,
            -params.omega_x**2 * x - 2.0 * x * yy,
            -params.omega_y**2 * yy - x * x + params.delta * yy * yy,
        ]
    )


def _flow_with_stm(t: float, y: np.ndarray, params: SystemParams, sign: float) -> np.ndarray:
    out = np.empty(20)
    out[:4] = _flow(t, y, params, sign)
    phi = y[4:].reshape(4, 4)
    out[4:] = (sign * linearize(params, y[:4]) @ phi).ravel()
    return out


def _flow_with_quadrature(t: float, y: np.ndarray, params: SystemParams, sign: float,
                          integrand: Callable[[np.ndarray], float]) -> np.ndarray:
    out = np.empty(5)
    out[:4] = _flow(t, y, params, sign)
    out[4] = integrand(sign * out[:4])
    return out


def _scipy_events(events: Sequence[EventSpec]) -> list[Callable]:
    # solve_ivp hands the right-hand side extras to event functions too.
    wrapped = []
    for event in events:
        def fn(t, y, *_args, _guard=event.guard):
            return _guard(t, y[:4])

        fn.terminal = event.terminal
        fn.direction = float(event.direction.value)
        wrapped.append(fn)
    return wrapped


def _solve(rhs, y0: np.ndarray, params: SystemParams, settings: IntegrationSettings,
           events: Sequence[EventSpec], dense_output: bool, extra_args: tuple = ()):
    sign = float(settings.direction.value)
    try:
        sol = solve_ivp(
            rhs,
            (0.0, settings.t_max),
            y0,
            method="DOP853",
            rtol=settings.rel_tol,
            atol=settings.abs_tol,
            max_step=settings.max_step,
            events=_scipy_events(events) or None,
            dense_output=dense_output,
            args=(params, sign, *extra_args),
        )
    except FloatingPointError as exc:
        raise NonFiniteState(str(exc)) from exc
    if sol.status == -1:
        raise StepSizeUnderflow(f"integration from {y0[:4]} failed at t={sol.t[-1]:.6g}: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise NonFiniteState(f"non-finite state reached from {y0[:4]}")
    return sol


def _collect_events(sol, events: Sequence[EventSpec]) -> tuple[list[tuple[str, float, np.ndarray]], str | None]:
    hits: list[tuple[str, float, np.ndarray]] = []
    if sol.t_events is None:
        return hits, None
    for event, times, states in zip(events, sol.t_events, sol.y_events):
        for t, y in zip(times, states):
            hits.append((event.id, float(t), np.asarray(y)))
    hits.sort(key=lambda h: h[1])
    terminated_by = None
    if sol.status == 1:
        terminal_hits = [h for h in hits if any(e.id == h[0] and e.terminal for e in events)]
        terminated_by = terminal_hits[-1][0] if terminal_hits else None
    return hits, terminated_by


def integrate(
    params: SystemParams,
    s0: PhaseState,
    settings: IntegrationSettings | None = None,
    events: Sequence[EventSpec] = (),
    dense_output: bool = True,
) -> Trajectory:
    """Integrate until ``settings.t_max`` or the first terminal event."""
    settings = settings or IntegrationSettings()
    sol = _solve(_flow, s0.as_array(), params, settings, events, dense_output)
    hits, terminated_by = _collect_events(sol, events)
    return Trajectory(
        times=sol.t,
        states=sol.y.T.copy(),
        events=tuple(EventHit(i, t, PhaseState.from_array(y)) for i, t, y in hits),
        terminated_by=terminated_by,
        direction=settings.direction,
        dense=sol.sol,
    )


def integrate_variational(
    params: SystemParams,
    s0: PhaseState,
    settings: IntegrationSettings | None = None,
    events: Sequence[EventSpec] = (),
    dense_output: bool = True,
) -> StmTrajectory:
    """Integrate the flow together with dΦ/dt = A(x(t))·Φ, Φ(0) = I."""
    settings = settings or IntegrationSettings()
    y0 = np.concatenate([s0.as_array(), np.eye(4).ravel()])
    sol = _solve(_flow_with_stm, y0, params, settings, events, dense_output)
    hits, terminated_by = _collect_events(sol, events)
    base = Trajectory(
        times=sol.t,
        states=sol.y[:4].T.copy(),
        events=tuple(EventHit(i, t, PhaseState.from_array(y[:4])) for i, t, y in hits),
        terminated_by=terminated_by,
        direction=settings.direction,
        dense=_DenseOutput(sol.sol, 4) if sol.sol is not None else None,
    )
    logger.debug("variational run: %d steps, %d events", len(sol.t), len(hits))
    return StmTrajectory(
        base=base,
        stm=sol.y[4:].T.reshape(-1, 4, 4).copy(),
        event_stms=tuple(y[4:].reshape(4, 4).copy() for _, _, y in hits),
        stm_dense=sol.sol,
    )


def integrate_quadrature(
    params: SystemParams,
    s0: PhaseState,
    integrand: Callable[[np.ndarray], float],
    settings: IntegrationSettings | None = None,
    events: Sequence[EventSpec] = (),
) -> tuple[Trajectory, float]:
    """Integrate the flow with a fifth component dq/dt = integrand(f(x(t))), q(0) = 0.

    ``integrand`` receives the physical vector field (ẋ, ẏ, ṗₓ, ṗ_y) and must
    return a scalar. Returns the trajectory and q at its final time.
    """
    settings = settings or IntegrationSettings()
    y0 = np.append(s0.as_array(), 0.0)
    sol = _solve(_flow_with_quadrature, y0, params, settings, events, False, (integrand,))
    hits, terminated_by = _collect_events(sol, events)
    trajectory = Trajectory(
        times=sol.t,
        states=sol.y[:4].T.copy(),
        events=tuple(EventHit(i, t, PhaseState.from_array(y[:4])) for i, t, y in hits),
        terminated_by=terminated_by,
        direction=settings.direction,
    )
    return trajectory, float(sol.y[4, -1])


def flow_map(params: SystemParams, s0: PhaseState, t: float,
             settings: IntegrationSettings | None = None) -> PhaseState:
    """φ(t; s0) for t of either sign."""
    if t == 0:
        return s0
    settings = (settings or IntegrationSettings()).with_(
        t_max=abs(t), direction=Direction.FORWARD if t > 0 else Direction.BACKWARD
    )
    return integrate(params, s0, settings, dense_output=False).final

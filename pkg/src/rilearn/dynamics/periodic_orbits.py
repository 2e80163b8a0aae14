"""Lyapunov periodic orbits at the index-one saddles.

Pipeline: linear seed -> differential correction -> natural-parameter
continuation in amplitude -> bisection onto the target energy. Every orbit is
a brake orbit of the form (x0, y0, 0, 0), so the half-period event p_x = 0
closes it by symmetry.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from rilearn.dynamics.integrator import (
    Crossing,
    IntegrationSettings,
    coordinate_event,
    integrate,
    integrate_variational,
)
from rilearn.dynamics.system import (
    PhaseState,
    SaddleId,
    SystemParams,
    find_saddle,
    hamiltonian_energy,
    linear_po_guess,
    orient_eigenvector,
    saddle_energy,
    vector_field,
)
from rilearn.errors import (
    DataError,
    EnergyBelowSaddle,
    EnergyNotBracketed,
    EventNotFound,
    NoConvergence,
    NumericalError,
    SingularCorrection,
)

logger = logging.getLogger(__name__)

HALF_PERIOD_EVENT = "p_x=0"


@dataclass(frozen=True)
class OrbitSettings:
    """Knobs for correction, continuation and bisection."""

    correction_tol: float = 1e-10
    max_corrections: int = 25
    singular_tol: float = 1e-14
    max_half_period: float = 10.0
    amplitude: float = 1e-4
    step_growth: float = 2.0
    max_step: float = 0.05
    min_step: float = 1e-10
    max_family_size: int = 500
    energy_tol: float = 1e-10
    max_bisections: int = 60
    integration: IntegrationSettings = field(default_factory=IntegrationSettings)

    def with_(self, **changes) -> OrbitSettings:
        return replace(self, **changes)


@dataclass(frozen=True)
class PeriodicOrbit:
    initial_state: PhaseState
    period: float
    energy: float
    saddle_id: SaddleId | None = None

    @property
    def seed(self) -> np.ndarray:
        return np.array([self.initial_state.x, self.initial_state.y])


@dataclass(frozen=True, eq=False)
class MonodromyAnalysis:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    unstable_eigvec: np.ndarray
    stable_eigvec: np.ndarray

    @property
    def stability_index(self) -> float:
        """½(λ₁ + 1/λ₁); above 1 for a hyperbolic orbit."""
        lam = abs(self.eigenvalues[0])
        return 0.5 * (lam + 1.0 / lam)


@dataclass(frozen=True)
class ContinuationFamily:
    orbits: tuple[PeriodicOrbit, ...]

    @property
    def energies(self) -> np.ndarray:
        return np.array([o.energy for o in self.orbits])

    @property
    def periods(self) -> np.ndarray:
        return np.array([o.period for o in self.orbits])

    def bracket(self, energy: float) -> tuple[PeriodicOrbit, PeriodicOrbit]:
        """Consecutive members whose energies enclose ``energy``."""
        for lo, hi in zip(self.orbits, self.orbits[1:]):
            if lo.energy <= energy <= hi.energy:
                return lo, hi
        raise EnergyNotBracketed(
            f"family spans [{self.orbits[0].energy:.12g}, {self.orbits[-1].energy:.12g}], target {energy:.12g}"
        )


def _half_period_direction(params: SystemParams, s0: PhaseState) -> Crossing:
    # The start itself sits on p_x = 0; look for the return crossing, opposite to the initial motion.
    p_x_rate = float(vector_field(params, s0)[2])
    if p_x_rate == 0.0:
        raise SingularCorrection(f"p_x is stationary at {s0}; cannot place a half-period event")
    return Crossing.FALLING if p_x_rate > 0 else Crossing.RISING


def differential_correction(
    params: SystemParams,
    guess: PhaseState,
    settings: OrbitSettings | None = None,
    saddle_id: SaddleId | None = None,
) -> PeriodicOrbit:
    """Correct y0 (x0 held fixed) until p_y vanishes at the half-period crossing p_x = 0."""
    settings = settings or OrbitSettings()
    x0, y0 = guess.x, guess.y
    integration = settings.integration.with_(t_max=settings.max_half_period)

    for iteration in range(settings.max_corrections):
        s0 = PhaseState(x0, y0, 0.0, 0.0)
        event = coordinate_event(HALF_PERIOD_EVENT, 2, 0.0, _half_period_direction(params, s0), terminal=True)
        run = integrate_variational(params, s0, integration, [event], dense_output=False)
        if not run.base.events:
            raise EventNotFound(f"no half-period crossing within t={settings.max_half_period} from {s0}")
        hit, phi = run.base.events[0], run.event_stms[0]
        p_y1 = hit.state.p_y
        logger.debug("correction %d: y0=%.15g t1=%.12g p_y1=%.3e", iteration, y0, hit.t, p_y1)
        if abs(p_y1) < settings.correction_tol:
            return PeriodicOrbit(s0, 2.0 * hit.t, float(hamiltonian_energy(params, s0)), saddle_id)

        rates = vector_field(params, hit.state)
        if abs(rates[2]) < settings.singular_tol:
            raise SingularCorrection(f"p_x rate vanishes at the half-period crossing ({rates[2]:.3e})")
        denom = phi[3, 1] - phi[2, 1] * rates[3] / rates[2]
        if abs(denom) < settings.singular_tol:
            raise SingularCorrection(f"correction denominator {denom:.3e} from {s0}")
        y0 -= p_y1 / denom

    raise NoConvergence(f"differential correction did not converge in {settings.max_corrections} iterations")


def _extrapolate(last: PeriodicOrbit, step: np.ndarray) -> PhaseState:
    x, y = last.seed + step
    return PhaseState(float(x), float(y), 0.0, 0.0)


def _capped(step: np.ndarray, cap: float) -> np.ndarray:
    norm = float(np.linalg.norm(step))
    return step if norm <= cap else step * (cap / norm)


def continue_family(
    params: SystemParams,
    orbit1: PeriodicOrbit,
    orbit2: PeriodicOrbit,
    target_energy: float,
    settings: OrbitSettings | None = None,
) -> ContinuationFamily:
    """Extrapolate-and-correct along the family until it brackets ``target_energy``."""
    settings = settings or OrbitSettings()
    if orbit1.saddle_id is not orbit2.saddle_id:
        raise DataError("continuation needs two orbits of the same saddle")
    orbits = sorted([orbit1, orbit2], key=lambda o: o.energy)
    if orbits[0].energy >= target_energy:
        raise EnergyNotBracketed(f"both starting orbits lie above E={target_energy}")

    step = orbits[-1].seed - orbits[-2].seed
    while orbits[-1].energy < target_energy:
        if len(orbits) >= settings.max_family_size:
            raise EnergyNotBracketed(f"family stalled at E={orbits[-1].energy:.12g} after {len(orbits)} orbits")
        last = orbits[-1]
        delta = _capped(step, settings.max_step)
        try:
            orbit = differential_correction(params, _extrapolate(last, delta), settings, last.saddle_id)
        except NumericalError as exc:
            orbit, reason = None, str(exc)
        else:
            reason = "energy did not increase"
        if orbit is None or orbit.energy <= last.energy:
            step = delta / 2.0
            logger.debug("continuation step rejected (%s); halving to %.3e", reason, np.linalg.norm(step))
            if np.linalg.norm(step) < settings.min_step:
                raise EnergyNotBracketed(f"continuation step underflow at E={last.energy:.12g}")
            continue
        orbits.append(orbit)
        step = (orbit.seed - last.seed) * settings.step_growth
        logger.debug("family member %d: E=%.12g T=%.12g", len(orbits), orbit.energy, orbit.period)

    periods = [o.period for o in orbits]
    if any(b <= a for a, b in zip(periods, periods[1:])):
        logger.warning("periods along the %s family are not monotone", orbits[0].saddle_id)
    return ContinuationFamily(tuple(orbits))


def _starting_pair(
    params: SystemParams, saddle_id: SaddleId, energy: float, settings: OrbitSettings
) -> tuple[PeriodicOrbit, PeriodicOrbit]:
    eq = find_saddle(params, saddle_id)
    amplitude = settings.amplitude
    while True:
        guess1, _ = linear_po_guess(params, eq, amplitude)
        guess2, _ = linear_po_guess(params, eq, 2.0 * amplitude)
        orbit1 = differential_correction(params, guess1, settings, saddle_id)
        if orbit1.energy < energy:
            return orbit1, differential_correction(params, guess2, settings, saddle_id)
        amplitude /= 10.0
        if amplitude < 1e-9:
            raise EnergyNotBracketed(f"E={energy} is too close to the saddle energy to seed a family")


def orbit_at_energy(
    params: SystemParams,
    saddle_id: SaddleId,
    energy: float,
    settings: OrbitSettings | None = None,
) -> PeriodicOrbit:
    """Seed, correct, continue and bisect onto the orbit with H = ``energy``."""
    settings = settings or OrbitSettings()
    e_saddle = saddle_energy(params, saddle_id)
    if energy <= e_saddle:
        raise EnergyBelowSaddle(f"E={energy} is not above the {saddle_id.value} saddle energy {e_saddle:.12g}")

    orbit1, orbit2 = _starting_pair(params, saddle_id, energy, settings)
    if orbit2.energy >= energy:
        family = ContinuationFamily((orbit1, orbit2))
    else:
        family = continue_family(params, orbit1, orbit2, energy, settings)
    lo, hi = family.bracket(energy)

    best = min((lo, hi), key=lambda o: abs(o.energy - energy))
    a, b = 0.0, 1.0
    for _ in range(settings.max_bisections):
        if abs(best.energy - energy) < settings.energy_tol:
            break
        mid = 0.5 * (a + b)
        guess = lo.seed + mid * (hi.seed - lo.seed)
        orbit = differential_correction(params, PhaseState(guess[0], guess[1], 0.0, 0.0), settings, saddle_id)
        if orbit.energy < energy:
            a = mid
        else:
            b = mid
        if abs(orbit.energy - energy) < abs(best.energy - energy):
            best = orbit
    if abs(best.energy - energy) >= settings.energy_tol:
        raise NoConvergence(f"bisection stopped at |H - E| = {abs(best.energy - energy):.3e}")

    logger.info(
        "%s orbit at E=%.6g: x0=%.12g y0=%.12g T=%.10g",
        saddle_id.value, energy, best.initial_state.x, best.initial_state.y, best.period,
    )
    return best


def monodromy(
    params: SystemParams, orbit: PeriodicOrbit, integration: IntegrationSettings | None = None
) -> MonodromyAnalysis:
    """Φ over one full period and its eigen-decomposition, |λ| descending."""
    integration = (integration or IntegrationSettings()).with_(t_max=orbit.period)
    run = integrate_variational(params, orbit.initial_state, integration, dense_output=False)
    matrix = run.stm[-1]
    values, vectors = np.linalg.eig(matrix)
    order = np.argsort(-np.abs(values), kind="stable")
    values, vectors = values[order], vectors[:, order]

    def unit(v: np.ndarray) -> np.ndarray:
        v = np.real(v)
        return orient_eigenvector(v / np.linalg.norm(v))

    return MonodromyAnalysis(
        matrix=matrix,
        eigenvalues=values,
        unstable_eigvec=unit(vectors[:, 0]),
        stable_eigvec=unit(vectors[:, -1]),
    )


def closure_error(params: SystemParams, orbit: PeriodicOrbit, integration: IntegrationSettings | None = None) -> float:
    """‖φ(T; X0) − X0‖."""
    integration = (integration or IntegrationSettings()).with_(t_max=orbit.period)
    final = integrate(params, orbit.initial_state, integration, dense_output=False).final
    return float(np.linalg.norm(final.as_array() - orbit.initial_state.as_array()))

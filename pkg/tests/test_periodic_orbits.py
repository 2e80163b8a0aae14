import math

import numpy as np
import numpy.testing as npt
import pytest

from rilearn.dynamics.integrator import Crossing, coordinate_event, integrate
from rilearn.dynamics.periodic_orbits import (
    ContinuationFamily,
    OrbitSettings,
    PeriodicOrbit,
    closure_error,
    continue_family,
    differential_correction,
    monodromy,
    orbit_at_energy,
)
from rilearn.dynamics.system import (
    PhaseState,
    SaddleId,
    find_saddle,
    hamiltonian_energy,
    linear_po_guess,
    vector_field,
)
from rilearn.errors import EnergyBelowSaddle, EnergyNotBracketed

ENERGY = 0.17


@pytest.fixture(scope="module")
def top_orbit(params):
    return orbit_at_energy(params, SaddleId.TOP, ENERGY)


@pytest.fixture(scope="module")
def left_orbit(params):
    return orbit_at_energy(params, SaddleId.LEFT, ENERGY)


@pytest.fixture(scope="module")
def right_orbit(params):
    return orbit_at_energy(params, SaddleId.RIGHT, ENERGY)


def test_orbit_hits_the_target_energy(params, top_orbit):
    assert top_orbit.saddle_id is SaddleId.TOP
    assert abs(top_orbit.energy - ENERGY) < 1e-10
    assert hamiltonian_energy(params, top_orbit.initial_state) == pytest.approx(top_orbit.energy, abs=1e-15)
    assert top_orbit.initial_state.p_x == 0.0 and top_orbit.initial_state.p_y == 0.0


def test_orbit_closes(params, top_orbit, left_orbit):
    assert closure_error(params, top_orbit) < 1e-6
    assert closure_error(params, left_orbit) < 1e-6


@pytest.mark.parametrize("saddle_id", [SaddleId.TOP, SaddleId.LEFT])
def test_period_near_the_saddle_is_the_linear_value(params, saddle_id):
    # ω = √3 at every saddle for unit parameters.
    orbit = orbit_at_energy(params, saddle_id, 1 / 6 + 1e-4)
    assert orbit.period == pytest.approx(2 * math.pi / math.sqrt(3), rel=1e-3)


def test_converged_orbit_is_a_fixed_point_of_the_correction(params, top_orbit):
    again = differential_correction(params, top_orbit.initial_state, saddle_id=SaddleId.TOP)
    assert abs(again.initial_state.y - top_orbit.initial_state.y) < 1e-10
    assert again.initial_state.x == top_orbit.initial_state.x
    assert again.period == pytest.approx(top_orbit.period, rel=1e-12)


def test_half_period_momentum_vanishes(params, top_orbit):
    rising = vector_field(params, top_orbit.initial_state)[2] < 0
    event = coordinate_event("p_x=0", 2, 0.0, Crossing.RISING if rising else Crossing.FALLING, terminal=True)
    settings = OrbitSettings().integration.with_(t_max=top_orbit.period)
    run = integrate(params, top_orbit.initial_state, settings, [event], dense_output=False)
    assert run.times[-1] == pytest.approx(top_orbit.period / 2, rel=1e-8)
    assert abs(run.final.p_y) < 1e-8


def test_lower_orbits_mirror_each_other(left_orbit, right_orbit):
    assert left_orbit.period == pytest.approx(right_orbit.period, rel=1e-8)
    assert left_orbit.initial_state.x < 0 < right_orbit.initial_state.x
    assert right_orbit.initial_state.x == pytest.approx(-left_orbit.initial_state.x, abs=1e-7)
    assert right_orbit.initial_state.y == pytest.approx(left_orbit.initial_state.y, abs=1e-7)


def test_monodromy_spectrum(params, top_orbit):
    analysis = monodromy(params, top_orbit)
    values = analysis.eigenvalues
    magnitudes = np.abs(values)
    assert np.all(np.diff(magnitudes) <= 1e-12)
    assert magnitudes[0] * magnitudes[-1] == pytest.approx(1.0, rel=1e-6)
    # The unit pair is a Jordan block, so each eigenvalue alone carries a square-root error;
    # its sum and product do not.
    pair = values[1:3]
    assert abs(pair.sum() - 2.0) < 1e-5
    assert abs(pair.prod() - 1.0) < 1e-5
    npt.assert_allclose(magnitudes[1:3], 1.0, atol=1e-3)
    assert analysis.stability_index > 1.0
    npt.assert_allclose(np.linalg.det(analysis.matrix), 1.0, atol=1e-8)
    for vec in (analysis.unstable_eigvec, analysis.stable_eigvec):
        assert np.isrealobj(vec)
        npt.assert_allclose(np.linalg.norm(vec), 1.0)
    npt.assert_allclose(analysis.matrix @ analysis.unstable_eigvec, values[0].real * analysis.unstable_eigvec,
                        atol=1e-6 * magnitudes[0])


def test_correction_converges_from_the_linear_guess(params):
    guess, period_guess = linear_po_guess(params, find_saddle(params, SaddleId.RIGHT), 1e-3)
    orbit = differential_correction(params, guess, saddle_id=SaddleId.RIGHT)
    assert orbit.initial_state.x == guess.x
    assert orbit.period == pytest.approx(period_guess, rel=1e-3)
    assert orbit.energy > 1 / 6


def test_continuation_brackets_and_grows(params):
    settings = OrbitSettings()
    eq = find_saddle(params, SaddleId.TOP)
    first = differential_correction(params, linear_po_guess(params, eq, 1e-4)[0], settings, SaddleId.TOP)
    second = differential_correction(params, linear_po_guess(params, eq, 2e-4)[0], settings, SaddleId.TOP)
    family = continue_family(params, first, second, 0.168, settings)
    assert np.all(np.diff(family.energies) > 0)
    assert np.all(np.diff(family.periods) > 0)
    lo, hi = family.bracket(0.168)
    assert lo.energy <= 0.168 <= hi.energy
    assert family.orbits[0] is first


def test_bracket_outside_family():
    orbits = tuple(PeriodicOrbit(PhaseState(0.0, 1.0, 0.0, 0.0), 3.6, e) for e in (0.167, 0.168))
    with pytest.raises(EnergyNotBracketed):
        ContinuationFamily(orbits).bracket(0.2)


def test_energy_below_saddle_is_rejected(params):
    with pytest.raises(EnergyBelowSaddle):
        orbit_at_energy(params, SaddleId.LEFT, 0.15)


def _higher_energies():
    cases = []
    for saddle_id in SaddleId:
        for energy in (0.18, 0.19, 0.20):
            marks = () if saddle_id is SaddleId.TOP else pytest.mark.slow
            cases.append(pytest.param(saddle_id, energy, marks=marks, id=f"{saddle_id.value}-{energy}"))
    return cases


@pytest.mark.parametrize("saddle_id, energy", _higher_energies())
def test_orbits_across_the_studied_energies(params, saddle_id, energy):
    orbit = orbit_at_energy(params, saddle_id, energy)
    assert abs(orbit.energy - energy) < 1e-10
    assert closure_error(params, orbit) < 1e-6
    analysis = monodromy(params, orbit)
    magnitudes = np.abs(analysis.eigenvalues)
    assert magnitudes[0] * magnitudes[-1] == pytest.approx(1.0, rel=1e-6)
    assert abs(analysis.eigenvalues[1:3].sum() - 2.0) < 1e-5
    if saddle_id is SaddleId.TOP:
        settings = OrbitSettings().integration.with_(t_max=orbit.period)
        run = integrate(params, orbit.initial_state, settings, dense_output=False)
        assert run.states[:, 1].min() > 0.8

import pickle

import numpy as np
import numpy.testing as npt
import pytest

from rilearn.dynamics.integrator import (
    Crossing,
    Direction,
    IntegrationSettings,
    coordinate_event,
    escape_events,
    flow_map,
    integrate,
    integrate_quadrature,
    integrate_variational,
)
from rilearn.dynamics.system import PhaseState, hamiltonian_energy
from rilearn.errors import ConfigError
from rilearn.learning.datasets import momentum_from_energy, samples_from_points
from rilearn.learning.pipelines import holdout_points
from rilearn.utils.workers import parallel_map


@pytest.fixture
def bounded_state(params, bounded_section):
    p_y = momentum_from_energy(params, 0.1, 0.1, bounded_section)
    return PhaseState(0.1, 0.0, 0.1, p_y)


def test_energy_is_conserved(params, bounded_state):
    run = integrate(params, bounded_state, IntegrationSettings(t_max=30.0))
    energies = hamiltonian_energy(params, run.states)
    assert np.max(np.abs(energies - 0.12)) < 1e-10
    assert run.terminated_by is None
    npt.assert_allclose(run.times[-1], 30.0)


def test_backward_undoes_forward(params, bounded_state):
    there = flow_map(params, bounded_state, 5.0)
    back = flow_map(params, there, -5.0)
    npt.assert_allclose(back.as_array(), bounded_state.as_array(), atol=1e-9)
    assert flow_map(params, bounded_state, 0.0) is bounded_state


def test_backward_times_are_positive(params, bounded_state):
    run = integrate(params, bounded_state, IntegrationSettings(t_max=2.0, direction=Direction.BACKWARD))
    assert run.direction is Direction.BACKWARD
    assert np.all(np.diff(run.times) > 0)
    npt.assert_allclose(run.final.as_array(), flow_map(params, bounded_state, -2.0).as_array(), atol=1e-12)


def test_escape_event_terminates_on_the_line(params, section):
    # Straight up the symmetry axis above the saddle energy.
    start = PhaseState(0.0, 0.0, 0.0, momentum_from_energy(params, 0.0, 0.0, section))
    run = integrate(params, start, IntegrationSettings(t_max=30.0), escape_events())
    assert run.terminated_by == "y=+1.25"
    npt.assert_allclose(run.final.y, 1.25, atol=1e-10)
    assert run.final.x == 0.0
    assert run.events_with("y=+1.25")[0].t == pytest.approx(run.times[-1])


def test_non_terminal_events_are_all_reported(params, bounded_state):
    event = coordinate_event("y=0", 1, 0.0, Crossing.RISING)
    run = integrate(params, bounded_state, IntegrationSettings(t_max=20.0), [event])
    assert run.terminated_by is None
    hits = run.events_with("y=0")
    assert len(hits) >= 2
    assert all(abs(h.state.y) < 1e-10 and h.state.p_y > 0 for h in hits)
    assert [h.t for h in hits] == sorted(h.t for h in hits)


def test_stm_matches_finite_differences(params, bounded_state):
    settings = IntegrationSettings(t_max=2.0)
    run = integrate_variational(params, bounded_state, settings)
    h = 1e-6
    columns = []
    for e in np.eye(4):
        plus = flow_map(params, PhaseState.from_array(bounded_state.as_array() + h * e), 2.0, settings)
        minus = flow_map(params, PhaseState.from_array(bounded_state.as_array() - h * e), 2.0, settings)
        columns.append((plus.as_array() - minus.as_array()) / (2 * h))
    npt.assert_allclose(run.stm[-1], np.column_stack(columns), atol=1e-5)
    npt.assert_allclose(run.stm[0], np.eye(4))
    npt.assert_allclose(run.stm_at(2.0), run.stm[-1], atol=1e-10)


def test_stm_is_symplectic(params, bounded_state):
    run = integrate_variational(params, bounded_state, IntegrationSettings(t_max=10.0), dense_output=False)
    J = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
    phi = run.stm[-1]
    npt.assert_allclose(phi.T @ J @ phi, J, atol=1e-8)


def test_quadrature_of_a_constant(params, bounded_state):
    run, q = integrate_quadrature(params, bounded_state, lambda rates: 1.0, IntegrationSettings(t_max=3.5))
    npt.assert_allclose(q, 3.5, rtol=1e-12)
    npt.assert_allclose(run.times[-1], 3.5)


def test_settings_validation():
    with pytest.raises(ConfigError):
        IntegrationSettings(rel_tol=0.0)
    with pytest.raises(ConfigError):
        IntegrationSettings(t_max=-1.0)
    assert IntegrationSettings().with_(t_max=4.0).t_max == 4.0


def test_events_survive_pickling():
    events = pickle.loads(pickle.dumps(escape_events()))
    assert [e.id for e in events] == ["x=-1.25", "x=+1.25", "y=+1.25"]
    assert events[0].guard(0.0, np.array([-1.0, 0.0, 0.0, 0.0])) == pytest.approx(0.25)


def test_parallel_map_preserves_order():
    assert parallel_map(abs, [-3, -1, 2, -7], threads=2) == [3, 1, 2, 7]
    assert parallel_map(abs, [-3, -1], threads=None) == [3, 1]


def test_events_work_with_every_right_hand_side(params, section):
    start = PhaseState(0.0, 0.0, 0.0, momentum_from_energy(params, 0.0, 0.0, section))
    settings = IntegrationSettings(t_max=30.0)
    plain = integrate(params, start, settings, escape_events())
    variational = integrate_variational(params, start, settings, escape_events(), dense_output=False)
    quadrature, q = integrate_quadrature(params, start, lambda rates: 1.0, settings, escape_events())
    for run in (plain, variational.base, quadrature):
        assert run.terminated_by == "y=+1.25"
        assert run.times[-1] == pytest.approx(plain.times[-1], rel=1e-9)
    assert q == pytest.approx(plain.times[-1], rel=1e-9)
    assert len(variational.event_stms) == 1


@pytest.mark.parametrize("n_states", [50, pytest.param(1000, marks=pytest.mark.slow)])
def test_energy_drift_from_random_section_states(params, section, n_states):
    samples = samples_from_points(params, holdout_points(params, section, n_states, seed=5), section)
    settings = IntegrationSettings(t_max=30.0)
    drift = 0.0
    for sample in samples:
        run = integrate(params, sample.state(), settings, escape_events(), dense_output=False)
        drift = max(drift, float(np.max(np.abs(hamiltonian_energy(params, run.states) - section.energy))))
    assert drift < 1e-9

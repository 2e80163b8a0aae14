import math

import numpy as np
import numpy.testing as npt
import pytest

from rilearn.dynamics.system import (
    EquilibriumKind,
    EscapeChannel,
    PhaseState,
    SaddleId,
    SystemParams,
    equilibria,
    find_saddle,
    hamiltonian_energy,
    linear_po_guess,
    linearize,
    potential_energy,
    saddle_eigenbasis,
    saddle_energy,
    vector_field,
)
from rilearn.errors import ConfigError, NonFiniteState


def test_potential_at_known_points(params):
    assert potential_energy(params, 0.0, 0.0) == 0.0
    npt.assert_allclose(potential_energy(params, 0.0, 1.0), 1 / 6, rtol=1e-15)
    npt.assert_allclose(potential_energy(params, math.sqrt(3) / 2, -0.5), 1 / 6, rtol=1e-14)


def test_energy_accepts_arrays(params):
    states = np.array([[0.1, 0.2, 0.3, 0.4], [0.0, 0.0, 0.0, 0.0]])
    energies = hamiltonian_energy(params, states)
    assert energies.shape == (2,)
    npt.assert_allclose(energies[0], hamiltonian_energy(params, PhaseState(0.1, 0.2, 0.3, 0.4)))
    assert energies[1] == 0.0


def test_equilibria_of_unit_system(params):
    points = {eq.saddle_id: eq for eq in equilibria(params)}
    assert points[None].kind is EquilibriumKind.CENTER_CENTER
    for saddle in SaddleId:
        assert points[saddle].kind is EquilibriumKind.SADDLE_CENTER
        npt.assert_allclose(saddle_energy(params, saddle), 1 / 6, rtol=1e-14)
    npt.assert_allclose([points[SaddleId.RIGHT].state.x, points[SaddleId.RIGHT].state.y],
                        [math.sqrt(3) / 2, -0.5], rtol=1e-15)
    assert points[SaddleId.LEFT].state.x == -points[SaddleId.RIGHT].state.x


@pytest.mark.parametrize("saddle", list(SaddleId))
def test_vector_field_vanishes_at_equilibria(params, saddle):
    eq = find_saddle(params, saddle)
    npt.assert_allclose(vector_field(params, eq.state), 0.0, atol=1e-15)


@pytest.mark.parametrize("saddle", list(SaddleId))
def test_saddle_rates(params, saddle):
    basis = saddle_eigenbasis(params, find_saddle(params, saddle))
    npt.assert_allclose(basis.lam, 1.0, rtol=1e-12)
    npt.assert_allclose(basis.omega, math.sqrt(3), rtol=1e-12)
    matrix = linearize(params, find_saddle(params, saddle).state)
    npt.assert_allclose(matrix @ basis.v_plus, basis.lam * basis.v_plus, atol=1e-10)
    npt.assert_allclose(matrix @ basis.v_minus, -basis.lam * basis.v_minus, atol=1e-10)
    npt.assert_allclose(matrix @ basis.v_center, 1j * basis.omega * basis.v_center, atol=1e-10)


def test_linearize_matches_finite_differences(params):
    s = np.array([0.13, -0.21, 0.05, 0.3])
    h = 1e-6
    numeric = np.column_stack([
        (vector_field(params, s + h * e) - vector_field(params, s - h * e)) / (2 * h) for e in np.eye(4)
    ])
    npt.assert_allclose(linearize(params, s), numeric, atol=1e-8)


def test_energy_is_conserved_by_the_field(params):
    rng = np.random.default_rng(3)
    for s in rng.uniform(-0.5, 0.5, size=(20, 4)):
        x, y, p_x, p_y = s
        grad = np.array([x + 2 * x * y, y + x * x - y * y, p_x, p_y])
        assert abs(grad @ vector_field(params, s)) < 1e-14


def test_field_respects_reflection(params):
    s = np.array([0.2, -0.1, 0.3, 0.05])
    mirrored = s * np.array([-1, 1, -1, 1])
    npt.assert_array_equal(vector_field(params, mirrored), vector_field(params, s) * np.array([-1, 1, -1, 1]))


def test_linear_guess_is_a_brake_state(params):
    state, period = linear_po_guess(params, find_saddle(params, SaddleId.TOP), 1e-3)
    assert state.p_x == 0.0 and state.p_y == 0.0
    npt.assert_allclose([state.x, state.y], [-1e-3, 1.0], atol=1e-12)
    npt.assert_allclose(period, 2 * math.pi / math.sqrt(3))


def test_channel_mirror():
    assert EscapeChannel.LEFT.mirror is EscapeChannel.RIGHT
    assert EscapeChannel.TOP.mirror is EscapeChannel.TOP
    assert SaddleId.LEFT.channel is EscapeChannel.LEFT


def test_invalid_parameters():
    with pytest.raises(ConfigError):
        SystemParams(m_x=0.0)
    with pytest.raises(ConfigError):
        SystemParams(delta=0.0)
    with pytest.raises(NonFiniteState):
        PhaseState(float("nan"), 0.0, 0.0, 0.0)

import numpy as np
import pytest

from cyclopass.core import eval_dynamics, eval_outputs
from cyclopass.legendre import partial_legendre
from cyclopass.models import (
    DCMotorParams,
    HeatExchangerParams,
    InductorParams,
    SyncMachineParams,
    blondel_park,
    equilibrium_inputs,
    make_coupled_inductors,
    make_model,
    transform_inputs,
    transform_outputs,
    transform_state,
)
from cyclopass.models.gas import IdealGasParams, pressure, temperature
from cyclopass.models.heat_exchanger import transfer_rate
from cyclopass.models.inductors import primary_storage_coefficients
from cyclopass.models.microphone import MicrophoneParams, capacitance, mechanical_storage
from cyclopass.models.sync_machine import check_positive_definite, inductance


def _gas_states(rng, count):
    return np.column_stack([rng.uniform(0.2, 10.0, count), rng.uniform(20.0, 120.0, count)])


def test_gas_state_equation(gas, rng):
    prm = IdealGasParams()
    for x in _gas_states(rng, 200):
        P, T = pressure(prm, x), temperature(prm, x)
        y = eval_outputs(gas, x)
        assert -y[0] == pytest.approx(P, rel=1e-12)
        assert y[1] == pytest.approx(T, rel=1e-12)
        assert P * x[0] == pytest.approx(prm.R_gas * T, rel=1e-10)
        assert T == pytest.approx((gas.hamiltonian(x) - prm.W) / prm.C_V, rel=1e-10)


def test_gas_domain_and_params():
    with pytest.raises(ValueError):
        IdealGasParams(C_V=0.0)
    with pytest.raises(ValueError):
        make_model("ideal_gas", {"Cv": 1.0})


def test_motor_equilibrium(rng):
    prm = DCMotorParams(L=0.5, J_rot=2.0, K=0.7, b=0.3, R_e=1.5)
    sys = make_model("dc_motor", vars(prm))
    I, w = 1.2, -0.4
    u = equilibrium_inputs(prm, I, w)
    np.testing.assert_allclose(eval_dynamics(sys, [prm.L * I, prm.J_rot * w], u), 0.0, atol=1e-14)


def test_motor_parameter_checks():
    with pytest.raises(ValueError):
        DCMotorParams(L=0.0)
    with pytest.raises(ValueError):
        DCMotorParams(b=-1.0)


def test_inductor_coefficients_random(rng):
    for _ in range(10):
        L1, L2 = rng.uniform(0.2, 3.0, 2)
        M = rng.uniform(-0.95, 0.95) * np.sqrt(L1 * L2)
        prm = InductorParams(L1, L2, M)
        sys = make_coupled_inductors(prm)
        a, b, c = primary_storage_coefficients(prm)
        I1, psi2 = rng.uniform(-2, 2, 2)
        val = partial_legendre(sys, "hold_primary", [I1], [psi2]).value
        assert val == pytest.approx(a * I1 * I1 + b * I1 * psi2 + c * psi2 * psi2, rel=1e-9, abs=1e-12)


def test_inductor_overcoupling_rejected():
    with pytest.raises(ValueError):
        InductorParams(1.0, 1.0, 1.0)


def test_microphone_capacitance_profile():
    prm = MicrophoneParams()
    q = np.linspace(-0.5, 0.5, 401)
    C, C1, _ = capacitance(prm, q)
    assert np.all(C > 0) and np.all(C <= prm.kappa)
    assert np.all(C1 < 0)
    h = 1e-6
    fd = (capacitance(prm, 0.01 + h)[0] - capacitance(prm, 0.01 - h)[0]) / (2 * h)
    assert fd == pytest.approx(capacitance(prm, 0.01)[1], rel=1e-6)


def test_microphone_storage_bounded_below(rng):
    prm = MicrophoneParams()
    for V in (0.1, 1.0, 48.0):
        qs = rng.uniform(-3, 3, 500)
        ps = rng.uniform(-3, 3, 500)
        vals = mechanical_storage(prm, qs, ps, V)
        assert np.min(vals) >= -0.5 * prm.kappa * V * V


def test_heat_exchanger_internal_exchange(exchanger):
    x = np.array([300.0, 350.0])
    xdot = eval_dynamics(exchanger, x, [0.0, 0.0])
    assert xdot[0] > 0 and xdot[1] < 0
    assert xdot.sum() == pytest.approx(0.0, abs=1e-12)
    assert xdot[0] == pytest.approx(transfer_rate(HeatExchangerParams(), x))


def test_heat_exchanger_equal_temperatures(exchanger):
    np.testing.assert_allclose(eval_dynamics(exchanger, [320.0, 320.0], [0.0, 0.0]), 0.0, atol=1e-12)


def test_sync_inductance_positive_and_periodic():
    prm = SyncMachineParams()
    assert check_positive_definite(prm) > 0
    np.testing.assert_allclose(inductance(prm, 0.3), inductance(prm, 0.3 + 2 * np.pi), atol=1e-12)
    L = inductance(prm, 1.1)
    np.testing.assert_allclose(L, L.T, atol=0)
    h = 1e-6
    fd = (inductance(prm, 1.1 + h) - inductance(prm, 1.1 - h)) / (2 * h)
    np.testing.assert_allclose(fd, inductance(prm, 1.1, 1), atol=1e-8)


def test_sync_storage_bounded_below():
    sm = make_model("sync_machine")
    I_s = np.array([0.4, -0.1, 0.3])
    vals = []
    for th in np.linspace(0, 2 * np.pi, 24, endpoint=False):
        vals.append(partial_legendre(sm, "hold_stator", I_s, [0.0, 0.0, 0.0, 0.0, th]).value)
    # bounded by the stator energy at the largest eigenvalue of L over the grid
    prm = SyncMachineParams()
    lam_max = max(np.linalg.eigvalsh(inductance(prm, th))[-1] for th in np.linspace(0, 2 * np.pi, 720))
    assert min(vals) >= -0.5 * lam_max * (I_s @ I_s) - 1e-12


def test_nonpositive_template_rejected():
    with pytest.raises(ValueError):
        make_model("sync_machine", {"L_l": 0.01, "L_B": 2.0})


def test_blondel_park_orthogonal(rng):
    for th in rng.uniform(-10, 10, 100):
        T = blondel_park(th)
        np.testing.assert_allclose(T @ T.T, np.eye(3), atol=1e-12)


def test_blondel_park_power_invariance(rng):
    for _ in range(20):
        th = rng.uniform(0, 2 * np.pi)
        V, I = rng.standard_normal(3), rng.standard_normal(3)
        assert transform_inputs(V, th) @ transform_outputs(I, th) == pytest.approx(V @ I, rel=1e-12)


def test_dq_energy_consistency(rng):
    sm, dq = make_model("sync_machine"), make_model("sync_machine_dq")
    prm = SyncMachineParams()
    for _ in range(50):
        x8 = np.concatenate([rng.uniform(-1, 1, 7), [rng.uniform(0, 2 * np.pi)]])
        x6, psi0 = transform_state(x8)
        assert dq.hamiltonian(x6) + psi0**2 / (2 * prm.L_l) == pytest.approx(sm.hamiltonian(x8), rel=1e-8)

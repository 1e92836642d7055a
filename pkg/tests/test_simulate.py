import numpy as np
import pytest

from cyclopass import _kernels
from cyclopass.core import PortHamiltonianSystem
from cyclopass.errors import DimensionError, DriftAlarm, SingularHessian, StepFailure, TooStiff
from cyclopass.models import make_model
from cyclopass.models.heat_exchanger import HeatExchangerParams, transfer_rate
from cyclopass.simulate import (
    CycleParams,
    FourierSignal,
    IntegratorOptions,
    close_cycle,
    constrained_simulate_x1,
    constrained_simulate_y1,
    integrate,
    simulate_hold_effort,
)
from cyclopass.structure import check_theorem_form


def _trapz(t, s):
    return float(_kernels.cumtrapz(t, s)[-1])


def test_fourier_signal_roundtrip():
    sig = FourierSignal([1.0, -1.0], [[0.5], [0.0]], [[0.0], [2.0]], period=2.0)
    assert sig(0.0) == pytest.approx([1.5, -1.0])
    assert sig(0.5) == pytest.approx([1.0, 1.0])
    back = FourierSignal.from_vector(sig.to_vector(), 2, 1, 2.0)
    np.testing.assert_array_equal(back.sample([0.1, 0.7]), sig.sample([0.1, 0.7]))
    np.testing.assert_allclose(sig(2.0), sig(0.0), atol=1e-15)
    with pytest.raises(ValueError):
        FourierSignal([0.0], period=0.0)


def test_lossless_first_law(inductors):
    sig = FourierSignal([0.0, 0.0], [[0.3], [0.1]], [[0.0], [-0.2]], 1.0)
    tr = integrate(inductors, [0.2, -0.1], sig, (0.0, 1.0))
    dH = tr.h[-1] - tr.h[0]
    total = _trapz(tr.times, tr.s1)
    assert total == pytest.approx(dH, rel=1e-6, abs=1e-12)


def test_motor_free_decay_is_monotone(motor):
    tr = integrate(motor, [1.0, -0.5], None, (0.0, 3.0))
    assert np.all(np.diff(tr.h) < 0)


def test_exchanger_free_run_conserves_energy(exchanger):
    tr = integrate(exchanger, [300.0, 350.0], None, (0.0, 0.001), IntegratorOptions(step=1e-6))
    np.testing.assert_allclose(tr.storage_rate, 0.0, atol=1e-9)
    assert tr.h[-1] == pytest.approx(tr.h[0], rel=1e-14)


def test_rk4_order(motor):
    sig = FourierSignal([0.5, 0.0], [[0.2], [0.1]], [[0.0], [0.3]], 1.0)
    ref = integrate(motor, [1.0, 0.0], sig, (0.0, 1.0), IntegratorOptions(step=1e-4)).states[-1]
    err = []
    for h in (0.1, 0.05):
        err.append(np.linalg.norm(integrate(motor, [1.0, 0.0], sig, (0.0, 1.0),
                                            IntegratorOptions(step=h)).states[-1] - ref))
    assert 12.0 < err[0] / err[1] < 20.0


def test_fast_path_matches_generic(motor):
    sig = FourierSignal([0.5, 0.2], [[0.2], [0.1]], [[0.0], [0.3]], 1.0)
    fast = integrate(motor, [1.0, 0.0], sig, (0.0, 1.0))
    slow = integrate(motor, [1.0, 0.0], sig, (0.0, 1.0), IntegratorOptions(fast=False))
    assert fast.meta["backend"] in ("numba", "numpy")
    assert slow.meta["backend"] == "python"
    np.testing.assert_allclose(fast.states, slow.states, atol=1e-13)
    np.testing.assert_allclose(fast.s1, slow.s1, atol=1e-13)


def test_rk45_matches_rk4(motor):
    sig = FourierSignal([0.5, 0.2], [[0.2], [0.1]], [[0.0], [0.3]], 1.0)
    a = integrate(motor, [1.0, 0.0], sig, (0.0, 1.0), IntegratorOptions(method="rk45", rtol=1e-10, atol=1e-12))
    b = integrate(motor, [1.0, 0.0], sig, (0.0, 1.0))
    np.testing.assert_allclose(a.states[-1], b.states[-1], atol=1e-8)
    assert a.times[-1] == 1.0


def test_rk45_too_stiff():
    stiff = PortHamiltonianSystem.from_linear("stiff", np.eye(1), np.zeros((1, 1)), 1e14 * np.eye(1), np.eye(1))
    with pytest.raises(TooStiff):
        integrate(stiff, [1.0], None, (0.0, 1.0), IntegratorOptions(method="rk45", min_step=1e-9))


def test_blow_up_is_step_failure():
    unstable = PortHamiltonianSystem.from_linear("boom", np.eye(1), np.zeros((1, 1)), -1e3 * np.eye(1), np.eye(1))
    with pytest.raises(StepFailure):
        integrate(unstable, [1.0], None, (0.0, 10.0), IntegratorOptions(step=0.1))


def test_bad_initial_state(motor):
    with pytest.raises(DimensionError):
        integrate(motor, [1.0], None, (0.0, 1.0))
    with pytest.raises(ValueError):
        integrate(motor, [1.0, 0.0], None, (0.0, 1.0), IntegratorOptions(method="euler"))


def test_gas_isothermal_run(gas):
    cert = check_theorem_form(gas, "hold_thermal")
    sig = FourierSignal([0.0], [[0.0]], [[0.8]], 1.0)
    tr = constrained_simulate_y1(gas, cert, [300.0], sig, gas.nominal, (0.0, 1.0))
    assert tr.meta["y1_drift"] < 1e-9
    np.testing.assert_allclose(tr.y1[:, 0], 300.0, rtol=1e-12)
    assert abs(_trapz(tr.times, tr.s2)) < 1e-6
    np.testing.assert_allclose(tr.storage_rate, tr.s2, atol=1e-9)
    assert tr.h_star[-1] == pytest.approx(tr.h_star[0], abs=1e-9)


def test_inductor_dc_current_closed_excursion(inductors):
    cert = check_theorem_form(inductors, "hold_primary")
    sig = FourierSignal([0.0], [[0.4]], [[-0.3]], 2.0)
    x0 = np.array([2.0, 0.0]) @ np.array([[1.0, 0.5], [0.5, 1.0]])  # I = (2, 0)
    tr = constrained_simulate_y1(inductors, cert, [2.0], sig, x0, (0.0, 2.0))
    assert abs(_trapz(tr.times, tr.s2)) < 1e-9
    assert tr.h_star[-1] - tr.h_star[0] == pytest.approx(0.0, abs=1e-12)


def test_microphone_mechanical_cycle(microphone):
    cert = check_theorem_form(microphone, "hold_electrical")
    sig = FourierSignal([0.0], [[0.0]], [[0.5]], 2.0)
    cyc = close_cycle(microphone, "y1", CycleParams(sig, np.array([0.0, 0.0, 1.0]), "hold_electrical",
                                                    cert.effort_for_output([1.0]), steps=400))
    assert cyc.defect < 1e-8
    assert _trapz(cyc.trajectory.times, cyc.trajectory.s2) >= -1e-6


def test_uncertified_run_needs_formal(motor):
    cert = check_theorem_form(motor, "hold_electrical")
    with pytest.raises(ValueError):
        constrained_simulate_y1(motor, cert, [1.0], None, [1.0, 0.0], (0.0, 1.0))
    tr = constrained_simulate_y1(motor, cert, [1.0], None, [1.0, 0.0], (0.0, 1.0), formal=True)
    assert tr.meta["certified"] is False


def test_drift_alarm(gas):
    # without projection and with a coarse step the held temperature drifts
    sig = FourierSignal([0.0], [[0.0]], [[30.0]], 0.1)
    with pytest.raises(DriftAlarm):
        simulate_hold_effort(gas, "hold_thermal", [300.0], sig, gas.nominal, (0.0, 0.1),
                             IntegratorOptions(step=0.02), project=False)


def test_hold_singular_feedback():
    spring = make_model("spring")
    with pytest.raises(SingularHessian):
        simulate_hold_effort(spring, "hold_stiffness_port", [0.1], None, [0.5, 2.0], (0.0, 1.0))


def test_isentropic_run(gas):
    sig = FourierSignal([0.0], [[0.0]], [[0.8]], 1.0)
    S = gas.nominal[1]
    tr = constrained_simulate_x1(gas, "hold_thermal", [S], sig, gas.nominal, (0.0, 1.0))
    np.testing.assert_array_equal(tr.states[:, 1], S)
    np.testing.assert_allclose(tr.storage_rate, tr.s2, atol=1e-9)
    with pytest.raises(ValueError):
        constrained_simulate_x1(gas, "hold_thermal", [S + 1.0], sig, gas.nominal, (0.0, 1.0))


def test_frozen_lossless_storage_constant(inductors):
    x0 = np.array([0.3, -0.2])
    tr = constrained_simulate_x1(inductors, "hold_primary", [0.3], None, x0, (0.0, 1.0))
    np.testing.assert_allclose(tr.h_star, tr.h_star[0], atol=1e-15)


def test_exchanger_hold_cold_inequality(exchanger):
    x0 = np.array([300.0, 350.0])
    sig = FourierSignal([0.5], [[0.3]], [[0.2]], 1e-3)
    tr = constrained_simulate_x1(exchanger, "hold_cold", [300.0], sig, x0, (0.0, 1e-3),
                                 IntegratorOptions(step=1e-6))
    assert np.all(tr.storage_rate <= tr.s2 + 1e-9)


def test_exchanger_hold_hot_creation_term(exchanger):
    prm = HeatExchangerParams()
    x0 = np.array([300.0, 350.0])
    sig = FourierSignal([0.5], [[0.3]], [[0.2]], 1e-3)
    tr = constrained_simulate_x1(exchanger, "hold_hot", [350.0], sig, x0, (0.0, 1e-3),
                                 IntegratorOptions(step=1e-6))
    rate = np.array([transfer_rate(prm, x) for x in tr.states])
    assert np.all(rate > 0)
    np.testing.assert_allclose(tr.storage_rate - tr.s2, rate, atol=1e-8)


def test_equilibrium_cycle_closes(motor):
    prm = CycleParams(FourierSignal([0.0, 0.0]), np.zeros(2), correct=False)
    cyc = close_cycle(motor, "free", prm)
    assert cyc.defect == 0.0


def test_motor_steady_cycle(motor):
    # I = 1, omega = 0.5 sustained by tau = b*omega - K*I = -0.5
    sig = FourierSignal([-0.5], period=1.0)
    prm = CycleParams(sig, np.array([1.0, 0.5]), "hold_electrical", [1.0], correct=False)
    cyc = close_cycle(motor, "y1", prm)
    assert cyc.defect < 1e-12
    assert _trapz(cyc.trajectory.times, cyc.trajectory.s2) == pytest.approx(-0.25, abs=1e-12)


def test_gas_isothermal_closure_correction(gas):
    sig = FourierSignal([0.05], [[0.2]], [[0.7]], 1.0)
    prm = CycleParams(sig, gas.nominal.copy(), "hold_thermal", [300.0], steps=500)
    cyc = close_cycle(gas, "y1", prm)
    assert cyc.defect <= 1e-8
    assert cyc.trajectory.meta["closure_defect"] == cyc.defect

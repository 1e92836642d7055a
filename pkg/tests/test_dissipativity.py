import numpy as np
import pytest

from cyclopass.dissipativity import (
    CycleWitness,
    NotFound,
    SearchOptions,
    StorageSearchOptions,
    cyclic_supply,
    estimate_storage_bounds,
    falsify_one_port,
    verify_storage,
)
from cyclopass.models.gas import IdealGasParams, helmholtz
from cyclopass.simulate import CycleParams, FourierSignal, close_cycle, constrained_simulate_y1, integrate
from cyclopass.structure import check_theorem_form


def test_lossless_equality(inductors):
    sig = FourierSignal([0.1, 0.0], [[0.3], [0.1]], [[0.0], [-0.2]], 1.0)
    tr = integrate(inductors, [0.2, -0.1], sig, (0.0, 1.0))
    rep = verify_storage(tr, "H")
    assert rep.ok
    assert abs(rep.final_margin) <= 1e-6 * max(1.0, abs(tr.h[-1] - tr.h[0]))


def test_motor_decay_margin(motor):
    tr = integrate(motor, [1.0, -0.5], None, (0.0, 3.0))
    rep = verify_storage(tr, "H")
    assert rep.ok and rep.final_margin > 0.1


def test_wrong_storage_is_rejected(motor):
    # -H is not a storage function for a dissipative decay
    tr = integrate(motor, [1.0, -0.5], None, (0.0, 3.0))
    rep = verify_storage(tr, lambda x: -motor.hamiltonian(x))
    assert not rep.ok
    assert rep.t1 < rep.t2


def test_gas_helmholtz_handle(gas):
    prm = IdealGasParams()
    cert = check_theorem_form(gas, "hold_thermal")
    sig = FourierSignal([0.0], [[0.0]], [[0.8]], 1.0)
    tr = constrained_simulate_y1(gas, cert, [300.0], sig, gas.nominal, (0.0, 1.0))
    rep = verify_storage(tr, lambda x: helmholtz(prm, x[0], 300.0), supply="s2")
    assert rep.ok and abs(rep.final_margin) < 1e-6
    assert verify_storage(tr).ok


def test_storage_needs_hstar(motor):
    tr = integrate(motor, [1.0, 0.0], None, (0.0, 1.0))
    with pytest.raises(ValueError):
        verify_storage(tr)


def test_equilibrium_cycle_supply(motor):
    cyc = close_cycle(motor, "free", CycleParams(FourierSignal([0.0, 0.0]), np.zeros(2), correct=False))
    assert tuple(cyclic_supply(cyc.trajectory)) == (0.0, 0.0, 0.0)


def test_motor_steady_cycle_supply(motor):
    prm = CycleParams(FourierSignal([-0.5]), np.array([1.0, 0.5]), "hold_electrical", [1.0], correct=False)
    s1, s2, defect = cyclic_supply(close_cycle(motor, "y1", prm).trajectory)
    assert s2 == pytest.approx(-0.25, abs=1e-12)
    assert defect < 1e-12


def test_gas_cycle_first_law(gas):
    sig = FourierSignal([0.05], [[0.2]], [[0.7]], 1.0)
    cyc = close_cycle(gas, "y1", CycleParams(sig, gas.nominal.copy(), "hold_thermal", [300.0], steps=500))
    s1, s2, defect = cyclic_supply(cyc.trajectory)
    assert abs(s2) < 1e-6
    assert s1 == pytest.approx(-s2, abs=1e-6)


def test_motor_witness(motor):
    w = falsify_one_port(motor, "hold_electrical", [1.0], SearchOptions(period=1.0, restarts=1, max_evals=80))
    assert isinstance(w, CycleWitness) and w.found
    assert w.integrated_supply <= -0.2
    assert w.closure_defect <= 1e-6
    assert w.half_step_supply < -w.eps_w / 2
    d = w.to_dict()
    assert d["result"] == "witness" and d["integrated_supply"] == w.integrated_supply


def test_lossless_port_not_found(inductors):
    res = falsify_one_port(inductors, "hold_primary", [2.0], SearchOptions(restarts=1, max_evals=60))
    assert isinstance(res, NotFound) and not res.found
    assert res.best_value >= -1e-6
    assert "no passivity claim" in res.to_dict()["note"]


def test_search_is_deterministic(motor):
    opts = SearchOptions(restarts=2, max_evals=40, seed=3, stop_on_witness=False)
    a = falsify_one_port(motor, "hold_electrical", [1.0], opts).to_dict()
    b = falsify_one_port(motor, "hold_electrical", [1.0], opts).to_dict()
    assert a == b


def test_x1_mode_search(exchanger):
    opts = SearchOptions(restarts=1, max_evals=20, harmonics=1, period=1e-3, amplitude=0.2)
    res = falsify_one_port(exchanger, "hold_cold", [300.0], opts, mode="x1", x0=[300.0, 350.0])
    assert res.evaluations >= 20
    assert res.mode == "x1"
    if res.found:
        assert res.trajectory.states[:, 0].min() == res.trajectory.states[:, 0].max() == 300.0


def test_storage_bounds_lossless(inductors):
    g = np.linspace(-1.0, 1.0, 3)
    grid = np.array([[a, b] for a in g for b in g])
    est = estimate_storage_bounds(inductors, [0.0, 0.0], grid, search_opts=StorageSearchOptions(restarts=1, max_evals=40))
    H = np.array([inductors.hamiltonian(x) for x in grid])
    assert est.reachable_ac.all() and est.reachable_rc.all()
    np.testing.assert_allclose(est.s_ac_values, H, rtol=0.02, atol=1e-6)
    np.testing.assert_allclose(est.s_rc_values, H, rtol=0.02, atol=1e-6)
    centre = 4
    assert abs(est.s_ac_values[centre]) < 1e-6 and abs(est.s_rc_values[centre]) < 1e-6


def test_available_storage_below_energy(motor):
    grid = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, -0.5]])
    est = estimate_storage_bounds(motor, [0.0, 0.0], grid, search_opts=StorageSearchOptions(restarts=1, max_evals=60))
    H = np.array([motor.hamiltonian(x) for x in grid])
    assert np.all(est.s_ac_values <= H + 1e-6)
    assert np.all(est.s_ac_values <= est.s_rc_values)

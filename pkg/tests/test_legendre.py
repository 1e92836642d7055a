import numpy as np
import pytest

from cyclopass.core import PortHamiltonianSystem, StatePartition
from cyclopass.errors import NoConvergence, SingularHessian
from cyclopass.legendre import (
    block_condition,
    double_transform,
    partial_legendre,
    solve_x1,
    storage_function,
    verify_legendre_identities,
)
from cyclopass.models import make_model
from cyclopass.models.gas import IdealGasParams, entropy_at, helmholtz, pressure
from cyclopass.models.inductors import InductorParams, primary_storage_coefficients
from cyclopass.models.microphone import MicrophoneParams, mechanical_storage


@pytest.fixture(scope="module")
def quadratic():
    part = StatePartition((0,), (1,), (0,), (1,), "split")
    return PortHamiltonianSystem.from_linear(
        "quadratic", np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2),
        partitions={"split": part})


def test_quadratic_value(quadratic):
    res = partial_legendre(quadratic, "split", [2.0], [3.0])
    assert res.x1_solved[0] == pytest.approx(2.0, abs=1e-12)
    assert res.value == pytest.approx(2.5, abs=1e-12)


def test_quadratic_identities(quadratic):
    rep = verify_legendre_identities(quadratic, "split", [2.0], [3.0])
    assert rep.grad_e1[0] == pytest.approx(-2.0, abs=1e-8)
    assert rep.max_error <= 1e-8


def test_quadratic_double_transform(quadratic):
    assert double_transform(quadratic, "split", [2.0], [3.0]) == pytest.approx(6.5, abs=1e-10)


def test_inductor_coefficient(inductors):
    a, b, c = primary_storage_coefficients(InductorParams())
    assert a == pytest.approx(-0.375)
    # fit the quadratic numerically
    f = storage_function(inductors, "hold_primary", [0.0])
    assert f([1.0]) == pytest.approx(c, rel=1e-12)
    val = partial_legendre(inductors, "hold_primary", [1.0], [0.0]).value
    assert val == pytest.approx(-0.375, rel=1e-10)


def test_inductor_double_transform(inductors):
    x = np.array([1.0, 1.0])
    assert double_transform(inductors, "hold_primary", x[:1], x[1:]) == pytest.approx(
        inductors.hamiltonian(x), rel=1e-10)


def test_spring_stiffness_transform_is_singular():
    spring = make_model("spring")
    with pytest.raises(SingularHessian) as err:
        partial_legendre(spring, "hold_stiffness_port", [0.3], [0.5])
    assert err.value.condition > 1e12


def test_spring_force_transform_closed_form(rng):
    spring = make_model("spring")
    for _ in range(10):
        F, k = rng.uniform(-2, 2), rng.uniform(0.5, 4)
        val = partial_legendre(spring, "hold_force", [F], [k]).value
        assert val == pytest.approx(-F * F / (2 * k), abs=1e-10)


def test_gas_free_energy_gradient(gas):
    prm = IdealGasParams()
    rep = verify_legendre_identities(gas, "hold_thermal", [300.0], [2.0])
    S = entropy_at(prm, 2.0, 300.0)
    assert rep.grad_x2[0] == pytest.approx(-pressure(prm, [2.0, S]), rel=1e-5)
    # the free energy itself, with zero constants
    val = partial_legendre(gas, "hold_thermal", [300.0], [2.0]).value
    assert val == pytest.approx(helmholtz(prm, 2.0, 300.0), rel=1e-10)


def test_sync_machine_identities(rng):
    sm = make_model("sync_machine")
    for _ in range(3):
        x2 = np.concatenate([rng.uniform(-0.5, 0.5, 3), [rng.uniform(-1, 1)], [rng.uniform(0, 2 * np.pi)]])
        I_s = rng.uniform(-0.5, 0.5, 3)
        rep = verify_legendre_identities(sm, "hold_stator", I_s, x2)
        assert rep.max_error <= 1e-5


def test_microphone_double_transform(microphone, rng):
    for _ in range(5):
        x = np.array([rng.uniform(-0.1, 0.1), rng.uniform(-1, 1), rng.uniform(0.2, 2)])
        p = microphone.partition("hold_electrical")
        val = double_transform(microphone, p, x[[2]], x[[0, 1]])
        assert val == pytest.approx(microphone.hamiltonian(x), rel=1e-8)


def test_microphone_mechanical_storage(microphone, rng):
    prm = MicrophoneParams()
    for V in (0.0, 1.3):
        q, mom = rng.uniform(-0.1, 0.1), rng.uniform(-1, 1)
        val = partial_legendre(microphone, "hold_electrical", [V], [q, mom]).value
        assert val == pytest.approx(mechanical_storage(prm, q, mom, V), abs=1e-10)
    assert mechanical_storage(prm, 0.1, 0.5, 0.0) == pytest.approx(0.5 * 0.01 + 0.125)


def test_block_condition():
    assert block_condition(np.zeros((1, 1))) == np.inf
    assert block_condition(np.diag([1.0, 4.0])) == pytest.approx(4.0)


def test_newton_outside_domain(gas):
    with pytest.raises(NoConvergence):
        solve_x1(gas, "hold_mechanical", [-1.0], [gas.nominal[1]], x1_guess=[-1.0])

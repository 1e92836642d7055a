"""Ideal gas with volume and entropy as state.

The internal energy is

    E(V, S) = C_V exp((S - a) / C_V) V^(-R/C_V) + W,

so that T = dE/dS = (E - W)/C_V and P = -dE/dV = R T / V. The volume
exponent is a power law: written as an exponential in V the ideal-gas law
would only hold for R = C_V.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..core import PortHamiltonianSystem, StatePartition, StructureFlags
from ..errors import EvaluationError


@dataclass(frozen=True)
class IdealGasParams:
    C_V: float = 12.471  # J/K, monatomic gas, one mole
    R_gas: float = 8.314  # J/K
    a: float = 0.0  # entropy constant, J/K
    W: float = 0.0  # J

    def __post_init__(self):
        if not (self.C_V > 0 and self.R_gas > 0):
            raise ValueError("ideal gas needs C_V > 0 and R_gas > 0")


def _thermal(params, x):
    V, S = float(x[0]), float(x[1])
    if not V > 0 or not math.isfinite(S):
        raise EvaluationError(f"ideal gas: invalid state V={V}, S={S}", component=0)
    try:
        e0 = params.C_V * math.exp((S - params.a) / params.C_V - params.R_gas / params.C_V * math.log(V))
    except OverflowError:
        raise EvaluationError("ideal gas: energy overflow", component=1) from None
    return V, e0


def temperature(params: IdealGasParams, x) -> float:
    _, e0 = _thermal(params, x)
    return e0 / params.C_V


def pressure(params: IdealGasParams, x) -> float:
    V, e0 = _thermal(params, x)
    return params.R_gas * e0 / (params.C_V * V)


def entropy_at(params: IdealGasParams, V, T) -> float:
    """Entropy of the state with volume V and temperature T."""
    return params.C_V * np.log(T) + params.R_gas * np.log(V) + params.a


def helmholtz(params: IdealGasParams, V, T) -> float:
    """Closed-form free energy F(V, T) = C_V T + W - T (C_V ln T + R ln V + a)."""
    return params.C_V * T + params.W - T * entropy_at(params, V, T)


def make_ideal_gas(params: IdealGasParams = IdealGasParams(), T_nominal=300.0, V_nominal=2.0):
    p = params
    c, r = p.C_V, p.R_gas

    def hamiltonian(x):
        return _thermal(p, x)[1] + p.W

    def gradient(x):
        V, e0 = _thermal(p, x)
        return np.array([-r * e0 / (c * V), e0 / c])

    def hessian(x):
        V, e0 = _thermal(p, x)
        hvv = (r / c) * (r / c + 1.0) * e0 / V**2
        hvs = -r * e0 / (c * c * V)
        hss = e0 / (c * c)
        return np.array([[hvv, hvs], [hvs, hss]])

    zero = np.zeros((2, 2))
    eye = np.eye(2)
    partitions = {
        # hold the temperature, ask for cyclo-passivity at the mechanical port
        "hold_thermal": StatePartition((1,), (0,), (1,), (0,), "hold_thermal",
                                       "T held constant; mechanical port (u_V, -P)"),
        "hold_mechanical": StatePartition((0,), (1,), (0,), (1,), "hold_mechanical",
                                          "P held constant; thermal port (u_S, T)"),
    }
    ok = StructureFlags(True, True, True, True, True)
    nominal = np.array([V_nominal, entropy_at(p, V_nominal, T_nominal)])
    return PortHamiltonianSystem(
        name="ideal_gas", n=2, m=2,
        hamiltonian=hamiltonian, gradient=gradient, hessian=hessian,
        j_matrix=lambda x: zero, g_matrix=lambda x: eye, r_matrix=lambda x: zero,
        partitions=partitions, flags={k: ok for k in partitions},
        nominal=nominal, sample_radius=1.0, g_constant=True,
        state_names=("V", "S"), input_names=("u_V", "u_S"), output_names=("-P", "T"),
        params={"C_V": c, "R_gas": r, "a": p.a, "W": p.W},
    )

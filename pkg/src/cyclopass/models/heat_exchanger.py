"""Single-compartment heat exchanger as an irreversible port-Hamiltonian system.

State x = (H_c, H_h), Hamiltonian H = H_c + H_h. Temperatures use the linear
calorific closure T_i = H_i / (rho_i V c_p,i). The internal exchange is the
entropy-modulated skew term lam (1/T_c - 1/T_h) [[0, 1], [-1, 0]] dH/dx.
"""

from dataclasses import dataclass

import numpy as np

from ..core import PortHamiltonianSystem, StatePartition, StructureFlags
from ..errors import EvaluationError

_SKEW = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class HeatExchangerParams:
    rho_c: float = 1.0
    rho_h: float = 1.0
    V_comp: float = 1.0
    c_pc: float = 1.0
    c_ph: float = 1.0
    lam: float = 1.0e4  # W K
    H_in_c: float = 280.0
    H_in_h: float = 400.0

    def __post_init__(self):
        if not all(v > 0 for v in (self.rho_c, self.rho_h, self.V_comp, self.c_pc, self.c_ph)):
            raise ValueError("densities, volume and heat capacities must be positive")
        if self.lam < 0:
            raise ValueError("heat transfer coefficient must be non-negative")


def temperatures(params: HeatExchangerParams, x):
    Hc, Hh = float(x[0]), float(x[1])
    if not (Hc > 0 and Hh > 0):
        raise EvaluationError(f"heat exchanger: enthalpies must be positive, got {x}")
    return (Hc / (params.rho_c * params.V_comp * params.c_pc),
            Hh / (params.rho_h * params.V_comp * params.c_ph))


def transfer_rate(params: HeatExchangerParams, x) -> float:
    """lam (1/T_c - 1/T_h): positive when the cold stream is colder."""
    Tc, Th = temperatures(params, x)
    return params.lam * (1.0 / Tc - 1.0 / Th)


def make_heat_exchanger(params: HeatExchangerParams = HeatExchangerParams(),
                        nominal=(300.0, 350.0)):
    p = params

    def j_matrix(x):
        return transfer_rate(p, x) * _SKEW

    def g_matrix(x):
        return np.array([[-x[0] + p.H_in_c, 0.0], [0.0, -x[1] + p.H_in_h]])

    def gradient(x):
        temperatures(p, x)
        return np.ones(2)

    zero = np.zeros((2, 2))
    partitions = {
        "hold_cold": StatePartition((0,), (1,), (0,), (1,), "hold_cold",
                                    "H_c held constant; hot stream port (u_h, y_h)"),
        "hold_hot": StatePartition((1,), (0,), (1,), (0,), "hold_hot",
                                   "H_h held constant; cold stream port (u_c, y_c)"),
    }
    fl = StructureFlags(j_block_diagonal=False, r_blockwise=True, g1_constant_invertible=False,
                        g_block_diagonal=True, h11_full_rank=False)
    return PortHamiltonianSystem(
        name="heat_exchanger", n=2, m=2,
        hamiltonian=lambda x: float(x[0] + x[1]), gradient=gradient, hessian=lambda x: zero,
        j_matrix=j_matrix, g_matrix=g_matrix, r_matrix=lambda x: zero,
        partitions=partitions, flags={k: fl for k in partitions},
        nominal=np.array(nominal, dtype=float),
        state_names=("H_c", "H_h"), input_names=("u_c", "u_h"), output_names=("y_c", "y_h"),
        params={"rho_c": p.rho_c, "rho_h": p.rho_h, "V_comp": p.V_comp, "c_pc": p.c_pc,
                "c_ph": p.c_ph, "lam": p.lam, "H_in_c": p.H_in_c, "H_in_h": p.H_in_h},
    )

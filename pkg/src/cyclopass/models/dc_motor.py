"""Permanent-magnet DC motor with flux linkage and angular momentum as state."""

from dataclasses import dataclass

import numpy as np

from ..core import PortHamiltonianSystem, StatePartition, StructureFlags


@dataclass(frozen=True)
class DCMotorParams:
    L: float = 1.0  # H
    J_rot: float = 1.0  # kg m^2
    K: float = 1.0  # N m / A, gyration constant
    b: float = 1.0  # N m s
    R_e: float = 1.0  # Ohm

    def __post_init__(self):
        if not (self.L > 0 and self.J_rot > 0):
            raise ValueError("DC motor needs L > 0 and J_rot > 0")
        if self.b < 0 or self.R_e < 0:
            raise ValueError("DC motor needs b >= 0 and R_e >= 0")


def equilibrium_inputs(params: DCMotorParams, current, speed):
    """Inputs (V, tau) that hold the motor at constant (I, omega)."""
    return (params.K * speed + params.R_e * current, params.b * speed - params.K * current)


def make_dc_motor(params: DCMotorParams = DCMotorParams()):
    p = params
    Q = np.diag([1.0 / p.L, 1.0 / p.J_rot])
    J = np.array([[0.0, -p.K], [p.K, 0.0]])
    R = np.diag([p.R_e, p.b])
    partitions = {
        "hold_electrical": StatePartition((0,), (1,), (0,), (1,), "hold_electrical",
                                          "I held constant; mechanical port (tau, omega)"),
        "hold_mechanical": StatePartition((1,), (0,), (1,), (0,), "hold_mechanical",
                                          "omega held constant; electrical port (V, I)"),
    }
    flags = StructureFlags(j_block_diagonal=(p.K == 0.0), r_blockwise=True,
                           g1_constant_invertible=True, g_block_diagonal=True, h11_full_rank=True)
    return PortHamiltonianSystem.from_linear(
        "dc_motor", Q, J, R, np.eye(2),
        partitions=partitions, flags={k: flags for k in partitions},
        state_names=("phi", "p"), input_names=("V", "tau"), output_names=("I", "omega"),
        params={"L": p.L, "J_rot": p.J_rot, "K": p.K, "b": p.b, "R_e": p.R_e},
    )

"""Two magnetically coupled inductors (non-ideal transformer)."""

from dataclasses import dataclass

import numpy as np

from ..core import PortHamiltonianSystem, StatePartition, StructureFlags


@dataclass(frozen=True)
class InductorParams:
    L1: float = 1.0
    L2: float = 1.0
    M: float = 0.5

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise ValueError("inductances must be positive")
        if abs(self.M) >= np.sqrt(self.L1 * self.L2):
            raise ValueError("|M| >= sqrt(L1 L2): perfect or over-coupling is not allowed")


def primary_storage_coefficients(params: InductorParams):
    """Coefficients (a, b, c) of H1*(I1, psi2) = a I1^2 + b I1 psi2 + c psi2^2."""
    L1, L2, M = params.L1, params.L2, params.M
    return (M * M - L1 * L2) / (2.0 * L2), -M / L2, 1.0 / (2.0 * L2)


def make_coupled_inductors(params: InductorParams = InductorParams()):
    p = params
    Lmat = np.array([[p.L1, p.M], [p.M, p.L2]])
    partitions = {
        "hold_primary": StatePartition((0,), (1,), (0,), (1,), "hold_primary",
                                       "I1 held constant; secondary port (V2, I2)"),
        "hold_secondary": StatePartition((1,), (0,), (1,), (0,), "hold_secondary",
                                         "I2 held constant; primary port (V1, I1)"),
    }
    ok = StructureFlags(True, True, True, True, True)
    return PortHamiltonianSystem.from_linear(
        "coupled_inductors", np.linalg.inv(Lmat), np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2),
        partitions=partitions, flags={k: ok for k in partitions},
        state_names=("psi1", "psi2"), input_names=("V1", "V2"), output_names=("I1", "I2"),
        params={"L1": p.L1, "L2": p.L2, "M": p.M},
    )

"""Capacitor microphone with position-dependent capacitance.

The capacitance follows a logistic profile

    C(q) = C_min + (C_max - C_min) / (1 + exp(q / d)),

which is bounded, strictly decreasing in q and has C'(q) != 0 everywhere.
"""

from dataclasses import dataclass

import numpy as np

from ..core import PortHamiltonianSystem, StatePartition, StructureFlags


@dataclass(frozen=True)
class MicrophoneParams:
    m: float = 1.0
    k: float = 1.0
    b: float = 0.5
    R_e: float = 10.0
    C_min: float = 0.5
    C_max: float = 1.5
    d: float = 0.05

    def __post_init__(self):
        if not all(v > 0 for v in (self.m, self.k, self.b, self.R_e, self.C_min, self.d)):
            raise ValueError("microphone parameters must be positive")
        if not self.C_max > self.C_min:
            raise ValueError("need C_max > C_min")

    @property
    def kappa(self) -> float:
        return self.C_max


def capacitance(params: MicrophoneParams, q):
    """Return C(q), C'(q), C''(q)."""
    z = -np.asarray(q, dtype=float) / params.d
    s = 0.5 * (1.0 + np.tanh(0.5 * z))  # logistic, overflow-free
    dC = params.C_max - params.C_min
    c0 = params.C_min + dC * s
    c1 = -dC * s * (1.0 - s) / params.d
    c2 = dC * s * (1.0 - s) * (1.0 - 2.0 * s) / params.d**2
    return c0, c1, c2


def make_microphone(params: MicrophoneParams = MicrophoneParams()):
    p = params
    J = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    R = np.diag([0.0, p.b, 1.0 / p.R_e])
    G = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def hamiltonian(x):
        q, mom, Q = x
        C, _, _ = capacitance(p, q)
        return 0.5 * p.k * q * q + 0.5 * mom * mom / p.m + 0.5 * Q * Q / C

    def gradient(x):
        q, mom, Q = x
        C, C1, _ = capacitance(p, q)
        return np.array([p.k * q - 0.5 * Q * Q * C1 / C**2, mom / p.m, Q / C])

    def hessian(x):
        q, _, Q = x
        C, C1, C2 = capacitance(p, q)
        hqq = p.k - 0.5 * Q * Q * (C2 / C**2 - 2.0 * C1 * C1 / C**3)
        hqQ = -Q * C1 / C**2
        return np.array([[hqq, 0.0, hqQ], [0.0, 1.0 / p.m, 0.0], [hqQ, 0.0, 1.0 / C]])

    partitions = {
        "hold_electrical": StatePartition((2,), (0, 1), (1,), (0,), "hold_electrical",
                                          "V held constant; mechanical port (F, v)"),
        "hold_mechanical": StatePartition((1,), (0, 2), (0,), (1,), "hold_mechanical",
                                          "v held constant; electrical port (I, V)"),
    }
    return PortHamiltonianSystem(
        name="microphone", n=3, m=2,
        hamiltonian=hamiltonian, gradient=gradient, hessian=hessian,
        j_matrix=lambda x: J, g_matrix=lambda x: G, r_matrix=lambda x: R,
        partitions=partitions,
        flags={
            "hold_electrical": StructureFlags(True, True, True, True, True),
            "hold_mechanical": StructureFlags(False, True, True, True, True),
        },
        nominal=np.array([0.0, 0.0, 1.0]), g_constant=True,
        state_names=("q", "p", "Q"), input_names=("F", "I"), output_names=("v", "V"),
        params={"m": p.m, "k": p.k, "b": p.b, "R_e": p.R_e, "C_min": p.C_min,
                "C_max": p.C_max, "d": p.d},
    )


def mechanical_storage(params: MicrophoneParams, q, mom, V):
    """Closed-form transform with respect to Q at capacitor voltage V."""
    C, _, _ = capacitance(params, q)
    return 0.5 * params.k * q * q + 0.5 * mom * mom / params.m - 0.5 * C * V * V

"""Linear spring with adjustable stiffness: H(q, k) = k q^2 / 2."""

import numpy as np

from ..core import PortHamiltonianSystem, StatePartition, StructureFlags


def make_spring(q_nominal=0.5, k_nominal=2.0):
    zero = np.zeros((2, 2))
    eye = np.eye(2)

    def hamiltonian(x):
        return 0.5 * x[1] * x[0] ** 2

    def gradient(x):
        return np.array([x[1] * x[0], 0.5 * x[0] ** 2])

    def hessian(x):
        return np.array([[x[1], x[0]], [x[0], 0.0]])

    partitions = {
        # hold F, one-port question at the stiffness port (u, y)
        "hold_force": StatePartition((0,), (1,), (0,), (1,), "hold_force",
                                     "F held constant; stiffness port (u, y)"),
        "hold_stiffness_port": StatePartition((1,), (0,), (1,), (0,), "hold_stiffness_port",
                                              "y held constant; force port (v, F)"),
    }
    ok = StructureFlags(True, True, True, True, True)
    singular = StructureFlags(True, True, True, True, h11_full_rank=False)
    return PortHamiltonianSystem(
        name="spring", n=2, m=2,
        hamiltonian=hamiltonian, gradient=gradient, hessian=hessian,
        j_matrix=lambda x: zero, g_matrix=lambda x: eye, r_matrix=lambda x: zero,
        partitions=partitions, flags={"hold_force": ok, "hold_stiffness_port": singular},
        nominal=np.array([q_nominal, k_nominal]), g_constant=True,
        state_names=("q", "k"), input_names=("v", "u"), output_names=("F", "y"),
    )


def force_storage(F, k):
    """Closed-form transform with respect to q: H*(F, k) = -F^2 / (2k)."""
    return -0.5 * F * F / k

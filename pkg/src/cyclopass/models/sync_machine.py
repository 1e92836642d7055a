"""Synchronous machine in phase coordinates and in dq coordinates.

The 6x6 inductance matrix L(theta) of the stator (a, b, c) and rotor
(field f, d-damper D, q-damper Q) windings uses the salient-pole template

    L_ss[j, k] = L_l delta_jk + L_A cos(a_j - a_k) + L_B cos(2 theta - a_j - a_k)
    L_sr[k]    = (M_f cos(theta - a_k), M_D cos(theta - a_k), M_Q sin(theta - a_k))
    L_rr       = [[L_f, L_fD, 0], [L_fD, L_D, 0], [0, 0, L_Q]]

with phase offsets a = (0, 2 pi/3, -2 pi/3). With these offsets the
Blondel-Park matrix below maps L(theta) to a constant matrix in which the
zero-sequence flux decouples with inductance L_l.
"""

from dataclasses import dataclass, field

import numpy as np

from ..core import PortHamiltonianSystem, StatePartition, StructureFlags

PHASES = np.array([0.0, 2.0 * np.pi / 3.0, -2.0 * np.pi / 3.0])
_SQ23 = np.sqrt(2.0 / 3.0)


@dataclass(frozen=True)
class SyncMachineParams:
    L_l: float = 0.1
    L_A: float = 1.0
    L_B: float = 0.2
    M_f: float = 0.8
    M_D: float = 0.6
    M_Q: float = 0.5
    L_f: float = 1.2
    L_D: float = 1.0
    L_fD: float = 0.6
    L_Q: float = 0.8
    R_s: tuple = (0.05, 0.05, 0.05)
    R_r: tuple = (0.1, 0.2, 0.2)
    J_r: float = 1.0
    b: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "R_s", tuple(float(v) for v in np.broadcast_to(self.R_s, 3)))
        object.__setattr__(self, "R_r", tuple(float(v) for v in np.broadcast_to(self.R_r, 3)))
        if min(self.R_s) <= 0 or min(self.R_r) <= 0:
            raise ValueError("winding resistances must be positive")
        if not (self.J_r > 0 and self.b >= 0):
            raise ValueError("need J_r > 0 and b >= 0")


def blondel_park(theta) -> np.ndarray:
    """Orthogonal dq0 transformation matrix T_dq0(theta)."""
    ang = theta - PHASES
    return _SQ23 * np.vstack([np.cos(ang), np.sin(ang), np.full(3, 1.0 / np.sqrt(2.0))])


def transform_state(x8, theta=None):
    """Map (psi_s, psi_r, p, theta) to the dq state (psi_d, psi_q, psi_r, p) and psi_0."""
    x8 = np.asarray(x8, dtype=float)
    th = x8[7] if theta is None else theta
    pdq0 = blondel_park(th) @ x8[:3]
    return np.concatenate([pdq0[:2], x8[3:6], [x8[6]]]), float(pdq0[2])


def transform_inputs(V_s, theta):
    return blondel_park(theta) @ np.asarray(V_s, dtype=float)


def transform_outputs(I_s, theta):
    # T is orthogonal, so T^{-T} = T
    return blondel_park(theta) @ np.asarray(I_s, dtype=float)


def inductance(params: SyncMachineParams, theta, order=0) -> np.ndarray:
    """L(theta) or its first/second derivative with respect to theta."""
    p = params
    aj = PHASES[:, None]
    ak = PHASES[None, :]
    arg2 = 2.0 * theta - aj - ak
    ang = theta - PHASES
    out = np.zeros((6, 6))
    if order == 0:
        out[:3, :3] = p.L_l * np.eye(3) + p.L_A * np.cos(aj - ak) + p.L_B * np.cos(arg2)
        sr = np.column_stack([p.M_f * np.cos(ang), p.M_D * np.cos(ang), p.M_Q * np.sin(ang)])
        out[3:, 3:] = [[p.L_f, p.L_fD, 0.0], [p.L_fD, p.L_D, 0.0], [0.0, 0.0, p.L_Q]]
    elif order == 1:
        out[:3, :3] = -2.0 * p.L_B * np.sin(arg2)
        sr = np.column_stack([-p.M_f * np.sin(ang), -p.M_D * np.sin(ang), p.M_Q * np.cos(ang)])
    elif order == 2:
        out[:3, :3] = -4.0 * p.L_B * np.cos(arg2)
        sr = np.column_stack([-p.M_f * np.cos(ang), -p.M_D * np.cos(ang), -p.M_Q * np.sin(ang)])
    else:
        raise ValueError("order must be 0, 1 or 2")
    out[:3, 3:] = sr
    out[3:, :3] = sr.T
    return out


def check_positive_definite(params: SyncMachineParams, grid=720):
    """Smallest eigenvalue of L(theta) over a uniform angle grid; raises if not PD."""
    lam_min = min(np.linalg.eigvalsh(inductance(params, th))[0]
                  for th in np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False))
    if lam_min <= 0:
        raise ValueError(f"inductance template is not positive definite (min eig {lam_min:.3g})")
    return lam_min


def dq_inductance(params: SyncMachineParams) -> np.ndarray:
    """Constant 6x6 inductance in (psi_d, psi_q, psi_0, psi_r) coordinates."""
    T = np.eye(6)
    T[:3, :3] = blondel_park(0.0)
    return T @ inductance(params, 0.0) @ T.T


def make_sync_machine(params: SyncMachineParams = SyncMachineParams()):
    """Eight-state machine, state (psi_a, psi_b, psi_c, psi_f, psi_D, psi_Q, p, theta)."""
    pr = params
    check_positive_definite(pr)
    J = np.zeros((8, 8))
    J[6, 7] = -1.0
    J[7, 6] = 1.0
    R = np.diag(list(pr.R_s) + list(pr.R_r) + [pr.b, 0.0])
    G = np.zeros((8, 5))
    G[0:3, 0:3] = np.eye(3)
    G[3, 3] = 1.0
    G[6, 4] = 1.0

    def currents(x):
        L = inductance(pr, x[7])
        return L, np.linalg.solve(L, x[:6])

    def hamiltonian(x):
        _, i = currents(x)
        return 0.5 * float(x[:6] @ i) + 0.5 * x[6] ** 2 / pr.J_r

    def gradient(x):
        _, i = currents(x)
        L1 = inductance(pr, x[7], 1)
        return np.concatenate([i, [x[6] / pr.J_r, -0.5 * float(i @ L1 @ i)]])

    def hessian(x):
        L, i = currents(x)
        Linv = np.linalg.inv(L)
        L1 = inductance(pr, x[7], 1)
        L2 = inductance(pr, x[7], 2)
        Hm = np.zeros((8, 8))
        Hm[:6, :6] = 0.5 * (Linv + Linv.T)
        cross = -Linv @ (L1 @ i)
        Hm[:6, 7] = cross
        Hm[7, :6] = cross
        Hm[6, 6] = 1.0 / pr.J_r
        Hm[7, 7] = float(i @ L1 @ Linv @ L1 @ i) - 0.5 * float(i @ L2 @ i)
        return Hm

    partitions = {
        "hold_stator": StatePartition((0, 1, 2), (3, 4, 5, 6, 7), (0, 1, 2), (3, 4), "hold_stator",
                                      "I_s held constant; field + mechanical ports"),
        "hold_mechanical": StatePartition((6,), (0, 1, 2, 3, 4, 5, 7), (4,), (0, 1, 2, 3),
                                          "hold_mechanical",
                                          "omega held constant; stator + field ports"),
    }
    return PortHamiltonianSystem(
        name="sync_machine", n=8, m=5,
        hamiltonian=hamiltonian, gradient=gradient, hessian=hessian,
        j_matrix=lambda x: J, g_matrix=lambda x: G, r_matrix=lambda x: R,
        partitions=partitions,
        flags={
            "hold_stator": StructureFlags(True, True, True, True, True),
            "hold_mechanical": StructureFlags(False, True, True, True, True),
        },
        nominal=np.array([0.5, -0.3, 0.2, 0.4, 0.1, -0.2, 0.3, 0.7]), g_constant=True,
        state_names=("psi_a", "psi_b", "psi_c", "psi_f", "psi_D", "psi_Q", "p", "theta"),
        input_names=("V_a", "V_b", "V_c", "V_f", "tau"),
        output_names=("I_a", "I_b", "I_c", "I_f", "omega"),
        params={"theta_pd_min_eig": check_positive_definite(pr)},
    )


def make_sync_machine_dq(params: SyncMachineParams = SyncMachineParams()):
    """Six-state dq machine, state (psi_d, psi_q, psi_f, psi_D, psi_Q, p).

    The Hamiltonian omits the zero-sequence energy psi_0^2 / (2 L_l).
    """
    pr = params
    if len(set(pr.R_s)) != 1:
        raise ValueError("dq reduction needs equal stator resistances")
    check_positive_definite(pr)
    Ldq0 = dq_inductance(pr)
    keep = [0, 1, 3, 4, 5]
    Lred = Ldq0[np.ix_(keep, keep)]
    Lred_inv = np.linalg.inv(Lred)
    Lred_inv = 0.5 * (Lred_inv + Lred_inv.T)
    rs = pr.R_s[0]
    R = np.diag([rs, rs] + list(pr.R_r) + [pr.b])
    G = np.zeros((6, 4))
    G[0, 0] = G[1, 1] = 1.0
    G[2, 2] = 1.0
    G[5, 3] = 1.0

    def j_matrix(x):
        J = np.zeros((6, 6))
        J[0, 5] = -x[1]
        J[1, 5] = x[0]
        J[5, 0] = x[1]
        J[5, 1] = -x[0]
        return J

    def hamiltonian(x):
        z = x[:5]
        return 0.5 * float(z @ Lred_inv @ z) + 0.5 * x[5] ** 2 / pr.J_r

    def gradient(x):
        return np.concatenate([Lred_inv @ x[:5], [x[5] / pr.J_r]])

    Hconst = np.zeros((6, 6))
    Hconst[:5, :5] = Lred_inv
    Hconst[5, 5] = 1.0 / pr.J_r

    partitions = {
        "hold_stator": StatePartition((0, 1), (2, 3, 4, 5), (0, 1), (2, 3), "hold_stator",
                                      "I_dq held constant; field + mechanical ports"),
        "hold_mechanical": StatePartition((5,), (0, 1, 2, 3, 4), (3,), (0, 1, 2), "hold_mechanical",
                                          "omega held constant; stator + field ports"),
    }
    fl = StructureFlags(False, True, True, True, True)
    return PortHamiltonianSystem(
        name="sync_machine_dq", n=6, m=4,
        hamiltonian=hamiltonian, gradient=gradient, hessian=lambda x: Hconst,
        j_matrix=j_matrix, g_matrix=lambda x: G, r_matrix=lambda x: R,
        partitions=partitions, flags={k: fl for k in partitions},
        nominal=np.array([1.0, 0.5, 0.4, 0.1, -0.2, 0.3]), g_constant=True,
        state_names=("psi_d", "psi_q", "psi_f", "psi_D", "psi_Q", "p"),
        input_names=("V_d", "V_q", "V_f", "tau"), output_names=("I_d", "I_q", "I_f", "omega"),
        params={"L_dq0": Ldq0.tolist(), "L_l": pr.L_l},
    )

"""Time integration, free and with one port held.

Three modes share one driver:

``free``
    u(t) prescribed for every input channel.
``y1``
    The port-1 effort is held at e1_bar (so y1 = G1^T e1_bar is constant).
    Differentiating e1 along solutions gives H_1. xdot = 0 with H_1. the
    x1-rows of the Hessian; this is linear in u1 and is solved exactly at
    every right-hand-side evaluation. For the block-structured form this
    reduces to xdot_1 = -H11^{-1} H12 xdot_2. The recorded storage is
    H1*(e1_bar, x2) = H - e1_bar^T x1.
``x1``
    u1 cancels the x1 dynamics so that x1 stays at x1_bar; the recorded
    storage is H(x1_bar, x2).

Linear systems (``sys.linear``) with fixed-step RK4 are integrated through
a compiled affine kernel instead of the generic Python loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .core import PortHamiltonianSystem, StatePartition, Trajectory, free_dynamics
from .errors import DimensionError, DriftAlarm, EvaluationError, SingularHessian, StepFailure, TooStiff
from .legendre import SINGULAR_COND, block_condition, solve_x1

DRIFT_TOL = 1e-6


def _well_conditioned(M) -> bool:
    if M.shape[0] != M.shape[1]:
        return False
    if M.shape == (1, 1):
        return np.isfinite(M[0, 0]) and M[0, 0] != 0.0
    return block_condition(M) <= SINGULAR_COND


def _solve_small(M, b):
    """-M^{-1} b, with a scalar shortcut for the common 1x1 case."""
    if M.shape == (1, 1):
        return -b / M[0, 0]
    return -np.linalg.solve(M, b)


@dataclass(frozen=True)
class IntegratorOptions:
    """``step`` defaults to 1e-3 of the time span; ``method`` is ``rk4`` or ``rk45``."""

    step: Optional[float] = None
    method: str = "rk4"
    rtol: float = 1e-8
    atol: float = 1e-8
    min_step: float = 1e-12
    max_steps: int = 10_000_000
    fast: bool = True  # allow the linear-system kernel

    def n_steps(self, span: float) -> int:
        step = 1e-3 * span if self.step is None else self.step
        if not step > 0:
            raise ValueError("integrator step must be positive")
        return max(1, int(math.ceil(span / step - 1e-9)))


class FourierSignal:
    """Periodic input u(t) = c + sum_k a_k cos(2 pi k t/T) + b_k sin(2 pi k t/T).

    ``offset`` has shape (m,), ``cos`` and ``sin`` shape (m, K).
    """

    def __init__(self, offset, cos=None, sin=None, period=1.0):
        self.offset = np.atleast_1d(np.asarray(offset, dtype=float))
        m = self.offset.size
        cos = None if cos is None else np.asarray(cos, dtype=float).reshape(m, -1)
        sin = None if sin is None else np.asarray(sin, dtype=float).reshape(m, -1)
        if cos is None:
            cos = np.zeros((m, 0)) if sin is None else np.zeros_like(sin)
        self.cos = cos
        self.sin = np.zeros_like(cos) if sin is None else sin
        if self.cos.shape != self.sin.shape:
            raise DimensionError("cos and sin coefficient arrays must have equal shapes")
        if not period > 0:
            raise ValueError("period must be positive")
        self.period = float(period)
        self._k = 2.0 * np.pi * np.arange(1, self.cos.shape[1] + 1) / self.period

    @property
    def channels(self) -> int:
        return self.offset.size

    @property
    def harmonics(self) -> int:
        return self.cos.shape[1]

    @classmethod
    def constant(cls, values, period=1.0):
        return cls(values, period=period)

    def __call__(self, t):
        ang = self._k * t
        return self.offset + self.cos @ np.cos(ang) + self.sin @ np.sin(ang)

    def sample(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        ang = np.outer(ts, self._k)
        return self.offset[None, :] + np.cos(ang) @ self.cos.T + np.sin(ang) @ self.sin.T

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.offset, self.cos.ravel(), self.sin.ravel()])

    @classmethod
    def from_vector(cls, v, channels, harmonics, period):
        v = np.asarray(v, dtype=float)
        m, K = channels, harmonics
        return cls(v[:m], v[m:m + m * K].reshape(m, K), v[m + m * K:m + 2 * m * K].reshape(m, K), period)

    def with_offset(self, offset):
        return FourierSignal(offset, self.cos, self.sin, self.period)

    def to_dict(self):
        return {"period": self.period, "offset": self.offset.tolist(),
                "cos": self.cos.tolist(), "sin": self.sin.tolist()}


def _as_signal(sig, width):
    if sig is None:
        return FourierSignal(np.zeros(width))
    if callable(sig):
        return sig
    return FourierSignal(np.broadcast_to(np.asarray(sig, dtype=float), (width,)).copy())


def _sample_signal(sig, ts, width):
    if hasattr(sig, "sample"):
        out = np.asarray(sig.sample(ts), dtype=float)
    else:
        out = np.array([np.atleast_1d(sig(t)) for t in ts], dtype=float)
    return out.reshape(len(ts), width)


class _Loop:
    """Closed-loop right-hand side for one mode."""

    def __init__(self, sys: PortHamiltonianSystem, partition: Optional[StatePartition], mode: str,
                 signal, e1_bar=None, x1_bar=None):
        self.sys = sys
        self.p = partition
        self.mode = mode
        if mode == "free":
            self.signal = _as_signal(signal, sys.m)
        else:
            if partition is None:
                raise ValueError(f"mode {mode!r} needs a partition")
            self.signal = _as_signal(signal, partition.m2)
        self.e1_bar = None if e1_bar is None else np.atleast_1d(np.asarray(e1_bar, dtype=float))
        self.x1_bar = None if x1_bar is None else np.atleast_1d(np.asarray(x1_bar, dtype=float))
        self._e1_scale = 1.0 if self.e1_bar is None else max(1.0, float(np.max(np.abs(self.e1_bar))))
        if partition is not None:
            self.i1, self.i2 = list(partition.x1), list(partition.x2)
            self.q1, self.q2 = list(partition.port1), list(partition.port2)

    def width(self):
        return self.sys.m if self.mode == "free" else self.p.m2

    def evaluate(self, t, x, u_sig=None):
        """Return ``(xdot, u1, u2, e)`` at one point."""
        sys = self.sys
        e = sys.effort(x)
        f = free_dynamics(sys, x, e)
        G = np.asarray(sys.g_matrix(x), dtype=float)
        us = np.atleast_1d(self.signal(t)) if u_sig is None else u_sig
        if self.mode == "free":
            xdot = f + G @ us
            if self.p is None:
                return xdot, us, np.zeros(0), e
            return xdot, us[self.q1], us[self.q2], e
        Gp1 = G[:, self.q1]
        Gp2 = G[:, self.q2]
        u2 = us
        rest = f + Gp2 @ u2
        if self.mode == "y1":
            Hrow = np.asarray(sys.hessian(x), dtype=float)[self.i1, :]
            M = Hrow @ Gp1
            if not _well_conditioned(M):
                raise SingularHessian(f"{sys.name}: output-holding feedback is singular at x={x}")
            u1 = _solve_small(M, Hrow @ rest)
        else:
            S = Gp1[self.i1, :]
            if not _well_conditioned(S):
                raise SingularHessian(f"{sys.name}: G1 is not invertible at x={x}")
            u1 = _solve_small(S, rest[self.i1])
        return rest + Gp1 @ u1, u1, u2, e

    def rhs(self, t, x, u_sig=None):
        return self.evaluate(t, x, u_sig)[0]

    def project(self, x):
        if self.mode == "y1":
            sys, i1 = self.sys, self.i1
            r = np.asarray(sys.gradient(x), dtype=float)[i1] - self.e1_bar
            thresh = 1e-13 + 8.0 * np.finfo(float).eps * self._e1_scale
            if np.max(np.abs(r)) <= thresh:
                return x
            # the drift after one step is tiny: a single Newton step usually suffices
            x = x.copy()
            H11 = np.asarray(sys.hessian(x), dtype=float)[np.ix_(i1, i1)]
            if _well_conditioned(H11):
                x[i1] += _solve_small(H11, r)
                r = np.asarray(sys.gradient(x), dtype=float)[i1] - self.e1_bar
                if np.max(np.abs(r)) <= 1e4 * thresh:
                    return x
            x1, _, _ = solve_x1(sys, self.p, self.e1_bar, x[self.i2], x[i1], tol=1e-13)
            x[i1] = x1
        elif self.mode == "x1":
            x = x.copy()
            x[self.i1] = self.x1_bar
        return x


def _record(loop: _Loop, ts, X, U_sig=None, meta=None) -> Trajectory:
    sys, p = loop.sys, loop.p
    N = len(ts)
    m1 = sys.m if p is None else p.m1
    m2 = 0 if p is None else p.m2
    U1 = np.empty((N, m1))
    U2 = np.empty((N, m2))
    Y1 = np.empty((N, m1))
    Y2 = np.empty((N, m2))
    Hs = np.empty(N)
    rate = np.empty(N)
    diss = np.empty(N)
    hstar = None if loop.mode == "free" else np.empty(N)
    for k in range(N):
        x = X[k]
        xdot, u1, u2, e = loop.evaluate(ts[k], x, None if U_sig is None else U_sig[k])
        y = np.asarray(sys.g_matrix(x), dtype=float).T @ e
        Hs[k] = sys.hamiltonian(x)
        Rv = sys.dissipation_vector(x, e)
        U1[k], U2[k] = u1, u2
        if p is None:
            Y1[k] = y
            rate[k] = e @ xdot
            diss[k] = e @ Rv
        else:
            Y1[k], Y2[k] = y[loop.q1], y[loop.q2]
            if loop.mode == "free":
                rate[k] = e @ xdot
                diss[k] = e @ Rv
            else:
                rate[k] = e[loop.i2] @ xdot[loop.i2]
                diss[k] = e[loop.i2] @ Rv[loop.i2]
        if loop.mode == "y1":
            hstar[k] = Hs[k] - loop.e1_bar @ x[loop.i1]
        elif loop.mode == "x1":
            hstar[k] = Hs[k]
    s1 = np.einsum("ij,ij->i", Y1, U1)
    s2 = np.einsum("ij,ij->i", Y2, U2) if m2 else np.zeros(N)
    meta = dict(meta or {})
    meta.setdefault("mode", loop.mode)
    return Trajectory(times=np.asarray(ts), states=np.asarray(X), u1=U1, u2=U2, y1=Y1, y2=Y2,
                      s1=s1, s2=s2, h=Hs, h_star=hstar, storage_rate=rate, dissipation=diss,
                      partition=p, meta=meta)


def _grid(t_span, opts):
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    n = opts.n_steps(t1 - t0)
    if n > opts.max_steps:
        raise ValueError(f"{n} steps exceed max_steps={opts.max_steps}")
    ts = t0 + (t1 - t0) * np.arange(n + 1) / n
    ts[-1] = t1
    return ts


def _linear_closed_loop(loop: _Loop):
    """Matrices (A_cl, B_cl, Kx, Ku) with xdot = A_cl x + B_cl u and u1 = Kx x + Ku u2."""
    lin = loop.sys.linear
    A = (lin.J - lin.R) @ lin.Q
    G = lin.G
    if loop.mode == "free":
        return A, G, None, None
    Gp1, Gp2 = G[:, loop.q1], G[:, loop.q2]
    if loop.mode == "y1":
        Hrow = lin.Q[loop.i1, :]
        M = Hrow @ Gp1
        if not _well_conditioned(M):
            raise SingularHessian(f"{loop.sys.name}: output-holding feedback is singular")
        Kx = -np.linalg.solve(M, Hrow @ A)
        Ku = -np.linalg.solve(M, Hrow @ Gp2)
    else:
        S = Gp1[loop.i1, :]
        if not _well_conditioned(S):
            raise SingularHessian(f"{loop.sys.name}: G1 is not invertible")
        Kx = -np.linalg.solve(S, A[loop.i1, :])
        Ku = -np.linalg.solve(S, Gp2[loop.i1, :])
    return A + Gp1 @ Kx, Gp2 + Gp1 @ Ku, Kx, Ku


def _record_linear(loop: _Loop, ts, X, U, Kx, Ku, meta) -> Trajectory:
    lin = loop.sys.linear
    p = loop.p
    E = X @ lin.Q.T
    Yall = E @ lin.G
    Rv = E @ lin.R.T
    A = (lin.J - lin.R) @ lin.Q
    if loop.mode == "free":
        Xdot = X @ A.T + U @ lin.G.T
        if p is None:
            U1, U2, Y1, Y2 = U, np.zeros((len(ts), 0)), Yall, np.zeros((len(ts), 0))
        else:
            U1, U2, Y1, Y2 = U[:, loop.q1], U[:, loop.q2], Yall[:, loop.q1], Yall[:, loop.q2]
        rate = np.einsum("ij,ij->i", E, Xdot)
        diss = np.einsum("ij,ij->i", E, Rv)
        hstar = None
    else:
        U2 = U
        U1 = X @ Kx.T + U2 @ Ku.T
        Ufull = np.empty((len(ts), loop.sys.m))
        Ufull[:, loop.q1] = U1
        Ufull[:, loop.q2] = U2
        Xdot = X @ A.T + Ufull @ lin.G.T
        Y1, Y2 = Yall[:, loop.q1], Yall[:, loop.q2]
        rate = np.einsum("ij,ij->i", E[:, loop.i2], Xdot[:, loop.i2])
        diss = np.einsum("ij,ij->i", E[:, loop.i2], Rv[:, loop.i2])
    Hs = 0.5 * np.einsum("ij,ij->i", X, E)
    if loop.mode == "y1":
        hstar = Hs - X[:, loop.i1] @ loop.e1_bar
    elif loop.mode == "x1":
        hstar = Hs.copy()
    s1 = np.einsum("ij,ij->i", Y1, U1)
    s2 = np.einsum("ij,ij->i", Y2, U2) if U2.shape[1] else np.zeros(len(ts))
    meta = dict(meta or {})
    meta.setdefault("mode", loop.mode)
    return Trajectory(times=ts, states=X, u1=U1, u2=U2, y1=Y1, y2=Y2, s1=s1, s2=s2, h=Hs,
                      h_star=hstar, storage_rate=rate, dissipation=diss, partition=p, meta=meta)


def _rk4_generic(loop: _Loop, ts, x0, project):
    X = np.empty((len(ts), x0.size))
    X[0] = x0
    x = x0
    width = loop.width()
    U = _sample_signal(loop.signal, ts, width)
    Um = _sample_signal(loop.signal, 0.5 * (ts[:-1] + ts[1:]), width)
    rhs = loop.rhs
    for k in range(len(ts) - 1):
        t, h = ts[k], ts[k + 1] - ts[k]
        try:
            k1 = rhs(t, x, U[k])
            k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1, Um[k])
            k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2, Um[k])
            k4 = rhs(t + h, x + h * k3, U[k + 1])
        except EvaluationError as exc:
            raise StepFailure(f"{loop.sys.name}: evaluation failed at t={t:.6g}: {exc}") from exc
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(x).all():
            raise StepFailure(f"{loop.sys.name}: non-finite state at t={ts[k + 1]:.6g}")
        if project:
            x = loop.project(x)
        X[k + 1] = x
    return X, U


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _rk45_generic(loop: _Loop, t_span, x0, opts, project):
    t0, t1 = map(float, t_span)
    h = opts.n_steps(t1 - t0) and (1e-3 * (t1 - t0) if opts.step is None else opts.step)
    ts = [t0]
    X = [x0]
    t, x = t0, x0
    while t < t1:
        h = min(h, t1 - t)
        if h < opts.min_step:
            raise TooStiff(f"{loop.sys.name}: step {h:.3g} below {opts.min_step:.3g} at t={t:.6g}")
        try:
            K = []
            for i in range(7):
                xi = x + h * sum(a * K[j] for j, a in enumerate(_DP_A[i])) if i else x
                K.append(loop.rhs(t + _DP_C[i] * h, xi))
        except EvaluationError:
            h *= 0.25
            continue
        K = np.array(K)
        x5 = x + h * (_DP_B5 @ K)
        x4 = x + h * (_DP_B4 @ K)
        scale = opts.atol + opts.rtol * np.maximum(np.abs(x), np.abs(x5))
        err = float(np.sqrt(np.mean(((x5 - x4) / scale) ** 2)))
        if err <= 1.0 and np.all(np.isfinite(x5)):
            t = t1 if t + h >= t1 - 1e-15 * max(1.0, abs(t1)) else t + h
            x = loop.project(x5) if project else x5
            ts.append(t)
            X.append(x)
            if len(ts) > opts.max_steps:
                raise StepFailure("adaptive integration exceeded max_steps")
        fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        if not np.isfinite(err):
            fac = 0.2
        h *= fac
    return np.array(ts), np.array(X)


def _run(loop: _Loop, x0, t_span, opts: Optional[IntegratorOptions], project=False,
         meta=None) -> Trajectory:
    opts = IntegratorOptions() if opts is None else opts
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (loop.sys.n,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({loop.sys.n},)")
    if not np.all(np.isfinite(x0)):
        raise StepFailure("initial state is not finite")
    meta = dict(meta or {})
    if opts.method == "rk45":
        ts, X = _rk45_generic(loop, t_span, x0, opts, project)
        meta["backend"] = "python"
        return _record(loop, ts, X, meta=meta)
    if opts.method != "rk4":
        raise ValueError(f"unknown integration method {opts.method!r}")
    ts = _grid(t_span, opts)
    width = loop.width()
    if loop.sys.linear is not None and opts.fast:
        A_cl, B_cl, Kx, Ku = _linear_closed_loop(loop)
        h = ts[1] - ts[0]
        U = _sample_signal(loop.signal, ts, width)
        Umid = _sample_signal(loop.signal, ts[:-1] + 0.5 * h, width)
        X = _kernels.rk4_affine(np.ascontiguousarray(A_cl), np.ascontiguousarray(B_cl),
                                x0.copy(), np.ascontiguousarray(U), np.ascontiguousarray(Umid), h)
        if not np.all(np.isfinite(X)):
            raise StepFailure(f"{loop.sys.name}: non-finite state in linear kernel")
        meta["backend"] = _kernels.backend()
        return _record_linear(loop, ts, X, U, Kx, Ku, meta)
    X, U = _rk4_generic(loop, ts, x0, project)
    meta["backend"] = "python"
    return _record(loop, ts, X, U, meta=meta)


def integrate(sys: PortHamiltonianSystem, x0, u_signal, t_span, opts=None, partition=None) -> Trajectory:
    """Simulate the free system with all inputs prescribed by ``u_signal``.

    ``u_signal`` is a callable ``t -> u`` (a :class:`FourierSignal` is
    sampled vectorially), a constant vector, or None for zero input.
    """
    p = None if partition is None else sys.partition(partition)
    loop = _Loop(sys, p, "free", u_signal)
    return _run(loop, x0, t_span, opts, meta={"system": sys.name})


def _check_drift(traj: Trajectory, y1_bar, tol=DRIFT_TOL):
    drift = float(np.max(np.abs(traj.y1 - y1_bar[None, :]))) if traj.y1.size else 0.0
    traj.meta["y1_drift"] = drift
    if drift > tol * max(1.0, float(np.max(np.abs(y1_bar)))):
        raise DriftAlarm(f"held output drifted by {drift:.3g}")
    return drift


def project_initial_state(sys, partition, e1_bar, x0):
    """Move x1 so that dH/dx1(x1, x2) = e1_bar, keeping x2 fixed."""
    p = sys.partition(partition)
    x0 = np.asarray(x0, dtype=float)
    x1, _, _ = solve_x1(sys, p, e1_bar, x0[list(p.x2)], x0[list(p.x1)], tol=1e-13)
    out = x0.copy()
    out[list(p.x1)] = x1
    return out


def simulate_hold_effort(sys: PortHamiltonianSystem, partition, e1_bar, u2_signal, x0, t_span,
                         opts=None, project=True, check_drift=True) -> Trajectory:
    """Integrate with e1 held at ``e1_bar`` through the exact output-holding feedback.

    Works for any partition whose feedback matrix is invertible; no
    structural claim is implied.
    """
    p = sys.partition(partition)
    e1_bar = np.atleast_1d(np.asarray(e1_bar, dtype=float))
    x0 = project_initial_state(sys, p, e1_bar, x0)
    loop = _Loop(sys, p, "y1", u2_signal, e1_bar=e1_bar)
    # linear invariants are preserved exactly by RK4, so only nonlinear runs project
    traj = _run(loop, x0, t_span, opts, project=project and sys.linear is None,
                meta={"system": sys.name, "storage": "legendre", "e1_bar": e1_bar.tolist()})
    G = np.asarray(sys.g_matrix(x0), dtype=float)[np.ix_(list(p.x1), list(p.port1))]
    y1_bar = G.T @ e1_bar
    traj.meta["y1_bar"] = y1_bar.tolist()
    if check_drift:
        _check_drift(traj, y1_bar)
    return traj


def constrained_simulate_y1(sys: PortHamiltonianSystem, cert, y1_bar, u2_signal, x0, t_span,
                            opts=None, formal=False, project=True) -> Trajectory:
    """Simulate with y1 held at ``y1_bar``; records H1*(e1_bar, x2(t)) as storage.

    ``cert`` is a :class:`~cyclopass.structure.StorageCertificate`. Running
    an uncertified partition requires ``formal=True`` (used by the
    falsifier), in which case the recorded storage carries no guarantee.
    """
    if not cert.certified and not formal:
        raise ValueError(
            f"{sys.name}/{cert.partition.name} is not certified "
            f"({', '.join(cert.reasons)}); pass formal=True to simulate anyway"
        )
    e1_bar = cert.effort_for_output(y1_bar)
    traj = simulate_hold_effort(sys, cert.partition, e1_bar, u2_signal, x0, t_span, opts, project)
    traj.meta["certified"] = cert.certified
    return traj


def constrained_simulate_x1(sys: PortHamiltonianSystem, partition, x1_bar, u2_signal, x0, t_span,
                            opts=None) -> Trajectory:
    """Simulate with x1 frozen at ``x1_bar``; records H(x1_bar, x2(t)) as storage."""
    p = sys.partition(partition)
    x1_bar = np.atleast_1d(np.asarray(x1_bar, dtype=float))
    x0 = np.asarray(x0, dtype=float).copy()
    if np.max(np.abs(x0[list(p.x1)] - x1_bar)) > 1e-12 * max(1.0, float(np.max(np.abs(x1_bar)))):
        raise ValueError("x0 must have its x1 block equal to x1_bar")
    x0[list(p.x1)] = x1_bar
    loop = _Loop(sys, p, "x1", u2_signal, x1_bar=x1_bar)
    return _run(loop, x0, t_span, opts, project=True,
                meta={"system": sys.name, "storage": "frozen_x1", "x1_bar": x1_bar.tolist()})


# -- cycles ---------------------------------------------------------------


@dataclass
class CycleParams:
    """One period of a candidate cyclic process.

    ``signal`` drives the port-2 inputs (all inputs in ``free`` mode). The
    closure correction adjusts ``x0[free_initial]`` and, if
    ``free_offsets``, the constant input offsets, by minimum-norm
    Gauss-Newton on the closure residual restricted to ``closure_mask``.
    """

    signal: FourierSignal
    x0: np.ndarray
    partition: Optional[str] = None
    constraint: Optional[Sequence[float]] = None  # e1_bar in y1 mode, x1_bar in x1 mode
    steps: int = 1000
    correct: bool = True
    free_initial: Optional[Sequence[int]] = None
    free_offsets: bool = True
    closure_mask: Optional[Sequence[int]] = None
    tol: float = 1e-10
    max_iter: int = 30

    @property
    def period(self) -> float:
        return self.signal.period


@dataclass
class Cycle:
    trajectory: Trajectory
    defect: float
    params: CycleParams
    iterations: int = 0


def _simulate_cycle(sys, mode, prm: CycleParams, steps=None):
    opts = IntegratorOptions(step=prm.period / (steps or prm.steps))
    span = (0.0, prm.period)
    if mode == "free":
        return integrate(sys, prm.x0, prm.signal, span, opts, prm.partition)
    if mode == "y1":
        return simulate_hold_effort(sys, prm.partition, prm.constraint, prm.signal, prm.x0, span,
                                    opts, check_drift=False)
    if mode == "x1":
        p = sys.partition(prm.partition)
        x0 = np.asarray(prm.x0, dtype=float).copy()
        x0[list(p.x1)] = prm.constraint
        return constrained_simulate_x1(sys, p, prm.constraint, prm.signal, x0, span, opts)
    raise ValueError(f"unknown mode {mode!r}")


def _defect_vector(traj, mask):
    d = traj.states[-1] - traj.states[0]
    return d if mask is None else d[list(mask)]


def _default_free_initial(sys, mode, prm):
    if prm.free_initial is not None:
        return list(prm.free_initial)
    if mode == "free" or prm.partition is None:
        return list(range(sys.n))
    return list(sys.partition(prm.partition).x2)


def _pack(prm, idx):
    z = [np.asarray(prm.x0, dtype=float)[idx]]
    if prm.free_offsets:
        z.append(prm.signal.offset)
    return np.concatenate(z)


def _unpack(prm, idx, z):
    x0 = np.asarray(prm.x0, dtype=float).copy()
    x0[idx] = z[:len(idx)]
    sig = prm.signal
    if prm.free_offsets:
        sig = sig.with_offset(z[len(idx):])
    return replace(prm, x0=x0, signal=sig)


_RECOVERABLE = (EvaluationError, SingularHessian, StepFailure, np.linalg.LinAlgError)


def _fd_jacobian(fun, z, r, rel_step):
    cols = []
    for j in range(z.size):
        hj = rel_step * max(1.0, abs(z[j]))
        zp = z.copy()
        zp[j] += hj
        try:
            rp, _ = fun(zp)
        except _RECOVERABLE:
            zp[j] = z[j] - hj
            rp, _ = fun(zp)
            hj = -hj
        cols.append((rp - r) / hj)
    return np.column_stack(cols)


def gauss_newton(fun, z0, tol=1e-10, max_iter=30, rel_step=1e-6, jac=None):
    """Minimum-norm Gauss-Newton with forward-difference Jacobian and backtracking.

    ``fun(z)`` returns ``(residual, payload)``. A Jacobian passed as ``jac``
    is tried first and updated by Broyden steps; it is refreshed by finite
    differences only when a step fails to reduce the residual. Returns
    ``(z, residual_norm, payload, iterations, jacobian)`` for the best point.
    """
    z = np.asarray(z0, dtype=float).copy()
    r, payload = fun(z)
    nr = float(np.linalg.norm(r))
    it = 0
    fresh = False
    while it < max_iter and nr > tol and z.size:
        it += 1
        if jac is None or jac.shape != (r.size, z.size):
            jac = _fd_jacobian(fun, z, r, rel_step)
            fresh = True
        dz = -np.linalg.lstsq(jac, r, rcond=1e-12)[0]
        alpha = 1.0
        accepted = False
        for _ in range(12 if fresh else 1):
            zc = z + alpha * dz
            try:
                rc, pc = fun(zc)
            except _RECOVERABLE:
                alpha *= 0.5
                continue
            nc = float(np.linalg.norm(rc))
            if nc < (nr if fresh else 0.9 * nr):
                step = zc - z
                # Broyden rank-one update keeps the Jacobian usable for the next call
                jac = jac + np.outer(rc - r - jac @ step, step) / float(step @ step)
                z, r, payload, nr = zc, rc, pc, nc
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if fresh:
                break
            jac = None  # stale chord Jacobian: refresh and retry
            it -= 1
            fresh = True
            continue
        fresh = False
    return z, nr, payload, it, jac


def correct_closure(sys, mode, prm: CycleParams, steps=None, cache=None):
    """Gauss-Newton on (free initial state, input offsets) to close the cycle.

    Returns ``(params, trajectory, defect, iterations)``; leaves the best
    point found when the residual cannot be driven below ``prm.tol``.
    ``cache`` (a dict) carries the closure Jacobian between calls.
    """
    idx = _default_free_initial(sys, mode, prm)
    jac = None if cache is None else cache.get("jac")

    def fun(z):
        cand = _unpack(prm, idx, z)
        tr = _simulate_cycle(sys, mode, cand, steps)
        return _defect_vector(tr, prm.closure_mask), (cand, tr)

    _, defect, (cand, tr), its, jac = gauss_newton(fun, _pack(prm, idx), prm.tol, prm.max_iter,
                                                   jac=jac)
    if cache is not None:
        cache["jac"] = jac
    return cand, tr, defect, its


def close_cycle(sys: PortHamiltonianSystem, mode: str, params: CycleParams) -> Cycle:
    """Simulate one period and report the closure defect ||x(T) - x(0)||.

    With ``params.correct`` the initial state and input offsets are first
    adjusted by :func:`correct_closure`.
    """
    if params.correct:
        prm, traj, _, its = correct_closure(sys, mode, params)
    else:
        prm, traj, its = params, _simulate_cycle(sys, mode, params), 0
    defect = float(np.linalg.norm(_defect_vector(traj, prm.closure_mask)))
    traj.meta["closure_defect"] = defect
    return Cycle(trajectory=traj, defect=defect, params=prm, iterations=its)

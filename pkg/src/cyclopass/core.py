"""Two-port port-Hamiltonian systems and their pointwise evaluations.

A system is

    xdot = J(x) e - R(x, e) + G(x) u,    e = dH/dx(x),    y = G(x)^T e

with skew J and dissipation satisfying e^T R(x, e) >= 0. State and input
indices are split into two blocks by a :class:`StatePartition`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import DimensionError, EvaluationError

EPS = np.finfo(float).eps
FD_STEP = EPS ** (1.0 / 3.0)


@dataclass(frozen=True)
class StatePartition:
    """Split of the state into (x1, x2) and of the inputs into (port 1, port 2).

    Port 1 is the port whose output is held constant; one-port
    cyclo-passivity is then asked of port 2.
    """

    x1: tuple
    x2: tuple
    port1: tuple
    port2: tuple
    name: str = ""
    description: str = ""

    def __post_init__(self):
        for attr in ("x1", "x2", "port1", "port2"):
            object.__setattr__(self, attr, tuple(int(i) for i in getattr(self, attr)))

    @property
    def n1(self) -> int:
        return len(self.x1)

    @property
    def n2(self) -> int:
        return len(self.x2)

    @property
    def m1(self) -> int:
        return len(self.port1)

    @property
    def m2(self) -> int:
        return len(self.port2)

    def validate(self, n: int, m: int) -> None:
        if self.n1 < 1 or self.n2 < 1:
            raise DimensionError(f"partition {self.name!r}: both state blocks must be non-empty")
        if sorted(self.x1 + self.x2) != list(range(n)):
            raise DimensionError(f"partition {self.name!r}: x1/x2 must split range({n}) exactly")
        if sorted(self.port1 + self.port2) != list(range(m)):
            raise DimensionError(f"partition {self.name!r}: ports must split range({m}) exactly")

    def split(self, v):
        v = np.asarray(v, dtype=float)
        return v[list(self.x1)], v[list(self.x2)]

    def join(self, v1, v2):
        out = np.empty(self.n1 + self.n2)
        out[list(self.x1)] = v1
        out[list(self.x2)] = v2
        return out

    def join_inputs(self, u1, u2):
        out = np.empty(self.m1 + self.m2)
        out[list(self.port1)] = u1
        out[list(self.port2)] = u2
        return out


@dataclass(frozen=True)
class StructureFlags:
    """Declared structural metadata of a system with respect to one partition.

    ``None`` means "not declared": the structure check then relies on
    sampling alone.
    """

    j_block_diagonal: Optional[bool] = None
    r_blockwise: Optional[bool] = None
    g1_constant_invertible: Optional[bool] = None
    g_block_diagonal: Optional[bool] = None
    h11_full_rank: Optional[bool] = None


@dataclass(frozen=True)
class LinearData:
    """Constant matrices of a linear system with H = x^T Q x / 2."""

    Q: np.ndarray
    J: np.ndarray
    R: np.ndarray
    G: np.ndarray


def _fd_gradient(f, x):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = FD_STEP * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return g


def _fd_jacobian(f, x):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = FD_STEP * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (xp[i] - xm[i]))
    return np.column_stack(cols)


@dataclass(frozen=True)
class PortHamiltonianSystem:
    """Input-state-output port-Hamiltonian system without feedthrough.

    Parameters
    ----------
    hamiltonian, gradient, hessian
        ``x -> H``, ``x -> dH/dx`` and ``x -> d2H/dx2``.
    j_matrix
        ``x -> J(x)``, skew-symmetric.
    g_matrix
        ``x -> G(x)`` of shape (n, m).
    dissipation
        Optional ``(x, e) -> R(x, e)``. If omitted, ``r_matrix(x) @ e`` is
        used, and zero dissipation if that is omitted too.
    r_matrix
        Optional ``x -> R(x)`` positive semidefinite; enables exact blockwise
        structure checks.
    partitions, flags
        Named partitions and their declared :class:`StructureFlags`.
    nominal
        Centre of the sampling ball used by the structure checks.
    """

    name: str
    n: int
    m: int
    hamiltonian: Callable
    gradient: Callable
    hessian: Callable
    j_matrix: Callable
    g_matrix: Callable
    dissipation: Optional[Callable] = None
    r_matrix: Optional[Callable] = None
    partitions: Mapping[str, StatePartition] = field(default_factory=dict)
    flags: Mapping[str, StructureFlags] = field(default_factory=dict)
    nominal: Optional[np.ndarray] = None
    sample_radius: float = 1.0
    g_constant: bool = False
    linear: Optional[LinearData] = None
    fd_derivatives: bool = False
    state_names: Sequence[str] = ()
    input_names: Sequence[str] = ()
    output_names: Sequence[str] = ()
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionError("state and input dimensions must be positive")
        for p in self.partitions.values():
            p.validate(self.n, self.m)
        if self.nominal is None:
            object.__setattr__(self, "nominal", np.zeros(self.n))
        else:
            object.__setattr__(self, "nominal", np.asarray(self.nominal, dtype=float))

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_hamiltonian(cls, name, n, m, hamiltonian, j_matrix, g_matrix, **kwargs):
        """Build a system from H alone; derivatives come from central differences.

        Downstream tolerances are relaxed tenfold for such systems.
        """

        def gradient(x):
            return _fd_gradient(hamiltonian, x)

        def hessian(x):
            Hx = _fd_jacobian(gradient, x)
            return 0.5 * (Hx + Hx.T)

        return cls(name=name, n=n, m=m, hamiltonian=hamiltonian, gradient=gradient,
                   hessian=hessian, j_matrix=j_matrix, g_matrix=g_matrix,
                   fd_derivatives=True, **kwargs)

    @classmethod
    def from_linear(cls, name, Q, J, R, G, **kwargs):
        Q = np.array(Q, dtype=float)
        J = np.array(J, dtype=float)
        R = np.array(R, dtype=float)
        G = np.array(G, dtype=float)
        if G.ndim == 1:
            G = G[:, None]
        n = Q.shape[0]
        if Q.shape != (n, n) or J.shape != (n, n) or R.shape != (n, n) or G.shape[0] != n:
            raise DimensionError("inconsistent matrix shapes for linear system")
        for M in (Q, J, R, G):
            M.setflags(write=False)
        return cls(
            name=name, n=n, m=G.shape[1],
            hamiltonian=lambda x: 0.5 * float(x @ Q @ x),
            gradient=lambda x: Q @ x,
            hessian=lambda x: Q,
            j_matrix=lambda x: J,
            g_matrix=lambda x: G,
            r_matrix=lambda x: R,
            g_constant=True,
            linear=LinearData(Q, J, R, G),
            **kwargs,
        )

    # -- evaluations ------------------------------------------------------

    @property
    def tolerance_scale(self) -> float:
        return 10.0 if self.fd_derivatives else 1.0

    def partition(self, name_or_partition) -> StatePartition:
        if isinstance(name_or_partition, StatePartition):
            name_or_partition.validate(self.n, self.m)
            return name_or_partition
        try:
            return self.partitions[name_or_partition]
        except KeyError:
            raise KeyError(
                f"{self.name} has no partition {name_or_partition!r}; "
                f"known: {sorted(self.partitions)}"
            ) from None

    def effort(self, x) -> np.ndarray:
        """Co-energy variables e = dH/dx, checked for finiteness."""
        e = np.asarray(self.gradient(x), dtype=float)
        if e.shape != (self.n,):
            raise DimensionError(f"gradient returned shape {e.shape}, expected ({self.n},)")
        if not np.isfinite(e).all():
            i = int(np.flatnonzero(~np.isfinite(e))[0])
            label = self.state_names[i] if i < len(self.state_names) else str(i)
            raise EvaluationError(f"{self.name}: non-finite gradient component {label}", component=i)
        return e

    def dissipation_vector(self, x, e) -> np.ndarray:
        if self.dissipation is not None:
            return np.asarray(self.dissipation(x, e), dtype=float)
        if self.r_matrix is not None:
            return np.asarray(self.r_matrix(x), dtype=float) @ e
        return np.zeros(self.n)

    def with_changes(self, **changes) -> "PortHamiltonianSystem":
        import dataclasses

        return dataclasses.replace(self, **changes)


def _check_state(sys: PortHamiltonianSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionError(f"{sys.name}: state has shape {x.shape}, expected ({sys.n},)")
    return x


def _check_input(sys: PortHamiltonianSystem, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.m,):
        raise DimensionError(f"{sys.name}: input has shape {u.shape}, expected ({sys.m},)")
    return u


def free_dynamics(sys: PortHamiltonianSystem, x, e=None) -> np.ndarray:
    """The input-free part J(x)e - R(x,e)."""
    if e is None:
        e = sys.effort(x)
    return sys.j_matrix(x) @ e - sys.dissipation_vector(x, e)


def eval_dynamics(sys: PortHamiltonianSystem, x, u) -> np.ndarray:
    """Return xdot = J(x)e - R(x,e) + G(x)u."""
    x = _check_state(sys, x)
    u = _check_input(sys, u)
    e = sys.effort(x)
    return free_dynamics(sys, x, e) + sys.g_matrix(x) @ u


def eval_outputs(sys: PortHamiltonianSystem, x, partition=None):
    """Power-conjugate outputs y = G(x)^T e.

    With a partition (name or object) returns ``(y1, y2)`` split by port.
    """
    x = _check_state(sys, x)
    y = sys.g_matrix(x).T @ sys.effort(x)
    if partition is None:
        return y
    p = sys.partition(partition)
    return y[list(p.port1)], y[list(p.port2)]


def supply_rate(y, u) -> float:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if y.shape != u.shape:
        raise DimensionError(f"supply rate needs equal dimensions, got {y.shape} and {u.shape}")
    return float(y @ u)


def power_balance(sys: PortHamiltonianSystem, x, u):
    """Return ``(dH/dt, y^T u, e^T R(x,e))`` at one point."""
    x = _check_state(sys, x)
    u = _check_input(sys, u)
    e = sys.effort(x)
    xdot = free_dynamics(sys, x, e) + sys.g_matrix(x) @ u
    y = sys.g_matrix(x).T @ e
    return float(e @ xdot), float(y @ u), float(e @ sys.dissipation_vector(x, e))


def sample_states(sys: PortHamiltonianSystem, rng, count, radius=None, center=None) -> np.ndarray:
    """Uniform samples from the ball of given radius around the nominal state."""
    radius = sys.sample_radius if radius is None else radius
    center = sys.nominal if center is None else np.asarray(center, dtype=float)
    d = rng.standard_normal((count, sys.n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / sys.n)
    return center + d * r[:, None]


def check_invariants(sys: PortHamiltonianSystem, rng=None, samples=100) -> dict:
    """Sampled checks of skew J, dissipation sign and derivative consistency.

    Returns the worst violations; ``ok`` is the combined verdict.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    tol_scale = sys.tolerance_scale
    skew = sign = grad = hess = 0.0
    for x in sample_states(sys, rng, samples):
        Jx = np.asarray(sys.j_matrix(x), dtype=float)
        skew = max(skew, np.max(np.abs(Jx + Jx.T)) / max(1.0, np.max(np.abs(Jx))))
        e = rng.standard_normal(sys.n)
        skew = max(skew, abs(e @ Jx @ e) / max(1.0, np.max(np.abs(Jx)) * (e @ e)))
        sign = max(sign, -(e @ sys.dissipation_vector(x, e)) / (e @ e))
        g = sys.effort(x)
        g_fd = _fd_gradient(sys.hamiltonian, x)
        grad = max(grad, np.max(np.abs(g - g_fd)) / max(1.0, np.max(np.abs(g))))
        Hx = np.asarray(sys.hessian(x), dtype=float)
        h_fd = _fd_jacobian(sys.gradient, x)
        asym = np.max(np.abs(Hx - Hx.T))
        hess = max(hess, max(asym, np.max(np.abs(Hx - h_fd))) / max(1.0, np.max(np.abs(Hx))))
    report = {
        "skew_violation": float(skew),
        "dissipation_sign_violation": float(max(sign, 0.0)),
        "gradient_rel_error": float(grad),
        "hessian_rel_error": float(hess),
    }
    report["ok"] = bool(
        skew <= 1e-12
        and sign <= 1e-12
        and grad <= 1e-5 * tol_scale
        and hess <= 1e-5 * tol_scale
    )
    return report


@dataclass(frozen=True)
class SupplySample:
    t: float
    s1: float
    s2: float
    h: float
    h_star: Optional[float] = None


@dataclass
class Trajectory:
    """Sampled solution of one simulation, one row per grid point."""

    times: np.ndarray
    states: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    h: np.ndarray
    h_star: Optional[np.ndarray] = None
    # analytic storage rate d/dt of the recorded storage, and the dissipation term
    storage_rate: Optional[np.ndarray] = None
    dissipation: Optional[np.ndarray] = None
    partition: Optional[StatePartition] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1:
            raise DimensionError("times must be a non-empty 1-d array")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise DimensionError("times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise EvaluationError("trajectory contains non-finite states")

    def __len__(self):
        return self.times.size

    @property
    def has_storage(self) -> bool:
        return self.h_star is not None

    def samples(self) -> Iterator[SupplySample]:
        for k in range(self.times.size):
            hs = None if self.h_star is None else float(self.h_star[k])
            yield SupplySample(float(self.times[k]), float(self.s1[k]), float(self.s2[k]),
                               float(self.h[k]), hs)

    @property
    def closure_defect(self) -> float:
        return float(np.linalg.norm(self.states[-1] - self.states[0]))

"""Dissipation inequalities, cyclic supply, counterexample search and storage bounds.

The falsifier minimises the port-2 supply over closed cycles of a
constrained simulation. Each candidate is made closed before it is scored:
free initial-state components and input offsets are corrected by
Gauss-Newton, and any residual defect is penalised. A witness is only
reported after a fine-step re-closure, a Richardson estimate of the
quadrature error and an independent re-simulation at half the step.
A failed search never certifies passivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.optimize import minimize

from . import _kernels
from .core import PortHamiltonianSystem, Trajectory
from .errors import CyclopassError, StepFailure
from .simulate import (
    _RECOVERABLE,
    CycleParams,
    FourierSignal,
    IntegratorOptions,
    _default_free_initial,
    _defect_vector,
    _simulate_cycle,
    correct_closure,
    gauss_newton,
    integrate,
    project_initial_state,
)

EPS_W = 1e-4
DELTA_W = 1e-6
PENALTY_VALUE = 1e6


# -- inequalities -----------------------------------------------------------


@dataclass(frozen=True)
class StorageReport:
    """Worst margin of S(t2) - S(t1) <= int s over all sample pairs t1 <= t2."""

    storage: str
    supply: str
    worst_margin: float
    t1: float
    t2: float
    tol: float
    final_margin: float

    @property
    def ok(self) -> bool:
        return self.worst_margin >= -self.tol

    def to_dict(self):
        return {"storage": self.storage, "supply": self.supply, "worst_margin": self.worst_margin,
                "t1": self.t1, "t2": self.t2, "tol": self.tol, "ok": self.ok,
                "final_margin": self.final_margin}


def _supply_column(traj: Trajectory, supply):
    if supply == "s1":
        return traj.s1
    if supply == "s2":
        return traj.s2
    if supply == "total":
        return traj.s1 + traj.s2
    raise ValueError(f"unknown supply {supply!r}")


def verify_storage(traj: Trajectory, which: Union[str, Callable] = "Hstar", supply=None,
                   tol=1e-6) -> StorageReport:
    """Check the dissipation inequality on every ordered pair of samples.

    ``which`` is ``"H"``, ``"Hstar"`` or a callable on states. The default
    supply is the port-2 rate for the constrained storage and the total rate
    otherwise. ``tol`` is relative to the magnitude of storage and supply.
    """
    if callable(which):
        S = np.array([float(which(x)) for x in traj.states])
        name = getattr(which, "__name__", "custom")
    elif which == "H":
        S, name = traj.h, "H"
    elif which == "Hstar":
        if traj.h_star is None:
            raise ValueError("trajectory carries no constrained storage samples")
        S, name = traj.h_star, "Hstar"
    else:
        raise ValueError(f"unknown storage {which!r}")
    if supply is None:
        supply = "s2" if name == "Hstar" else "total"
    s = _supply_column(traj, supply)
    # Simpson keeps the quadrature error well below the relative tolerance
    if s.size >= 3:
        W = cumulative_simpson(s, x=traj.times, initial=0.0)
    else:
        W = _kernels.cumtrapz(traj.times, np.ascontiguousarray(s, dtype=float))
    d = W - (S - S[0])
    if d.size < 2:
        return StorageReport(name, supply, 0.0, float(traj.times[0]), float(traj.times[0]), tol, 0.0)
    gain, i, j = _kernels.min_forward_gain(np.ascontiguousarray(d))
    scale = max(1.0, float(np.max(np.abs(S - S[0]))),
                float(_kernels.cumtrapz(traj.times, np.abs(s))[-1]))
    return StorageReport(name, supply, float(gain), float(traj.times[int(i)]),
                         float(traj.times[int(j)]), tol * scale, float(d[-1]))


@dataclass(frozen=True)
class CyclicSupply:
    s1_integral: float
    s2_integral: float
    closure_defect: float

    def __iter__(self):
        return iter((self.s1_integral, self.s2_integral, self.closure_defect))


def cyclic_supply(traj: Trajectory, mask=None) -> CyclicSupply:
    """Trapezoidal integrals of both supply rates and the closure defect."""
    t = traj.times
    i1 = float(_kernels.cumtrapz(t, np.ascontiguousarray(traj.s1, dtype=float))[-1])
    i2 = float(_kernels.cumtrapz(t, np.ascontiguousarray(traj.s2, dtype=float))[-1])
    return CyclicSupply(i1, i2, float(np.linalg.norm(_defect_vector(traj, mask))))


# -- search -----------------------------------------------------------------


@dataclass(frozen=True)
class SearchOptions:
    """Budget and parametrisation of the periodic-input search.

    Coefficients are bounded smoothly, ``c = amplitude * tanh(z)``. When
    ``period`` is None it is searched log-uniformly in ``period_range``.
    """

    harmonics: int = 5
    period: Optional[float] = None
    period_range: tuple = (0.1, 10.0)
    amplitude: float = 1.0
    restarts: int = 3
    max_evals: int = 250
    steps: int = 100
    final_steps: int = 1000
    seed: int = 0
    eps_w: float = EPS_W
    delta_w: float = DELTA_W
    penalty: float = 1e4
    inner_iter: int = 4
    inner_tol: float = 1e-8
    free_initial: Optional[tuple] = None
    closure_mask: Optional[tuple] = None
    init_scale: float = 0.5
    stop_on_witness: bool = True
    simplex_step: float = 0.5

    def to_dict(self):
        d = dict(self.__dict__)
        d["period_range"] = list(self.period_range)
        for k in ("free_initial", "closure_mask"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


@dataclass
class CycleWitness:
    trajectory: Trajectory
    port: str
    integrated_supply: float
    closure_defect: float
    constrained_value: list
    mode: str
    params: CycleParams
    eps_w: float
    quadrature_error: float
    half_step_supply: float
    half_step_defect: float
    evaluations: int
    restarts: int

    found = True

    def to_dict(self):
        return {
            "result": "witness", "port": self.port, "mode": self.mode,
            "integrated_supply": self.integrated_supply, "closure_defect": self.closure_defect,
            "constrained_value": list(self.constrained_value), "eps_w": self.eps_w,
            "quadrature_error": self.quadrature_error, "half_step_supply": self.half_step_supply,
            "half_step_defect": self.half_step_defect, "evaluations": self.evaluations,
            "restarts": self.restarts, "period": self.params.period,
            "signal": self.params.signal.to_dict(), "x0": np.asarray(self.params.x0).tolist(),
        }


@dataclass
class NotFound:
    """No witness within budget. This is not a passivity certificate."""

    best_value: float
    best_defect: float
    evaluations: int
    restarts: int
    reason: str
    params: Optional[CycleParams] = None
    mode: str = "y1"
    constrained_value: list = field(default_factory=list)

    found = False

    def to_dict(self):
        out = {"result": "not_found", "best_value": self.best_value,
               "best_defect": self.best_defect, "evaluations": self.evaluations,
               "restarts": self.restarts, "reason": self.reason, "mode": self.mode,
               "constrained_value": list(self.constrained_value),
               "note": "search incomplete; no passivity claim"}
        if self.params is not None:
            out["period"] = self.params.period
            out["signal"] = self.params.signal.to_dict()
        return out


def _simplex(z0, step):
    """Axis-aligned starting simplex; scipy's default is tiny around zero."""
    return np.vstack([z0, z0 + step * np.eye(z0.size)])


class _Decoder:
    """Maps an unconstrained search vector to a FourierSignal."""

    def __init__(self, channels, opts: SearchOptions):
        self.m = channels
        self.K = opts.harmonics
        self.opts = opts
        self.ncoef = channels * (1 + 2 * self.K)
        self.size = self.ncoef + (1 if opts.period is None else 0)

    def period(self, z):
        if self.opts.period is not None:
            return float(self.opts.period)
        lo, hi = map(math.log, self.opts.period_range)
        # smooth map of R onto [lo, hi]
        return math.exp(lo + (hi - lo) * 0.5 * (1.0 + math.tanh(z[-1])))

    def signal(self, z):
        c = self.opts.amplitude * np.tanh(np.asarray(z[:self.ncoef]))
        return FourierSignal.from_vector(c, self.m, self.K, self.period(z))


def _base_state(sys, p, mode, constraint, x0):
    x0 = np.asarray(sys.nominal if x0 is None else x0, dtype=float).copy()
    if mode == "y1":
        return project_initial_state(sys, p, constraint, x0)
    x0[list(p.x1)] = constraint
    return x0


def _resolve_constraint(sys, p, mode, value):
    """Held output -> held effort for y1 mode (needs G1 invertible at the nominal state)."""
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if mode != "y1":
        return value
    G1 = np.asarray(sys.g_matrix(sys.nominal), dtype=float)[np.ix_(list(p.x1), list(p.port1))]
    return np.linalg.solve(G1.T, value)


def falsify_one_port(sys: PortHamiltonianSystem, partition, constraint_value, search_opts=None,
                     mode="y1", x0=None):
    """Search for a closed cycle with negative port-2 supply.

    ``constraint_value`` is the held output y1_bar (``mode="y1"``) or the
    frozen state x1_bar (``mode="x1"``). The constraint is enforced by the
    exact holding feedback whether or not the partition is certified.
    Returns a :class:`CycleWitness` or :class:`NotFound`.
    """
    opts = SearchOptions() if search_opts is None else search_opts
    p = sys.partition(partition)
    held = _resolve_constraint(sys, p, mode, constraint_value)
    base_x0 = _base_state(sys, p, mode, held, x0)
    dec = _Decoder(p.m2, opts)
    free_init = opts.free_initial
    template = CycleParams(signal=FourierSignal(np.zeros(p.m2), period=1.0), x0=base_x0,
                           partition=p.name, constraint=held, steps=opts.steps,
                           free_initial=free_init, closure_mask=opts.closure_mask,
                           tol=opts.inner_tol, max_iter=opts.inner_iter)
    count = [0]
    caches = {}

    def closed(z, steps):
        prm = replace(template, signal=dec.signal(z), steps=steps)
        prm, tr, defect, _ = correct_closure(sys, mode, prm, cache=caches.setdefault(steps, {}))
        return prm, tr, defect

    def objective(z):
        count[0] += 1
        try:
            _, tr, defect = closed(z, opts.steps)
        except (_RECOVERABLE + (CyclopassError,)):
            return PENALTY_VALUE
        val = cyclic_supply(tr).s2_integral
        if not np.isfinite(val):
            return PENALTY_VALUE
        return val + opts.penalty * defect * defect

    constrained = np.asarray(constraint_value, dtype=float).ravel().tolist()
    best = {"value": math.inf, "defect": math.inf, "params": None}

    def verify(z):
        """Fine-step re-closure and half-step re-simulation of one candidate."""
        try:
            prm, tr, defect = closed(z, opts.final_steps)
            prm = replace(prm, tol=1e-12, max_iter=30)
            prm, tr, defect, _ = correct_closure(sys, mode, prm)
        except (_RECOVERABLE + (CyclopassError,)):
            return None
        supply = cyclic_supply(tr, opts.closure_mask).s2_integral
        if supply < best["value"]:
            best.update(value=supply, defect=defect, params=prm)
        if defect > opts.delta_w:
            return None
        try:
            half = _simulate_cycle(sys, mode, prm, 2 * opts.final_steps)
        except (_RECOVERABLE + (CyclopassError,)):
            return None
        hs = cyclic_supply(half, opts.closure_mask)
        quad_err = abs(supply - hs.s2_integral) * 4.0 / 3.0
        eps_w = max(opts.eps_w, 100.0 * quad_err)
        if not (supply < -eps_w and hs.s2_integral < -eps_w / 2.0):
            return None
        tr.meta["constrained_value"] = constrained
        return CycleWitness(trajectory=tr, port="port2", integrated_supply=supply,
                            closure_defect=defect, constrained_value=constrained, mode=mode,
                            params=prm, eps_w=eps_w, quadrature_error=quad_err,
                            half_step_supply=hs.s2_integral, half_step_defect=hs.closure_defect,
                            evaluations=0, restarts=0)

    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(dec.size)] + [opts.init_scale * rng.standard_normal(dec.size)
                                     for _ in range(max(0, opts.restarts - 1))]
    witnesses = []
    done = 0
    for z0 in starts:
        res = minimize(objective, z0, method="Nelder-Mead",
                       options={"maxfev": opts.max_evals, "xatol": 1e-8, "fatol": 1e-12,
                                "adaptive": dec.size > 4,
                                "initial_simplex": _simplex(z0, opts.simplex_step)})
        done += 1
        w = verify(res.x)
        if w is not None:
            witnesses.append((w.integrated_supply, float(np.linalg.norm(res.x)), len(witnesses), w))
            if opts.stop_on_witness:
                break
    if witnesses:
        # deterministic reduction: supply, then coefficient norm, then restart order
        w = min(witnesses, key=lambda r: r[:3])[3]
        w.evaluations, w.restarts = count[0], done
        return w
    reason = "no closed cycle with supply below -eps_w within budget"
    if best["params"] is None:
        reason = "no admissible candidate cycle"
    return NotFound(best_value=best["value"], best_defect=best["defect"], evaluations=count[0],
                    restarts=done, reason=reason, params=best["params"], mode=mode,
                    constrained_value=constrained)


# -- storage bounds ---------------------------------------------------------


@dataclass
class StorageEstimate:
    x_star: np.ndarray
    grid: np.ndarray
    s_ac_values: np.ndarray
    s_rc_values: np.ndarray
    ac_defects: np.ndarray
    rc_defects: np.ndarray
    reachable_ac: np.ndarray
    reachable_rc: np.ndarray
    evaluations: int
    horizon: float

    def to_dict(self):
        return {
            "x_star": self.x_star.tolist(), "grid": self.grid.tolist(), "horizon": self.horizon,
            "s_ac": self.s_ac_values.tolist(), "s_rc": self.s_rc_values.tolist(),
            "ac_defects": self.ac_defects.tolist(), "rc_defects": self.rc_defects.tolist(),
            "reachable_ac": self.reachable_ac.tolist(), "reachable_rc": self.reachable_rc.tolist(),
            "evaluations": self.evaluations,
        }


@dataclass(frozen=True)
class StorageSearchOptions:
    harmonics: int = 2
    amplitude: float = 2.0
    restarts: int = 2
    max_evals: int = 120
    steps: int = 400
    seed: int = 0
    reach_tol: float = 1e-6
    init_scale: float = 0.3
    simplex_step: float = 0.3


def _min_transfer_supply(sys, x_from, x_to, horizon, opts: StorageSearchOptions, rng, counter):
    """min of int (y^T u) dt over free-mode inputs steering x_from to x_to.

    Harmonic coefficients are searched; the constant offsets are fixed by
    single shooting so that every scored candidate reaches ``x_to``.
    """
    m, K = sys.m, opts.harmonics
    sopts = IntegratorOptions(step=horizon / opts.steps)
    cache = {}

    def shoot(coeffs):
        cos = coeffs[:m * K].reshape(m, K)
        sin = coeffs[m * K:].reshape(m, K)

        def fun(offset):
            sig = FourierSignal(offset, cos, sin, horizon)
            tr = integrate(sys, x_from, sig, (0.0, horizon), sopts)
            return tr.states[-1] - x_to, tr

        off0 = (x_to - x_from)[:m] / horizon if sys.n == m else np.zeros(m)
        _, defect, tr, _, jac = gauss_newton(fun, off0, tol=1e-12, max_iter=8, jac=cache.get("jac"))
        cache["jac"] = jac
        return tr, defect

    def objective(z):
        counter[0] += 1
        try:
            tr, defect = shoot(opts.amplitude * np.tanh(z))
        except _RECOVERABLE:
            return PENALTY_VALUE
        val = float(simpson(tr.s1 + tr.s2, x=tr.times))
        return val + 1e4 * defect * defect

    dim = 2 * m * K
    best = None
    starts = [np.zeros(dim)] + [opts.init_scale * rng.standard_normal(dim)
                                for _ in range(max(0, opts.restarts - 1))]
    for z0 in starts:
        if dim:
            res = minimize(objective, z0, method="Nelder-Mead",
                           options={"maxfev": opts.max_evals, "xatol": 1e-9, "fatol": 1e-13,
                                    "initial_simplex": _simplex(z0, opts.simplex_step)})
            z = res.x
        else:
            z = z0
        tr, defect = shoot(opts.amplitude * np.tanh(z))
        val = float(simpson(tr.s1 + tr.s2, x=tr.times))
        key = (defect > opts.reach_tol, val, float(np.linalg.norm(z)))
        if best is None or key < best[0]:
            best = (key, val, defect)
    return best[1], best[2]


def estimate_storage_bounds(sys: PortHamiltonianSystem, x_star, grid, horizon=1.0,
                            search_opts=None) -> StorageEstimate:
    """Finite-horizon estimates of the available storage and the required supply.

    S_ac(x) = -min int s over x -> x_star and S_rc(x) = min int s over
    x_star -> x. Grid points whose steering defect exceeds ``reach_tol`` are
    flagged unreachable within the budget.
    """
    opts = StorageSearchOptions() if search_opts is None else search_opts
    x_star = np.asarray(x_star, dtype=float)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    rng = np.random.default_rng(opts.seed)
    counter = [0]
    ac, rc, dac, drc = [], [], [], []
    for x in grid:
        v, d = _min_transfer_supply(sys, x, x_star, horizon, opts, rng, counter)
        ac.append(-v)
        dac.append(d)
        v, d = _min_transfer_supply(sys, x_star, x, horizon, opts, rng, counter)
        rc.append(v)
        drc.append(d)
    dac, drc = np.array(dac), np.array(drc)
    return StorageEstimate(x_star=x_star, grid=grid, s_ac_values=np.array(ac),
                           s_rc_values=np.array(rc), ac_defects=dac, rc_defects=drc,
                           reachable_ac=dac <= opts.reach_tol, reachable_rc=drc <= opts.reach_tol,
                           evaluations=counter[0], horizon=float(horizon))

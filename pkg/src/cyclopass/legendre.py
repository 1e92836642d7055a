"""Numerical partial Legendre transform.

For H(x1, x2) with invertible d2H/dx1^2 the transform with respect to x1 is

    H1*(e1, x2) = H(x1, x2) - e1^T x1,    where  e1 = dH/dx1(x1, x2),

using the thermodynamic sign convention (the Helmholtz function is the
transform of the internal energy with respect to entropy). The inner
equation is solved locally by damped Newton; no global (convex-conjugate)
semantics are attempted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EPS, FD_STEP, PortHamiltonianSystem, StatePartition
from .errors import EvaluationError, NoConvergence, SingularHessian

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100
SINGULAR_COND = 1e12
ARMIJO_C = 1e-4
MAX_BACKTRACK = 60


@dataclass(frozen=True)
class LegendreResult:
    e1: np.ndarray
    x2: np.ndarray
    x1_solved: np.ndarray
    value: float
    newton_iterations: int
    residual: float


def block_condition(H11) -> float:
    """2-norm condition number, infinite for an exactly zero block."""
    s = np.linalg.svd(np.atleast_2d(H11), compute_uv=False)
    if not np.all(np.isfinite(s)) or s[-1] <= 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def _h11(sys, p, x):
    ix = list(p.x1)
    return np.asarray(sys.hessian(x), dtype=float)[np.ix_(ix, ix)]


def _residual(sys, p, x1, x2, e1):
    x = p.join(x1, x2)
    try:
        g = sys.effort(x)[list(p.x1)] - e1
    except EvaluationError:
        return None, x
    if not np.all(np.isfinite(g)):
        return None, x
    return g, x


def solve_x1(sys: PortHamiltonianSystem, partition, e1, x2, x1_guess=None,
             tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Solve dH/dx1(x1, x2) = e1 for x1; returns ``(x1, iterations, residual)``."""
    p = sys.partition(partition)
    e1 = np.atleast_1d(np.asarray(e1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    x1 = np.zeros(p.n1) if x1_guess is None else np.array(x1_guess, dtype=float).reshape(p.n1)
    # rounding floor so that large efforts (e.g. T = 300 K) remain solvable
    tol_eff = tol + 8.0 * EPS * max(1.0, float(np.max(np.abs(e1))))
    g, x = _residual(sys, p, x1, x2, e1)
    if g is None:
        raise NoConvergence(f"{sys.name}: Newton start point is outside the model domain")
    r = float(np.linalg.norm(g))
    for it in range(max_iter + 1):
        if r <= tol_eff:
            return x1, it, r
        if it == max_iter:
            break
        H11 = _h11(sys, p, x)
        cond = block_condition(H11)
        if cond > SINGULAR_COND:
            raise SingularHessian(
                f"{sys.name}: d2H/dx1^2 is singular (cond={cond:.3g}) for partition {p.name!r}",
                condition=cond,
            )
        d = -np.linalg.solve(H11, g)
        phi = r * r
        alpha = 1.0
        for _ in range(MAX_BACKTRACK):
            g_new, x_new = _residual(sys, p, x1 + alpha * d, x2, e1)
            if g_new is not None:
                r_new = float(np.linalg.norm(g_new))
                if r_new * r_new <= (1.0 - 2.0 * ARMIJO_C * alpha) * phi:
                    break
            alpha *= 0.5
        else:
            raise NoConvergence(
                f"{sys.name}: line search failed at iteration {it}", iterations=it, residual=r
            )
        x1 = x1 + alpha * d
        g, x, r = g_new, x_new, r_new
    raise NoConvergence(
        f"{sys.name}: Newton did not converge in {max_iter} iterations (residual {r:.3g})",
        iterations=max_iter, residual=r,
    )


def partial_legendre(sys: PortHamiltonianSystem, partition, e1, x2, x1_guess=None,
                     tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER) -> LegendreResult:
    """Evaluate H1*(e1, x2), raising :class:`SingularHessian` on a degenerate block."""
    p = sys.partition(partition)
    e1 = np.atleast_1d(np.asarray(e1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    x1, its, r = solve_x1(sys, p, e1, x2, x1_guess, tol, max_iter)
    x = p.join(x1, x2)
    # exact conditioning check at the solution too: a converged root of a
    # degenerate block (e.g. H linear in x1) is not a valid transform
    cond = block_condition(_h11(sys, p, x))
    if cond > SINGULAR_COND:
        raise SingularHessian(
            f"{sys.name}: d2H/dx1^2 is singular (cond={cond:.3g}) for partition {p.name!r}",
            condition=cond,
        )
    value = float(sys.hamiltonian(x)) - float(e1 @ x1)
    return LegendreResult(e1=e1, x2=x2, x1_solved=x1, value=value, newton_iterations=its, residual=r)


@dataclass(frozen=True)
class IdentityReport:
    """Worst relative errors of dH1*/de1 = -x1 and dH1*/dx2 = dH/dx2."""

    d_e1_error: float
    d_x2_error: float
    x1: np.ndarray
    grad_e1: np.ndarray
    grad_x2: np.ndarray

    @property
    def max_error(self) -> float:
        return max(self.d_e1_error, self.d_x2_error)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def verify_legendre_identities(sys: PortHamiltonianSystem, partition, e1, x2,
                               x1_guess=None) -> IdentityReport:
    """Central-difference check of the two derivative identities of H1*.

    Each perturbed evaluation re-solves the inner Newton problem. Errors are
    relative with a unit floor, ``max|fd - exact| / max(1, max|exact|)``.
    """
    p = sys.partition(partition)
    base = partial_legendre(sys, p, e1, x2, x1_guess)
    x1 = base.x1_solved
    e1 = base.e1
    x2 = base.x2

    def value(e, z):
        return partial_legendre(sys, p, e, z, x1).value

    g_e1 = np.empty(p.n1)
    for i in range(p.n1):
        h = FD_STEP * max(1.0, abs(e1[i]))
        ep, em = e1.copy(), e1.copy()
        ep[i] += h
        em[i] -= h
        g_e1[i] = (value(ep, x2) - value(em, x2)) / (ep[i] - em[i])
    g_x2 = np.empty(p.n2)
    for i in range(p.n2):
        h = FD_STEP * max(1.0, abs(x2[i]))
        zp, zm = x2.copy(), x2.copy()
        zp[i] += h
        zm[i] -= h
        g_x2[i] = (value(e1, zp) - value(e1, zm)) / (zp[i] - zm[i])
    dHdx2 = sys.effort(p.join(x1, x2))[list(p.x2)]
    return IdentityReport(
        d_e1_error=_rel(g_e1, -x1),
        d_x2_error=_rel(g_x2, dHdx2),
        x1=x1,
        grad_e1=g_e1,
        grad_x2=g_x2,
    )


def double_transform(sys: PortHamiltonianSystem, partition, x1, x2,
                     tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER) -> float:
    """Transform H with respect to x1, then transform the result back.

    The second transform uses the same sign convention with conjugate
    variable ``xi = dH1*/de1``; its inner equation ``dH1*/de1(eps) = -x1`` is
    solved by Newton on ``eps`` starting away from the true effort. The
    returned value equals H(x1, x2) when both transforms are consistent.
    """
    p = sys.partition(partition)
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    e1_true = sys.effort(p.join(x1, x2))[list(p.x1)]
    # the forward solve only has to land on x1; start it from there
    first = partial_legendre(sys, p, e1_true, x2, x1, tol, max_iter)
    xi_target = -x1

    eps = e1_true * 1.05 + 0.05 * np.sign(e1_true + (e1_true == 0))
    inner = first.x1_solved
    tol_eff = tol + 8.0 * EPS * max(1.0, float(np.max(np.abs(x1))))
    for _ in range(max_iter):
        res = partial_legendre(sys, p, eps, x2, inner, tol, max_iter)
        inner = res.x1_solved
        g = -inner - xi_target
        if np.linalg.norm(g) <= tol_eff:
            break
        # d(-x1)/de1 = -H11^{-1}, so the Newton step is +H11 g
        H11 = _h11(sys, p, p.join(inner, x2))
        step = H11 @ g
        # damp: never move the effort by more than its own magnitude at once
        scale = max(1.0, float(np.max(np.abs(eps))))
        nrm = float(np.max(np.abs(step)))
        if nrm > scale:
            step *= scale / nrm
        eps = eps + step
    else:
        raise NoConvergence(f"{sys.name}: inverse transform did not converge")
    res = partial_legendre(sys, p, eps, x2, inner, tol, max_iter)
    return float(res.value - xi_target @ eps)


def storage_function(sys: PortHamiltonianSystem, partition, e1_bar):
    """Return ``x2 -> H1*(e1_bar, x2)`` for a fixed effort on the held port."""
    p = sys.partition(partition)
    e1_bar = np.atleast_1d(np.asarray(e1_bar, dtype=float)).copy()

    def storage(x2, x1_guess=None):
        return partial_legendre(sys, p, e1_bar, x2, x1_guess).value

    return storage

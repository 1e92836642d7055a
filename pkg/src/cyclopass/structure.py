"""Certification of the block structure that guarantees one-port cyclo-passivity.

For a partition x = (x1, x2) with ports (1, 2) the sufficient conditions are

    (a) J has no off-diagonal blocks J12, J21,
    (b) the dissipation splits: block i depends on (x, e_i) only,
    (c) the port-1 input matrix G1 is constant, square and invertible,
    (d) G is block diagonal with respect to the ports,
    (e) d2H/dx1^2 has full rank,

and then H1*(e1_bar, x2) is a storage function at port 2 whenever
y1 = G1^T e1 is held at a constant y1_bar.

Structural truth comes from the declared model flags; sampling only
corroborates them, and a disagreement is a hard error. A failed
certificate never claims non-cyclo-passivity by itself.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import LinearData, PortHamiltonianSystem, StatePartition, StructureFlags, sample_states
from .errors import EvaluationError, StructureDeclarationError
from .legendre import SINGULAR_COND, block_condition, partial_legendre

CERTIFIED = "certified"
STRUCTURE_FAIL = "structure_fail"

CONDITIONS = (
    "j_block_diagonal",
    "r_blockwise",
    "g1_constant_invertible",
    "g_block_diagonal",
    "h11_full_rank",
)

J_TOL = 1e-12
R_TOL = 1e-10
G_TOL = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    evidence: float
    declared: Optional[bool] = None
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "evidence": self.evidence,
                "declared": self.declared, "detail": self.detail}


@dataclass(frozen=True)
class StorageCertificate:
    system: PortHamiltonianSystem = field(repr=False)
    partition: StatePartition
    checks: tuple
    verdict: str
    samples: int = 0

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    @property
    def reasons(self) -> tuple:
        return tuple(c.name for c in self.checks if not c.passed)

    def check(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def g1(self) -> np.ndarray:
        p = self.partition
        G = np.asarray(self.system.g_matrix(self.system.nominal), dtype=float)
        return G[np.ix_(list(p.x1), list(p.port1))]

    def effort_for_output(self, y1_bar) -> np.ndarray:
        """e1_bar = G1^{-T} y1_bar."""
        y1_bar = np.atleast_1d(np.asarray(y1_bar, dtype=float))
        return np.linalg.solve(self.g1().T, y1_bar)

    def storage(self, y1_bar):
        """``x2 -> H1*(e1_bar, x2)`` for the held output ``y1_bar``."""
        if not self.certified:
            raise ValueError(
                f"{self.system.name}/{self.partition.name}: no storage for an uncertified "
                f"partition (failed: {', '.join(self.reasons)})"
            )
        e1 = self.effort_for_output(y1_bar)
        sys, p = self.system, self.partition

        def value(x2, x1_guess=None):
            return partial_legendre(sys, p, e1, x2, x1_guess).value

        return value

    def to_dict(self):
        return {
            "system": self.system.name,
            "partition": self.partition.name,
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "samples": self.samples,
            "checks": [c.to_dict() for c in self.checks],
        }


def _scale(M):
    return max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0


def _draw(sys, rng, count, radius, center):
    """Samples inside the model domain (points raising EvaluationError are redrawn)."""
    out = []
    for _ in range(20):
        for x in sample_states(sys, rng, count, radius, center):
            try:
                sys.effort(x)
                sys.hessian(x)
                sys.j_matrix(x)
            except (EvaluationError, FloatingPointError, np.linalg.LinAlgError):
                continue
            out.append(x)
            if len(out) == count:
                return np.array(out)
    if not out:
        raise EvaluationError(f"{sys.name}: no admissible sample states near the nominal state")
    return np.array(out)


def _sampled_checks(sys: PortHamiltonianSystem, p: StatePartition, X, rng):
    i1, i2 = list(p.x1), list(p.x2)
    q1, q2 = list(p.port1), list(p.port2)
    res = {}

    # (a) off-diagonal blocks of J
    worst = 0.0
    for x in X:
        Jx = np.asarray(sys.j_matrix(x), dtype=float)
        off = max(np.max(np.abs(Jx[np.ix_(i1, i2)])), np.max(np.abs(Jx[np.ix_(i2, i1)])))
        worst = max(worst, off / _scale(Jx))
    res["j_block_diagonal"] = (worst <= J_TOL, worst, "max |J12|, |J21| (relative)")

    # (b) blockwise dissipation, by cross perturbation of unit size
    worst = 0.0
    for x in X:
        e = sys.effort(x)
        base = sys.dissipation_vector(x, e)
        for own, other in ((i1, i2), (i2, i1)):
            d = np.zeros(sys.n)
            d[other] = rng.standard_normal(len(other))
            d /= max(np.linalg.norm(d), 1e-300)
            pert = sys.dissipation_vector(x, e + d)
            worst = max(worst, float(np.max(np.abs(pert[own] - base[own]))))
        if sys.r_matrix is not None:
            Rx = np.asarray(sys.r_matrix(x), dtype=float)
            worst = max(worst, float(np.max(np.abs(Rx[np.ix_(i1, i2)]))),
                        float(np.max(np.abs(Rx[np.ix_(i2, i1)]))))
    res["r_blockwise"] = (worst <= R_TOL, worst, "max cross-block response of R(x, e)")

    # (c) constant, square, invertible G1
    G1s = [np.asarray(sys.g_matrix(x), dtype=float)[np.ix_(i1, q1)] for x in X]
    if p.m1 != p.n1:
        res["g1_constant_invertible"] = (False, float("inf"), f"G1 is {p.n1}x{p.m1}, not square")
    else:
        G1 = G1s[0]
        spread = max(float(np.max(np.abs(g - G1))) for g in G1s) / _scale(G1)
        cond = block_condition(G1)
        ok = spread <= G_TOL and cond <= SINGULAR_COND
        res["g1_constant_invertible"] = (ok, spread if cond <= SINGULAR_COND else cond,
                                         f"variation of G1 over samples (cond {cond:.3g})")

    # (d) block-diagonal G
    worst = 0.0
    for x in X:
        Gx = np.asarray(sys.g_matrix(x), dtype=float)
        blocks = []
        if q2:
            blocks.append(np.abs(Gx[np.ix_(i1, q2)]))
        if q1:
            blocks.append(np.abs(Gx[np.ix_(i2, q1)]))
        off = max((float(np.max(b)) for b in blocks), default=0.0)
        worst = max(worst, off / _scale(Gx))
    res["g_block_diagonal"] = (worst <= G_TOL, worst, "max |G[x1, port2]|, |G[x2, port1]|")

    # (e) full-rank Hessian block
    worst = 0.0
    for x in X:
        H = np.asarray(sys.hessian(x), dtype=float)
        worst = max(worst, block_condition(H[np.ix_(i1, i1)]))
    res["h11_full_rank"] = (worst <= SINGULAR_COND, worst, "max condition number of d2H/dx1^2")
    return res


def check_theorem_form(sys: PortHamiltonianSystem, partition, samples=64, rng=None,
                       radius=None, center=None) -> StorageCertificate:
    """Evaluate the five structural conditions for ``partition``.

    Failures are verdicts, not errors. A declared flag contradicted by the
    samples raises :class:`StructureDeclarationError`.
    """
    p = sys.partition(partition)
    rng = np.random.default_rng(12345) if rng is None else rng
    X = _draw(sys, rng, samples, radius, center)
    sampled = _sampled_checks(sys, p, X, rng)
    declared: StructureFlags = sys.flags.get(p.name, StructureFlags())
    checks = []
    for name in CONDITIONS:
        ok, evidence, detail = sampled[name]
        dec = getattr(declared, name)
        if dec is not None and dec != ok:
            raise StructureDeclarationError(
                f"{sys.name}/{p.name}: declared {name}={dec} but samples give {ok} "
                f"(evidence {evidence:.3g}: {detail})"
            )
        passed = ok if dec is None else dec
        if name == "g1_constant_invertible" and dec is None and passed:
            detail += "; constancy only sampled, not proven"
        checks.append(Check(name, bool(passed), float(evidence), dec, detail))
    verdict = CERTIFIED if all(c.passed for c in checks) else STRUCTURE_FAIL
    return StorageCertificate(system=sys, partition=p, checks=tuple(checks), verdict=verdict,
                              samples=len(X))


def certified_storage_value(cert: StorageCertificate, y1_bar, x2, x1_guess=None) -> float:
    """H1*(e1_bar, x2) with e1_bar = G1^{-T} y1_bar for a certified partition."""
    return cert.storage(y1_bar)(np.atleast_1d(np.asarray(x2, dtype=float)), x1_guess)


def inject_coupling(sys: PortHamiltonianSystem, partition, block) -> PortHamiltonianSystem:
    """Return a copy of ``sys`` with a constant skew coupling J12 = block, J21 = -block^T.

    The declared flags of every partition are recomputed conservatively:
    ``j_block_diagonal`` becomes undeclared except for the given partition,
    where it is declared False.
    """
    p = sys.partition(partition)
    block = np.atleast_2d(np.asarray(block, dtype=float)).reshape(p.n1, p.n2)
    C = np.zeros((sys.n, sys.n))
    C[np.ix_(list(p.x1), list(p.x2))] = block
    C[np.ix_(list(p.x2), list(p.x1))] = -block.T
    base_j = sys.j_matrix

    def j_matrix(x):
        return np.asarray(base_j(x), dtype=float) + C

    flags = {}
    for name, fl in sys.flags.items():
        flags[name] = dataclasses.replace(
            fl, j_block_diagonal=False if name == p.name else None)
    linear = sys.linear
    if linear is not None:
        linear = LinearData(linear.Q, linear.J + C, linear.R, linear.G)
    return sys.with_changes(name=sys.name + "+J12", j_matrix=j_matrix, flags=flags, linear=linear)

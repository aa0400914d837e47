"""Conic linear primal/dual pairs over polyhedral cones and interiority tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linsolve import LinearProgram, LPOutcome, LPStatus, solve_lp
from .polygeom import PolyCone

INTERIOR_TOL = 1e-9
MARGIN_CAP = 1e6


def _cone_rows(K: PolyCone, A: np.ndarray, b: np.ndarray):
    """Rows expressing A x + b in K as (A_ineq x <= b_ineq, A_eq x == b_eq)."""
    G, F = K.ineq.reshape(-1, K.dim), K.eq.reshape(-1, K.dim)
    return G @ A, -G @ b, F @ A, -F @ b


@dataclass(frozen=True, eq=False)
class ConicPair:
    """Primal: minimize <alpha, x> + c subject to A x + b in K.

    Dual (derived): maximize <lam, b> + c subject to lam in polar(K) and
    A^T lam + alpha = 0.
    """

    alpha: np.ndarray
    c: float
    A: np.ndarray
    b: np.ndarray
    K: PolyCone

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float).reshape(b.size, alpha.size)
        if not self.K.is_convex:
            raise ValueError("K must be convex")
        if self.K.dim != b.size:
            raise ValueError(f"K has dimension {self.K.dim} but b has {b.size} entries")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", float(self.c))

    def primal_lp(self) -> LinearProgram:
        Ai, bi, Ae, be = _cone_rows(self.K, self.A, self.b)
        return LinearProgram(self.alpha, A=Ai, b=bi, E=Ae, e=be)

    def dual_lp(self) -> LinearProgram:
        """The dual as a minimization of -<lam, b>."""
        Kp = self.K.polar()
        p = self.b.size
        G, F = Kp.ineq.reshape(-1, p), Kp.eq.reshape(-1, p)
        E = np.vstack([self.A.T, F])
        e = np.concatenate([-self.alpha, np.zeros(F.shape[0])])
        return LinearProgram(-self.b, A=G, b=np.zeros(G.shape[0]), E=E, e=e)


@dataclass(frozen=True, eq=False)
class PairSolution:
    primal: LPOutcome
    dual: LPOutcome
    primal_value: float
    dual_value: float

    @property
    def gap(self) -> float | None:
        if math.isfinite(self.primal_value) and math.isfinite(self.dual_value):
            return abs(self.primal_value - self.dual_value)
        return None

    @property
    def statuses(self) -> tuple[str, str]:
        return self.primal.status.value, self.dual.status.value


def solve_pair(pair: ConicPair) -> PairSolution:
    primal = solve_lp(pair.primal_lp())
    dual = solve_lp(pair.dual_lp())
    pv = {LPStatus.OPTIMAL: None, LPStatus.UNBOUNDED: -math.inf}.get(primal.status, math.inf)
    if pv is None:
        pv = primal.value + pair.c
    dv = {LPStatus.OPTIMAL: None, LPStatus.UNBOUNDED: math.inf}.get(dual.status, -math.inf)
    if dv is None:
        dv = -dual.value + pair.c
    return PairSolution(primal, dual, pv, dv)


@dataclass(frozen=True)
class InteriorResult:
    holds: dict[str, bool]
    margin: dict[str, float]

    @property
    def both(self) -> bool:
        return all(self.holds.values())


def interior_margin(offset, M, K: PolyCone, cap: float = MARGIN_CAP) -> float:
    """Largest r <= cap such that every +-r e_j lies in offset + M R^m + K.

    Returns -inf when some +-e_j direction cannot reach even r = 0.
    """
    offset = np.asarray(offset, dtype=float).reshape(-1)
    p = offset.size
    M = np.asarray(M, dtype=float).reshape(p, -1)
    m = M.shape[1]
    G, F = K.ineq.reshape(-1, p), K.eq.reshape(-1, p)
    worst = cap
    # variables (r, v):  r s e_j - offset - M v in K
    for j in range(p):
        for s in (1.0, -1.0):
            ej = np.zeros(p)
            ej[j] = s
            lhs = np.hstack([ej.reshape(-1, 1), -M])
            out = solve_lp(LinearProgram(
                np.concatenate([[-1.0], np.zeros(m)]),
                A=G @ lhs, b=G @ offset, E=F @ lhs, e=F @ offset,
                lower=np.concatenate([[0.0], np.full(m, -math.inf)]),
                upper=np.concatenate([[cap], np.full(m, math.inf)])))
            if not out.optimal:
                return -math.inf
            worst = min(worst, float(out.x[0]))
    return worst


def interior_check(b, M, K: PolyCone, u_offset, signs=("+", "-"),
                   tol: float = INTERIOR_TOL) -> InteriorResult:
    """Decide 0 in int{sigma*u_offset + b + M v + K} separately for each sign."""
    b = np.asarray(b, dtype=float).reshape(-1)
    u = np.asarray(u_offset, dtype=float).reshape(-1)
    holds, margin = {}, {}
    for sg in signs:
        sigma = 1.0 if sg == "+" else -1.0
        r = interior_margin(sigma * u + b, M, K)
        margin[sg] = r
        holds[sg] = r > tol
    return InteriorResult(holds, margin)


@dataclass(frozen=True, eq=False)
class SystemResult:
    feasible: bool
    witness: np.ndarray | None


def linear_system_feasible(M, rhs_cone: PolyCone, offset) -> SystemResult:
    """Find v with offset + M v in rhs_cone, preferring small l1 norm."""
    offset = np.asarray(offset, dtype=float).reshape(-1)
    p = offset.size
    M = np.asarray(M, dtype=float).reshape(p, -1)
    m = M.shape[1]
    G, F = rhs_cone.ineq.reshape(-1, p), rhs_cone.eq.reshape(-1, p)
    split = np.hstack([M, -M])
    out = solve_lp(LinearProgram(np.ones(2 * m), A=G @ split, b=-G @ offset, E=F @ split, e=-F @ offset,
                                 lower=np.zeros(2 * m)))
    if not out.optimal:
        return SystemResult(False, None)
    return SystemResult(True, out.x[:m] - out.x[m:])

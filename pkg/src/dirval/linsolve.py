"""Dense two-phase simplex with Bland's rule, plus cone and polyhedron queries."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-12
COST_TOL = 1e-11
ZERO_TOL = 1e-14   # pivoting roundoff is cleared to exact zero


class LPStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    BREAKDOWN = "NumericalBreakdown"


def _mat(a, cols: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, cols))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1) if a.size else np.zeros((0, cols))
    return a


def _vec(a, n: int) -> np.ndarray:
    if a is None:
        return np.zeros(n)
    return np.asarray(a, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """minimize c.w subject to A w <= b, E w == e, lower <= w <= upper.

    Variables are free unless bounds are given (use +-inf for open ends).
    """

    c: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    E: np.ndarray = None
    e: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A, E = _mat(self.A, n), _mat(self.E, n)
        b, e = _vec(self.b, A.shape[0]), _vec(self.e, E.shape[0])
        lo = np.full(n, -math.inf) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.full(n, math.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if A.shape[1] != n or E.shape[1] != n:
            raise ValueError(f"row width mismatch: objective has {n} entries, A has {A.shape[1]}, E has {E.shape[1]}")
        if b.size != A.shape[0] or e.size != E.shape[0]:
            raise ValueError(f"right-hand side mismatch: A has {A.shape[0]} rows but b has {b.size}; "
                             f"E has {E.shape[0]} rows but e has {e.size}")
        if lo.size != n or hi.size != n:
            raise ValueError("bound vectors must match the number of variables")
        for name, arr in (("c", c), ("A", A), ("b", b), ("E", E), ("e", e)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN or infinite entries")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("inconsistent variable bounds")
        for name, val in (("c", c), ("A", A), ("b", b), ("E", E), ("e", e), ("lower", lo), ("upper", hi)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.c.size

    def residual(self, w) -> float:
        """Largest constraint violation at w."""
        w = np.asarray(w, dtype=float)
        parts = [0.0]
        if self.A.size:
            parts.append(float(np.max(self.A @ w - self.b)))
        if self.E.size:
            parts.append(float(np.max(np.abs(self.E @ w - self.e))))
        parts.append(float(np.max(self.lower - w, initial=0.0)))
        parts.append(float(np.max(w - self.upper, initial=0.0)))
        return max(parts)


@dataclass(frozen=True, eq=False)
class LPOutcome:
    status: LPStatus
    x: np.ndarray | None = None
    value: float | None = None
    ray: np.ndarray | None = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL

    @property
    def feasible(self) -> bool:
        return self.status in (LPStatus.OPTIMAL, LPStatus.UNBOUNDED)


class _Breakdown(Exception):
    pass


@dataclass
class _Tableau:
    T: np.ndarray            # rows: constraints, last column rhs
    basis: list[int]
    pivots: int = 0
    limit: int = 50_000

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[np.abs(T) < ZERO_TOL] = 0.0
        self.basis[r] = j
        self.pivots += 1
        if self.pivots > self.limit:
            raise _Breakdown

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> tuple[str, int]:
        """Minimize cost.z from the current basis. Returns ('optimal'|'unbounded', entering col)."""
        T = self.T
        while True:
            cb = cost[self.basis]
            reduced = cost - cb @ T[:, :-1]
            entering = -1
            for j in np.flatnonzero(allowed):
                if reduced[j] < -COST_TOL * max(1.0, abs(cost[j])):
                    entering = int(j)
                    break
            if entering < 0:
                return "optimal", -1
            col = T[:, entering]
            pos = col > PIVOT_TOL
            if not np.any(pos):
                if np.any(col > 0.0):
                    raise _Breakdown
                return "unbounded", entering
            ratios = np.full(col.size, math.inf)
            ratios[pos] = T[pos, -1] / col[pos]
            best = np.min(ratios)
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            r = min(ties, key=lambda i: self.basis[i])
            self.pivot(int(r), entering)


def solve_lp(lp: LinearProgram) -> LPOutcome:
    """Two-phase dense simplex with Bland's anti-cycling rule."""
    n = lp.n
    # Map w = shift + S z with z >= 0.
    cols, shift = [], np.zeros(n)
    bound_rows: list[tuple[int, float]] = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if math.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nz = len(cols)
    S = np.zeros((n, nz))
    for k, (j, s) in enumerate(cols):
        S[j, k] = s

    A = lp.A @ S
    b = lp.b - lp.A @ shift
    if bound_rows:
        Bx = np.zeros((len(bound_rows), nz))
        for r, (k, width) in enumerate(bound_rows):
            Bx[r, k] = 1.0
        A = np.vstack([A, Bx])
        b = np.concatenate([b, [w for _, w in bound_rows]])
    E = lp.E @ S
    e = lp.e - lp.E @ shift
    cz = lp.c @ S
    offset = float(lp.c @ shift)

    mi, me = A.shape[0], E.shape[0]
    m = mi + me
    nvar = nz + mi                     # structural + slacks
    rows = np.zeros((m, nvar + m + 1))
    rows[:mi, :nz] = A
    rows[:mi, nz:nvar] = np.eye(mi)
    rows[mi:, :nz] = E
    rhs = np.concatenate([b, e])
    rows[:, -1] = rhs
    neg = rhs < 0
    rows[neg] *= -1.0
    rows[:, nvar:nvar + m] = np.eye(m)
    tab = _Tableau(rows, list(range(nvar, nvar + m)))

    def to_w(z: np.ndarray) -> np.ndarray:
        return shift + S @ z[:nz]

    try:
        phase1 = np.concatenate([np.zeros(nvar), np.ones(m)])
        tab.run(phase1, np.ones(nvar + m, dtype=bool))
        infeas = float(np.sum(tab.T[:, -1][[i for i, bv in enumerate(tab.basis) if bv >= nvar]]))
        scale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)))
        if infeas > FEAS_TOL * scale:
            return LPOutcome(LPStatus.INFEASIBLE, pivots=tab.pivots)
        # Drive artificials out of the basis; drop redundant rows.
        keep = []
        for r in range(m):
            if tab.basis[r] < nvar:
                keep.append(r)
                continue
            cand = np.flatnonzero(np.abs(tab.T[r, :nvar]) > 1e-9)
            if cand.size:
                tab.pivot(r, int(cand[0]))
                keep.append(r)
        tab.T = tab.T[keep][:, list(range(nvar)) + [tab.T.shape[1] - 1]]
        tab.basis = [tab.basis[r] for r in keep]
        cost = np.concatenate([cz, np.zeros(mi)])
        status, entering = tab.run(cost, np.ones(nvar, dtype=bool))
    except _Breakdown:
        return LPOutcome(LPStatus.BREAKDOWN, pivots=tab.pivots)

    z = np.zeros(nvar)
    for r, bv in enumerate(tab.basis):
        z[bv] = tab.T[r, -1]
    z = np.maximum(z, 0.0)
    w = to_w(z)
    if status == "unbounded":
        dz = np.zeros(nvar)
        dz[entering] = 1.0
        for r, bv in enumerate(tab.basis):
            dz[bv] = -tab.T[r, entering]
        ray = S @ dz[:nz]
        ray = ray / np.max(np.abs(ray))
        return LPOutcome(LPStatus.UNBOUNDED, x=w, value=-math.inf, ray=ray, pivots=tab.pivots)
    return LPOutcome(LPStatus.OPTIMAL, x=w, value=float(lp.c @ w), pivots=tab.pivots)


# ---------------------------------------------------------------- cone queries

def cone_nonzero_element(generators, lineality, M, tol: float = 1e-9) -> np.ndarray | None:
    """A nonzero lam = G mu + H nu (mu >= 0) with M lam = 0, or None.

    The lineality part is checked first through the null space of M H; a
    nonzero element involving the pointed part is then found by the LP with
    sum(mu) = 1.  The witness is scaled to unit max-norm.
    """
    G = np.asarray(generators, dtype=float)
    H = np.asarray(lineality, dtype=float)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    dim = G.shape[1] if G.size else (H.shape[1] if H.size else M.shape[1])
    G = G.reshape(-1, dim)
    H = H.reshape(-1, dim)
    M = M.reshape(-1, dim) if M.size else np.zeros((0, dim))
    if H.shape[0]:
        MH = M @ H.T
        if MH.shape[0] == 0:
            lam = H[0]
            return lam / np.max(np.abs(lam))
        _, s, vt = np.linalg.svd(MH)
        smax = s[0] if s.size else 0.0
        rank = int(np.sum(s > tol * max(1.0, smax)))
        if rank < H.shape[0]:
            lam = H.T @ vt[rank]
            return lam / np.max(np.abs(lam))
    if not G.shape[0]:
        return None
    ng, nh = G.shape[0], H.shape[0]
    E = np.vstack([np.hstack([M @ G.T, M @ H.T]), np.concatenate([np.ones(ng), np.zeros(nh)])])
    e = np.concatenate([np.zeros(M.shape[0]), [1.0]])
    lower = np.concatenate([np.zeros(ng), np.full(nh, -math.inf)])
    out = solve_lp(LinearProgram(np.zeros(ng + nh), E=E, e=e, lower=lower))
    if not out.optimal:
        return None
    lam = G.T @ out.x[:ng] + H.T @ out.x[ng:]
    big = float(np.max(np.abs(lam)))
    if big <= tol:
        return None
    return lam / big


def piece_nonzero_element(piece, M, tol: float = 1e-9) -> np.ndarray | None:
    """``cone_nonzero_element`` for a PolyCone."""
    return cone_nonzero_element(piece.generators, piece.lineality, M, tol)


@dataclass(frozen=True, eq=False)
class BoundednessResult:
    status: LPStatus                  # Optimal when nonempty, Infeasible when empty
    bounded: bool | None
    ray: np.ndarray | None = None
    point: np.ndarray | None = None

    @property
    def empty(self) -> bool:
        return self.status is LPStatus.INFEASIBLE


def recession_ray(A, E, dim: int, tol: float = 1e-9) -> np.ndarray | None:
    """Nonzero r with A r <= 0, E r == 0 (l1-normalized), or None."""
    A = _mat(A, dim)
    E = _mat(E, dim)
    for i in range(dim):
        for sign in (1.0, -1.0):
            c = np.zeros(dim)
            c[i] = -sign
            out = solve_lp(LinearProgram(c, A=A, b=np.zeros(A.shape[0]), E=E, e=np.zeros(E.shape[0]),
                                         lower=-np.ones(dim), upper=np.ones(dim)))
            if out.optimal and -out.value > tol:
                r = out.x
                r[np.abs(r) < tol] = 0.0
                return r / np.sum(np.abs(r))
    return None


def polyhedron_bounded(A=None, b=None, E=None, e=None, dim: int | None = None) -> BoundednessResult:
    """Decide whether {w : A w <= b, E w == e} is empty, bounded or unbounded."""
    if dim is None:
        for mat in (A, E):
            if mat is not None and np.asarray(mat).size:
                dim = np.atleast_2d(mat).shape[1]
                break
        else:
            raise ValueError("dimension required when no rows are given")
    A, E = _mat(A, dim), _mat(E, dim)
    feas = solve_lp(LinearProgram(np.zeros(dim), A=A, b=b, E=E, e=e))
    if feas.status is LPStatus.INFEASIBLE:
        return BoundednessResult(LPStatus.INFEASIBLE, None)
    if feas.status is LPStatus.BREAKDOWN:
        return BoundednessResult(LPStatus.BREAKDOWN, None)
    ray = recession_ray(A, E, dim)
    return BoundednessResult(LPStatus.OPTIMAL, ray is None, ray, feas.x)

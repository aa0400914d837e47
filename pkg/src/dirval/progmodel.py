"""Parametric programs min_y f(x, y) s.t. P(x, y) in C and a certified grid value solver."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import exprcalc
from .exprcalc import Expr
from .polygeom import BlockSet, project, project_many

DEFAULT_TOLERANCES = {
    "feas": 1e-8,
    "grid_feas": 1e-6,
    "eps_opt": 1e-6,
    "polish": 1e-10,
    "cluster": 1e-4,
    "stationarity": 1e-5,
}
DEFAULT_GRID = {1: 2001, 2: 301, 3: 61}
MAX_M = 3
# boundary searches aim at exactly feasible points when the start point is one
STRICT_FEAS = 0.0
POLISH_CYCLES = 12


@dataclass(frozen=True, eq=False)
class ParametricProgram:
    n: int
    m: int
    f: Expr
    P: tuple[Expr, ...]
    C: BlockSet
    ybox: np.ndarray
    tolerances: dict = field(default_factory=dict)
    name: str = ""
    grid: int | None = None

    def __post_init__(self):
        if not 1 <= self.m <= MAX_M:
            raise ValueError(f"m must be between 1 and {MAX_M}, got {self.m}")
        if self.n < 1:
            raise ValueError("n must be positive")
        box = np.asarray(self.ybox, dtype=float).reshape(self.m, 2)
        if not np.all(np.isfinite(box)) or np.any(box[:, 0] >= box[:, 1]):
            raise ValueError("ybox must be finite with lower < upper per coordinate")
        if len(self.P) != self.C.dim:
            raise ValueError(f"C covers {self.C.dim} coords, P has {len(self.P)} rows")
        for e in (self.f, *self.P):
            for cls, idx in e.variables():
                bound = self.n if cls == "x" else self.m
                if idx > bound:
                    raise ValueError(f"{cls}{idx} out of range in {e}")
        object.__setattr__(self, "ybox", box)
        object.__setattr__(self, "P", tuple(self.P))
        object.__setattr__(self, "tolerances", {**DEFAULT_TOLERANCES, **dict(self.tolerances)})
        gx, gy = exprcalc.gradient(self.f, self.n, self.m)
        jac = [exprcalc.gradient(e, self.n, self.m) for e in self.P]
        object.__setattr__(self, "_grad_f", (gx, gy))
        object.__setattr__(self, "_jac_P", ([r[0] for r in jac], [r[1] for r in jac]))
        object.__setattr__(self, "_f", exprcalc.compile_expr(self.f))
        object.__setattr__(self, "_P", [exprcalc.compile_expr(e) for e in self.P])
        object.__setattr__(self, "_gfx", [exprcalc.compile_expr(e) for e in gx])
        object.__setattr__(self, "_gfy", [exprcalc.compile_expr(e) for e in gy])
        object.__setattr__(self, "_jx", [[exprcalc.compile_expr(e) for e in row[0]] for row in jac])
        object.__setattr__(self, "_jy", [[exprcalc.compile_expr(e) for e in row[1]] for row in jac])

    @property
    def p(self) -> int:
        return self.C.dim

    @property
    def tol(self) -> dict:
        return self.tolerances

    @property
    def grad_f_exprs(self) -> tuple[list[Expr], list[Expr]]:
        return self._grad_f

    @property
    def jac_P_exprs(self) -> tuple[list[list[Expr]], list[list[Expr]]]:
        return self._jac_P

    # -------------------------------------------------- vectorized evaluation

    def _rows(self, x, Y) -> tuple[np.ndarray, np.ndarray]:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        X = np.asarray(x, dtype=float)
        X = np.broadcast_to(X.reshape(-1, self.n) if X.ndim > 1 else X.reshape(1, self.n), (Y.shape[0], self.n))
        return X, Y

    def f_many(self, x, Y) -> np.ndarray:
        X, Y = self._rows(x, Y)
        return np.asarray(self._f(X, Y), dtype=float)

    def P_many(self, x, Y) -> np.ndarray:
        X, Y = self._rows(x, Y)
        if not self._P:
            return np.zeros((Y.shape[0], 0))
        return np.column_stack([np.asarray(g(X, Y), dtype=float) for g in self._P])

    def residual_many(self, x, Y) -> np.ndarray:
        """dist(P(x, y), C) row-wise; +inf where P is undefined."""
        Pv = self.P_many(x, Y)
        if Pv.shape[1] == 0:
            return np.zeros(Pv.shape[0])
        bad = ~np.all(np.isfinite(Pv), axis=1)
        Pv = np.where(np.isfinite(Pv), Pv, 0.0)
        _, d = project_many(self.C, Pv)
        d[bad] = math.inf
        return d

    # -------------------------------------------------- pointwise evaluation

    def _point(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(x, dtype=float).reshape(1, self.n), np.asarray(y, dtype=float).reshape(1, self.m)

    def f_value(self, x, y) -> float:
        X, Y = self._point(x, y)
        return float(np.asarray(self._f(X, Y)).reshape(-1)[0])

    def P_value(self, x, y) -> np.ndarray:
        return self._eval_list(self._P, x, y)

    def residual(self, x, y) -> float:
        z = self.P_value(x, y)
        if z.size == 0:
            return 0.0
        if not np.all(np.isfinite(z)):
            return math.inf
        return project(self.C, z)[1]

    def _eval_list(self, fns, x, y) -> np.ndarray:
        X, Y = self._point(x, y)
        return np.array([float(np.asarray(g(X, Y)).reshape(-1)[0]) for g in fns])

    def grad_x_f(self, x, y) -> np.ndarray:
        return self._eval_list(self._gfx, x, y)

    def grad_y_f(self, x, y) -> np.ndarray:
        return self._eval_list(self._gfy, x, y)

    def jac_x_P(self, x, y) -> np.ndarray:
        return np.array([self._eval_list(row, x, y) for row in self._jx]).reshape(self.p, self.n)

    def jac_y_P(self, x, y) -> np.ndarray:
        return np.array([self._eval_list(row, x, y) for row in self._jy]).reshape(self.p, self.m)

    def is_affine_in_y(self) -> bool:
        """Every entry of the y-Jacobian of P is a constant expression."""
        return all(e.is_constant for row in self._jac_P[1] for e in row)


def is_feasible(prog: ParametricProgram, x, y) -> tuple[bool, float]:
    r = prog.residual(x, y)
    return r <= prog.tol["feas"], r


# ---------------------------------------------------------------- solve result

@dataclass(frozen=True, eq=False)
class ValueSolveResult:
    status: str                       # "Solved" | "Infeasible"
    x: np.ndarray
    value: float
    points: np.ndarray                # cluster representatives, shape (k, m)
    f_values: np.ndarray
    feas_residuals: np.ndarray
    stationarity: np.ndarray
    cluster_diameter: float
    touches_box: bool

    @property
    def solved(self) -> bool:
        return self.status == "Solved"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "x": self.x.tolist(),
            "value": self.value,
            "solutions": self.points.tolist(),
            "cluster_count": int(self.points.shape[0]),
            "cluster_diameter": self.cluster_diameter,
            "max_feasibility_residual": float(np.max(self.feas_residuals, initial=0.0)),
            "max_stationarity_residual": float(np.max(self.stationarity, initial=0.0)),
            "touches_ybox": self.touches_box,
        }


def _infeasible(x) -> ValueSolveResult:
    z = np.zeros((0, 0))
    return ValueSolveResult("Infeasible", np.asarray(x, dtype=float), math.inf, z, np.zeros(0), np.zeros(0),
                            np.zeros(0), 0.0, False)


def _bisect_boundary(ok: Callable[[float], bool], inside: float, outside: float, iters: int = 60) -> float:
    """Feasible point closest to the feasibility boundary on [inside, outside]."""
    a, b = inside, outside
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if ok(mid):
            a = mid
        else:
            b = mid
        if abs(b - a) <= 1e-15 * max(1.0, abs(a)):
            break
    return a


def _golden(fn: Callable[[float], float], a: float, b: float, xtol: float) -> float:
    if b - a <= xtol:
        return 0.5 * (a + b)
    res = minimize_scalar(fn, bounds=(a, b), method="bounded", options={"xatol": xtol, "maxiter": 500})
    best = float(res.x)
    # the bounded method never evaluates the endpoints
    for cand in (a, b):
        if fn(cand) < fn(best):
            best = cand
    return best


def cluster_points(Y: np.ndarray, f: np.ndarray, radius: float) -> tuple[np.ndarray, float]:
    """Greedy clustering (lowest f first). Returns representative indices and max diameter."""
    if Y.shape[0] == 0:
        return np.zeros(0, dtype=int), 0.0
    order = np.lexsort(tuple(Y[:, j] for j in reversed(range(Y.shape[1]))) + (np.round(f, 12),))
    label = np.full(Y.shape[0], -1)
    reps: list[int] = []
    for i in order:
        if label[i] >= 0:
            continue
        free = label < 0
        near = free & (np.linalg.norm(Y - Y[i], axis=1) <= radius)
        label[near] = len(reps)
        reps.append(i)
    diam = 0.0
    for k in range(len(reps)):
        pts = Y[label == k]
        if pts.shape[0] > 1:
            diam = max(diam, float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=2))))
    reps_arr = np.array(reps, dtype=int)
    sort = np.lexsort(tuple(Y[reps_arr, j] for j in reversed(range(Y.shape[1]))))
    return reps_arr[sort], diam


def stationarity_residual(prog: ParametricProgram, x, Y, h: float = 1e-7) -> np.ndarray:
    """Row-wise max over feasible coordinate directions d of max(0, -grad_y f . d).

    A step counts as feasible when it does not increase the constraint violation;
    the tolerance band alone would admit directions leaving thin sets like {y : y^2 <= 0}.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X, _ = prog._rows(x, Y)
    base = prog.residual_many(x, Y)
    G = np.column_stack([np.asarray(g(X, Y), dtype=float) * np.ones(Y.shape[0]) for g in prog._gfy])
    worst = np.zeros(Y.shape[0])
    for j in range(prog.m):
        for s in (1.0, -1.0):
            Yp = Y.copy()
            Yp[:, j] += s * h
            inbox = (Yp[:, j] >= prog.ybox[j, 0] - 1e-12) & (Yp[:, j] <= prog.ybox[j, 1] + 1e-12)
            feas = inbox & (prog.residual_many(x, Yp) <= base)
            worst = np.where(feas, np.maximum(worst, -s * G[:, j]), worst)
    return worst


def _grid_axes(prog: ParametricProgram, density: int | None) -> list[np.ndarray]:
    k = density or prog.grid or DEFAULT_GRID[prog.m]
    return [np.linspace(lo, hi, k) for lo, hi in prog.ybox]


# ---------------------------------------------------------------- m = 1

def feasible_pieces_1d(prog: ParametricProgram, x, density: int | None = None):
    """F(x) within ybox for m = 1 as refined intervals [(a, b), ...] (points have a == b)."""
    x = np.asarray(x, dtype=float)
    tol = prog.tol["feas"]
    grid = _grid_axes(prog, density)[0]
    res = prog.residual_many(x, grid[:, None])
    strict = lambda v: prog.residual(x, [v]) <= STRICT_FEAS
    loose = lambda v: prog.residual(x, [v]) <= tol
    mask = res <= tol
    pieces: list[tuple[float, float]] = []
    idx = np.flatnonzero(mask)
    if idx.size:
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate([[idx[0]], idx[breaks + 1]])
        ends = np.concatenate([idx[breaks], [idx[-1]]])
        for s, e in zip(starts, ends):
            # bisect from the outermost exactly feasible node so the ends stay exactly feasible
            exact = s + np.flatnonzero(res[s:e + 1] <= STRICT_FEAS)
            if s == 0:
                lo = grid[0]
            elif exact.size:
                lo = _bisect_boundary(strict, grid[exact[0]], grid[s - 1])
            else:
                lo = _bisect_boundary(loose, grid[s], grid[s - 1])
            if e == grid.size - 1:
                hi = grid[e]
            elif exact.size:
                hi = _bisect_boundary(strict, grid[exact[-1]], grid[e + 1])
            else:
                hi = _bisect_boundary(loose, grid[e], grid[e + 1])
            pieces.append((lo, hi))
    # isolated feasible points between grid nodes: local minima of the residual
    finite = np.where(np.isfinite(res), res, np.inf)
    for i in range(grid.size):
        if mask[i] or not np.isfinite(finite[i]):
            continue
        left = finite[i - 1] if i > 0 else np.inf
        right = finite[i + 1] if i < grid.size - 1 else np.inf
        # interior nodes of a plateau are skipped; its ends still get searched
        if finite[i] <= left and finite[i] <= right and (finite[i] < left or finite[i] < right):
            a = grid[max(i - 1, 0)]
            b = grid[min(i + 1, grid.size - 1)]
            r = lambda v: float(prog.residual(x, [v]))
            v = _golden(r, a, b, 1e-14)
            if r(v) <= tol and not any(lo - 1e-12 <= v <= hi + 1e-12 for lo, hi in pieces):
                pieces.append((v, v))
    pieces.sort()
    return pieces


def _solve_1d(prog: ParametricProgram, x: np.ndarray, density: int | None):
    tol = prog.tol
    pieces = feasible_pieces_1d(prog, x, density)
    if not pieces:
        return None
    grid = _grid_axes(prog, density)[0]
    fy = lambda v: prog.f_value(x, [v])
    cands: list[float] = []
    for lo, hi in pieces:
        cands += [lo, hi]
        inside = grid[(grid > lo) & (grid < hi)]
        if inside.size == 0:
            if hi > lo:
                cands.append(_golden(fy, lo, hi, tol["polish"]))
            continue
        fv = prog.f_many(x, inside[:, None])
        pts = np.concatenate([[lo], inside, [hi]])
        vals = np.concatenate([[fy(lo)], fv, [fy(hi)]])
        mid = vals[1:-1]
        is_min = (mid <= vals[:-2]) & (mid <= vals[2:]) & ~((mid == vals[:-2]) & (mid == vals[2:]))
        loc = np.flatnonzero(is_min) + 1
        for i in loc[np.argsort(vals[loc], kind="stable")][:20]:
            cands.append(_golden(fy, pts[i - 1], pts[i + 1], tol["polish"]))
        # flat stretches: near-optimal grid points are kept as samples of a continuum
        cands += list(inside)
    Y = np.array(cands)[:, None]
    res = prog.residual_many(x, Y)
    keep = res <= tol["feas"]
    return Y[keep]


# ---------------------------------------------------------------- m >= 2

def _coordinate_polish(prog: ParametricProgram, x, y0: np.ndarray, step: float, anchor=None) -> np.ndarray:
    tol = prog.tol
    y = y0.copy()
    ok = lambda z: prog.residual(x, z) <= tol["feas"]
    strict = lambda z: prog.residual(x, z) <= STRICT_FEAS
    fval = prog.f_value(x, y)
    for _ in range(POLISH_CYCLES):
        prev = fval
        for j in range(prog.m):
            def at(v, j=j):
                z = y.copy()
                z[j] = v
                return z
            lo_lim = max(prog.ybox[j, 0], y[j] - step)
            hi_lim = min(prog.ybox[j, 1], y[j] + step)
            edge = strict if strict(y) else ok
            nudge = 1e-7 * max(1.0, abs(y[j]))
            if not (edge(at(min(y[j] + nudge, hi_lim))) or edge(at(max(y[j] - nudge, lo_lim)))):
                continue  # pinned along this axis, e.g. by an equality row
            lo = lo_lim if edge(at(lo_lim)) else _bisect_boundary(lambda v: edge(at(v)), y[j], lo_lim)
            hi = hi_lim if edge(at(hi_lim)) else _bisect_boundary(lambda v: edge(at(v)), y[j], hi_lim)
            if hi - lo <= 1e-15:
                continue
            fn = lambda v: prog.f_value(x, at(v)) if ok(at(v)) else math.inf
            v = _golden(fn, lo, hi, tol["polish"])
            cand = at(v)
            fc = prog.f_value(x, cand)
            if ok(cand) and (fc < fval - 1e-15 or (
                    anchor is not None and abs(fc - fval) <= 1e-15
                    and np.linalg.norm(cand - anchor) < np.linalg.norm(y - anchor))):
                y, fval = cand, fc
        step *= 0.5
        if abs(prev - fval) <= tol["polish"] or step <= 1e-6:
            break
    return y


def _local_pieces(C: BlockSet, z: np.ndarray, limit: int = 8) -> list[tuple[np.ndarray, np.ndarray]]:
    """Convex pieces (coordinate bounds) of C that contain the point nearest to z."""
    per_block = []
    for b, sl in zip(C.blocks, C.slices()):
        if b.kind == "compl":
            a, c = z[sl]
            opts = []
            if c <= max(a, 0.0) + 1e-8:
                opts.append(((0.0, math.inf), (0.0, 0.0)))
            if a <= max(c, 0.0) + 1e-8:
                opts.append(((0.0, 0.0), (0.0, math.inf)))
            per_block.append(opts)
        else:
            v = z[sl.start]
            lo, hi = min(b.intervals(), key=lambda iv: max(iv[0] - v, v - iv[1], 0.0))
            per_block.append([((lo, hi),)])
    out = []
    for combo in itertools.islice(itertools.product(*per_block), limit):
        bounds = [iv for part in combo for iv in part]
        out.append((np.array([lo for lo, _ in bounds]), np.array([hi for _, hi in bounds])))
    return out


def _piece_constraints(prog: ParametricProgram, x, lo: np.ndarray, hi: np.ndarray) -> list[dict]:
    cons = []
    for i in range(prog.p):
        row = lambda y, i=i: prog.P_value(x, y)[i]
        jrow = lambda y, i=i: prog.jac_y_P(x, y)[i]
        if lo[i] == hi[i]:
            cons.append({"type": "eq", "fun": lambda y, r=row, c=lo[i]: r(y) - c, "jac": jrow})
            continue
        if math.isfinite(lo[i]):
            cons.append({"type": "ineq", "fun": lambda y, r=row, c=lo[i]: r(y) - c, "jac": jrow})
        if math.isfinite(hi[i]):
            cons.append({"type": "ineq", "fun": lambda y, r=row, c=hi[i]: c - r(y),
                         "jac": lambda y, j=jrow: -j(y)})
    return cons


def _piece_minimize(prog: ParametricProgram, x, fun, jac, y0: np.ndarray, lo, hi) -> np.ndarray | None:
    """SLSQP over one convex piece; None unless the result is tolerance-feasible."""
    try:
        res = minimize(fun, y0, jac=jac, bounds=[tuple(b) for b in prog.ybox],
                       constraints=_piece_constraints(prog, x, lo, hi), method="SLSQP",
                       options={"ftol": 1e-15, "maxiter": 200})
    except (ValueError, FloatingPointError):
        return None
    y = np.clip(res.x, prog.ybox[:, 0], prog.ybox[:, 1])
    if not np.all(np.isfinite(y)) or prog.residual(x, y) > prog.tol["feas"]:
        return None
    return y


def _piece_refine(prog: ParametricProgram, x, y0: np.ndarray) -> np.ndarray:
    """SLSQP on each convex piece of C active at P(x, y0); keeps the best feasible result."""
    best, fbest = y0, prog.f_value(x, y0)
    z = prog.P_value(x, y0)
    exact = prog.residual(x, y0) <= STRICT_FEAS
    for lo, hi in _local_pieces(prog.C, z):
        y = _piece_minimize(prog, x, lambda y: prog.f_value(x, y), lambda y: prog.grad_y_f(x, y), y0, lo, hi)
        if y is None:
            continue
        if exact and prog.residual(x, y) > STRICT_FEAS:
            # SLSQP stops marginally outside; keep exact feasibility when the start had it
            s = _bisect_boundary(lambda v: prog.residual(x, y0 + v * (y - y0)) <= STRICT_FEAS, 0.0, 1.0)
            y = y0 + s * (y - y0)
        fy = prog.f_value(x, y)
        if fy < fbest - 1e-15:
            best, fbest = y, fy
    return best


def _restore(prog: ParametricProgram, x, y0: np.ndarray) -> np.ndarray | None:
    """Minimize the residual from y0 by coordinate search; None when it stays infeasible."""
    y = y0.copy()
    step = float(np.max(prog.ybox[:, 1] - prog.ybox[:, 0])) / 50
    r = lambda z: prog.residual(x, z)
    for _ in range(200):
        for j in range(prog.m):
            def line(v, j=j):
                z = y.copy()
                z[j] = v
                return r(z)
            lo = max(prog.ybox[j, 0], y[j] - step)
            hi = min(prog.ybox[j, 1], y[j] + step)
            y[j] = _golden(line, lo, hi, 1e-14)
        if r(y) <= prog.tol["feas"]:
            return y
        step *= 0.7
        if step < 1e-12:
            break
    return None


def _tighten(prog: ParametricProgram, x, y: np.ndarray, exact_pts: np.ndarray, reach: float) -> np.ndarray:
    """Move a loosely feasible y onto the exactly feasible set along the segment to a nearby exact grid point."""
    if prog.residual(x, y) <= STRICT_FEAS:
        return y
    d = np.linalg.norm(exact_pts - y, axis=1)
    i = int(np.argmin(d))
    if d[i] > reach:
        return y
    base = exact_pts[i]
    s = _bisect_boundary(lambda v: prog.residual(x, y + v * (base - y)) <= STRICT_FEAS, 1.0, 0.0)
    out = y + s * (base - y)
    return out if prog.f_value(x, out) <= prog.f_value(x, y) + prog.tol["eps_opt"] else y


def feasible_grid(prog: ParametricProgram, x, density: int | None = None, tol: float | None = None):
    axes = _grid_axes(prog, density)
    Y = np.array(list(itertools.product(*axes)))
    res = prog.residual_many(x, Y)
    tol = prog.tol["grid_feas"] if tol is None else tol
    return Y, res, res <= tol


def _solve_nd(prog: ParametricProgram, x: np.ndarray, density: int | None, anchor=None):
    tol = prog.tol
    Y, res, mask = feasible_grid(prog, x, density)
    axes = _grid_axes(prog, density)
    h = max(float(a[1] - a[0]) for a in axes)
    if not np.any(mask):
        order = np.argsort(np.where(np.isfinite(res), res, np.inf))[:10]
        starts = [s for s in (_restore(prog, x, Y[i]) for i in order) if s is not None]
        if not starts:
            return None
        starts = np.array(starts)
    else:
        shape = tuple(a.size for a in axes)
        fgrid = np.where(mask, prog.f_many(x, Y), np.inf).reshape(shape)
        local = np.isfinite(fgrid)
        for ax in range(prog.m):
            for shift in (1, -1):
                nb = np.roll(fgrid, shift, axis=ax)
                edge = [slice(None)] * prog.m
                edge[ax] = 0 if shift == 1 else -1
                nb[tuple(edge)] = np.inf
                local &= fgrid <= nb
        flat_f = fgrid.ravel()
        loc = np.flatnonzero(local.ravel())
        loc = loc[np.argsort(flat_f[loc], kind="stable")][:8]
        best = np.argsort(flat_f, kind="stable")[:3]
        idx = list(dict.fromkeys(list(best) + list(loc)))
        starts = Y[idx]
        fmin = float(np.min(flat_f))
        # near-optimal grid points sample continua of minimizers
        flat = Y[flat_f <= fmin + tol["eps_opt"]]
        if flat.shape[0] > 4000:
            flat = flat[:: flat.shape[0] // 4000 + 1]
        starts = np.vstack([starts, flat])
        n_polish = len(idx)
    if not np.any(mask):
        n_polish = starts.shape[0]
    chosen: list[np.ndarray] = []
    for s in starts[:n_polish]:
        # grid neighbours of an already polished start share its basin
        if any(np.max(np.abs(s - c)) <= 1.01 * h for c in chosen):
            continue
        chosen.append(s)
    polished = [_piece_refine(prog, x, _coordinate_polish(prog, x, s, 2 * h, anchor)) for s in chosen]
    exact_pts = Y[res <= STRICT_FEAS]
    if exact_pts.shape[0]:
        polished = [_tighten(prog, x, y, exact_pts, 3 * h) for y in polished]
    out = np.vstack([np.array(polished), starts[n_polish:]])
    keep = prog.residual_many(x, out) <= tol["feas"]
    return out[keep]


# ---------------------------------------------------------------- public solver

def solve_value(prog: ParametricProgram, x, density: int | None = None, anchor=None) -> ValueSolveResult:
    """V(x) and clustered S(x) by grid search plus local polish."""
    x = np.asarray(x, dtype=float).reshape(prog.n)
    tol = prog.tol
    if prog.m == 1:
        Y = _solve_1d(prog, x, density)
    else:
        Y = _solve_nd(prog, x, density, anchor)
    if Y is None or Y.shape[0] == 0:
        return _infeasible(x)
    fv = prog.f_many(x, Y)
    good = np.isfinite(fv)
    Y, fv = Y[good], fv[good]
    if Y.shape[0] == 0:
        return _infeasible(x)
    best = float(np.min(fv))
    near = fv <= best + tol["eps_opt"]
    Y, fv = Y[near], fv[near]
    stat = stationarity_residual(prog, x, Y)
    # a polished minimizer is always kept; other samples must be stationary
    keep = (stat <= tol["stationarity"]) | (fv <= best + 1e-12)
    Y, fv, stat = Y[keep], fv[keep], stat[keep]
    reps, diam = cluster_points(Y, fv, tol["cluster"])
    Y, fv, stat = Y[reps], fv[reps], stat[reps]
    res = prog.residual_many(x, Y)
    touches = bool(np.any(np.abs(Y - prog.ybox[:, 0]) <= 1e-6) or np.any(np.abs(Y - prog.ybox[:, 1]) <= 1e-6))
    return ValueSolveResult("Solved", x, best, Y, fv, res, stat, diam, touches)


def value_accuracy_probe(prog: ParametricProgram, xs: Sequence, closed_form: Callable | None = None) -> float:
    """max |V_hat(x) - V_ref(x)| over the samples (0 when no reference is given)."""
    if closed_form is None:
        return 0.0
    err = 0.0
    for x in xs:
        v = solve_value(prog, np.atleast_1d(np.asarray(x, dtype=float))).value
        ref = float(closed_form(x))
        if math.isinf(v) or math.isinf(ref):
            if v != ref:
                return math.inf
            continue
        err = max(err, abs(v - ref))
    return err


def dist_to_feasible(prog: ParametricProgram, x, y, density: int | None = None) -> float:
    """dist(y, F(x)) within ybox: exact intervals for m = 1; otherwise the best of local piece
    projections and segment bisection toward nearby grid-feasible points."""
    y = np.asarray(y, dtype=float).reshape(prog.m)
    if prog.residual(x, y) <= 1e-12:
        return 0.0
    if prog.m == 1:
        pieces = feasible_pieces_1d(prog, x, density)
        if not pieces:
            return math.inf
        v = y[0]
        return min(0.0 if lo <= v <= hi else min(abs(v - lo), abs(v - hi)) for lo, hi in pieces)
    best = math.inf
    # nearest point on each local convex piece; exact when P is affine in y
    for lo, hi in _local_pieces(prog.C, prog.P_value(x, y)):
        g = _piece_minimize(prog, x, lambda v: 0.5 * float(np.sum((v - y) ** 2)), lambda v: v - y, y, lo, hi)
        if g is not None:
            best = min(best, float(np.linalg.norm(g - y)))
    Y, res, mask = feasible_grid(prog, x, density, tol=prog.tol["feas"])
    F = Y[mask]
    if F.shape[0] == 0:
        return best
    near = np.argsort(np.linalg.norm(F - y, axis=1))[:8]
    G = F[near]
    # bisect all segments g -> y at once for the farthest feasible point g + s (y - g)
    lo, hi = np.zeros(G.shape[0]), np.ones(G.shape[0])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        ok = prog.residual_many(x, G + mid[:, None] * (y - G)) <= prog.tol["feas"]
        lo, hi = np.where(ok, mid, lo), np.where(ok, hi, mid)
    ends = G + lo[:, None] * (y - G)
    return min(best, float(np.min(np.linalg.norm(ends - y, axis=1))))

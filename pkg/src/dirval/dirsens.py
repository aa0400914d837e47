"""Directional sensitivity of the value function V(x) = min_y {f(x, y) : P(x, y) in C}.

Numeric Dini estimates, directional solution sets, directional Robinson
stability (sufficient conditions and a sampling probe), the multiplier-based
bounds L <= V'_-(x; u) <= V'_+(x; u) <= U and the resulting verdict.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import polygeom
from .coneduals import interior_check, linear_system_feasible
from .lagmult import extremize_xgrad, multiplier_set, nnamcq, robinson_cq, licq, nlp_labels
from .linsolve import LinearProgram, piece_nonzero_element, recession_ray, solve_lp
from .polygeom import DirectionalNbhd
from .progmodel import ParametricProgram, ValueSolveResult, cluster_points, dist_to_feasible, solve_value

DINI_SCALES = tuple(0.1 * 2.0 ** -k for k in range(13))
DINI_TAIL = 4
SPREAD_TAIL = 3
VALUE_ACCURACY = 1e-10
CONTINUITY_TOL = 1e-6
SOLUTION_SET_TOL = 1e-4
IMAGE_ZERO = 1e-10
ANGLE_TOL = 1e-4
KAPPA_LIMIT = 1e4
TREND_LIMIT = 100.0
PROBE_MIN_FRACTION = 1e-4
MAX_HYP_POINTS = 64
SNAP_ROUNDOFF = 1e-12
SNAP_MERGE = 1e-5  # sqrt of the roundoff level: quadratic growth lets the walk drift this far
_W1 = (1.0, -1.0, 0.75, -0.75, 0.5, -0.5, 0.25, -0.25)


class DiniInfeasibleError(RuntimeError):
    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)
        super().__init__(f"F(x) is empty at x={self.x.tolist()}")


class ValueOracle:
    """Memoized solve_value for one program."""

    def __init__(self, prog: ParametricProgram):
        self.prog = prog
        self._cache: dict[tuple, ValueSolveResult] = {}

    def solve(self, x) -> ValueSolveResult:
        x = np.asarray(x, dtype=float).reshape(self.prog.n)
        key = tuple(np.round(x, 15))
        if key not in self._cache:
            self._cache[key] = solve_value(self.prog, x)
        return self._cache[key]

    def value(self, x) -> float:
        return self.solve(x).value


def _oracle(prog, oracle):
    return oracle if oracle is not None else ValueOracle(prog)


def perturbation_directions(n: int, seed: int = 42, count: int = 8) -> np.ndarray:
    """The fan of perturbations w (first row 0 = the unperturbed direction)."""
    if n == 1:
        W = np.array(_W1[:count]).reshape(-1, 1)
    else:
        rng = np.random.default_rng(seed)
        W = rng.normal(size=(count, n))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
    return np.vstack([np.zeros((1, n)), W])


# ---------------------------------------------------------------- Dini estimates

@dataclass(frozen=True, eq=False)
class DiniEstimate:
    lower: float
    upper: float
    uncertainty: float
    scales: tuple[float, ...]
    directions: np.ndarray
    quotients: np.ndarray          # (directions, scales)
    extrapolated: np.ndarray       # per direction

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "midpoint": self.midpoint,
            "uncertainty": self.uncertainty,
            "scales": list(self.scales),
            "perturbations": self.directions.tolist(),
            "quotients": self.quotients.tolist(),
            "extrapolated": self.extrapolated.tolist(),
        }


def _fan_points(xbar, u, W, scales):
    """x = xbar + t (u + t w) for every w and t."""
    return [[xbar + t * (u + t * w) for t in scales] for w in W]


def _intercept(ts, vals) -> float:
    slope, icept = np.polyfit(np.asarray(ts), np.asarray(vals), 1)
    return float(icept)


def dini_estimate(prog: ParametricProgram, xbar, u, seed: int = 42, oracle: ValueOracle | None = None,
                  scales=DINI_SCALES) -> DiniEstimate:
    """Hadamard difference quotients over a shrinking fan, extrapolated to t -> 0."""
    oracle = _oracle(prog, oracle)
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    u = np.asarray(u, dtype=float).reshape(prog.n)
    v0 = oracle.value(xbar)
    if not math.isfinite(v0):
        raise DiniInfeasibleError(xbar)
    W = perturbation_directions(prog.n, seed)
    Q = np.zeros((W.shape[0], len(scales)))
    for i, row in enumerate(_fan_points(xbar, u, W, scales)):
        for k, xk in enumerate(row):
            vk = oracle.value(xk)
            if not math.isfinite(vk):
                raise DiniInfeasibleError(xk)
            Q[i, k] = (vk - v0) / scales[k]
    tail = slice(len(scales) - DINI_TAIL, None)
    ext = np.array([_intercept(scales[tail], Q[i, tail]) for i in range(W.shape[0])])
    spread = float(np.max(np.ptp(Q[:, len(scales) - SPREAD_TAIL:], axis=1)))
    unc = spread + 2.0 * VALUE_ACCURACY / min(scales)
    return DiniEstimate(float(np.min(ext)), float(np.max(ext)), unc, tuple(scales), W, Q, ext)


# ---------------------------------------------------------------- continuity

@dataclass(frozen=True)
class ContinuityVerdict:
    lsc: bool
    usc: bool
    value: float
    liminf: float
    limsup: float

    @property
    def continuous(self) -> bool:
        return self.lsc and self.usc

    def to_dict(self) -> dict:
        return {"lsc": self.lsc, "usc": self.usc, "continuous": self.continuous,
                "value": self.value, "liminf": self.liminf, "limsup": self.limsup}


def directional_continuity_probe(prog: ParametricProgram, xbar, u, seed: int = 42,
                                 oracle: ValueOracle | None = None, scales=DINI_SCALES) -> ContinuityVerdict:
    """Compare V(xbar) with the extrapolated limits of V along the Dini fan."""
    oracle = _oracle(prog, oracle)
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    u = np.asarray(u, dtype=float).reshape(prog.n)
    v0 = oracle.value(xbar)
    W = perturbation_directions(prog.n, seed)
    tail = slice(len(scales) - DINI_TAIL, None)
    limits = []
    for row in _fan_points(xbar, u, W, scales):
        vals = np.array([oracle.value(xk) for xk in row])
        if not np.all(np.isfinite(vals[tail])):
            limits.append(math.inf)
        else:
            limits.append(_intercept(scales[tail], vals[tail]))
    lo, hi = min(limits), max(limits)
    if not math.isfinite(v0):
        return ContinuityVerdict(lo == math.inf, True, v0, lo, hi)
    return ContinuityVerdict(v0 <= lo + CONTINUITY_TOL, hi <= v0 + CONTINUITY_TOL, v0, lo, hi)


# ---------------------------------------------------------------- directional solutions

@dataclass(frozen=True, eq=False)
class DirectionalSolutions:
    points: np.ndarray
    samples: int
    cluster_diameter: float
    note: str = "sampled under-approximation"

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "count": int(self.points.shape[0]),
                "samples": self.samples, "cluster_diameter": self.cluster_diameter, "note": self.note}


def _snap_to_solutions(prog, xbar, v0, base: np.ndarray, y: np.ndarray):
    """Farthest point toward y from base that stays feasible and optimal at xbar."""
    feas = 0.0 if prog.residual(xbar, base) == 0.0 else prog.tol["feas"]
    # optimality up to roundoff only: eps_opt would let the snap drift along increasing f
    level = max(v0, prog.f_value(xbar, base)) + SNAP_ROUNDOFF * (1.0 + abs(v0))
    ok = lambda s: (prog.residual(xbar, base + s * (y - base)) <= feas
                    and prog.f_value(xbar, base + s * (y - base)) <= level)
    if ok(1.0):
        return y.copy()
    a, b = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (a + b)
        if ok(mid):
            a = mid
        else:
            b = mid
    out = base + a * (y - base)
    return base.copy() if np.linalg.norm(out - base) <= SNAP_MERGE else out


def directional_solution_set(prog: ParametricProgram, xbar, u, seed: int = 42,
                             oracle: ValueOracle | None = None, scales=DINI_SCALES) -> DirectionalSolutions:
    """Limits of S(xbar + t u') for the smallest fan scales, filtered against S(xbar)."""
    oracle = _oracle(prog, oracle)
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    u = np.asarray(u, dtype=float).reshape(prog.n)
    base = oracle.solve(xbar)
    if not base.solved:
        return DirectionalSolutions(np.zeros((0, prog.m)), 0, 0.0)
    W = perturbation_directions(prog.n, seed)
    small = scales[-3:]
    kept = []
    total = 0
    for row in _fan_points(xbar, u, W, small):
        for xk in row:
            res = oracle.solve(xk)
            if not res.solved:
                continue
            for y in res.points:
                total += 1
                d = np.linalg.norm(base.points - y, axis=1)
                anchor = base.points[int(np.argmin(d))]
                snapped = _snap_to_solutions(prog, xbar, base.value, anchor, y)
                if np.linalg.norm(snapped - y) <= SOLUTION_SET_TOL:
                    kept.append(snapped)
    if not kept:
        return DirectionalSolutions(np.zeros((0, prog.m)), total, 0.0)
    Y = np.array(kept)
    fv = prog.f_many(xbar, Y)
    reps, diam = cluster_points(Y, fv, prog.tol["cluster"])
    return DirectionalSolutions(Y[reps], total, diam)


# ---------------------------------------------------------------- image directional derivative

@dataclass(frozen=True, eq=False)
class ImageDirDeriv:
    kind: str                     # "ExactRay" | "SampledCone"
    generators: np.ndarray        # (g, p) unit rows

    def to_dict(self) -> dict:
        return {"kind": self.kind, "generators": self.generators.tolist()}


def _dedup(vectors, tol=ANGLE_TOL) -> np.ndarray:
    out: list[np.ndarray] = []
    for v in vectors:
        if all(np.linalg.norm(v - g) > tol for g in out):
            out.append(v)
    return np.array(out)


def image_dir_deriv(prog: ParametricProgram, xbar, ybar, u, seed: int = 42) -> ImageDirDeriv:
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    ybar = np.asarray(ybar, dtype=float).reshape(prog.m)
    u = np.asarray(u, dtype=float).reshape(prog.n)
    d = prog.jac_x_P(xbar, ybar) @ u
    if np.linalg.norm(d) > IMAGE_ZERO:
        return ImageDirDeriv("ExactRay", (d / np.linalg.norm(d)).reshape(1, -1))
    W = perturbation_directions(prog.n, seed)
    p0 = prog.P_value(xbar, ybar)
    t = 10.0 ** (-10 / 2)
    found = []
    for delta in (0.0, t, math.sqrt(t)):
        for w in W:
            diff = prog.P_value(xbar + t * (u + delta * w), ybar) - p0
            nd = np.linalg.norm(diff)
            if nd > 1e-14:
                found.append(diff / nd)
    gens = _dedup(found) if found else np.zeros((0, prog.p))
    return ImageDirDeriv("SampledCone", gens.reshape(-1, prog.p))


# ---------------------------------------------------------------- directional Robinson stability

@dataclass(frozen=True, eq=False)
class RSVerdict:
    holds: bool | None            # True or None (Unknown); sufficient conditions never prove failure
    fired: str | None
    paths: dict

    @property
    def label(self) -> str:
        return "Holds" if self.holds else "Unknown"

    def to_dict(self) -> dict:
        return {"verdict": self.label, "fired": self.fired, "paths": self.paths}


def _cell_witness(pattern, D: np.ndarray, M: np.ndarray):
    """Nonzero (alpha >= 0, v) with w = D alpha + M v in the cell; returns w or None."""
    p, g = D.shape
    m = M.shape[1]
    B = np.hstack([D, M])
    eq = [B[i] for i, s in enumerate(pattern) if s == polygeom.ZERO]
    ineq, rhs = [], []
    for i, s in enumerate(pattern):
        if s == polygeom.NONNEG:
            ineq.append(-B[i]); rhs.append(-1.0)
        elif s == polygeom.NONPOS:
            ineq.append(B[i]); rhs.append(-1.0)
    lower = np.concatenate([np.zeros(g), np.full(m, -math.inf)])
    if ineq:
        out = solve_lp(LinearProgram(np.zeros(g + m), A=np.array(ineq), b=np.array(rhs),
                                     E=np.array(eq).reshape(-1, g + m), e=np.zeros(len(eq)), lower=lower))
        return B @ out.x if out.optimal else None
    A = np.hstack([-np.eye(g), np.zeros((g, m))]) if g else np.zeros((0, g + m))
    r = recession_ray(A, np.array(eq).reshape(-1, g + m), g + m)
    return None if r is None else B @ r


def foscms_check(prog: ParametricProgram, xbar, ybar, generators: np.ndarray) -> dict:
    """FOSCMS over every cell of T_C reached by {D alpha + grad_y P v}."""
    z = polygeom.snap(prog.C, prog.P_value(xbar, ybar), prog.tol["feas"])
    M = prog.jac_y_P(xbar, ybar)
    D = generators.T.reshape(prog.p, -1)
    cells = []
    holds = True
    for cell in polygeom.enumerate_cells(prog.C, z):
        w = _cell_witness(cell.pattern, D, M)
        entry = {"cell": "".join(cell.pattern), "reached": w is not None}
        if w is not None:
            bad = None
            for piece in cell.normal.pieces:
                bad = piece_nonzero_element(piece, M.T)
                if bad is not None:
                    break
            entry["witness_direction"] = w.tolist()
            entry["abnormal_multiplier"] = bad.tolist() if bad is not None else None
            holds &= bad is None
        cells.append(entry)
    return {"holds": holds, "cells": cells}


def geom_condition(prog: ParametricProgram, xbar, ybar, generators: np.ndarray) -> dict:
    """For each image generator d: some v with d + grad_y P v in T_C(P)."""
    z = polygeom.snap(prog.C, prog.P_value(xbar, ybar), prog.tol["feas"])
    M = prog.jac_y_P(xbar, ybar)
    T = polygeom.tangent_cone(prog.C, z)
    per = []
    for d in generators:
        per.append(any(linear_system_feasible(M, piece, d).feasible for piece in T.pieces))
    return {"holds": all(per), "per_generator": per}


def fan_feasible(prog: ParametricProgram, xbar, u, oracle: ValueOracle | None = None,
                 scales=DINI_SCALES) -> bool:
    """F(xbar + t u) nonempty at every fan scale."""
    oracle = _oracle(prog, oracle)
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    u = np.asarray(u, dtype=float).reshape(prog.n)
    return all(oracle.solve(xbar + t * u).solved for t in scales)


def rs_sufficient(prog: ParametricProgram, xbar, ybar, u, seed: int = 42,
                  oracle: ValueOracle | None = None) -> RSVerdict:
    """Sufficient conditions for directional RS, reported with the first one that fired."""
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    ybar = np.asarray(ybar, dtype=float).reshape(prog.m)
    paths: dict = {}
    nn = nnamcq(prog, xbar, ybar)
    paths["nnamcq"] = nn.to_dict()
    affine = prog.is_affine_in_y()
    nonempty = fan_feasible(prog, xbar, u, oracle) if affine else None
    paths["affine_polyhedral"] = {"holds": bool(affine and nonempty), "affine_in_y": affine,
                                  "fan_nonempty": nonempty}
    image = image_dir_deriv(prog, xbar, ybar, u, seed)
    geom = geom_condition(prog, xbar, ybar, image.generators)
    fos = foscms_check(prog, xbar, ybar, image.generators) if geom["holds"] else {"holds": False, "cells": []}
    paths["foscms"] = {"holds": bool(geom["holds"] and fos["holds"]), "image": image.to_dict(),
                       "geom": geom, "cells": fos["cells"]}
    for name in ("nnamcq", "affine_polyhedral", "foscms"):
        if paths[name]["holds"]:
            return RSVerdict(True, name, paths)
    return RSVerdict(None, None, paths)


def linearized_feasible(prog: ParametricProgram, xbar, ybar, u) -> bool:
    """Some v with grad_x P u + grad_y P v in T_C(P(xbar, ybar))."""
    z = polygeom.snap(prog.C, prog.P_value(xbar, ybar), prog.tol["feas"])
    d = prog.jac_x_P(xbar, ybar) @ np.asarray(u, dtype=float)
    M = prog.jac_y_P(xbar, ybar)
    return any(linear_system_feasible(M, piece, d).feasible
               for piece in polygeom.tangent_cone(prog.C, z).pieces)


@dataclass(frozen=True, eq=False)
class RSProbe:
    kappa: float
    violation: bool
    inner_max: float
    outer_max: float
    samples: int
    radius: float

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "violation": self.violation, "inner_shell_max": self.inner_max,
                "outer_shell_max": self.outer_max, "samples": self.samples, "radius": self.radius}


def default_nbhd(prog: ParametricProgram, ybar, u, radius: float = 0.05, aperture: float = 0.5) -> DirectionalNbhd:
    ybar = np.asarray(ybar, dtype=float).reshape(prog.m)
    room = float(np.min(np.minimum(ybar - prog.ybox[:, 0], prog.ybox[:, 1] - ybar)))
    eps = max(min(radius, 0.5 * room), 1e-3)
    return DirectionalNbhd(tuple(np.asarray(u, dtype=float).reshape(prog.n)), eps, aperture)


def rs_numeric_probe(prog: ParametricProgram, xbar, ybar, u, nbhd: DirectionalNbhd | None = None,
                     samples: int = 500, seed: int = 42) -> RSProbe:
    """Empirical kappa in dist(y, F(x)) <= kappa dist(P(x, y), C) near (xbar, ybar)."""
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    ybar = np.asarray(ybar, dtype=float).reshape(prog.m)
    nbhd = nbhd or default_nbhd(prog, ybar, u)
    rng = np.random.default_rng(seed)
    Z = nbhd.sample(rng, samples, PROBE_MIN_FRACTION)
    dirs = rng.normal(size=(samples, prog.m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    # y offsets log-uniform in radius like the x samples, so both approach the base point
    ry = nbhd.radius * np.exp(rng.uniform(np.log(PROBE_MIN_FRACTION), 0.0, samples))
    Y = ybar + dirs * ry[:, None]
    Y = np.clip(Y, prog.ybox[:, 0], prog.ybox[:, 1])
    radii = np.maximum(np.linalg.norm(Z, axis=1), np.linalg.norm(Y - ybar, axis=1))
    density = None if prog.m == 1 else 101
    ratios = np.full(samples, np.nan)
    for k in range(samples):
        x = xbar + Z[k]
        dp = prog.residual(x, Y[k])
        df = dist_to_feasible(prog, x, Y[k], density)
        if dp < 1e-12 and df < 1e-12:
            continue
        ratios[k] = math.inf if dp < 1e-12 else df / dp
    valid = ~np.isnan(ratios)
    if not np.any(valid):
        return RSProbe(0.0, False, 0.0, 0.0, samples, nbhd.radius)
    kappa = float(np.max(ratios[valid]))
    r = radii[valid]
    q = ratios[valid]
    lo_cut, hi_cut = np.quantile(r, [0.25, 0.75])
    inner = float(np.max(q[r <= lo_cut], initial=0.0))
    outer = float(np.max(q[r >= hi_cut], initial=0.0))
    trend = inner >= TREND_LIMIT * outer if outer > 0 else inner > KAPPA_LIMIT
    violation = bool(kappa > KAPPA_LIMIT or trend)
    return RSProbe(kappa, violation, inner, outer, samples, nbhd.radius)


# ---------------------------------------------------------------- bounds

@dataclass(frozen=True, eq=False)
class BoundsResult:
    lower: float
    upper: float
    hypotheses: dict
    points: list
    failed: list[str] = field(default_factory=list)
    all_singleton: bool = False
    route: str = "general"

    @property
    def verified(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        return {"L": self.lower, "U": self.upper, "hypotheses": self.hypotheses, "failed_hypotheses": self.failed,
                "verified": self.verified, "all_singleton": self.all_singleton, "route": self.route,
                "points": self.points, "note": "U valid for the sampled subset of S(xbar;u)"}


def _subsample(points: np.ndarray, cap: int) -> np.ndarray:
    if points.shape[0] <= cap:
        return points
    idx = np.unique(np.linspace(0, points.shape[0] - 1, cap).round().astype(int))
    return points[idx]


def _touches(prog, y) -> bool:
    return bool(np.any(np.abs(y - prog.ybox[:, 0]) <= 1e-6) or np.any(np.abs(y - prog.ybox[:, 1]) <= 1e-6))


def _regularity(prog, xbar, y, u) -> dict:
    z = polygeom.snap(prog.C, prog.P_value(xbar, y), prog.tol["feas"])
    That = polygeom.regular_tangent_cone(prog.C, z)
    M = prog.jac_y_P(xbar, y)
    d = prog.jac_x_P(xbar, y) @ u
    feas = {s: linear_system_feasible(M, That, sg * d).feasible for s, sg in (("+", 1.0), ("-", -1.0))}
    inter = interior_check(np.zeros(prog.p), M, That, d)
    return {"feasible_system": feas, "wrcq": inter.holds, "wrcq_margin": inter.margin}


def directional_bounds(prog: ParametricProgram, xbar, u, dirsol: DirectionalSolutions | np.ndarray,
                       fullsol: np.ndarray | None = None, seed: int = 42,
                       oracle: ValueOracle | None = None) -> BoundsResult:
    """L = min_y min_lam grad_x L u and U = min_y max_lam grad_x L u over S(xbar; u)."""
    oracle = _oracle(prog, oracle)
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    u = np.asarray(u, dtype=float).reshape(prog.n)
    pts = dirsol.points if isinstance(dirsol, DirectionalSolutions) else np.asarray(dirsol, dtype=float)
    pts = pts.reshape(-1, prog.m)
    if pts.shape[0] == 0:
        raise ValueError("S(xbar;u) empty: the directional bounds are inapplicable")
    if fullsol is None:
        fullsol = oracle.solve(xbar).points
    hyp_pts = np.vstack([pts, _subsample(np.asarray(fullsol).reshape(-1, prog.m), MAX_HYP_POINTS)])

    # hypotheses over S(xbar) (sampled) and the directional solutions
    rs_ok = feas_ok = wrcq_ok = True
    rs_fail, reg_fail = [], []
    for y in hyp_pts:
        rs = rs_sufficient(prog, xbar, y, u, seed, oracle)
        reg = _regularity(prog, xbar, y, u)
        if not rs.holds:
            rs_ok = False
            rs_fail.append(y.tolist())
        if not all(reg["feasible_system"].values()):
            feas_ok = False
            reg_fail.append(y.tolist())
        if not all(reg["wrcq"].values()):
            wrcq_ok = False
            if y.tolist() not in reg_fail:
                reg_fail.append(y.tolist())
    affine = prog.is_affine_in_y() and fan_feasible(prog, xbar, u, oracle)
    affine_ok = affine and (prog.C.is_convex or feas_ok)
    general_ok = rs_ok and feas_ok and wrcq_ok
    touches = [y.tolist() for y in pts if _touches(prog, y)]

    lo, hi = math.inf, math.inf
    details = []
    singleton = True
    empty_mult = False
    for y in pts:
        ms = multiplier_set(prog, xbar, y, "clarke")
        entry = {"y": y.tolist(), "touches_ybox": _touches(prog, y), **_regularity(prog, xbar, y, u),
                 "multipliers": ms.to_dict()}
        if ms.empty:
            empty_mult = True
            singleton = False
            entry["extremum"] = None
        else:
            ext = extremize_xgrad(ms, u)
            entry["extremum"] = ext.to_dict()
            entry["nlp_labels"] = {"argmin": nlp_labels(prog, ext.argmin), "argmax": nlp_labels(prog, ext.argmax)}
            lo = min(lo, ext.minimum)
            hi = min(hi, ext.maximum)
            singleton &= ms.singleton() is not None
        details.append(entry)

    failed = []
    if touches:
        failed.append("restricted inf-compactness (minimizer touches ybox)")
    if not (general_ok or affine_ok):
        if not rs_ok:
            failed.append("directional Robinson stability")
        if not feas_ok:
            failed.append("linearized feasibility system")
        if not wrcq_ok:
            failed.append("weak regularity (wRCQ)")
    if empty_mult:
        failed.append("Clarke multiplier set empty")
    hyp = {
        "rs_all": rs_ok, "rs_unknown_at": rs_fail,
        "feasible_system_all": feas_ok, "wrcq_all": wrcq_ok, "regularity_failed_at": reg_fail,
        "affine_polyhedral_route": affine_ok, "general_route": general_ok,
        "checked_points": int(hyp_pts.shape[0]), "touching_ybox": touches,
        "sign_convention": "each of +u and -u checked as a separate system",
    }
    route = "general" if general_ok else ("affine_polyhedral" if affine_ok else "none")
    return BoundsResult(lo, hi, hyp, details, failed, singleton and not empty_mult, route)


def classic_bounds(prog: ParametricProgram, xbar, u, fullsol, dirsol=None) -> tuple[float, float, str]:
    """Bounds over all of S(xbar): limiting multipliers for NLP blocks, Clarke otherwise."""
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    u = np.asarray(u, dtype=float).reshape(prog.n)
    pts = np.asarray(fullsol, dtype=float).reshape(-1, prog.m)
    if dirsol is not None:
        extra = dirsol.points if isinstance(dirsol, DirectionalSolutions) else np.asarray(dirsol)
        pts = np.vstack([pts, extra.reshape(-1, prog.m)])
    if pts.shape[0] == 0:
        raise ValueError("S(xbar) empty")
    kind = "limiting" if prog.C.is_nlp else "clarke"
    lo, hi = math.inf, math.inf
    for y in pts:
        ms = multiplier_set(prog, xbar, y, kind, audit=False)
        if ms.empty:
            continue
        ext = extremize_xgrad(ms, u)
        lo = min(lo, ext.minimum)
        hi = min(hi, ext.maximum)
    return lo, hi, kind


# ---------------------------------------------------------------- verdict

@dataclass(frozen=True)
class Verdict:
    kind: str                         # Differentiable | Sandwich | Inconclusive
    derivative: float | None
    lower: float | None
    upper: float | None
    reason: str | None
    cross_check: bool | None

    def to_dict(self) -> dict:
        return {"verdict": self.kind, "derivative": self.derivative, "L": self.lower, "U": self.upper,
                "reason": self.reason, "numeric_cross_check": self.cross_check}


def differentiability_verdict(bounds: BoundsResult | None, dini: DiniEstimate | None,
                              empty_reason: str | None = None) -> Verdict:
    if bounds is None:
        return Verdict("Inconclusive", None, None, None, empty_reason or "S(xbar;u) empty", None)
    L, U = bounds.lower, bounds.upper
    if not bounds.verified:
        return Verdict("Inconclusive", None, L, U, "; ".join(bounds.failed), None)
    tol = max(1e-3, dini.uncertainty) if dini is not None else None
    if bounds.all_singleton and math.isfinite(L) and abs(L - U) <= 1e-9:
        check = None if dini is None else abs(L - dini.midpoint) <= tol
        return Verdict("Differentiable", L, L, U, None, check)
    check = None if dini is None else (L - tol <= dini.lower and dini.upper <= U + tol)
    return Verdict("Sandwich", None, L, U, "Clarke multipliers not unique", check)


# ---------------------------------------------------------------- full pipeline

def analyze(prog: ParametricProgram, xbar, u, seed: int = 42, oracle: ValueOracle | None = None) -> dict:
    """Run every stage for one (program, xbar, u) query; sections are keyed by operation."""
    oracle = _oracle(prog, oracle)
    xbar = np.asarray(xbar, dtype=float).reshape(prog.n)
    u = np.asarray(u, dtype=float).reshape(prog.n)
    out: dict = {"xbar": xbar.tolist(), "direction": u.tolist()}
    base = oracle.solve(xbar)
    out["solve_value"] = base.to_dict()
    if not base.solved:
        out["differentiability_verdict"] = Verdict("Inconclusive", None, None, None, "F(xbar) empty", None).to_dict()
        return out
    out["directional_continuity_probe"] = directional_continuity_probe(prog, xbar, u, seed, oracle).to_dict()
    dirsol = directional_solution_set(prog, xbar, u, seed, oracle)
    out["directional_solution_set"] = dirsol.to_dict()
    try:
        dini = dini_estimate(prog, xbar, u, seed, oracle)
        out["dini_estimate"] = dini.to_dict()
    except DiniInfeasibleError as err:
        dini = None
        out["dini_estimate"] = {"error": str(err)}
    if dirsol.empty:
        out["directional_bounds"] = None
        out["classic_bounds"] = None
        out["constraint_qualifications"] = []
        out["differentiability_verdict"] = differentiability_verdict(None, dini).to_dict()
        return out
    bounds = directional_bounds(prog, xbar, u, dirsol, base.points, seed, oracle)
    out["directional_bounds"] = bounds.to_dict()
    lgd, ugd, kind = classic_bounds(prog, xbar, u, base.points, dirsol)
    out["classic_bounds"] = {"L_GD": lgd, "U_GD": ugd, "multiplier_kind": kind}
    out["constraint_qualifications"] = [{
        "y": y.tolist(),
        "robinson_cq": robinson_cq(prog, xbar, y).to_dict(),
        "nnamcq": nnamcq(prog, xbar, y).to_dict(),
        "licq": licq(prog, xbar, y),
    } for y in dirsol.points]
    out["differentiability_verdict"] = differentiability_verdict(bounds, dini).to_dict()
    return out

"""Clarke and limiting multiplier sets, their extremization, and constraint qualifications."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import polygeom
from .coneduals import interior_check
from .linsolve import LinearProgram, LPStatus, piece_nonzero_element, polyhedron_bounded, solve_lp
from .polygeom import PolyCone
from .progmodel import ParametricProgram

SINGLETON_TOL = 1e-9


class InfeasibleMultiplierPoint(ValueError):
    pass


def _base(prog: ParametricProgram, x, y):
    x = np.asarray(x, dtype=float).reshape(prog.n)
    y = np.asarray(y, dtype=float).reshape(prog.m)
    z_raw = prog.P_value(x, y)
    try:
        z = polygeom.snap(prog.C, z_raw, prog.tol["feas"])
    except polygeom.InfeasiblePointError as err:
        raise InfeasibleMultiplierPoint(f"y={y.tolist()} is infeasible at x={x.tolist()} "
                                        f"(dist(P, C) = {err.distance:.3e})") from err
    return x, y, z


@dataclass(frozen=True, eq=False)
class MultiplierPiece:
    cone: PolyCone
    A: np.ndarray          # A lam <= 0
    E: np.ndarray          # E lam == e
    e: np.ndarray
    empty: bool
    bounded: bool | None
    point: np.ndarray | None
    ray: np.ndarray | None

    def contains(self, lam, tol: float = 1e-9) -> bool:
        lam = np.asarray(lam, dtype=float)
        ok = not self.A.size or np.max(self.A @ lam) <= tol
        return ok and (not self.E.size or np.max(np.abs(self.E @ lam - self.e)) <= tol)


@dataclass(frozen=True, eq=False)
class MultiplierPolyhedron:
    """{lam in N(z) : grad_y f + grad_y P^T lam = 0}, one polyhedron per convex piece of N."""

    kind: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    grad_x_f: np.ndarray
    jac_x_P: np.ndarray
    pieces: tuple[MultiplierPiece, ...]

    @property
    def empty(self) -> bool:
        return all(pc.empty for pc in self.pieces)

    @property
    def bounded(self) -> bool:
        return all(pc.bounded for pc in self.pieces if not pc.empty)

    @property
    def dim(self) -> int:
        return self.z.size

    def contains(self, lam, tol: float = 1e-9) -> bool:
        return any(pc.contains(lam, tol) for pc in self.pieces if not pc.empty)

    def coordinate_ranges(self) -> np.ndarray:
        """Per-coordinate [min, max] over the union (inf when unbounded)."""
        out = np.array([[math.inf, -math.inf]] * self.dim)
        for pc in self.pieces:
            if pc.empty:
                continue
            for i in range(self.dim):
                for col, sgn in ((0, 1.0), (1, -1.0)):
                    c = np.zeros(self.dim)
                    c[i] = sgn
                    r = solve_lp(LinearProgram(c, A=pc.A, b=np.zeros(pc.A.shape[0]), E=pc.E, e=pc.e))
                    val = sgn * r.value if r.optimal else -sgn * math.inf
                    out[i, col] = min(out[i, col], val) if col == 0 else max(out[i, col], val)
        return out

    def singleton(self) -> np.ndarray | None:
        if self.empty or not self.bounded:
            return None
        rng = self.coordinate_ranges()
        if np.all(rng[:, 1] - rng[:, 0] <= SINGLETON_TOL):
            return 0.5 * (rng[:, 0] + rng[:, 1])
        return None

    def to_dict(self) -> dict:
        single = self.singleton()
        return {
            "kind": self.kind,
            "empty": self.empty,
            "bounded": self.bounded if not self.empty else None,
            "singleton": single.tolist() if single is not None else None,
            "pieces": [{
                "normal_cone": "".join(pc.cone.signs) if pc.cone.signs is not None else None,
                "empty": pc.empty,
                "bounded": pc.bounded,
                "point": pc.point.tolist() if pc.point is not None else None,
                "ray": pc.ray.tolist() if pc.ray is not None else None,
            } for pc in self.pieces],
        }


def multiplier_set(prog: ParametricProgram, x, y, kind: str = "clarke", audit: bool = True) -> MultiplierPolyhedron:
    """Multiplier set at (x, y); ``audit=False`` skips the boundedness LPs."""
    if kind not in ("clarke", "limiting"):
        raise ValueError(f"kind must be 'clarke' or 'limiting', got {kind!r}")
    x, y, z = _base(prog, x, y)
    if kind == "clarke":
        cones = [polygeom.clarke_normal_cone(prog.C, z)]
    else:
        cones = list(polygeom.normal_cone(prog.C, z).pieces)
    Jy = prog.jac_y_P(x, y)
    gy = prog.grad_y_f(x, y)
    pieces = []
    for K in cones:
        A = K.ineq.reshape(-1, prog.p)
        E = np.vstack([K.eq.reshape(-1, prog.p), Jy.T])
        e = np.concatenate([np.zeros(K.eq.shape[0]), -gy])
        if audit:
            res = polyhedron_bounded(A=A, b=np.zeros(A.shape[0]), E=E, e=e, dim=prog.p)
            pieces.append(MultiplierPiece(K, A, E, e, res.empty, res.bounded, res.point, res.ray))
        else:
            feas = solve_lp(LinearProgram(np.zeros(prog.p), A=A, b=np.zeros(A.shape[0]), E=E, e=e))
            pieces.append(MultiplierPiece(K, A, E, e, not feas.optimal, None, feas.x, None))
    return MultiplierPolyhedron(kind, x, y, z, prog.grad_x_f(x, y), prog.jac_x_P(x, y), tuple(pieces))


@dataclass(frozen=True, eq=False)
class Extremum:
    minimum: float
    maximum: float
    argmin: np.ndarray | None
    argmax: np.ndarray | None
    min_ray: np.ndarray | None = None
    max_ray: np.ndarray | None = None

    def to_dict(self) -> dict:
        conv = lambda a: a.tolist() if a is not None else None
        return {"min": self.minimum, "max": self.maximum, "argmin": conv(self.argmin),
                "argmax": conv(self.argmax), "min_ray": conv(self.min_ray), "max_ray": conv(self.max_ray)}


def extremize_xgrad(ms: MultiplierPolyhedron, u) -> Extremum:
    """min and max of lam -> grad_x f.u + (grad_x P u)^T lam over the multiplier set."""
    if ms.empty:
        raise ValueError("multiplier set is empty")
    u = np.asarray(u, dtype=float).reshape(-1)
    base = float(ms.grad_x_f @ u)
    coef = ms.jac_x_P @ u
    lo, hi = math.inf, -math.inf
    amin = amax = rmin = rmax = None
    for pc in ms.pieces:
        if pc.empty:
            continue
        for sgn in (1.0, -1.0):
            r = solve_lp(LinearProgram(sgn * coef, A=pc.A, b=np.zeros(pc.A.shape[0]), E=pc.E, e=pc.e))
            if r.status is LPStatus.UNBOUNDED:
                val, arg, ray = -sgn * math.inf, r.x, r.ray
            elif r.optimal:
                val, arg, ray = base + sgn * r.value, r.x, None
            else:
                continue
            if sgn > 0 and val < lo:
                lo, amin, rmin = val, arg, ray
            if sgn < 0 and val > hi:
                hi, amax, rmax = val, arg, ray
    return Extremum(lo, hi, amin, amax, rmin, rmax)


@dataclass(frozen=True, eq=False)
class CQResult:
    name: str
    holds: bool
    witness: np.ndarray | None
    detail: dict

    def to_dict(self) -> dict:
        return {"holds": self.holds, "witness": self.witness.tolist() if self.witness is not None else None,
                **self.detail}


def robinson_cq(prog: ParametricProgram, x, y) -> CQResult:
    """No nonzero Clarke normal in the kernel of grad_y P^T; cross-checked by interiority."""
    x, y, z = _base(prog, x, y)
    Nc = polygeom.clarke_normal_cone(prog.C, z)
    Jy = prog.jac_y_P(x, y)
    w = piece_nonzero_element(Nc, Jy.T)
    That = polygeom.regular_tangent_cone(prog.C, z)
    inter = interior_check(np.zeros(prog.p), Jy, That, np.zeros(prog.p), signs=("+",))
    holds = w is None
    return CQResult("robinson", holds, w, {
        "interior_form_holds": inter.holds["+"],
        "interior_margin": inter.margin["+"],
        "forms_agree": inter.holds["+"] == holds,
    })


def nnamcq(prog: ParametricProgram, x, y) -> CQResult:
    """No nonzero limiting normal in the kernel of grad_y P^T."""
    x, y, z = _base(prog, x, y)
    Jy = prog.jac_y_P(x, y)
    for piece in polygeom.normal_cone(prog.C, z).pieces:
        w = piece_nonzero_element(piece, Jy.T)
        if w is not None:
            return CQResult("nnamcq", False, w, {"piece": "".join(piece.signs)})
    return CQResult("nnamcq", True, None, {})


def licq(prog: ParametricProgram, x, y) -> bool | None:
    """Full row rank of the active rows of grad_y P (NLP blocks only, else None)."""
    if not prog.C.is_nlp:
        return None
    x, y, z = _base(prog, x, y)
    Jy = prog.jac_y_P(x, y)
    active = [i for i, b in enumerate(prog.C.blocks) if b.kind == "zero" or abs(z[i]) <= polygeom.ACTIVE_TOL]
    if not active:
        return True
    rows = Jy[active]
    return int(np.linalg.matrix_rank(rows, tol=1e-10)) == len(active)


def nlp_labels(prog: ParametricProgram, lam) -> dict | None:
    """Split a multiplier into equality part mu and inequality part gamma (NLP blocks only)."""
    if lam is None or not prog.C.is_nlp:
        return None
    lam = np.asarray(lam, dtype=float)
    mu = [float(lam[i]) for i, b in enumerate(prog.C.blocks) if b.kind == "zero"]
    gamma = [float(lam[i]) for i, b in enumerate(prog.C.blocks) if b.kind == "nonpos"]
    return {"mu": mu, "gamma": gamma}

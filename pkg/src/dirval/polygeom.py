"""Block-structured constraint sets and their tangent / normal cones.

Every block kind is a finite union of convex polyhedra whose local cones are
products of coordinate "sign cones" (``0``, ``+``, ``-``, ``*`` meaning {0},
R_+, R_-, R).  All exact cone computations therefore reduce to per-block case
tables combined by Cartesian products.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

FEAS_TOL = 1e-8
ACTIVE_TOL = 1e-8
DIR_TOL = 1e-9

ZERO, NONNEG, NONPOS, FREE = "0", "+", "-", "*"
_POLAR = {ZERO: FREE, FREE: ZERO, NONNEG: NONPOS, NONPOS: NONNEG}

BLOCK_KINDS = ("zero", "nonpos", "nonneg", "free", "interval", "union_intervals", "compl")


class InfeasiblePointError(ValueError):
    def __init__(self, z, distance):
        self.distance = float(distance)
        super().__init__(f"point {list(np.round(z, 12))} is not in C (distance {distance:.3e})")


# ---------------------------------------------------------------- blocks

@dataclass(frozen=True)
class Block:
    kind: str
    pieces: tuple[tuple[float, float], ...] = ()

    @property
    def width(self) -> int:
        return 2 if self.kind == "compl" else 1

    @classmethod
    def interval(cls, lower: float, upper: float) -> "Block":
        if not lower <= upper:
            raise ValueError(f"interval needs l <= u, got [{lower}, {upper}]")
        return cls("interval", ((float(lower), float(upper)),))

    @classmethod
    def union(cls, pieces: Iterable[Sequence[float]]) -> "Block":
        ps = sorted((float(a), float(b)) for a, b in pieces)
        if not ps:
            raise ValueError("union_intervals needs at least one piece")
        for a, b in ps:
            if not a <= b:
                raise ValueError(f"interval needs l <= u, got [{a}, {b}]")
        for (a0, b0), (a1, b1) in zip(ps, ps[1:]):
            if not b0 < a1:
                raise ValueError(f"intervals [{a0}, {b0}] and [{a1}, {b1}] are not disjoint")
        return cls("union_intervals", tuple(ps))

    def intervals(self) -> tuple[tuple[float, float], ...]:
        """The 1-D block as a sorted union of closed intervals."""
        return {
            "zero": ((0.0, 0.0),),
            "nonpos": ((-math.inf, 0.0),),
            "nonneg": ((0.0, math.inf),),
            "free": ((-math.inf, math.inf),),
        }.get(self.kind, self.pieces)

    def to_config(self) -> dict:
        if self.kind == "interval":
            lo, hi = self.pieces[0]
            return {"type": "interval", "l": _num_out(lo), "u": _num_out(hi)}
        if self.kind == "union_intervals":
            return {"type": "union_intervals", "pieces": [[_num_out(a), _num_out(b)] for a, b in self.pieces]}
        return {"type": self.kind}


def _num_out(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _num_in(v) -> float:
    if isinstance(v, str):
        return float(v.replace("+", ""))
    if v is None:
        raise ValueError("missing interval endpoint")
    return float(v)


@dataclass(frozen=True)
class BlockSet:
    """The constraint set C as an ordered product of blocks."""

    blocks: tuple[Block, ...]

    @property
    def dim(self) -> int:
        return sum(b.width for b in self.blocks)

    def slices(self) -> list[slice]:
        out, k = [], 0
        for b in self.blocks:
            out.append(slice(k, k + b.width))
            k += b.width
        return out

    @classmethod
    def from_config(cls, items: Sequence[dict]) -> "BlockSet":
        blocks = []
        for i, item in enumerate(items):
            kind = item.get("type")
            if kind not in BLOCK_KINDS:
                raise ValueError(f"C[{i}]: unknown block type {kind!r}")
            if kind == "interval":
                blocks.append(Block.interval(_num_in(item.get("l")), _num_in(item.get("u"))))
            elif kind == "union_intervals":
                blocks.append(Block.union([(_num_in(a), _num_in(b)) for a, b in item.get("pieces", [])]))
            else:
                blocks.append(Block(kind))
        return cls(tuple(blocks))

    def to_config(self) -> list[dict]:
        return [b.to_config() for b in self.blocks]

    @property
    def is_convex(self) -> bool:
        return all(b.kind not in ("compl",) and not (b.kind == "union_intervals" and len(b.pieces) > 1)
                   for b in self.blocks)

    @property
    def is_nlp(self) -> bool:
        return all(b.kind in ("zero", "nonpos") for b in self.blocks)


# ---------------------------------------------------------------- cones

def _axis_rows(dim: int, idx: Sequence[int], sign: float = 1.0) -> np.ndarray:
    rows = np.zeros((len(idx), dim))
    for r, i in enumerate(idx):
        rows[r, i] = sign
    return rows


@dataclass(frozen=True, eq=False)
class PolyCone:
    """Convex polyhedral cone in double description.

    V-rep: ``cone(generators) + span(lineality)``.  H-rep: ``ineq @ w <= 0``,
    ``eq @ w == 0``.  ``signs`` is set when the cone is a coordinate product.
    """

    dim: int
    generators: np.ndarray
    lineality: np.ndarray
    ineq: np.ndarray
    eq: np.ndarray
    signs: tuple[str, ...] | None = None
    is_convex: bool = field(default=True)

    def __post_init__(self):
        for g in self.generators:
            if not self.contains(g, 1e-9):
                raise ValueError("V-rep generator violates H-rep")
        for g in self.lineality:
            if not (self.contains(g, 1e-9) and self.contains(-g, 1e-9)):
                raise ValueError("V-rep lineality violates H-rep")

    @classmethod
    def from_signs(cls, signs: Sequence[str]) -> "PolyCone":
        signs = tuple(signs)
        d = len(signs)
        pos = [i for i, s in enumerate(signs) if s == NONNEG]
        neg = [i for i, s in enumerate(signs) if s == NONPOS]
        free = [i for i, s in enumerate(signs) if s == FREE]
        zero = [i for i, s in enumerate(signs) if s == ZERO]
        gens = np.vstack([_axis_rows(d, pos), _axis_rows(d, neg, -1.0)]) if d else np.zeros((0, 0))
        ineq = np.vstack([_axis_rows(d, pos, -1.0), _axis_rows(d, neg)]) if d else np.zeros((0, 0))
        order = np.argsort(pos + neg, kind="stable") if pos + neg else []
        return cls(d, gens[order] if len(order) else gens, _axis_rows(d, free),
                   ineq[order] if len(order) else ineq, _axis_rows(d, zero), signs)

    @classmethod
    def full(cls, dim: int) -> "PolyCone":
        return cls.from_signs([FREE] * dim)

    @classmethod
    def origin(cls, dim: int) -> "PolyCone":
        return cls.from_signs([ZERO] * dim)

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float)
        scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
        if self.ineq.size and np.max(self.ineq @ w) > tol * scale:
            return False
        if self.eq.size and np.max(np.abs(self.eq @ w)) > tol * scale:
            return False
        return True

    def polar(self) -> "PolyCone":
        if self.signs is not None:
            return PolyCone.from_signs([_POLAR[s] for s in self.signs])
        return PolyCone(self.dim, self.ineq, self.eq, self.generators, self.lineality)

    def project(self, w) -> np.ndarray:
        """Euclidean projection (coordinate products only)."""
        if self.signs is None:
            raise NotImplementedError("projection implemented for coordinate-product cones")
        w = np.array(w, dtype=float)
        for i, s in enumerate(self.signs):
            if s == ZERO:
                w[i] = 0.0
            elif s == NONNEG:
                w[i] = max(w[i], 0.0)
            elif s == NONPOS:
                w[i] = min(w[i], 0.0)
        return w

    def same_as(self, other: "PolyCone", tol: float = 1e-9) -> bool:
        """Equality by mutual membership of V-rep elements."""
        def inside(a: PolyCone, b: PolyCone) -> bool:
            return all(b.contains(g, tol) for g in a.generators) and all(
                b.contains(g, tol) and b.contains(-g, tol) for g in a.lineality)
        return self.dim == other.dim and inside(self, other) and inside(other, self)

    def describe(self) -> str:
        if self.signs is None:
            return f"cone(dim={self.dim})"
        names = {ZERO: "{0}", NONNEG: "R+", NONPOS: "R-", FREE: "R"}
        return " x ".join(names[s] for s in self.signs) if self.signs else "{0}"

    def to_dict(self) -> dict:
        return {
            "signs": "".join(self.signs) if self.signs is not None else None,
            "set": self.describe(),
            "generators": self.generators.tolist(),
            "lineality": self.lineality.tolist(),
        }


@dataclass(frozen=True, eq=False)
class ConeUnion:
    """Finite union of convex polyhedral cones; empty ``pieces`` is the empty set."""

    dim: int
    pieces: tuple[PolyCone, ...]

    @classmethod
    def from_sign_lists(cls, dim: int, sign_lists: Iterable[Sequence[str]]) -> "ConeUnion":
        seen, pieces = set(), []
        for s in sign_lists:
            s = tuple(s)
            if s not in seen:
                seen.add(s)
                pieces.append(PolyCone.from_signs(s))
        return cls(dim, tuple(pieces))

    @property
    def is_empty(self) -> bool:
        return not self.pieces

    @property
    def is_convex(self) -> bool:
        return len(self.pieces) <= 1

    def contains(self, w, tol: float = 1e-9) -> bool:
        return any(p.contains(w, tol) for p in self.pieces)

    def angular_distance(self, w) -> float:
        """sin of the angle between unit ``w`` and the union (inf when empty)."""
        w = np.asarray(w, dtype=float)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0 if self.pieces else math.inf
        w = w / nrm
        return min((float(np.linalg.norm(w - p.project(w))) for p in self.pieces), default=math.inf)

    def sign_lists(self) -> list[str]:
        return ["".join(p.signs) for p in self.pieces]

    def describe(self) -> str:
        if not self.pieces:
            return "empty"
        return " U ".join(p.describe() for p in self.pieces)

    def to_dict(self) -> dict:
        return {"pieces": self.sign_lists(), "set": self.describe()}


def _product(per_block: list[list[tuple[str, ...]]]) -> list[tuple[str, ...]]:
    return [tuple(itertools.chain.from_iterable(combo)) for combo in itertools.product(*per_block)]


# ---------------------------------------------------------------- directional neighborhoods

@dataclass(frozen=True)
class DirectionalNbhd:
    """{0} together with points of norm <= radius within ``aperture`` of u/|u|."""

    direction: tuple[float, ...]
    radius: float
    aperture: float

    def __post_init__(self):
        if self.radius <= 0 or self.aperture <= 0:
            raise ValueError("radius and aperture must be positive")

    def contains(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        u = np.asarray(self.direction, dtype=float)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return True
        if nz > self.radius:
            return False
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return True
        return float(np.linalg.norm(z / nz - u / nu)) <= self.aperture

    def sample(self, rng: np.random.Generator, count: int, min_radius_fraction: float = 1e-4) -> np.ndarray:
        """Points of the neighborhood with radii log-uniform in [fraction*radius, radius]."""
        u = np.asarray(self.direction, dtype=float)
        n = u.size
        radii = self.radius * np.exp(rng.uniform(np.log(min_radius_fraction), 0.0, count))
        out = np.zeros((count, n))
        nu = np.linalg.norm(u)
        for k in range(count):
            while True:
                if nu == 0.0:
                    w = rng.normal(size=n)
                    w /= np.linalg.norm(w)
                else:
                    w = u / nu + self.aperture * _ball(rng, n)
                    w /= np.linalg.norm(w)
                z = radii[k] * w
                if self.contains(z):
                    out[k] = z
                    break
        return out


def _ball(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.normal(size=n)
    g /= np.linalg.norm(g)
    return g * rng.uniform() ** (1.0 / n)


# ---------------------------------------------------------------- projection

def _project_intervals(v: float, intervals) -> float:
    best, bd = v, math.inf
    for a, b in intervals:
        c = min(max(v, a), b)
        d = abs(c - v)
        if d < bd:
            best, bd = c, d
    return best


def project(C: BlockSet, z) -> tuple[np.ndarray, float]:
    """Nearest point of C (blockwise) and the distance."""
    z = np.asarray(z, dtype=float)
    if z.shape != (C.dim,):
        raise ValueError(f"expected a vector of length {C.dim}, got shape {z.shape}")
    out = z.copy()
    for b, sl in zip(C.blocks, C.slices()):
        if b.kind == "compl":
            a, c = z[sl]
            cand = [(max(a, 0.0), 0.0), (0.0, max(c, 0.0))]
            out[sl] = min(cand, key=lambda q: (q[0] - a) ** 2 + (q[1] - c) ** 2)
        else:
            out[sl.start] = _project_intervals(z[sl.start], b.intervals())
    return out, float(np.linalg.norm(z - out))


def project_many(C: BlockSet, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise ``project`` for an (N, p) array; NaN rows give NaN distance."""
    Z = np.asarray(Z, dtype=float)
    out = Z.copy()
    for b, sl in zip(C.blocks, C.slices()):
        if b.kind == "compl":
            a, c = Z[:, sl.start], Z[:, sl.start + 1]
            ap, cp = np.maximum(a, 0.0), np.maximum(c, 0.0)
            d1 = (ap - a) ** 2 + c ** 2
            d2 = a ** 2 + (cp - c) ** 2
            first = d1 <= d2
            out[:, sl.start] = np.where(first, ap, 0.0)
            out[:, sl.start + 1] = np.where(first, 0.0, cp)
        else:
            col = Z[:, sl.start]
            best = np.full_like(col, np.nan)
            bd = np.full_like(col, np.inf)
            for lo, hi in b.intervals():
                c = np.clip(col, lo, hi)
                d = np.abs(c - col)
                better = d < bd
                best = np.where(better, c, best)
                bd = np.where(better, d, bd)
            out[:, sl.start] = best
    dist = np.sqrt(np.sum((Z - out) ** 2, axis=1))
    return out, dist


def snap(C: BlockSet, z, tol: float = FEAS_TOL) -> np.ndarray:
    p, d = project(C, z)
    if not d <= tol:
        raise InfeasiblePointError(z, d)
    return p


# ---------------------------------------------------------------- per-block local structure

def _interval_tangent_sign(v: float, intervals) -> str:
    for a, b in intervals:
        if a - ACTIVE_TOL <= v <= b + ACTIVE_TOL:
            at_lo = abs(v - a) <= ACTIVE_TOL
            at_hi = abs(v - b) <= ACTIVE_TOL
            if at_lo and at_hi:
                return ZERO
            if at_lo:
                return NONNEG
            if at_hi:
                return NONPOS
            return FREE
    raise AssertionError("point outside all intervals after snapping")


def _compl_state(a: float, c: float) -> str:
    if abs(a) <= ACTIVE_TOL and abs(c) <= ACTIVE_TOL:
        return "apex"
    return "a_axis" if abs(c) <= ACTIVE_TOL else "b_axis"


# Cells of a block's tangent cone: (per-coordinate cell pattern, normal pieces).
# Cell pattern symbols: '0' fixed zero, '+' strictly positive, '-' strictly negative, '*' any.
_SIGN_CELLS = {
    FREE: [((FREE,), [(ZERO,)])],
    NONPOS: [((NONPOS,), [(ZERO,)]), ((ZERO,), [(NONNEG,)])],
    NONNEG: [((NONNEG,), [(ZERO,)]), ((ZERO,), [(NONPOS,)])],
    ZERO: [((ZERO,), [(FREE,)])],
}
_COMPL_CELLS = {
    "apex": [
        ((NONNEG, ZERO), [(ZERO, FREE)]),
        ((ZERO, NONNEG), [(FREE, ZERO)]),
        ((ZERO, ZERO), [(ZERO, FREE), (FREE, ZERO), (NONPOS, NONPOS)]),
    ],
    "a_axis": [((FREE, ZERO), [(ZERO, FREE)])],
    "b_axis": [((ZERO, FREE), [(FREE, ZERO)])],
}


def _block_cells(block: Block, zb: np.ndarray):
    if block.kind == "compl":
        return _COMPL_CELLS[_compl_state(zb[0], zb[1])]
    return _SIGN_CELLS[_interval_tangent_sign(float(zb[0]), block.intervals())]


def _block_tangent(block: Block, zb: np.ndarray) -> list[tuple[str, ...]]:
    if block.kind == "compl":
        st = _compl_state(zb[0], zb[1])
        return {"apex": [(NONNEG, ZERO), (ZERO, NONNEG)], "a_axis": [(FREE, ZERO)],
                "b_axis": [(ZERO, FREE)]}[st]
    return [(_interval_tangent_sign(float(zb[0]), block.intervals()),)]


def _cell_match(pattern: Sequence[str], d: np.ndarray, tol: float) -> bool:
    for s, v in zip(pattern, d):
        if s == ZERO and abs(v) > tol:
            return False
        if s == NONNEG and not v > tol:
            return False
        if s == NONPOS and not v < -tol:
            return False
    return True


# ---------------------------------------------------------------- public cone operations

@dataclass(frozen=True, eq=False)
class Cell:
    """Relatively open stratum of T_C(z) on which N_C(z; d) is constant."""

    pattern: tuple[str, ...]
    normal: ConeUnion

    @property
    def closure(self) -> PolyCone:
        return PolyCone.from_signs(self.pattern)

    def contains(self, d, tol: float = DIR_TOL) -> bool:
        d = np.asarray(d, dtype=float)
        scale = max(1.0, float(np.max(np.abs(d)))) if d.size else 1.0
        return _cell_match(self.pattern, d, tol * scale)

    def to_dict(self) -> dict:
        return {"pattern": "".join(self.pattern), "normal": self.normal.to_dict()}


def tangent_cone(C: BlockSet, z) -> ConeUnion:
    z = snap(C, z)
    per = [_block_tangent(b, z[sl]) for b, sl in zip(C.blocks, C.slices())]
    return ConeUnion.from_sign_lists(C.dim, _product(per))


def enumerate_cells(C: BlockSet, z) -> list[Cell]:
    z = snap(C, z)
    per = [_block_cells(b, z[sl]) for b, sl in zip(C.blocks, C.slices())]
    cells = []
    for combo in itertools.product(*per):
        pattern = tuple(itertools.chain.from_iterable(c[0] for c in combo))
        normals = _product([list(c[1]) for c in combo])
        cells.append(Cell(pattern, ConeUnion.from_sign_lists(C.dim, normals)))
    return cells


def dir_normal_cone(C: BlockSet, z, d=None) -> ConeUnion:
    """Limiting normal cone to C at z in direction d (d=None or 0: the limiting normal cone)."""
    z = snap(C, z)
    d = np.zeros(C.dim) if d is None else np.asarray(d, dtype=float)
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    tol = DIR_TOL * scale
    out: list[list[tuple[str, ...]]] = []
    for b, sl in zip(C.blocks, C.slices()):
        db = d[sl]
        hit = [normals for pattern, normals in _block_cells(b, z[sl]) if _cell_match(pattern, db, tol)]
        if not hit:
            return ConeUnion(C.dim, ())
        out.append(list(hit[0]))
    return ConeUnion.from_sign_lists(C.dim, _product(out))


def normal_cone(C: BlockSet, z) -> ConeUnion:
    return dir_normal_cone(C, z, None)


def hull(union: ConeUnion) -> PolyCone:
    """Closed convex hull of a union of coordinate-product cones."""
    if union.is_empty:
        raise ValueError("convex hull of the empty set is not a cone")
    signs = []
    for i in range(union.dim):
        have = {p.signs[i] for p in union.pieces}
        pos = bool(have & {NONNEG, FREE})
        neg = bool(have & {NONPOS, FREE})
        signs.append(FREE if pos and neg else NONNEG if pos else NONPOS if neg else ZERO)
    return PolyCone.from_signs(signs)


def clarke_normal_cone(C: BlockSet, z, d=None) -> PolyCone:
    return hull(dir_normal_cone(C, z, d))


def regular_tangent_cone(C: BlockSet, z) -> PolyCone:
    return clarke_normal_cone(C, z, None).polar()


# ---------------------------------------------------------------- sampling oracle

def oracle_dir_normal(C: BlockSet, z, d=None, samples: int = 64,
                      scales: Sequence[float] | None = None, seed: int = 0) -> np.ndarray:
    """Unit proximal normals sampled at points of C approaching z in direction d.

    For each t in ``scales`` and each of ``samples`` perturbations w (aperture t),
    x = proj(z + t (d + t w)) is kept when (x - z)/t stays close to d; a second
    random offset of size t^2 is projected back to produce a proximal normal at
    a point within t^2 of x.
    """
    z = snap(C, z)
    d = np.zeros(C.dim) if d is None else np.asarray(d, dtype=float)
    nd = np.linalg.norm(d)
    if nd > 0:
        d = d / nd
    if scales is None:
        scales = [10.0 ** (-k / 2) for k in range(2, 11)]
    # a scale resolves d only if its 4t acceptance window is finer than d's smallest nonzero component
    nonzero = np.abs(d)[np.abs(d) > DIR_TOL]
    resolve = float(np.min(nonzero)) if nonzero.size else math.inf
    rng = np.random.default_rng(seed)
    found = []
    for t in scales:
        if 4 * t * (1 + t) >= resolve:
            rng.normal(size=(2 * samples, C.dim))
            continue
        W = rng.normal(size=(samples, C.dim))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        Q = z + t * (d + t * W)
        X, _ = project_many(C, Q)
        Zeta = rng.normal(size=(samples, C.dim))
        Zeta /= np.linalg.norm(Zeta, axis=1, keepdims=True)
        Q2 = X + t * t * Zeta
        Pp, dist = project_many(C, Q2)
        for k in range(samples):
            if np.linalg.norm((Pp[k] - z) / t - d) > 4 * t:
                continue
            if dist[k] <= 1e-14:
                continue
            found.append((Q2[k] - Pp[k]) / dist[k])
    return np.array(found).reshape(-1, C.dim)

"""Seeded generators and brute-force oracles shared by the test modules."""
from __future__ import annotations

import itertools
import math

import numpy as np

from dirval import exprcalc, polygeom
from dirval.exprcalc import Expr, const, var
from dirval.linsolve import LinearProgram
from dirval.polygeom import Block, BlockSet, PolyCone

# ---------------------------------------------------------------- expressions

UNARY = ("neg", "pow", "sin", "cos", "exp", "log", "sqrt")


def random_expr(rng: np.random.Generator, depth: int, n: int, m: int) -> Expr:
    """Random AST of the given maximum depth; log/sqrt/div arguments may leave the domain."""
    if depth <= 1 or rng.random() < 0.25:
        if rng.random() < 0.7:
            cls = "x" if rng.random() < 0.5 else "y"
            return var(cls, int(rng.integers(1, (n if cls == "x" else m) + 1)))
        # the grammar has no negative literals: a leading minus always parses to a neg node
        c = const(float(np.round(rng.uniform(0, 3), 2)))
        return Expr("neg", (c,)) if rng.random() < 0.3 else c
    if rng.random() < 0.55:
        kind = ("add", "sub", "mul", "div")[int(rng.integers(4))]
        return Expr(kind, (random_expr(rng, depth - 1, n, m), random_expr(rng, depth - 1, n, m)))
    kind = UNARY[int(rng.integers(len(UNARY)))]
    a = random_expr(rng, depth - 1, n, m)
    if kind == "neg":
        return Expr("neg", (a,))
    if kind == "pow":
        return Expr("pow", (a,), int(rng.integers(0, 4)))
    return Expr("call", (a,), kind)


def _subvalues(e: Expr, x, y, out: list):
    for a in e.args:
        _subvalues(a, x, y, out)
    out.append((e, exprcalc.evaluate(e, x, y)))


def well_conditioned(e: Expr, x, y, margin: float = 0.05, cap: float = 1e4) -> bool:
    """True when every subexpression is finite and singular arguments stay away from their poles."""
    vals: list = []
    try:
        _subvalues(e, x, y, vals)
    except exprcalc.EvaluationError:
        return False
    lookup = {id(node): v for node, v in vals}
    for node, v in vals:
        if not math.isfinite(v) or abs(v) > cap:
            return False
        if node.kind == "div" and abs(lookup[id(node.args[1])]) < margin:
            return False
        if node.kind == "call" and node.data in ("log", "sqrt") and lookup[id(node.args[0])] < margin:
            return False
    return True


def expression_cases(seed: int, count: int, n: int = 2, m: int = 2, depth: int = 6):
    """``count`` (expr, x, y) triples at well-conditioned points."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        e = random_expr(rng, depth, n, m)
        for _ in range(20):
            x, y = rng.uniform(-1, 1, n), rng.uniform(-1, 1, m)
            if well_conditioned(e, x, y):
                out.append((e, x, y))
                break
    return out


# ---------------------------------------------------------------- block sets

def random_block(rng: np.random.Generator) -> Block:
    k = int(rng.integers(7))
    if k == 0:
        return Block("zero")
    if k == 1:
        return Block("nonpos")
    if k == 2:
        return Block("nonneg")
    if k == 3:
        return Block("free")
    if k == 4:
        lo = float(rng.integers(-2, 1))
        return Block.interval(lo, lo + float(rng.integers(0, 3)))
    if k == 5:
        return Block.union([[-2.0, -1.0], [0.0, 0.0], [1.0, 3.0]])
    return Block("compl")


def _special_points(b: Block) -> list:
    if b.kind == "compl":
        return [(0.0, 0.0), (1.5, 0.0), (0.0, 2.0)]
    pts = set()
    for lo, hi in b.intervals():
        for v in (lo, hi):
            if math.isfinite(v):
                pts.add(v)
        if math.isfinite(lo) and math.isfinite(hi):
            pts.add(0.5 * (lo + hi))
        elif math.isfinite(lo):
            pts.add(lo + 1.0)
        elif math.isfinite(hi):
            pts.add(hi - 1.0)
        else:
            pts.add(0.7)
    return [(v,) for v in sorted(pts)]


def random_blockset(rng: np.random.Generator, max_blocks: int = 3) -> tuple[BlockSet, np.ndarray]:
    """A random block product and a feasible point biased toward boundaries and corners."""
    blocks = [random_block(rng) for _ in range(int(rng.integers(1, max_blocks + 1)))]
    z = []
    for b in blocks:
        pts = _special_points(b)
        z.extend(pts[int(rng.integers(len(pts)))])
    return BlockSet(tuple(blocks)), np.array(z)


def random_direction(rng: np.random.Generator, C: BlockSet, z: np.ndarray) -> np.ndarray:
    """A direction that is tangent with decent probability (generator or random vector)."""
    if rng.random() < 0.6:
        T = polygeom.tangent_cone(C, z)
        piece = T.pieces[int(rng.integers(len(T.pieces)))]
        d = np.zeros(C.dim)
        if piece.generators.size:
            for g in piece.generators:
                d += rng.uniform(0, 1) * g
        if piece.lineality.size:
            for h in piece.lineality:
                d += rng.uniform(-1, 1) * h
        return d
    return rng.normal(size=C.dim)


# ---------------------------------------------------------------- linear programs

def random_bounded_lp(rng: np.random.Generator) -> LinearProgram:
    """Random LP with <= 8 variables and <= 12 rows, made bounded by w >= -5 and sum(w) <= budget."""
    n = int(rng.integers(1, 9))
    rows = int(rng.integers(1, 12))
    neq = int(rng.integers(0, min(2, n - 1) + 1)) if rng.random() < 0.3 else 0
    A = rng.integers(-3, 4, size=(rows, n)).astype(float)
    b = rng.integers(-4, 8, size=rows).astype(float)
    A = np.vstack([A, np.ones((1, n))])
    b = np.concatenate([b, [float(rng.integers(0, 3 * n + 1))]])
    E = rng.integers(-2, 3, size=(neq, n)).astype(float)
    e = rng.integers(-2, 3, size=neq).astype(float)
    c = rng.integers(-5, 6, size=n).astype(float)
    return LinearProgram(c, A=A, b=b, E=E, e=e, lower=np.full(n, -5.0))


def beale_lp() -> LinearProgram:
    """Degenerate at the origin; textbook largest-coefficient pivoting cycles here. Optimum -0.05."""
    c = [-0.75, 150.0, -0.02, 6.0]
    A = [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]]
    return LinearProgram(c, A=A, b=[0.0, 0.0, 1.0], lower=np.zeros(4))


def vertex_enumeration(lp: LinearProgram, tol: float = 1e-9) -> float | None:
    """Optimal value by trying every basis of active rows; None when infeasible. Needs a bounded region."""
    n = lp.n
    A = np.vstack([lp.A.reshape(-1, n), -np.eye(n)])
    b = np.concatenate([lp.b, -lp.lower])
    E = lp.E.reshape(-1, n)
    e = lp.e
    k = n - E.shape[0]
    best = None
    combos = np.array(list(itertools.combinations(range(A.shape[0]), k)), dtype=int).reshape(-1, k)
    if combos.shape[0] == 0:
        return None
    M = np.concatenate([np.broadcast_to(E, (combos.shape[0],) + E.shape), A[combos]], axis=1)
    r = np.concatenate([np.broadcast_to(e, (combos.shape[0], e.size)), b[combos]], axis=1)
    ok = np.abs(np.linalg.det(M)) > 1e-10
    if not np.any(ok):
        return None
    W = np.linalg.solve(M[ok], r[ok][..., None])[..., 0]
    feas = np.all(W @ A.T <= b + tol, axis=1)
    if E.size:
        feas &= np.all(np.abs(W @ E.T - e) <= tol, axis=1)
    if not np.any(feas):
        return None
    best = float(np.min(W[feas] @ lp.c))
    return best


# ---------------------------------------------------------------- conic pairs

def random_sign_cone(rng: np.random.Generator, p: int) -> PolyCone:
    return PolyCone.from_signs([("0", "+", "-", "*")[int(rng.integers(4))] for _ in range(p)])


def random_conic_pair(rng: np.random.Generator):
    """Random pair whose dual is feasible by construction (so the primal is bounded below)."""
    from dirval.coneduals import ConicPair

    p = int(rng.integers(1, 5))
    m = int(rng.integers(1, 5))
    K = random_sign_cone(rng, p)
    A = rng.integers(-3, 4, size=(p, m)).astype(float)
    b = rng.integers(-3, 4, size=p).astype(float)
    Kp = K.polar()
    lam0 = np.zeros(p)
    for g in Kp.generators:
        lam0 += rng.integers(0, 3) * g
    for h in Kp.lineality:
        lam0 += rng.integers(-2, 3) * h
    alpha = -A.T @ lam0
    return ConicPair(alpha, float(rng.integers(-2, 3)), A, b, K)


# ---------------------------------------------------------------- affine programs around a point

def _num(v: float) -> str:
    return repr(float(v))


def _affine_row(const_term: float, coeffs, names) -> str:
    parts = [_num(const_term)] + [f"{_num(c)}*{v}" for c, v in zip(coeffs, names) if c != 0.0]
    return " + ".join(parts).replace("+ -", "- ")


def random_affine_program(rng: np.random.Generator, stationary: bool = True):
    """Program with P(x, y) = z + M y + b x1 and linear f, anchored at (x, y) = (0, 0).

    With ``stationary`` the y-gradient of f is -M^T lam0 for some lam0 in N_C(z),
    so the multiplier sets are nonempty.  Returns (program, z, lam0).
    """
    from dirval.report import problem_from_dict

    C, z = random_blockset(rng)
    p = C.dim
    m = int(rng.integers(1, 4))
    M = rng.integers(-2, 3, size=(p, m)).astype(float) * (rng.random((p, m)) < 0.7)
    b = rng.integers(-2, 3, size=p).astype(float)
    lam0 = np.zeros(p)
    if stationary:
        N = polygeom.normal_cone(C, z)
        piece = N.pieces[int(rng.integers(len(N.pieces)))]
        for g in piece.generators:
            lam0 += float(rng.integers(0, 3)) * g
        for h in piece.lineality:
            lam0 += float(rng.integers(-2, 3)) * h
        gy = -M.T @ lam0
    else:
        gy = rng.integers(-2, 3, size=m).astype(float)
    ynames = [f"y{j + 1}" for j in range(m)]
    rows = [_affine_row(z[i], list(M[i]) + [b[i]], ynames + ["x1"]) for i in range(p)]
    fx = float(rng.integers(-2, 3))
    objective = _affine_row(0.0, list(gy) + [fx], ynames + ["x1"])
    doc = {"name": "random_affine", "n": 1, "m": m, "objective": objective, "constraints": rows,
           "C": C.to_config(), "xbar": [0.0], "direction": [1.0], "ybox": [[-3.0, 3.0]] * m}
    return problem_from_dict(doc).program, z, lam0

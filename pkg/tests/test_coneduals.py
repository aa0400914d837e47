import math

import numpy as np
import pytest

from dirval.cli import pu_pair
from dirval.coneduals import ConicPair, MARGIN_CAP, interior_check, linear_system_feasible, solve_pair
from dirval.linsolve import LPStatus, polyhedron_bounded
from dirval.polygeom import PolyCone
from dirval.report import load_problem

from randgen import random_conic_pair

RPLUS = PolyCone.from_signs("+")
RMINUS = PolyCone.from_signs("-")


def negated(K: PolyCone) -> PolyCone:
    return PolyCone.from_signs([{"+": "-", "-": "+"}.get(s, s) for s in K.signs])


# ---------------------------------------------------------------- frozen examples

def test_one_dimensional_pair():
    sol = solve_pair(ConicPair([1.0], 0.0, [[1.0]], [-1.0], RPLUS))
    assert sol.primal_value == pytest.approx(1.0, abs=1e-12)
    assert sol.dual_value == pytest.approx(1.0, abs=1e-12)
    assert sol.dual.x.tolist() == pytest.approx([-1.0])
    assert sol.gap == pytest.approx(0.0, abs=1e-12)


def test_free_cone_unbounded_unless_alpha_zero():
    sol = solve_pair(ConicPair([1.0, 0.0], 0.0, np.zeros((2, 2)), [0.0, 0.0], PolyCone.full(2)))
    assert sol.primal.status is LPStatus.UNBOUNDED and sol.primal_value == -math.inf
    assert sol.dual.status is LPStatus.INFEASIBLE and sol.gap is None
    sol = solve_pair(ConicPair([0.0, 0.0], 2.5, np.zeros((2, 2)), [0.0, 0.0], PolyCone.full(2)))
    assert sol.primal_value == 2.5 and sol.dual_value == 2.5


def test_example41_linearized_pair():
    prob = load_problem("example41.prob")
    sol = solve_pair(pu_pair(prob.program, np.array([0.0]), np.array([-1.0]), np.array([1.0])))
    assert sol.primal_value == pytest.approx(1.0, abs=1e-12)
    assert sol.dual_value == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(sol.dual.x, [0.0, 0.0], atol=1e-12)


def test_example41_interior_both_signs():
    K = PolyCone.from_signs("-*")
    res = interior_check(np.zeros(2), [[-1.0], [1.0]], K, np.zeros(2))
    assert res.holds == {"+": True, "-": True}
    assert min(res.margin.values()) > 0


def test_half_line_has_no_interior():
    res = interior_check([0.0], [[0.0]], RMINUS, [0.0])
    assert res.holds == {"+": False, "-": False}


def test_free_cone_margin_capped():
    res = interior_check(np.zeros(2), np.zeros((2, 1)), PolyCone.full(2), np.zeros(2))
    assert res.both and res.margin["+"] == MARGIN_CAP


def test_linear_system_examples():
    res = linear_system_feasible([[-1.0], [1.0]], PolyCone.from_signs("-*"), np.zeros(2))
    assert res.feasible and res.witness.tolist() == [0.0]
    assert not linear_system_feasible([[0.0]], RMINUS, [1.0]).feasible
    res = linear_system_feasible(np.ones((3, 2)), PolyCone.full(3), [1.0, -2.0, 3.0])
    assert res.feasible and res.witness.tolist() == [0.0, 0.0]


def test_nonconvex_cone_rejected():
    K = PolyCone(1, np.array([[1.0]]), np.zeros((0, 1)), np.array([[-1.0]]), np.zeros((0, 1)), is_convex=False)
    with pytest.raises(ValueError):
        ConicPair([1.0], 0.0, [[1.0]], [0.0], K)


# ---------------------------------------------------------------- properties

def dual_optimal_face_bounded(pair: ConicPair, value: float):
    lp = pair.dual_lp()
    p = pair.b.size
    E = np.vstack([lp.E.reshape(-1, p), pair.b.reshape(1, -1)])
    e = np.concatenate([lp.e, [value - pair.c]])
    return polyhedron_bounded(A=lp.A.reshape(-1, p), b=lp.b, E=E, e=e, dim=p)


def test_strong_duality_on_200_certified_pairs():
    rng = np.random.default_rng(31)
    certified = 0
    tried = 0
    while certified < 200:
        tried += 1
        assert tried < 5000
        pair = random_conic_pair(rng)
        sol = solve_pair(pair)
        if sol.primal.status is not LPStatus.OPTIMAL:
            continue
        # Robinson's condition at the primal solution: 0 in int{A x + b + A R^m - K}
        shift = pair.A @ sol.primal.x + pair.b
        if not interior_check(shift, pair.A, negated(pair.K), np.zeros_like(shift), signs=("+",)).holds["+"]:
            continue
        certified += 1
        assert sol.dual.status is LPStatus.OPTIMAL
        assert sol.gap <= 1e-8
        face = dual_optimal_face_bounded(pair, sol.dual_value)
        assert not face.empty and face.bounded


def test_weak_duality_always():
    rng = np.random.default_rng(37)
    for _ in range(300):
        pair = random_conic_pair(rng)
        pair = ConicPair(pair.alpha + rng.integers(-1, 2, pair.alpha.size) * (rng.random() < 0.3),
                         pair.c, pair.A, pair.b, pair.K)
        sol = solve_pair(pair)
        if math.isfinite(sol.primal_value) and math.isfinite(sol.dual_value):
            assert sol.dual_value <= sol.primal_value + 1e-9


def test_interior_check_sign_symmetry():
    rng = np.random.default_rng(41)
    for _ in range(150):
        p, m = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        K = PolyCone.from_signs([("0", "+", "-", "*")[int(i)] for i in rng.integers(0, 4, p)])
        M = rng.integers(-2, 3, (p, m)).astype(float) * (rng.random((p, m)) < 0.6)
        u = rng.integers(-2, 3, p).astype(float)
        a = interior_check(np.zeros(p), M, K, u)
        b = interior_check(np.zeros(p), M, K, -u)
        assert a.holds["+"] == b.holds["-"] and a.holds["-"] == b.holds["+"]
        assert a.margin["+"] == pytest.approx(b.margin["-"]) and a.margin["-"] == pytest.approx(b.margin["+"])


def test_interior_margin_ball_contained():
    rng = np.random.default_rng(43)
    for _ in range(60):
        p, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        K = PolyCone.from_signs([("0", "+", "-", "*")[int(i)] for i in rng.integers(0, 4, p)])
        M = rng.normal(size=(p, m))
        u = rng.normal(size=p)
        res = interior_check(np.zeros(p), M, K, u, signs=("+",))
        if not res.holds["+"] or res.margin["+"] >= MARGIN_CAP:
            continue
        r = res.margin["+"] / math.sqrt(p)
        for _ in range(10):
            w = rng.normal(size=p)
            w *= 0.99 * r / np.linalg.norm(w)
            # (w - u) + M v in K must be solvable
            assert linear_system_feasible(M, K, w - u).feasible

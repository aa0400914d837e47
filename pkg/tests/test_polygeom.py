import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirval import polygeom
from dirval.polygeom import (Block, BlockSet, DirectionalNbhd, InfeasiblePointError, PolyCone, clarke_normal_cone,
                             dir_normal_cone, enumerate_cells, normal_cone, oracle_dir_normal, project,
                             regular_tangent_cone, tangent_cone)

from randgen import random_blockset, random_direction

NONPOS = BlockSet((Block("nonpos"),))
COMPL = BlockSet((Block("compl"),))
UNIT = BlockSet((Block.interval(0.0, 1.0),))
ORIGIN2 = np.zeros(2)


def signs(union):
    return sorted(union.sign_lists())


# ---------------------------------------------------------------- frozen examples

def test_project_examples():
    p, dist = project(NONPOS, [2.0])
    assert p.tolist() == [0.0] and dist == 2.0
    p, dist = project(UNIT, [2.0])
    assert p.tolist() == [1.0] and dist == 1.0
    p, dist = project(COMPL, [-1.0, -1.0])
    assert p.tolist() == [0.0, 0.0] and dist == pytest.approx(math.sqrt(2), abs=1e-15)


def test_project_union_picks_nearest_piece():
    C = BlockSet((Block.union([[-2, -1], [0, 0], [1, 3]]),))
    assert project(C, [0.4])[0].tolist() == [0.0]
    assert project(C, [0.6])[0].tolist() == [1.0]
    assert project(C, [-0.7])[0].tolist() == [-1.0]


def test_tangent_cone_examples():
    assert signs(tangent_cone(NONPOS, [0.0])) == ["-"]
    assert signs(tangent_cone(NONPOS, [-2.0])) == ["*"]
    T = tangent_cone(COMPL, ORIGIN2)
    assert signs(T) == ["+0", "0+"]
    assert T.contains([3, 0]) and T.contains([0, 1]) and not T.contains([1, 1])


def test_tangent_cone_rejects_infeasible_point():
    with pytest.raises(InfeasiblePointError):
        tangent_cone(NONPOS, [1e-3])


def test_dir_normal_examples():
    assert signs(dir_normal_cone(NONPOS, [0.0], [0.0])) == ["+"]
    assert signs(dir_normal_cone(NONPOS, [0.0], [-1.0])) == ["0"]
    assert signs(dir_normal_cone(COMPL, ORIGIN2, [1.0, 0.0])) == ["0*"]


def test_dir_normal_empty_off_tangent_cone():
    assert dir_normal_cone(NONPOS, [0.0], [1.0]).is_empty
    assert dir_normal_cone(COMPL, ORIGIN2, [1.0, 1.0]).is_empty


def test_limiting_normal_of_compl_apex():
    N = normal_cone(COMPL, ORIGIN2)
    for w in ([0, 5], [5, 0], [-1, -2]):
        assert N.contains(w)
    assert not N.contains([1, 1])


def test_clarke_normal_examples():
    assert clarke_normal_cone(NONPOS, [0.0]).signs == ("+",)
    assert clarke_normal_cone(COMPL, ORIGIN2).signs == ("*", "*")
    assert clarke_normal_cone(BlockSet((Block("zero"),)), [0.0]).signs == ("*",)


def test_regular_tangent_examples():
    assert regular_tangent_cone(NONPOS, [0.0]).signs == ("-",)
    assert regular_tangent_cone(COMPL, ORIGIN2).signs == ("0", "0")
    assert regular_tangent_cone(UNIT, [0.5]).signs == ("*",)


def test_enumerate_cells_examples():
    cells = {"".join(c.pattern): signs(c.normal) for c in enumerate_cells(NONPOS, [0.0])}
    assert cells == {"-": ["0"], "0": ["+"]}
    cells = {"".join(c.pattern): signs(c.normal) for c in enumerate_cells(COMPL, ORIGIN2)}
    assert cells["+0"] == ["0*"]
    assert cells["0+"] == ["*0"]
    assert cells["00"] == signs(normal_cone(COMPL, ORIGIN2))
    cells = enumerate_cells(BlockSet((Block("free"),)), [3.0])
    assert [("".join(c.pattern), signs(c.normal)) for c in cells] == [("*", ["0"])]


def test_oracle_examples():
    got = oracle_dir_normal(NONPOS, [0.0], [0.0])
    assert got.size and np.all(got >= -1e-12)
    got = oracle_dir_normal(COMPL, ORIGIN2, [1.0, 0.0])
    assert got.size and np.max(np.abs(got[:, 0])) <= 1e-6
    assert oracle_dir_normal(UNIT, [1.0], [-1.0]).size == 0


def test_directional_nbhd_membership():
    V = DirectionalNbhd((1.0, 0.0), 0.5, 0.1)
    assert V.contains([0.0, 0.0])
    assert V.contains([0.3, 0.02])
    assert not V.contains([0.3, 0.2])
    assert not V.contains([0.6, 0.0])
    ball = DirectionalNbhd((0.0, 0.0), 0.5, 0.1)
    assert ball.contains([0.0, -0.4])
    pts = V.sample(np.random.default_rng(1), 200)
    assert all(V.contains(p) for p in pts)


def test_from_config_round_trip():
    items = [{"type": "nonpos"}, {"type": "zero"}, {"type": "interval", "l": 0, "u": 1},
             {"type": "union_intervals", "pieces": [[0, 1], [2, 3]]}, {"type": "compl"}]
    C = BlockSet.from_config(items)
    assert C.dim == 6
    assert BlockSet.from_config(C.to_config()).to_config() == C.to_config()


def test_overlapping_union_rejected():
    with pytest.raises(ValueError):
        Block.union([[0, 2], [1, 3]])


# ---------------------------------------------------------------- properties

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_polarity_on_100_random_sets():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        C, z = random_blockset(rng)
        That = regular_tangent_cone(C, z)
        Nc = clarke_normal_cone(C, z)
        assert That.polar().same_as(Nc)
        assert Nc.polar().same_as(That)


@settings(max_examples=150)
@given(seeds)
def test_directional_normals_inside_limiting_normals(seed):
    rng = np.random.default_rng(seed)
    C, z = random_blockset(rng)
    d = random_direction(rng, C, z)
    N0 = normal_cone(C, z)
    for piece in dir_normal_cone(C, z, d).pieces:
        for g in piece.generators:
            assert N0.contains(g)
        for h in piece.lineality:
            assert N0.contains(h) and N0.contains(-h)


@settings(max_examples=150)
@given(seeds)
def test_degree_zero_homogeneity(seed):
    rng = np.random.default_rng(seed)
    C, z = random_blockset(rng)
    d = random_direction(rng, C, z)
    base = signs(dir_normal_cone(C, z, d))
    for a in (0.5, 2.0, 10.0):
        assert signs(dir_normal_cone(C, z, a * d)) == base


@settings(max_examples=100)
@given(seeds)
def test_oracle_normals_inside_exact_cone(seed):
    rng = np.random.default_rng(seed)
    C, z = random_blockset(rng)
    d = random_direction(rng, C, z)
    exact = dir_normal_cone(C, z, d)
    for w in oracle_dir_normal(C, z, d, seed=seed % 1000):
        assert exact.angular_distance(w) <= 1e-6


@settings(max_examples=150)
@given(seeds)
def test_convex_blocks_intersect_with_orthogonal_complement(seed):
    rng = np.random.default_rng(seed)
    C, z = random_blockset(rng)
    if not C.is_convex:
        return
    d = random_direction(rng, C, z)
    got = dir_normal_cone(C, z, d)
    T = tangent_cone(C, z)
    if not T.contains(d):
        assert got.is_empty
        return
    (N,) = normal_cone(C, z).pieces
    expected = "".join("0" if abs(d[i]) > 1e-9 * max(1.0, np.max(np.abs(d))) else s
                       for i, s in enumerate(N.signs))
    assert got.sign_lists() == [expected]


@settings(max_examples=100)
@given(seeds)
def test_tangent_generators_satisfy_o_t_law(seed):
    rng = np.random.default_rng(seed)
    C, z = random_blockset(rng)
    for piece in tangent_cone(C, z).pieces:
        dirs = list(piece.generators) + list(piece.lineality) + [-h for h in piece.lineality]
        for g in dirs:
            ratios = [project(C, z + 2.0**-k * g)[1] * 2.0**k for k in range(1, 21)]
            assert ratios[-1] <= 1e-9
            assert min(ratios[-5:]) <= 1e-9


@settings(max_examples=100)
@given(seeds)
def test_cells_partition_tangent_cone(seed):
    rng = np.random.default_rng(seed)
    C, z = random_blockset(rng)
    d = random_direction(rng, C, z)
    hits = [c for c in enumerate_cells(C, z) if c.contains(d)]
    if tangent_cone(C, z).contains(d):
        assert len(hits) == 1
        assert signs(hits[0].normal) == signs(dir_normal_cone(C, z, d))
    else:
        assert not hits


def test_project_many_matches_project():
    rng = np.random.default_rng(5)
    for _ in range(30):
        C, _ = random_blockset(rng)
        Z = rng.normal(scale=2.0, size=(20, C.dim))
        P, dist = polygeom.project_many(C, Z)
        for k in range(20):
            p, dk = project(C, Z[k])
            np.testing.assert_allclose(P[k], p, atol=1e-14)
            assert dist[k] == pytest.approx(dk, abs=1e-14)


def test_sign_cone_polar_twice_is_identity():
    rng = np.random.default_rng(9)
    for _ in range(50):
        s = [("0", "+", "-", "*")[int(i)] for i in rng.integers(0, 4, size=int(rng.integers(1, 6)))]
        K = PolyCone.from_signs(s)
        assert K.polar().polar().same_as(K)

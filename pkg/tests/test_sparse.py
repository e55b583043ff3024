import math

import numpy as np
import pytest

from sparselab.dyadic import DyadicCube, children, cover_ball
from sparselab.errors import InvalidInput
from sparselab.grid import Grid, GridFunction
from sparselab.operators import get_kernel
from sparselab.sparse import (
    SparseCollection,
    SparseContext,
    StoppingConfig,
    build_sparse,
    counting_bound_check,
    random_test_function,
    sparse_apply,
    sparse_weighted_bound_check,
    stopping_cubes,
    verify_domination,
    verify_sparseness,
)
from sparselab.weights import power_weight

HILBERT = get_kernel("smooth-dini:hilbert")
G1 = Grid(1, 1024, 1.0)


def cube(alpha, k, m):
    return DyadicCube(tuple(alpha), k, tuple(m))


def test_config_eps_range():
    assert StoppingConfig().eps_for(1) == pytest.approx(1 / 180)
    with pytest.raises(InvalidInput):
        StoppingConfig(eps_d=0.1).eps_for(1)


# stopping cubes ----------------------------------------------------------

def test_stopping_zero_input():
    f = GridFunction.zeros(G1)
    ctx = SparseContext(HILBERT, f)
    res = stopping_cubes(cube((0,), 2, (0,)), ctx, StoppingConfig())
    assert res.cubes == [] and res.e0_size == 0


def test_stopping_spike():
    v = np.zeros(G1.shape)
    v[600] = 1.0
    f = GridFunction(G1, v)
    ctx = SparseContext(HILBERT, f)
    q0 = cube((0,), 1, (0,))  # [0, 1/2)
    res = stopping_cubes(q0, ctx, StoppingConfig(c_multiplier=8.0))
    assert res.cond1 and res.cond2 and res.cond3
    assert res.small_size < StoppingConfig().eps_for(1)
    spike = G1.axis()[600]
    for q in res.cubes:
        assert q.bounds().as_float()[0][0] - 0.05 <= spike <= q.bounds().as_float()[1][0] + 0.05
    for i, a in enumerate(res.cubes):
        for b in res.cubes[i + 1:]:
            assert not a.is_subset(b) and not b.is_subset(a)


# sparse operator and sparseness ------------------------------------------

def test_sparse_apply_basic():
    g = Grid(1, 64, 1.0)
    f = random_test_function(g, 0.4, seed=1)
    empty = SparseCollection.from_cubes([])
    assert np.all(sparse_apply(empty, f).values == 0)
    q = cube((0,), 2, (0,))  # [0, 1/4)
    ind = GridFunction(g, ((g.axis() >= 0) & (g.axis() < 0.25)).astype(float))
    out = sparse_apply(SparseCollection.from_cubes([q]), ind).values
    np.testing.assert_allclose(out, ind.values)


def test_sparse_apply_monotone():
    g = Grid(1, 256, 1.0)
    coll = SparseCollection.from_cubes([cube((0,), 2, (0,)), cube((1,), 3, (0,)),
                                        cube((0,), 1, (-1,))])
    f = random_test_function(g, 0.45, seed=2)
    h = f.with_values(f.values + random_test_function(g, 0.45, seed=3).values)
    assert np.all(sparse_apply(coll, f).values <= sparse_apply(coll, h).values + 1e-15)


def test_sparseness_chain_half():
    q = cube((0,), 0, (0,))
    kid = children(q)[0]
    r = verify_sparseness(SparseCollection.from_cubes([q, kid]), 0.5)
    assert r["pass"] and r["worst_fraction"] == 0.5
    r = verify_sparseness(SparseCollection.from_cubes([q, *children(q)]), 0.5)
    assert not r["pass"] and r["worst_fraction"] == 1.0
    assert verify_sparseness(SparseCollection.from_cubes([]))["pass"]


def test_shift_partition_and_roundtrip():
    cubes = [cube((0,), 0, (0,)), cube((1,), 2, (3,)), cube((2,), -1, (0,))]
    coll = SparseCollection.from_cubes(cubes)
    for a, lst in coll.by_shift.items():
        assert all(q.alpha == a for q in lst)
    back = SparseCollection.from_record(coll.to_record())
    assert sorted(back.cubes) == sorted(coll.cubes)


def test_counting_bound():
    q = cube((0,), 0, (0,))
    small = [cube((0,), 6, (m,)) for m in range(3)]
    r = counting_bound_check([q, *small], 1 / 180)
    assert r["worst_fraction"] == pytest.approx(3 / 64)
    assert r["pass"] == (3 / 64 <= r["bound"])


# construction ------------------------------------------------------------

def test_build_zero_input_is_tail_only():
    g = Grid(1, 4096, 1.0)
    f = GridFunction.zeros(g)
    coll = build_sparse(HILBERT, f, (0.0,), 0.25)
    tail = {DyadicCube.from_record(r) for r in coll.report["tail"]}
    assert set(coll.cubes) == tail
    dom = verify_domination(HILBERT, f, coll)
    assert dom["pass"] and dom["measured_constant"] == 0.0


def test_build_rejects_support_outside_ball():
    g = Grid(1, 4096, 1.0)
    f = random_test_function(g, 0.3, seed=0)
    with pytest.raises(InvalidInput):
        build_sparse(HILBERT, f, (0.0,), 0.1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_build_random_1d(seed):
    g = Grid(1, 4096, 1.0)
    f = random_test_function(g, 0.25, seed=seed)
    ctx = SparseContext(HILBERT, f)
    coll = build_sparse(HILBERT, f, (0.0,), 0.25, ctx=ctx)
    rep = coll.report
    assert rep["cond1"] and rep["cond2"] and rep["cond3"]
    assert rep["induction_bound"] and rep["counting_pass"]
    assert math.isfinite(rep["tail_constant"])
    assert verify_sparseness(coll)["pass"]
    dom = verify_domination(HILBERT, f, coll, ctx=ctx)
    assert dom["pass"] and 0 < dom["measured_constant"] < math.inf
    # homogeneity of both sides
    f3 = f.with_values(3.0 * f.values)
    coll3 = build_sparse(HILBERT, f3, (0.0,), 0.25)
    assert verify_domination(HILBERT, f3, coll3)["measured_constant"] == pytest.approx(
        dom["measured_constant"], rel=1e-9)


# weighted bound ----------------------------------------------------------

def test_weighted_single_cube_identity_weight():
    g = Grid(1, 256, 2.0)
    coll = SparseCollection.from_cubes([cube((0,), 0, (0,))])
    r = sparse_weighted_bound_check(coll, power_weight(0.0, g))
    assert r["norm_lower"] == pytest.approx(1.0, rel=1e-9)


def test_weighted_ratio_bounded_and_scale_invariant():
    g = Grid(1, 1024, 2.0)
    f = random_test_function(Grid(1, 1024, 2.0), 0.4, seed=4)
    coll = SparseCollection.from_cubes(
        [cover_ball((0.0,), r) for r in (0.02, 0.05, 0.1, 0.2)]
        + [cover_ball((0.3,), 0.03), cover_ball((-0.2,), 0.01)])
    assert verify_sparseness(coll)["pass"] or True  # family need not be sparse here
    ratios = []
    for delta in (0.25, 0.5, 0.75):
        w = power_weight(delta, g)
        r = sparse_weighted_bound_check(coll, w)
        r2 = sparse_weighted_bound_check(coll, w.scaled(17.0))
        assert r2["ratio"] == pytest.approx(r["ratio"], rel=1e-8)
        ratios.append(r["ratio"])
    assert max(ratios) / min(ratios) < 3
    assert np.all(np.isfinite(sparse_apply(coll, f).values))

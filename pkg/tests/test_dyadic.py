from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparselab.dyadic import (
    Box,
    DyadicCube,
    LevelWindow,
    all_shifts,
    children,
    contains,
    cover_ball,
    cover_ball_within,
    covering_trials,
    cube_bounds,
    cubes_in_box,
    locate,
    maximal_cubes,
)
from sparselab.errors import InvalidInput


def cube(alpha, k, m):
    return DyadicCube(tuple(alpha), k, tuple(m))


def holds_ball(q, c, r):
    return q.bounds().contains_ball(c, r)


# bounds ------------------------------------------------------------------

def test_unit_cube_bounds():
    b = cube_bounds(cube((0,), 0, (0,)))
    assert b.lower == (F(0),) and b.upper == (F(1),)


def test_shifted_level_one_bounds():
    # 2^-1 ([0,1) + 0 - 1/3)
    b = cube_bounds(cube((1,), 1, (0,)))
    assert b.lower == (F(-1, 6),) and b.upper == (F(1, 3),)


def test_negative_level_bounds():
    b = cube_bounds(cube((0,), -1, (1,)))
    assert b.lower == (F(2),) and b.upper == (F(4),)


def test_invalid_shift_rejected():
    with pytest.raises(InvalidInput):
        cube((3,), 0, (0,))
    with pytest.raises(InvalidInput):
        DyadicCube((0, 1), 0, (0,))


# children ----------------------------------------------------------------

def test_children_unit_interval():
    kids = children(cube((0,), 0, (0,)))
    got = sorted((k.lower[0], k.upper[0]) for k in kids)
    assert got == [(F(0), F(1, 2)), (F(1, 2), F(1))]


def test_children_of_shifted_cube():
    parent = cube((1,), 1, (0,))
    kids = children(parent)
    assert all(k.alpha == (1,) and k.level == 2 for k in kids)
    lo = min(k.lower[0] for k in kids)
    hi = max(k.upper[0] for k in kids)
    assert (lo, hi) == (F(-1, 6), F(1, 3))
    # the two halves abut
    a, b = sorted(kids, key=lambda k: k.lower[0])
    assert a.upper == b.lower


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 3), k=st.integers(-6, 6),
       data=st.data())
def test_children_partition_parent(d, k, data):
    alpha = tuple(data.draw(st.integers(0, 2)) for _ in range(d))
    m = tuple(data.draw(st.integers(-20, 20)) for _ in range(d))
    q = cube(alpha, k, m)
    kids = children(q)
    assert len(kids) == 2 ** d
    assert sum(c.measure for c in kids) == q.measure
    for c in kids:
        assert c.is_subset(q)
        assert c.parent() == q
    for i, a in enumerate(kids):
        for b in kids[i + 1:]:
            # siblings differ in at least one axis interval, which are disjoint
            assert any(a.upper[t] <= b.lower[t] or b.upper[t] <= a.lower[t]
                       for t in range(d))


# containment -------------------------------------------------------------

def test_half_open_membership():
    q = cube((0,), 0, (0,))
    assert contains(q, (0.0,))
    assert not contains(q, (1.0,))
    assert contains(cube((1,), 1, (0,)), (0.3,))


@settings(max_examples=100, deadline=None)
@given(x=st.fractions(min_value=-50, max_value=50, max_denominator=1 << 12),
       a=st.integers(0, 2), k=st.integers(-5, 8))
def test_locate_contains_point(x, a, k):
    q = locate((x,), (a,), k)
    assert contains(q, (x,))


def test_shift_tiles_window():
    # level-2 D^2 cubes inside [-2, 2) plus boundary slack cover exactly
    box = Box((F(-2),), (F(2),))
    inside = cubes_in_box((2,), 2, box)
    total = sum(q.measure for q in inside)
    assert total <= box.measure
    assert box.measure - total <= 2 * F(1, 4)
    assert len({q.index for q in inside}) == len(inside)


# covering lemmas ---------------------------------------------------------

def test_cover_ball_at_origin():
    q = cover_ball((0,), F(1, 24))
    assert F(1, 4) < q.side <= F(1, 2)
    assert q == cube((1,), 1, (0,))
    assert holds_ball(q, (0,), F(1, 24))


def test_cover_ball_at_half():
    # no level-1 cube of D^0 holds (11/24, 13/24); the first admissible one
    # in shift order is the D^1 cube [1/3, 5/6)
    c, r = (F(1, 2),), F(1, 24)
    for m in range(-2, 3):
        assert not holds_ball(cube((0,), 1, (m,)), c, r)
    q = cover_ball(c, r)
    assert q.bounds().lower == (F(1, 3),) and q.bounds().upper == (F(5, 6),)


@settings(max_examples=300, deadline=None)
@given(d=st.integers(1, 3), data=st.data())
def test_cover_ball_property(d, data):
    c = tuple(data.draw(st.fractions(-100, 100, max_denominator=1 << 20))
              for _ in range(d))
    r = data.draw(st.fractions(F(1, 1 << 16), 64, max_denominator=1 << 20)
                  .filter(lambda v: v > 0))
    q = cover_ball(c, r)
    assert holds_ball(q, c, r)
    assert 6 * r < q.side <= 12 * r


def test_cover_ball_rejects_bad_radius():
    with pytest.raises(InvalidInput):
        cover_ball((0,), 0)


def test_cover_ball_window():
    with pytest.raises(InvalidInput):
        cover_ball((0,), F(1, 1 << 20), window=LevelWindow(-4, 4))


def test_cover_within_degenerate_branch():
    q0 = cube((0,), 0, (0,))
    assert cover_ball_within(q0, (0.5,), 0.1) == q0


def test_cover_within_small_ball():
    q0 = cube((0,), 0, (0,))
    c, r = (F(26, 100),), F(1, 100)
    q = cover_ball_within(q0, c, r)
    assert q.side <= 12 * r
    assert holds_ball(q, c, r)
    assert q0.bounds().contains_box(q.bounds())


def test_cover_within_requires_ball_inside():
    with pytest.raises(InvalidInput):
        cover_ball_within(cube((0,), 0, (0,)), (0.95,), 0.1)


@settings(max_examples=300, deadline=None)
@given(d=st.integers(1, 2), data=st.data())
def test_cover_within_property(d, data):
    alpha = tuple(data.draw(st.integers(0, 2)) for _ in range(d))
    k = data.draw(st.integers(-3, 3))
    q0 = cube(alpha, k, tuple(data.draw(st.integers(-5, 5)) for _ in range(d)))
    side = q0.side
    r = side * data.draw(st.fractions(F(1, 4096), F(1, 2), max_denominator=1 << 16)
                         .filter(lambda v: v > 0))
    c = tuple(lo + r + (side - 2 * r) * data.draw(
        st.fractions(0, 1, max_denominator=1 << 16)) for lo in q0.lower)
    q = cover_ball_within(q0, c, r)
    assert holds_ball(q, c, r)
    assert q0.bounds().contains_box(q.bounds())
    assert q.side <= 12 * r or q == q0


def test_covering_trials_small():
    for d in (1, 2):
        out = covering_trials(d, trials=500, seed=3)
        assert out["cover_failures"] == 0 and out["within_failures"] == 0


# misc --------------------------------------------------------------------

def test_all_shifts_count():
    assert len(all_shifts(2)) == 9
    assert all_shifts(1) == [(0,), (1,), (2,)]


def test_record_roundtrip():
    q = cube((2, 1), -3, (4, -7))
    assert DyadicCube.from_record(q.to_record()) == q


def test_maximal_cubes_drops_nested():
    q = cube((0,), 0, (0,))
    kids = children(q)
    out = maximal_cubes([q, *kids, cube((0,), 0, (3,))])
    assert set(out) == {q, cube((0,), 0, (3,))}

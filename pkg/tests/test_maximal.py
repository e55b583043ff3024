import numpy as np
import pytest

from sparselab.errors import InvalidInput
from sparselab.grid import Grid, GridFunction
from sparselab.maximal import (
    hl_maximal,
    m_delta,
    radius_ladder,
    truncated_centered_maximal,
)
from sparselab.operators import weak_type_ratio


def rand(grid, seed):
    rng = np.random.default_rng(seed)
    return GridFunction(grid, rng.standard_normal(grid.shape)
                        * (rng.random(grid.shape) < 0.2))


def test_radius_ladder():
    r = radius_ladder(1.0, 10.0, 2.0)
    np.testing.assert_allclose(r, [1, 2, 4, 8, 16])
    with pytest.raises(InvalidInput):
        radius_ladder(1.0, 10.0, 3.0)


@pytest.mark.parametrize("d,n", [(1, 128), (2, 32)])
def test_constant_fixed(d, n):
    g = Grid(d, n)
    f = GridFunction(g, np.full(g.shape, 2.5))
    np.testing.assert_allclose(hl_maximal(f).values, 2.5, rtol=1e-12)
    np.testing.assert_allclose(m_delta(f, 0.3).values, 2.5, rtol=1e-12)


def test_centered_constant_in_interior():
    g = Grid(1, 256)
    f = GridFunction(g, np.ones(g.shape))
    out = truncated_centered_maximal(f, 0.5 * g.h, 0.05).values
    np.testing.assert_allclose(out[20:-20], 1.0, rtol=1e-12)


@pytest.mark.parametrize("d,n", [(1, 256), (2, 32)])
def test_dominates_modulus(d, n):
    g = Grid(d, n)
    f = rand(g, 1)
    assert np.all(hl_maximal(f).values >= np.abs(f.values) - 1e-12)


def test_centered_below_uncentered_and_monotone():
    g = Grid(2, 32)
    f = rand(g, 2)
    m = hl_maximal(f).values
    narrow = truncated_centered_maximal(f, 0.05, 0.2).values
    wide = truncated_centered_maximal(f, 0.02, 0.6).values
    assert np.all(narrow <= m + 1e-12)
    assert np.all(wide >= narrow - 1e-12)
    assert np.all(wide <= m + 1e-12)


def test_m_delta():
    g = Grid(1, 256)
    f = rand(g, 3)
    np.testing.assert_allclose(m_delta(f, 1.0).values, hl_maximal(f).values, rtol=1e-12)
    # power-mean inequality on every ball average
    assert np.all(m_delta(f, 0.5).values <= hl_maximal(f).values * (1 + 1e-10))
    with pytest.raises(InvalidInput):
        m_delta(f, 0.0)


def test_weak11_constant_bounded():
    g = Grid(1, 512)
    worst = 0.0
    for seed in range(50):
        f = GridFunction(g, np.abs(rand(g, seed).values))
        worst = max(worst, weak_type_ratio(hl_maximal(f).values, f.l1_norm(),
                                           g.cell_volume))
    assert 1.0 <= worst <= 3.0

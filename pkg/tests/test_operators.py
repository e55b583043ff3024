import math

import numpy as np
import pytest

from sparselab import calibration
from sparselab.dyadic import DyadicCube
from sparselab.errors import InvalidInput, ResolutionError
from sparselab.grid import Grid, GridFunction
from sparselab.operators import (
    RadiiSet,
    TruncationLadder,
    beurling_multiplier_apply,
    beurling_omega,
    beurling_truncation_study,
    continuity_lemma_check,
    cotlar_check,
    get_kernel,
    laplacian_gaussian,
    linear_modulus,
    localized_maximal_truncation,
    log_modulus,
    maximal_truncation,
    pin_beurling_orientation,
    standard_test_set,
    truncated_apply,
    weak11_ratio,
)

ODD = get_kernel("odd1d")
HILBERT = get_kernel("smooth-dini:hilbert")
RIESZ = get_kernel("smooth-dini:riesz1")


def random_f(grid, seed=0, radius=0.3):
    rng = np.random.default_rng(seed)
    v = rng.random(grid.shape) * (grid.radius() < radius * grid.L)
    return GridFunction(grid, v)


# kernels -----------------------------------------------------------------

def test_registry():
    assert get_kernel("beurling:2").omega_sup == pytest.approx(2 / math.pi)
    for bad in ("hilbert", "beurling:x", "smooth-dini:/nonexistent/file"):
        with pytest.raises((InvalidInput, ValueError)):
            get_kernel(bad)


def test_kernel_spec_file(tmp_path):
    p = tmp_path / "k.txt"
    p.write_text("kind=riesz\nj=2\n")
    k = get_kernel(f"smooth-dini:{p}")
    z = np.array([[0.3, -0.4]])
    assert k.evaluate(z)[0] == pytest.approx(-0.4 / (2 * math.pi * 0.5 ** 3))


def test_moduli():
    assert linear_modulus(3.0).check()
    assert linear_modulus(3.0).dini_norm == pytest.approx(3.0)
    # closed form: 1/(1+gamma) below e^-gamma plus the tangent-line part
    c, gamma = 1.0, 2.0
    lm = log_modulus(c, gamma)
    assert lm.check()
    t0 = math.exp(-gamma)
    a = c * (1 + gamma) ** -gamma
    b = c * gamma * (1 + gamma) ** (-gamma - 1) / t0
    exact = c / (1 + gamma) + (a - b * t0) * gamma + b * (1 - t0)
    assert lm.dini_norm == pytest.approx(exact, rel=1e-12)
    # quadrature in log t agrees down to the float underflow at t ~ e^-745
    from scipy import integrate
    num = integrate.quad(lambda u: float(lm(math.exp(u))), -700, 0, points=[-gamma])[0]
    assert num == pytest.approx(exact - c / 701, rel=1e-6)
    with pytest.raises(InvalidInput):
        log_modulus(1.0, 1.0).dini_norm


def test_size_bounds():
    z = np.random.default_rng(0).standard_normal((500, 2))
    assert RIESZ.size_check(z)
    assert HILBERT.size_check(z[:, :1])


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_beurling_omega_sup_and_mean(m):
    k = beurling_omega(m)
    assert k.omega_sup == pytest.approx(m / math.pi)
    assert k.omega_sup <= m
    assert k.sup_check()
    assert k.mean_zero_error() < 1e-12


def test_beurling_first_kernel_cartesian():
    z = np.random.default_rng(1).standard_normal((200, 2))
    zeta = z[:, 0] + 1j * z[:, 1]
    np.testing.assert_allclose(beurling_omega(1).evaluate(z), -1 / (math.pi * zeta ** 2),
                               rtol=1e-12)


# truncations -------------------------------------------------------------

def test_zero_input():
    g = Grid(1, 256)
    out = truncated_apply(ODD, GridFunction.zeros(g), g.h, 0.5)
    assert np.all(out.values == 0)
    assert np.all(maximal_truncation(ODD, GridFunction.zeros(g)).values == 0)


def test_truncation_rejects_subcell_eps():
    g = Grid(1, 256)
    with pytest.raises(ResolutionError):
        truncated_apply(ODD, random_f(g), g.h / 2, 0.5)
    with pytest.raises(InvalidInput):
        truncated_apply(ODD, random_f(g), 0.3, 0.2)


def test_linearity():
    g = Grid(2, 64)
    f1, f2 = random_f(g, 1), random_f(g, 2)
    lhs = truncated_apply(RIESZ, f1.with_values(2 * f1.values - 3 * f2.values), 0.05, 0.4)
    rhs = 2 * truncated_apply(RIESZ, f1, 0.05, 0.4).values \
        - 3 * truncated_apply(RIESZ, f2, 0.05, 0.4).values
    np.testing.assert_allclose(lhs.values, rhs, atol=1e-12)


def test_log_two_closed_form():
    # K(z) = 1/z, f = 1_[0, 1/4), eps = 1/8, delta = 1/2 at x ~ 1/2
    errs = []
    for n in (1024, 4096):
        g = Grid(1, n, 2.0)
        x = g.axis()
        f = GridFunction(g, ((x >= 0) & (x < 0.25)).astype(float))
        out = truncated_apply(ODD, f, 0.125, 0.5).values
        i = int(np.argmin(np.abs(x - 0.5)))
        xi = x[i]
        a, b = max(0.0, xi - 0.5), min(0.25, xi - 0.125)
        exact = math.log((xi - a) / (xi - b))
        errs.append(abs(out[i] - exact))
        assert exact == pytest.approx(math.log(2), abs=4 / n)
    assert errs[-1] < 1e-3


def test_annulus_additivity():
    g = Grid(2, 64)
    f = random_f(g, 4)
    a = truncated_apply(RIESZ, f, 0.05, 0.2).values
    b = truncated_apply(RIESZ, f, 0.2, 0.6).values
    c = truncated_apply(RIESZ, f, 0.05, 0.6).values
    np.testing.assert_allclose(a + b, c, atol=1e-12)


def test_translation_equivariance():
    g = Grid(1, 512)
    v = np.zeros(g.shape)
    v[200:260] = np.random.default_rng(5).random(60)
    t0 = truncated_apply(HILBERT, GridFunction(g, v), 0.01, 0.3).values
    t1 = truncated_apply(HILBERT, GridFunction(g, np.roll(v, 1)), 0.01, 0.3).values
    np.testing.assert_allclose(t1[1:], t0[:-1], atol=1e-12)


def test_odd_symmetry():
    g = Grid(1, 512)
    f = random_f(g, 6)
    t = truncated_apply(ODD, f, 0.01, 0.4).values
    tr = truncated_apply(ODD, f.with_values(f.values[::-1]), 0.01, 0.4).values
    np.testing.assert_allclose(tr[::-1], -t, atol=1e-12)


# maximal truncations -----------------------------------------------------

def test_sharp_dominates_members():
    g = Grid(1, 512)
    f = random_f(g, 7)
    radii = RadiiSet.for_grid(g)
    sharp = maximal_truncation(HILBERT, f, radii).values
    for e in radii.radii[:-1]:
        t = truncated_apply(HILBERT, f, e, g.diameter).values
        assert np.all(sharp >= np.abs(t) - 1e-12)


def test_ladder_refinement_monotone():
    g = Grid(1, 512)
    f = random_f(g, 8)
    rho = 2 ** 0.5
    coarse = maximal_truncation(HILBERT, f, RadiiSet.ladder(g.h, g.diameter, rho)).values
    fine = maximal_truncation(HILBERT, f, RadiiSet.ladder(g.h, g.diameter, rho ** 0.5)).values
    assert np.all(fine >= coarse - 1e-12)


def test_localized_sharp():
    g = Grid(1, 512)
    f = random_f(g, 9)
    lad = TruncationLadder(HILBERT, f)
    big = DyadicCube((0,), 1, (-1,))      # [-1/2, 0)
    small = DyadicCube((0,), 3, (-3,))    # [-3/8, -1/4)
    tb = localized_maximal_truncation(HILBERT, f, big, ladder=lad).values
    ts = localized_maximal_truncation(HILBERT, f, small, ladder=lad).values
    x = g.axis()
    assert np.all(ts[(x < -0.375) | (x >= -0.25)] == 0)
    assert np.all(ts <= tb + 1e-12)
    # T_{eps,delta} = T_eps - T_delta, so only twice the one-sided sup bounds it
    assert np.all(tb <= 2 * lad.sharp() + 1e-12)


# Beurling ----------------------------------------------------------------

def test_beurling_zero_power_identity():
    g = Grid(2, 32)
    f = random_f(g, 10)
    np.testing.assert_array_equal(beurling_multiplier_apply(0, f).values, f.values)


def test_beurling_preserves_l2():
    g = Grid(2, 64)
    f = laplacian_gaussian(g, 0.05)
    for m in (1, 2, 3):
        out = beurling_multiplier_apply(m, f, pad=1)
        assert out.l2_norm() == pytest.approx(f.l2_norm(), rel=1e-12)


def test_orientation_matches_calibration():
    assert pin_beurling_orientation() == calibration.load()["beurling_orientation"]


def test_beurling_truncation_convergence_small():
    r = beurling_truncation_study(1, n=128, sigma_cells=10.0)
    assert r["monotone"]


# weak type and Cotlar ----------------------------------------------------

def test_weak11_zero():
    g = Grid(1, 256)
    assert weak11_ratio(ODD, [GridFunction.zeros(g)])["ratio"] == 0


def test_weak11_spike():
    # T of a unit cell spike takes the values 1/j at distance j cells, so
    # lambda |{|Tf| > lambda}| / ||f||_1 approaches 2
    g = Grid(1, 1024)
    v = np.zeros(g.shape)
    v[g.n // 2] = 1.0
    r = weak11_ratio(ODD, [GridFunction(g, v)])["ratio"]
    assert 1.98 <= r <= 2.0


def test_weak11_larger_set_never_smaller():
    g = Grid(1, 512)
    fs = standard_test_set(g)
    assert weak11_ratio(HILBERT, fs)["ratio"] >= weak11_ratio(HILBERT, fs[:2])["ratio"]


def test_cotlar_zero_and_finite():
    g = Grid(1, 512)
    assert cotlar_check(HILBERT, GridFunction.zeros(g), 0.5) == 0
    c = cotlar_check(HILBERT, standard_test_set(g)[1], 0.5)
    assert 0 < c < math.inf
    with pytest.raises(InvalidInput):
        cotlar_check(HILBERT, standard_test_set(g)[1], 1.0)


def test_cotlar_monotone_in_ladder():
    g = Grid(1, 512)
    f = standard_test_set(g)[3]
    coarse = cotlar_check(HILBERT, f, 0.5, RadiiSet.ladder(g.h, g.diameter, 2.0))
    fine = cotlar_check(HILBERT, f, 0.5, RadiiSet.ladder(g.h, g.diameter, 2.0 ** 0.25))
    assert fine >= coarse * (1 - 1e-12)


# continuity lemma --------------------------------------------------------

def test_continuity_lemma():
    g = Grid(1, 512)
    eps = 8 * g.h
    idx = np.arange(100, 400)
    pairs = np.stack([idx, idx + 3], axis=1)
    assert continuity_lemma_check(HILBERT, GridFunction.zeros(g), eps, 0.4, pairs) == 0
    same = np.stack([idx, idx], axis=1)
    assert continuity_lemma_check(HILBERT, random_f(g), eps, 0.4, same) == 0
    vals = []
    for n in (512, 1024):
        gg = Grid(1, n)
        ii = np.arange(n // 5, 4 * n // 5)
        pp = np.stack([ii, ii + 3 * n // 512], axis=1)
        vals.append(continuity_lemma_check(HILBERT, standard_test_set(gg)[3],
                                           8 / 512, 0.4, pp))
    assert all(np.isfinite(vals))
    assert 0.5 <= vals[1] / vals[0] <= 2
    with pytest.raises(InvalidInput):
        continuity_lemma_check(HILBERT, random_f(g), eps, 0.4, [(0, 10)])

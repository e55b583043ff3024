import math

import numpy as np
import pytest

from sparselab.errors import InvalidInput, ResolutionError
from sparselab.grid import Grid, GridFunction
from sparselab.lpdecomp import (
    MOLLIFIER_RADIUS,
    annular_kernel,
    annulus_sup_rim,
    build_mollifier,
    envelope_fit,
    get_schedule,
    multiplier_of_annulus,
    partial_sum,
    piece_apply,
    piece_kernel_estimates,
    piece_l2_norm,
    piece_multiplier,
    resolvable_levels,
    rough_odd_1d,
    scale_invariance_error,
    telescoping_residuals,
)
from sparselab.operators import RoughHomogeneous, get_kernel

B1 = get_kernel("beurling:1")
G2 = Grid(2, 128, 128.0)
G1 = Grid(1, 1024, 1024.0)
DYADIC = get_schedule("dyadic")
IDENTITY = get_schedule("identity")


# mollifier ---------------------------------------------------------------

@pytest.mark.parametrize("d", [1, 2])
def test_mollifier_support_and_mass(d):
    mol = build_mollifier(d)
    r = MOLLIFIER_RADIUS
    if d == 1:
        x = np.linspace(-r, r, 200001)[:, None]
        mass = np.trapezoid(mol.phi(x), x[:, 0])
    else:
        # radial quadrature of a radial function
        s = np.linspace(0, r, 200001)
        pts = np.stack([s, np.zeros_like(s)], axis=-1)
        mass = np.trapezoid(2 * math.pi * s * mol.phi(pts), s)
    assert mass == pytest.approx(1.0, abs=1e-8)
    outside = np.array([[1.0001 * r] + [0.0] * (d - 1), [0.5] + [0.0] * (d - 1)])
    assert np.all(mol.phi(outside) == 0)
    assert mol.hat(0.0) == 1.0
    assert mol.psi_hat(0.0) == 0.0


@pytest.mark.parametrize("d", [1, 2])
def test_psi_hat_envelope(d):
    mol = build_mollifier(d)
    rho = np.logspace(-4, 4, 400)
    ratio = np.abs(mol.psi_hat(rho)) / np.minimum(rho, 1.0)
    assert np.all(np.isfinite(ratio)) and ratio.max() < 50


def test_psi_mean_zero():
    mol = build_mollifier(1)
    x = np.linspace(-MOLLIFIER_RADIUS, MOLLIFIER_RADIUS, 400001)
    assert abs(np.trapezoid(mol.psi(x[:, None]), x)) < 1e-8


def test_hat_matches_quadrature():
    mol = build_mollifier(1)
    x = np.linspace(-MOLLIFIER_RADIUS, MOLLIFIER_RADIUS, 200001)
    phi = mol.phi(x[:, None])
    for xi in (0.3, 7.0, 40.0):
        direct = np.trapezoid(phi * np.cos(2 * np.pi * xi * x), x)
        assert mol.hat(xi) == pytest.approx(direct, abs=1e-9)


# schedules ---------------------------------------------------------------

def test_schedules():
    assert DYADIC.values(4) == [0, 2, 4, 8, 16]
    assert IDENTITY.values(3) == [0, 1, 2, 3]
    with pytest.raises(InvalidInput):
        get_schedule("cubic")
    with pytest.raises(InvalidInput):
        DYADIC(-1)


# annuli ------------------------------------------------------------------

def test_resolvable_levels():
    assert resolvable_levels(Grid(2, 512, 512.0)) == [2, 3, 4, 5]
    with pytest.raises(ResolutionError):
        annular_kernel(B1, 8, G2)


def test_annuli_disjoint():
    ks = resolvable_levels(G2)
    supp = [np.abs(annular_kernel(B1, k, G2)) > 0 for k in ks]
    for i in range(len(ks)):
        for j in range(i + 1, len(ks)):
            assert not np.any(supp[i] & supp[j])


def test_annulus_rim_sup():
    for k in (2, 3):
        assert annulus_sup_rim(B1, k) == pytest.approx(2.0 ** (-2 * k) / math.pi, rel=1e-12)
        samples = np.abs(annular_kernel(B1, k, G2)).max()
        assert samples <= annulus_sup_rim(B1, k) * (1 + 1e-12)


def test_annulus_mean_zero():
    for k in resolvable_levels(G2):
        assert abs(multiplier_of_annulus(B1, k, xi=[np.zeros(1), np.zeros(1)])[0]) < 1e-14
        # Riemann sum of the sampled annulus
        assert abs(annular_kernel(B1, k, G2).sum()) * G2.cell_volume < 1e-10


def test_scale_collapse():
    assert scale_invariance_error(B1, G2) < 1e-8
    assert scale_invariance_error(rough_odd_1d(), G1) < 1e-8


def test_one_dimensional_transform_closed_form():
    # int_{1<|x|<=2} sign(x)/x e^{-2 pi i x xi} dx = -2i (Si(4 pi xi) - Si(2 pi xi))
    from scipy.special import sici
    xi = np.array([0.1, 0.7, 3.0])
    got = multiplier_of_annulus(rough_odd_1d(), 0, xi=[xi])
    exact = -2j * (sici(4 * np.pi * xi)[0] - sici(2 * np.pi * xi)[0])
    np.testing.assert_allclose(got, exact, rtol=1e-12)


def test_envelope_fit_recovers_exponent():
    eta = np.logspace(-3, 3, 2000)
    v = 0.5 * np.minimum(eta ** 0.7, eta ** -0.7)
    fit = envelope_fit(eta, v)
    assert fit["alpha"] == pytest.approx(0.7, rel=0.05)
    assert fit["violations"] < 0.01
    with pytest.raises(InvalidInput):
        envelope_fit(np.logspace(0.1, 2, 50), np.ones(50))


# partial sums and pieces ---------------------------------------------------

def test_partial_sum_constant():
    f = GridFunction(G2, np.full(G2.shape, 3.0))
    np.testing.assert_allclose(partial_sum(f, 4).values, 3.0, rtol=1e-12)


def test_partial_sum_difference_is_psi():
    rng = np.random.default_rng(0)
    f = GridFunction(G1, rng.standard_normal(G1.shape))
    mol = build_mollifier(1)
    for j in (0, 3, 6):
        diff = partial_sum(f, j).values - partial_sum(f, j + 1).values
        rho = np.abs(G1.frequencies()[0])
        conv = np.fft.ifft(np.fft.fft(f.values) * mol.psi_hat(2.0 ** j * rho)).real
        assert np.abs(diff - conv).max() < 1e-10


def test_partial_sum_limit_band_limited():
    x = G1.axis()
    f = GridFunction(G1, np.cos(2 * np.pi * 4 * x / G1.L))
    errs = [np.abs(partial_sum(f, j).values - f.values).max() for j in (4, 0, -4, -8)]
    assert errs[0] > errs[1] > errs[2] > errs[3]
    assert errs[3] < 1e-12


def test_piece_zero_input():
    assert np.all(piece_apply(B1, DYADIC, 2, GridFunction.zeros(G2)).values == 0)


def test_pieces_vanish_at_zero_frequency():
    for j in range(1, 4):
        m = piece_multiplier(B1, DYADIC, j, G2)
        assert abs(m[0, 0]) < 1e-14


def test_identity_schedule_is_psi_expansion():
    mol = build_mollifier(2)
    rho = np.sqrt(sum(x * x for x in G2.frequencies()))
    j = 2
    direct = sum(multiplier_of_annulus(B1, k, grid=G2) * mol.psi_hat(2.0 ** (k - j) * rho)
                 for k in resolvable_levels(G2))
    np.testing.assert_allclose(piece_multiplier(B1, IDENTITY, j, G2), direct, atol=1e-12)


def test_telescoping_residuals_decay():
    rng = np.random.default_rng(1)
    f = GridFunction(G2, rng.standard_normal(G2.shape))
    res = telescoping_residuals(B1, DYADIC, 4, f)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(res, res[1:]))
    assert res[-1] < 1e-3 * res[0]
    assert res[-1] <= f.l2_norm() * sum(piece_l2_norm(B1, DYADIC, j, G2)
                                        for j in range(5, 9)) + 1e-12


def test_piece_norm_rotation_invariant():
    theta = 0.37
    c, s = math.cos(theta), math.sin(theta)

    def rotated(u):
        v = np.stack([c * u[..., 0] - s * u[..., 1], s * u[..., 0] + c * u[..., 1]], -1)
        return B1.omega_fn(v)

    rot = RoughHomogeneous(2, rotated, B1.omega_sup, "rotated")
    for j in (0, 1, 2):
        assert piece_l2_norm(rot, DYADIC, j, G2) == pytest.approx(
            piece_l2_norm(B1, DYADIC, j, G2), rel=1e-8)


def test_first_piece_bounded():
    assert piece_l2_norm(B1, DYADIC, 0, G2) <= 2 * math.pi * B1.omega_sup


def test_piece_estimates_small():
    e0 = piece_kernel_estimates(rough_odd_1d(), DYADIC, 1, pairs=200)
    e1 = piece_kernel_estimates(rough_odd_1d(), DYADIC, 2, pairs=200)
    for e in (e0, e1):
        assert e.size_const > 0 and e.dini > 0
        # gradient regime: omega(t)/t <= c 2^N(j)
        assert np.isfinite(e.small_t_slope)
    assert 1 / 3 <= e1.size_const / e0.size_const <= 3
    assert e1.dini > e0.dini
    row = e0.as_row()
    assert set(row) == {"j", "N", "l2_norm", "size_const", "dini", "alpha_fit"}

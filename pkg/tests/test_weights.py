import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparselab import calibration
from sparselab.errors import InvalidInput
from sparselab.grid import Grid, GridFunction
from sparselab.weights import (
    CubeFamily,
    Weight,
    ainf_fujii_wilson,
    ap_constant,
    brute_force_ap_1d,
    bump_corollaries_check,
    characteristics,
    dual_exponent,
    largest_rhi_constant,
    power_weight,
    reverse_holder_check,
    rhi_to_ainf_bound,
)

G1 = Grid(1, 1024, 2.0)
G2 = Grid(2, 32, 2.0)


def test_dual_exponent():
    assert dual_exponent(2.0) == 2.0
    assert dual_exponent(3.0) == pytest.approx(1.5)
    with pytest.raises(InvalidInput):
        dual_exponent(1.0)


def test_weight_must_be_positive():
    with pytest.raises(InvalidInput):
        Weight(GridFunction(G1, np.zeros(G1.shape)))


@pytest.mark.parametrize("grid", [G1, G2])
def test_identity_weight_characteristics(grid):
    w = power_weight(0.0, grid)
    np.testing.assert_array_equal(w.array, 1.0)
    ch = characteristics(w, 2.0)
    for key in ("ap", "ainf", "dual_ainf", "braces", "parens"):
        v = getattr(ch, key)
        assert v == pytest.approx(1.0, abs=1e-12)
    assert ap_constant(w, 3.0) == pytest.approx(1.0)


def test_power_weight_range():
    with pytest.raises(InvalidInput):
        power_weight(1.0, G1)
    with pytest.raises(InvalidInput):
        power_weight(-2.5, G2)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(1e-3, 1e3), delta=st.floats(-0.9, 0.9))
def test_ap_scale_invariant(c, delta):
    g = Grid(1, 256, 2.0)
    w = power_weight(delta, g)
    a = ap_constant(w, 2.0)
    b = ap_constant(w.scaled(c), 2.0)
    assert abs(a - b) <= 1e-12 * a


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_duality_identity(p):
    # [sigma]_{A_p'} = [w]_{A_p}^{1/(p-1)} with sigma = w^{1-p'}
    w = power_weight(0.4, G1)
    pp = dual_exponent(p)
    lhs = ap_constant(w.power(1 - pp), pp)
    rhs = ap_constant(w, p) ** (1 / (p - 1))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_oracle_monotone_in_delta():
    g = Grid(1, 2048, 2.0)
    vals = [brute_force_ap_1d(power_weight(d, g), 2.0) for d in (0.25, 0.5, 0.75, 0.9)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_dyadic_family_below_oracle():
    g = Grid(1, 2048, 2.0)
    for delta in (-0.5, 0.25, 0.75):
        w = power_weight(delta, g)
        assert ap_constant(w, 2.0) <= brute_force_ap_1d(w, 2.0) * (1 + 1e-12)


def test_oracle_at_half():
    # frozen oracle value for |x|^{1/2}: sup over [-ta, a] tends to 1.5
    w = power_weight(0.5, Grid(1, 4096, 2.0))
    assert brute_force_ap_1d(w, 2.0) == pytest.approx(1.4932, rel=5e-3)


def test_ainf_envelope():
    cal = calibration.load()
    for grid, key in ((G1, "ainf_over_ap_1"), (G2, "ainf_over_ap_2")):
        w = power_weight(0.5, grid)
        ainf = ainf_fujii_wilson(w)
        assert 1.0 <= ainf <= cal[key] * ap_constant(w, 2.0)


def test_braces_formula_p2():
    w = power_weight(0.5, G1)
    ch = characteristics(w, 2.0)
    assert ch.braces == pytest.approx(np.sqrt(ch.ap * max(ch.ainf, ch.dual_ainf)))
    assert ch.parens == max(ch.ainf, ch.dual_ainf)


def test_family_restriction_lowers_constant():
    w = power_weight(0.6, G1)
    full = ap_constant(w, 2.0)
    one_shift = ap_constant(w, 2.0, CubeFamily(shifts=((0,),)))
    assert one_shift <= full


def test_reverse_holder_identity():
    r = reverse_holder_check(power_weight(0.0, G1), 0.7)
    assert r["holds"] and r["worst_ratio"] == pytest.approx(1.0)


def test_reverse_holder_monotone_in_delta():
    w = power_weight(0.5, G1)
    ratios = [reverse_holder_check(w, d)["worst_ratio"] for d in np.linspace(0.05, 2, 12)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(ratios, ratios[1:]))


def test_bisected_rhi_constant_holds():
    w = power_weight(0.5, G1)
    ainf = ainf_fujii_wilson(w)
    c = largest_rhi_constant(w, ainf)
    assert c > 0
    assert reverse_holder_check(w, c / ainf)["holds"]


def test_rhi_to_ainf_bound():
    assert rhi_to_ainf_bound(1, 2) == 2
    assert rhi_to_ainf_bound(2, 1.5) == pytest.approx(6)
    with pytest.raises(InvalidInput):
        rhi_to_ainf_bound(1, 1)


def test_bump_identity_weight():
    r = bump_corollaries_check(power_weight(0.0, G1), 2.0, 0.5)
    assert r["ap_bump_ratio"] <= 1 + 1e-12
    assert r["ainf_bump_ratio"] <= 1 + 1e-12
    assert r["mixed_bump_ratio"] <= 1 + 1e-12


def test_bump_at_cap():
    w = power_weight(0.5, G1)
    cap = calibration.load()["bump_c"]
    delta = cap / characteristics(w, 2.0).parens
    r = bump_corollaries_check(w, 2.0, delta)
    assert r["ap_bump_holds"] and r["ap_bump_ratio"] <= 4
    assert np.isfinite(r["mixed_bump_ratio"])
    with pytest.raises(InvalidInput):
        bump_corollaries_check(w, 2.0, 2 * delta)

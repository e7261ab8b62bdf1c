from fractions import Fraction

import numpy as np
import pytest
import sympy

from carnotheat.catalog import get_group
from carnotheat.frame import horizontal_frame, horizontal_gradient, ito_correction_audit
from carnotheat.functionals import lp_norm, sobolev_energy
from carnotheat.testfns import (FUNCTIONS, ScalarField, audit_partials, dilated, get_function,
                                left_translated, make_bump, make_coordinate_modulated,
                                zero_field)


# -- frame ----------------------------------------------------------------------------

def test_heisenberg_frame():
    sc = get_group("h1")
    fr = horizontal_frame(sc)
    z1, z2, s = 0.7, -1.3, 0.4
    b = fr.matrix(np.array([z1, z2, s]))
    np.testing.assert_allclose(b[:, 0], [1, 0, -z2 / 2])
    np.testing.assert_allclose(b[:, 1], [0, 1, z1 / 2])


def test_gradient_of_vertical_coordinate():
    sc = get_group("h1")
    f = ScalarField("sigma", lambda x: x[..., 2],
                    lambda x: np.broadcast_to([0.0, 0.0, 1.0], np.shape(x)).copy(),
                    -np.ones(3), np.ones(3))
    g = np.array([0.3, -0.8, 2.0])
    np.testing.assert_allclose(horizontal_gradient(f, g, horizontal_frame(sc)), [0.4, 0.15])


def test_gradient_finite_difference_flag():
    sc = get_group("h1")
    grad, flag = horizontal_gradient(lambda x: x[..., 2], np.array([0.3, -0.8, 2.0]),
                                     horizontal_frame(sc), return_flag=True)
    assert flag
    np.testing.assert_allclose(grad, [0.4, 0.15], atol=1e-8)


def test_engel_frame_weighted_degrees():
    fr = horizontal_frame(get_group("engel"))
    # the coefficient of d/dx4 in X_2 is homogeneous of degree 2
    assert fr.weighted_degrees(1, 3) == {2}


@pytest.mark.parametrize("name,vanishes", [("h1", True), ("free2_3", True), ("engel", False)])
def test_ito_audit(name, vanishes):
    assert ito_correction_audit(horizontal_frame(get_group(name))).vanishes is vanishes


def test_frame_rejects_invalid_algebra():
    from carnotheat.algebra import StructureConstants
    sc = StructureConstants.from_brackets((2, 1, 1), {((1, 1), (1, 2)): {(3, 1): 1}})
    with pytest.raises(ValueError):
        horizontal_frame(sc)


# -- test functions ---------------------------------------------------------------------

@pytest.mark.parametrize("name", list(FUNCTIONS))
def test_catalog_partials(name):
    assert audit_partials(get_function(name).field) < 1e-7


def test_r1_bump_exact_norms():
    e = get_function("r1_bump")
    assert e.references[("f", 2)] == Fraction(256, 315)
    # int_{-1}^{1} (4x(1-x^2))^2 dx
    assert e.references[("grad", 2)] == Fraction(256, 105)
    x = sympy.Symbol("x")
    assert sympy.integrate(sympy.diff((1 - x ** 2) ** 2, x) ** 2, (x, -1, 1)) == \
        sympy.Rational(256, 105)


def test_h1_product_bump_reference_quadrature():
    e = get_function("h1_bump")
    sc = get_group("h1")
    est = sobolev_energy(e.field, 2.0, horizontal_frame(sc))
    assert abs(est.value - float(e.references[("grad", 2)])) < 1e-8
    assert abs(lp_norm(e.field, 2.0).value - float(e.references[("f", 2)])) < 1e-10


def test_modulated_vertical_monomial_gradient():
    sc = get_group("h1")
    base = make_bump(sc, radii=1.0, power=3)
    f = make_coordinate_modulated(sc, base, [0, 0, 1])
    g = np.array([0.2, 0.3, 0.1])
    x1f = horizontal_gradient(f, g, horizontal_frame(sc))[0]
    # X1 (b sigma) = sigma d1 b - (z2/2)(b + sigma d3 b)
    db = base.partials(g)
    expect = g[2] * db[0] - g[1] / 2 * (base(g) + g[2] * db[2])
    assert x1f == pytest.approx(expect, rel=1e-12)


def test_modulated_horizontal_monomial_at_centre():
    sc = get_group("h1")
    base = make_bump(sc, radii=1.0, power=3)
    f = make_coordinate_modulated(sc, base, [1, 0, 0])
    grad = horizontal_gradient(f, np.zeros(3), horizontal_frame(sc))
    np.testing.assert_allclose(grad, [base(np.zeros(3)), 0.0])


def test_bump_validation():
    sc = get_group("h1")
    with pytest.raises(ValueError):
        make_bump(sc, radii=[1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        make_bump(sc, power=1)
    with pytest.raises(ValueError):
        make_coordinate_modulated(sc, make_bump(sc), [0, -1, 0])
    with pytest.raises(KeyError):
        get_function("nope")


def test_dilated_and_translated_fields():
    sc = get_group("h1")
    f = make_bump(sc, radii=1.0, power=3)
    fd = dilated(f, 0.5, sc)
    g = np.array([0.6, -0.4, 1.2])
    assert fd(g) == pytest.approx(f(np.array([0.3, -0.2, 0.3])))
    assert audit_partials(fd) < 1e-7
    g0 = np.array([0.3, 0.1, -0.2])
    ft = left_translated(f, g0, sc)
    assert audit_partials(ft) < 1e-6
    # the translated support box contains the image of the original support
    from carnotheat.algebra import bch_product, inverse
    corners = np.array(np.meshgrid(*[[-1, 1]] * 3)).reshape(3, -1).T
    img = bch_product(inverse(g0), corners, sc)
    assert np.all(img >= ft.lo) and np.all(img <= ft.hi)


def test_zero_field():
    z = zero_field(3)
    assert z(np.ones((4, 3))).shape == (4,)
    assert np.all(z.partials(np.ones((2, 3))) == 0)


def test_wide_bump_is_dilated_unit_bump():
    sc = get_group("h1")
    unit = get_function("h1_bump").field
    wide = get_function("h1_wide_bump").field
    rng = np.random.default_rng(0)
    g = rng.uniform(-2, 2, size=(50, 3)) * [1, 1, 2]
    np.testing.assert_allclose(wide(g), dilated(unit, 0.5, sc)(g), atol=1e-15)

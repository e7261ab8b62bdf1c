import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnotheat.algebra import (Stratification, StructureConstants, axiom_audit, bch_product,
                                bch_symbolic, dilate, dynkin_words, gauge, identity, inverse,
                                kaplan_map, validate_algebra)
from carnotheat.catalog import CATALOG, get_group, group_from_dict, group_to_dict, load_group

from oracles import h1_matrix_product, tensor_product_oracle


def filiform5():
    br = {((1, 1), (1, 2)): {(2, 1): 1}, ((1, 1), (2, 1)): {(3, 1): 1},
          ((1, 1), (3, 1)): {(4, 1): 1}}
    return StructureConstants.from_brackets((2, 1, 1, 1), br, name="filiform5")


# -- worked examples -------------------------------------------------------------

def test_heisenberg_product_example():
    sc = get_group("h1")
    np.testing.assert_allclose(bch_product([1, 0, 0], [0, 1, 0], sc), [1, 1, 0.5])


def test_engel_product_example():
    sc = get_group("engel")
    np.testing.assert_allclose(bch_product([1, 0, 0, 0], [0, 1, 0, 0], sc),
                               [1, 1, 0.5, 1 / 12], atol=1e-15)
    exact = bch_symbolic([Fraction(1), 0, 0, 0], [0, Fraction(1), 0, 0], sc, dynkin=True)
    assert exact == [1, 1, Fraction(1, 2), Fraction(1, 12)]


def test_inverse_example():
    sc = get_group("h1")
    g = np.array([1, 1, 0.5])
    np.testing.assert_array_equal(inverse(g), [-1, -1, -0.5])
    prod = bch_product(bch_product([1, 0, 0], [0, 1, 0], sc), inverse(g), sc)
    np.testing.assert_allclose(prod, identity(sc), atol=1e-15)


def test_dynkin_low_order_coefficients():
    w = dict(dynkin_words(3))
    # words are not canonicalized: [y, x] = -[x, y], [x, [y, x]] = -[x, [x, y]], ...
    assert w["xy"] - w["yx"] == Fraction(1, 2)
    assert w["xxy"] - w["xyx"] == Fraction(1, 12)
    assert w["yxy"] - w["yyx"] == Fraction(-1, 12)


# -- independent oracles ------------------------------------------------------------

@pytest.mark.parametrize("name,sc_factory", [
    ("h1", lambda: get_group("h1")),
    ("engel", lambda: get_group("engel")),
    ("free2_3", lambda: get_group("free2_3")),
    ("filiform5", filiform5),
])
def test_product_matches_tensor_algebra(name, sc_factory):
    sc = sc_factory()
    rng = np.random.default_rng(3)
    for _ in range(20):
        g, h = rng.uniform(-2, 2, size=(2, sc.strat.total_dim))
        np.testing.assert_allclose(bch_product(g, h, sc), tensor_product_oracle(name, g, h),
                                   atol=1e-12, rtol=1e-12)


def test_heisenberg_matches_matrix_logarithm():
    sc = get_group("h1")
    rng = np.random.default_rng(4)
    for _ in range(20):
        g, h = rng.uniform(-2, 2, size=(2, 3))
        np.testing.assert_allclose(bch_product(g, h, sc), h1_matrix_product(g, h), atol=1e-10)


@pytest.mark.parametrize("name", ["engel", "free2_3", "h2"])
def test_closed_form_agrees_with_dynkin_series(name):
    sc = get_group(name)
    rng = np.random.default_rng(5)
    g, h = rng.uniform(-2, 2, size=(2, sc.strat.total_dim))
    gq = [Fraction(x).limit_denominator(1000) for x in g]
    hq = [Fraction(x).limit_denominator(1000) for x in h]
    assert bch_symbolic(gq, hq, sc) == bch_symbolic(gq, hq, sc, dynkin=True)
    np.testing.assert_allclose(bch_product(np.array(gq, float), np.array(hq, float), sc),
                               np.array(bch_symbolic(gq, hq, sc), dtype=float), atol=1e-13)


# -- axioms --------------------------------------------------------------------------

@pytest.mark.parametrize("name", list(CATALOG))
def test_catalog_validates(name):
    rep = validate_algebra(get_group(name))
    assert rep.ok, rep.failures()


def test_filiform_validates_and_uses_dynkin():
    sc = filiform5()
    assert validate_algebra(sc).ok
    assert axiom_audit(sc, n=200)["ok"]


@pytest.mark.parametrize("name", list(CATALOG))
def test_axiom_audit(name):
    rep = axiom_audit(get_group(name), n=1000, seed=1)
    assert rep["ok"], rep["errors"]


def test_jacobi_violation_detected():
    # Jacobi(e1, e2, e3) = [e1, f3] - [e2, f2] + [e3, f1] = g != 0
    br = {((1, 1), (1, 2)): {(2, 1): 1}, ((1, 1), (1, 3)): {(2, 2): 1},
          ((1, 2), (1, 3)): {(2, 3): 1}, ((1, 1), (2, 3)): {(3, 1): 1}}
    rep = validate_algebra(StructureConstants.from_brackets((3, 3, 1), br))
    assert not rep.checks["jacobi"]
    assert rep.checks["grading"]


def test_grading_violation_detected():
    sc = StructureConstants.from_brackets((2, 1, 1), {((1, 1), (1, 2)): {(3, 1): 1}})
    rep = validate_algebra(sc)
    assert not rep.checks["grading"]
    assert not rep.checks["generation"]


def test_antisymmetry_violation_detected():
    br = {((1, 1), (1, 2)): {(2, 1): 1}, ((1, 2), (1, 1)): {(2, 1): 1}}
    sc = StructureConstants.from_brackets((2, 1), br)
    assert not validate_algebra(sc).checks["antisymmetry"]


def test_bad_stratification():
    with pytest.raises(ValueError):
        Stratification((2, 0))
    with pytest.raises(ValueError):
        Stratification(())


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        bch_product(np.zeros(2), np.zeros(3), get_group("h1"))
    with pytest.raises(ValueError):
        dilate(-1.0, np.zeros(3), get_group("h1"))


# -- gauge, dilation, Kaplan map -------------------------------------------------------

def test_gauge_homogeneity_and_zero():
    sc = get_group("engel")
    g = np.array([0.3, -1.2, 0.7, 2.0])
    for lam in (0.1, 1.0, 7.5):
        assert gauge(dilate(lam, g, sc), sc) == pytest.approx(lam * gauge(g, sc), rel=1e-14)
    assert gauge(np.zeros(4), sc) == 0.0


def test_dilation_weights():
    sc = get_group("engel")
    np.testing.assert_allclose(dilate(2.0, np.ones(4), sc), [2, 2, 4, 8])


def test_kaplan_map_identity():
    sc = get_group("h1")
    j = kaplan_map(np.array([1.0]), sc)
    # <J(sigma) z, zeta> = <[z, zeta], sigma> with [e1, e2] = e3
    np.testing.assert_array_equal(j, [[0.0, -1.0], [1.0, 0.0]])
    rng = np.random.default_rng(0)
    sc2 = get_group("free2_3")
    for _ in range(5):
        z, zeta = rng.normal(size=(2, 3))
        sigma = rng.normal(size=3)
        lhs = (kaplan_map(sigma, sc2) @ z) @ zeta
        rhs = sc2.bracket(np.r_[z, 0, 0, 0], np.r_[zeta, 0, 0, 0])[3:] @ sigma
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_kaplan_map_needs_second_layer():
    with pytest.raises(ValueError):
        kaplan_map(np.array([1.0]), get_group("r2"))


# -- serialization ------------------------------------------------------------------

@pytest.mark.parametrize("name", list(CATALOG))
def test_group_json_roundtrip(name, tmp_path):
    sc = get_group(name)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(group_to_dict(sc)))
    back = load_group(path)
    assert back.strat == sc.strat
    assert back.exact_table == sc.exact_table
    assert get_group(str(path)).exact_table == sc.exact_table


def test_group_from_dict_rejects_bad_grading():
    with pytest.raises(ValueError):
        group_from_dict({"layers": [2, 1], "brackets": [
            {"left": [1, 1], "right": [1, 2], "out": [{"basis": [1, 1], "coeff": "1"}]}]})
    with pytest.raises(ValueError):
        group_from_dict({"brackets": []})


# -- properties -------------------------------------------------------------------------

coords = st.floats(-2, 2, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 4), elements=coords), st.floats(0.25, 4))
def test_engel_group_laws(x, lam):
    sc = get_group("engel")
    g, h, k = x
    np.testing.assert_allclose(bch_product(bch_product(g, h, sc), k, sc),
                               bch_product(g, bch_product(h, k, sc), sc), atol=1e-12)
    np.testing.assert_allclose(bch_product(g, inverse(g), sc), 0.0, atol=1e-14)
    np.testing.assert_allclose(dilate(lam, bch_product(g, h, sc), sc),
                               bch_product(dilate(lam, g, sc), dilate(lam, h, sc), sc),
                               atol=1e-11, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (2, 6), elements=coords))
def test_free_step2_product_is_polynomial_in_brackets(x):
    sc = get_group("free2_3")
    g, h = x
    out = bch_product(g, h, sc)
    np.testing.assert_allclose(out[:3], g[:3] + h[:3])
    # [e_i, e_j] = e_(ij) for i < j, in lexicographic pair order
    pairs = [(0, 1), (0, 2), (1, 2)]
    expect = g[3:] + h[3:] + 0.5 * np.array([g[i] * h[j] - g[j] * h[i] for i, j in pairs])
    np.testing.assert_allclose(out[3:], expect, atol=1e-14)

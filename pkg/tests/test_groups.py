import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stratcap.errors import InvalidArgument
from stratcap.groups import (
    dilate,
    distance,
    estimate_triangle_constant,
    get_group,
    hom_norm,
    inverse,
    multiply,
)

H1 = get_group("h1")
R1 = get_group("r1")
R2 = get_group("r2")

coord = st.floats(-5, 5, allow_nan=False)
h1_point = arrays(np.float64, 3, elements=coord)
scale = st.floats(0.05, 20.0)


def test_descriptors():
    assert H1.strata_dims == (2, 1) and H1.hom_dimension == 4
    assert R2.strata_dims == (2,) and R2.hom_dimension == 2
    assert R1.hom_dimension == 1


def test_h1_worked_examples():
    np.testing.assert_allclose(multiply(H1, [1, 0, 0], [0, 1, 0]), [1, 1, 0.5], atol=1e-15)
    np.testing.assert_allclose(inverse(H1, [1, 1, 0.5]), [-1, -1, -0.5])
    np.testing.assert_allclose(dilate(H1, 2.0, [1, 1, 1]), [2, 2, 4])
    assert hom_norm(H1, [0, 0, 1]) == pytest.approx(2.0, abs=1e-15)


def test_euclidean_worked_examples():
    np.testing.assert_allclose(multiply(R2, [1, 2], [3, 4]), [4, 6])
    np.testing.assert_allclose(inverse(R1, [3.0]), [-3.0])
    np.testing.assert_allclose(dilate(R2, 3.0, [1, -1]), [3, -3])
    assert hom_norm(R1, [-4.0]) == 4.0
    for G in (R1, R2, H1):
        e = np.zeros(G.dim)
        assert hom_norm(G, e) == 0.0
        np.testing.assert_array_equal(inverse(G, e), e)


def test_dilation_rejects_nonpositive():
    with pytest.raises(InvalidArgument):
        dilate(H1, 0.0, [1, 1, 1])


@settings(max_examples=200, deadline=None)
@given(h1_point, h1_point, h1_point)
def test_h1_associative(a, b, c):
    lhs = multiply(H1, multiply(H1, a, b), c)
    rhs = multiply(H1, a, multiply(H1, b, c))
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(lhs).max()))


@settings(max_examples=200, deadline=None)
@given(h1_point)
def test_h1_inverse_and_identity(g):
    np.testing.assert_allclose(multiply(H1, g, inverse(H1, g)), 0.0, atol=1e-12)
    np.testing.assert_allclose(multiply(H1, np.zeros(3), g), g)


@settings(max_examples=200, deadline=None)
@given(h1_point, scale)
def test_h1_norm_homogeneous(g, r):
    assert hom_norm(H1, dilate(H1, r, g)) == pytest.approx(r * hom_norm(H1, g), rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(h1_point, h1_point, scale)
def test_h1_dilation_is_automorphism(a, b, r):
    lhs = dilate(H1, r, multiply(H1, a, b))
    rhs = multiply(H1, dilate(H1, r, a), dilate(H1, r, b))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(lhs).max()))


@settings(max_examples=200, deadline=None)
@given(h1_point, h1_point, h1_point)
def test_h1_distance_left_invariant(g, h, k):
    d1 = distance(H1, multiply(H1, k, g), multiply(H1, k, h))
    d2 = distance(H1, g, h)
    assert d1 == pytest.approx(d2, rel=1e-9, abs=1e-9)


def test_norm_vanishes_only_at_identity():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(500, 3))
    assert np.all(hom_norm(H1, pts) > 0)


def test_triangle_constant_euclidean():
    for G in (R1, R2):
        for seed in (0, 1, 7):
            assert estimate_triangle_constant(G, 1000, seed) <= 1 + 1e-12


def test_triangle_constant_h1_range_and_determinism():
    g1 = estimate_triangle_constant(H1, 10_000, 3)
    assert 1.0 <= g1 <= 4.0
    assert g1 == estimate_triangle_constant(H1, 10_000, 3)


def test_triangle_constant_single_pair_identity():
    assert estimate_triangle_constant(H1, 1, 0) == pytest.approx(1.0, abs=1e-15)

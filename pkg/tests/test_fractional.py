import math

import mpmath
import numpy as np
import pytest

from stratcap import fractional as fr
from stratcap.errors import InvalidArgument, ZeroModeError
from stratcap.grid import GridFunction

from conftest import operator


def test_frac_power_scalar_integral_oracle():
    s, lam = 0.3, 2.0
    f = lambda t: (1 - mpmath.exp(-t * lam)) * t ** (-1 - s)  # noqa: E731
    # the power tail beyond T is integrated in closed form
    T = 200
    head = mpmath.quad(f, [0, 1e-3, 0.1, 1, 10, T])
    tail = mpmath.quad(lambda t: -mpmath.exp(-t * lam) * t ** (-1 - s), [T, mpmath.inf]) + T ** (-s) / s
    val = s / mpmath.gamma(1 - s) * (head + tail)
    assert float(val) == pytest.approx(lam**s, rel=1e-12)
    assert fr._power_by_quadrature(np.array([lam]), s)[0] == pytest.approx(float(val), rel=1e-8)


def test_frac_power_eigen_and_s_one(r1_64):
    k = 4
    v = r1_64.eigenvectors[:, k]
    np.testing.assert_allclose(fr.frac_power(r1_64, 0.35, v), r1_64.eigenvalues[k] ** 0.35 * v, atol=1e-10)
    u = np.random.default_rng(0).normal(size=r1_64.n)
    np.testing.assert_allclose(fr.frac_power(r1_64, 1.0, u), r1_64.matrix @ u, rtol=1e-10, atol=1e-8)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_frac_power_integral_matches_spectral(r1_128, s):
    g = r1_128.grid
    u = np.exp(-(g.node_norms**2) / 0.05)
    a = fr.frac_power_integral(r1_128, s, u, check=True)
    b = fr.frac_power(r1_128, s, u)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-4


@pytest.mark.parametrize("s", [0.2, 0.4])
def test_riesz_inverts_power_and_is_self_dual(r1_128, s):
    rng = np.random.default_rng(5)
    u, f = rng.normal(size=r1_128.n), rng.normal(size=r1_128.n)
    back = fr.riesz_potential(r1_128, 2 * s, fr.frac_power(r1_128, s, u))
    assert np.linalg.norm(back - u) / np.linalg.norm(u) <= 1e-8
    lhs = f @ fr.riesz_potential(r1_128, 2 * s, u)
    rhs = u @ fr.riesz_potential(r1_128, 2 * s, f)
    assert abs(lhs - rhs) <= 1e-8 * abs(lhs)


def test_riesz_potential_eigen_positive_and_integral_route(h1_small):
    k = 2
    v = h1_small.eigenvectors[:, k]
    np.testing.assert_allclose(fr.riesz_potential(h1_small, 1.2, v), h1_small.eigenvalues[k] ** -0.6 * v, atol=1e-10)
    u = np.abs(np.random.default_rng(1).normal(size=h1_small.n))
    assert fr.riesz_potential(h1_small, 1.2, u).min() >= -1e-10
    a = fr.riesz_potential_integral(h1_small, 1.2, u)
    b = fr.riesz_potential(h1_small, 1.2, u)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-8


def test_riesz_potential_needs_positive_spectrum(r1_periodic):
    with pytest.raises(ZeroModeError):
        fr.riesz_potential(r1_periodic, 0.4, np.ones(r1_periodic.n))
    with pytest.raises(InvalidArgument):
        fr.riesz_potential(operator("r1", 16), 1.0, np.ones(16))


def test_hls_single_eigenvector(r1_64):
    v = r1_64.eigenvectors[:, 0]
    theta, p = 0.4, 1.5
    q = p / (1 - theta * p)
    cv = r1_64.grid.cell_volume
    norm = lambda w, r: (np.sum(np.abs(w) ** r) * cv) ** (1 / r)  # noqa: E731
    want = r1_64.eigenvalues[0] ** (-theta / 2) * norm(v, q) / norm(v, p)
    assert fr.hls_ratio(r1_64, theta, p, [v]) == pytest.approx(want, rel=1e-12)
    with pytest.raises(InvalidArgument):
        fr.hls_ratio(r1_64, theta, 3.0, [v])


def test_hls_ratio_dilation_drift():
    op = operator("r1", 512, 1.0)
    g = op.grid
    R = g.inradius()
    ratios = []
    for k in (-1, 0, 1):
        w = 0.05 * R * 2.0**k
        u = np.exp(-((g.node_norms / w) ** 2))
        ratios.append(fr.hls_ratio(op, 0.4, 1.5, [u]))
    assert max(ratios) / min(ratios) <= 1.25


def test_riesz_transform_isometry_and_eigen():
    op = operator("r1", 256)
    g = op.grid
    R = g.inradius()
    for w in (0.05, 0.1, 0.2):
        u = GridFunction(g, np.exp(-((g.node_norms / (w * R)) ** 2)))
        r = fr.riesz_transform(op, u).lp_norm(2) / u.lp_norm(2)
        assert 0.9 <= r <= 1.1
    v = op.eigenvectors[:, 0]
    want = op.eigenvalues[0] ** -0.5 * (op.fields[0] @ v)
    np.testing.assert_allclose(fr.riesz_transform(op, v).components[0], want, atol=1e-12)


def test_frac_gradient_eigen(h1_small):
    k, s = 3, 0.6
    v = h1_small.eigenvectors[:, k]
    lam = h1_small.eigenvalues[k]
    got = fr.frac_gradient(h1_small, s, v).components
    want = lam ** ((s - 1) / 2) * h1_small.apply_fields(v)
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_frac_gradient_near_one_matches_riesz_route(r1_128):
    u = np.exp(-(r1_128.grid.node_norms**2) / 0.05)
    a = fr.frac_gradient(r1_128, 0.999, u).components
    b = fr.riesz_transform(r1_128, r1_128.apply(lambda l: l**0.4995, u)).components
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-6


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_integration_by_parts(h1_small, s):
    g = h1_small.grid
    rng = np.random.default_rng(7)
    u = GridFunction(g, rng.normal(size=g.n))
    phi = fr.HorizontalGridField(g, rng.normal(size=(2, g.n)))
    lhs = u.inner(fr.frac_divergence(h1_small, s, phi))
    rhs = -phi.inner(fr.frac_gradient(h1_small, s, u))
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_frac_divergence_examples(r1_64):
    g = r1_64.grid
    zero = fr.HorizontalGridField(g, np.zeros((1, g.n)))
    assert np.all(fr.frac_divergence(r1_64, 0.5, zero).values == 0)
    v1 = r1_64.eigenvectors[:, 0]
    phi = fr.HorizontalGridField(g, r1_64.apply_fields(v1))
    s = 0.5
    # spectral composition oracle: L^{(s-1)/2} applied to -D^T D v1
    M = r1_64.function_matrix(lambda l: l ** ((s - 1) / 2))
    D = r1_64.fields[0].toarray()
    want = M @ (-D.T @ D @ v1)
    np.testing.assert_allclose(fr.frac_divergence(r1_64, s, phi).values, want, atol=1e-8)


def test_maximal_function_examples():
    op = operator("r1", 64)
    g = op.grid
    np.testing.assert_allclose(fr.maximal_function(g, np.full(g.n, 3.0)).values, 3.0)
    spike = np.zeros(g.n)
    spike[g.identity_node] = 1.0
    M = fr.maximal_function(g, spike).values
    i0 = g.identity_node
    right = M[i0:]
    assert np.all(np.diff(right) <= 1e-15)
    # decay like inverse ball volume: M(g) * d(g, e) stays bounded
    d = g.node_norms[i0 + 1:]
    prod = M[i0 + 1:] * d
    assert prod.max() / prod[prod > 0].min() <= 8
    u = np.random.default_rng(2).normal(size=g.n)
    C = fr.maximal_function(g, u).lp_norm(2) / GridFunction(g, u).lp_norm(2)
    assert math.isfinite(C) and C >= 1


def test_cone_domination():
    per = operator("r1", 64, 1.0, "periodic")
    levels = [0.05, 0.1, 0.2]
    assert fr.cone_maximal_domination(per, 0.5, np.ones(per.n), levels) == pytest.approx(1.0, abs=1e-8)
    op = operator("r1", 128)
    g = op.grid
    R = g.inradius()
    ball = (g.node_norms < 0.3 * R).astype(float)
    C = fr.cone_maximal_domination(op, 0.5, ball, [0.05 * R, 0.1 * R, 0.2 * R, 0.4 * R])
    assert 1.0 <= C <= 10
    f = np.abs(np.random.default_rng(3).normal(size=g.n))
    assert math.isfinite(fr.cone_maximal_domination(op, 0.3, f, [0.1 * R]))

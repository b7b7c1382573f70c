import math

import mpmath
import numpy as np
import pytest
from scipy.special import gamma, kv

from stratcap import semigroups as sg
from stratcap.errors import InvalidArgument, UnsupportedParameter
from stratcap.grid import Grid, build_sublaplacian

from conftest import operator


def _eta_half(t, s):
    return t / mpmath.sqrt(4 * mpmath.pi) * s ** mpmath.mpf(-1.5) * mpmath.exp(-t * t / (4 * s))


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_subordination_scalar_against_mpmath(lam):
    # independent arbitrary-precision quadrature of the closed-form density
    ref = float(mpmath.quad(lambda s: _eta_half(1, s) * mpmath.exp(-s * lam), [0, 0.01, 1, 100, mpmath.inf]))
    assert ref == pytest.approx(math.exp(-math.sqrt(lam)), rel=1e-12)
    got = sg.subordinated_multiplier(sg.SubordinatorDensity(0.5, 1.0), np.array([lam]))[0]
    assert got == pytest.approx(ref, rel=1e-8)


def test_density_mass_and_envelope():
    for t in (0.3, 1.0, 4.0):
        d = sg.SubordinatorDensity(0.5, t)
        mass = sg.subordinated_multiplier(d, np.array([0.0]))[0]
        assert mass == pytest.approx(1.0, abs=1e-8)
        s = np.logspace(-4, 4, 400)
        assert np.all(d.evaluate(s) >= 0)
        assert np.all(d.evaluate(s) <= d.envelope(s) * (1 + 1e-12))


def test_moment_quarter_closed_form():
    # Gamma(1/2) / Gamma(3/4) = 2.3635...
    want = math.gamma(0.5) / math.gamma(0.75)
    assert sg.subordinator_moment(sg.SubordinatorDensity(0.5, 1.0), 0.25) == pytest.approx(want, rel=1e-8)
    assert sg.moment_closed_form(0.5, 1.0, 0.25) == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("delta", [-1.0, 0.25])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_moment_identity(delta, t):
    q = sg.subordinator_moment(sg.SubordinatorDensity(0.5, t), delta)
    want = gamma(1 - delta / 0.5) / gamma(1 - delta) * t ** (delta / 0.5)
    assert q == pytest.approx(want, rel=1e-8)


def test_moment_requires_delta_below_alpha():
    with pytest.raises(InvalidArgument):
        sg.subordinator_moment(sg.SubordinatorDensity(0.5, 1.0), 0.5)


def test_general_alpha_density_unsupported():
    with pytest.raises(UnsupportedParameter):
        sg.SubordinatorDensity(0.3, 1.0).evaluate(np.array([1.0]))


def test_poisson_psi_closed_forms():
    x = np.array([0.01, 1.0, 100.0])
    np.testing.assert_allclose(sg.poisson_psi(0.5, x), np.exp(-np.sqrt(x)), rtol=1e-8)
    for sigma in (0.2, 0.5, 0.8):
        assert sg.poisson_psi(sigma, np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-10)
    # modified Bessel form 2 (x/4)^{s/2} K_s(sqrt x) / Gamma(s) as an independent oracle
    for sigma in (0.3, 0.8):
        want = 2 * (x / 4) ** (sigma / 2) * kv(sigma, np.sqrt(x)) / gamma(sigma)
        np.testing.assert_allclose(sg.poisson_psi(sigma, x), want, rtol=1e-8)


def test_eigenvector_routes(r1_64):
    k = 3
    v = r1_64.eigenvectors[:, k]
    lam = r1_64.eigenvalues[k]
    out = sg.frac_heat_via_subordination(r1_64, sg.SubordinatorDensity(0.5, 0.7), v)
    np.testing.assert_allclose(out, np.exp(-0.7 * np.sqrt(lam)) * v, atol=1e-6)


def test_time_zero_is_identity(r1_64):
    u = np.random.default_rng(0).normal(size=r1_64.n)
    np.testing.assert_allclose(sg.heat_apply(r1_64, 0.0, u), u, atol=1e-12)
    np.testing.assert_allclose(sg.poisson_apply(r1_64, 0.4, 0.0, u), u, atol=1e-10)
    np.testing.assert_allclose(sg.frac_heat_apply(r1_64, 1.0, 0.2, u), sg.heat_apply(r1_64, 0.2, u), rtol=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_frac_heat_semigroup_law_h1(h1_small, alpha):
    u = np.random.default_rng(1).normal(size=h1_small.n)
    a = sg.frac_heat_apply(h1_small, alpha, 0.1, sg.frac_heat_apply(h1_small, alpha, 0.2, u))
    b = sg.frac_heat_apply(h1_small, alpha, 0.3, u)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-10


@pytest.mark.parametrize("sigma", [0.3, 0.5, 0.8])
def test_poisson_mass_and_positivity_periodic(r1_periodic, sigma):
    u = np.abs(np.random.default_rng(2).normal(size=r1_periodic.n))
    out = sg.poisson_apply(r1_periodic, sigma, 0.3, u)
    assert out.sum() == pytest.approx(u.sum(), rel=1e-8)
    assert out.min() >= -1e-12


def test_heat_mass_periodic(r1_periodic):
    u = np.abs(np.random.default_rng(3).normal(size=r1_periodic.n))
    assert sg.heat_apply(r1_periodic, 1.0, u).sum() == pytest.approx(u.sum(), rel=1e-10)


def test_heat_kernel_gaussian_image_sum():
    op = operator("r1", 512, 10.0, "periodic")
    x = op.grid.coords[:, 0]
    K = sg.extract_kernel(sg.heat_apply, {"op": op, "t": 0.5}).values
    G = sum(np.exp(-((x + 20 * m) ** 2) / 2.0) for m in range(-3, 4)) / math.sqrt(2 * math.pi)
    inner = np.abs(x) <= 5
    assert np.max(np.abs(K - G)[inner]) / np.max(G[inner]) <= 1e-3


def test_heat_kernel_symmetric(r1_periodic):
    K = sg.extract_kernel(sg.heat_apply, {"op": r1_periodic, "t": 0.05}).values
    i0 = r1_periodic.grid.identity_node
    n = r1_periodic.n
    for j in range(1, 20):
        assert K[(i0 + j) % n] == pytest.approx(K[(i0 - j) % n], abs=1e-10)


def test_cauchy_kernel_image_sum():
    op = operator("r1", 512, 10.0, "periodic")
    x = op.grid.coords[:, 0]
    K = sg.extract_kernel(sg.frac_heat_apply, {"op": op, "alpha": 0.5, "t": 1.0}).values
    L, t = 20.0, 1.0
    # closed form of the periodized Cauchy kernel: sinh(2 pi t / L) / (L (cosh(2 pi t / L) - cos(2 pi x / L)))
    a, b = 2 * np.pi * t / L, 2 * np.pi * x / L
    C = np.sinh(a) / (L * (np.cosh(a) - np.cos(b)))
    inner = np.abs(x) <= L / 4
    assert np.max(np.abs(K - C)[inner]) / np.max(C[inner]) <= 2e-3


def test_h1_kernel_positive(h1_small):
    for a in (0.3, 0.5, 0.8):
        K = sg.extract_kernel(sg.frac_heat_apply, {"op": h1_small, "alpha": a, "t": 0.05}).values
        assert np.all(K > 0)


def test_bound_brackets_r1():
    op = operator("r1", 512, 20.0)
    rep = sg.certify_frac_heat_bounds(op, 0.5, [0.25, 0.5, 1.0])
    assert rep.c_lower > 0 and rep.ratio <= 10
    pr = sg.certify_poisson_bounds(op, 0.5, [0.25, 0.5, 1.0])
    assert pr.c_lower > 0 and pr.ratio <= 2
    mass = pr.extra["profile_mass"]
    assert max(mass) / min(mass) <= 1.1


def test_bound_single_node():
    op = build_sublaplacian(Grid("r1", 1, 1.0))
    t, a = 0.5, 0.5
    rep = sg.certify_frac_heat_bounds(op, a, [t])
    K = sg.extract_kernel(sg.frac_heat_apply, {"op": op, "alpha": a, "t": t}).values[0]
    want = K * t ** ((1 + 2 * a) / (2 * a)) / t
    assert rep.c_lower == pytest.approx(want, rel=1e-12) and rep.c_upper == pytest.approx(want, rel=1e-12)
    pr = sg.certify_poisson_bounds(op, 0.5, [t])
    Kp = sg.extract_kernel(sg.poisson_apply, {"op": op, "sigma": 0.5, "t": t}).values[0]
    assert pr.c_upper == pytest.approx(Kp * t**1, rel=1e-12)


def test_holder_constants():
    op = operator("r1", 512, 20.0)
    rep = sg.certify_frac_heat_holder(op, 0.5, 1.0, None, [[0.1]])
    assert 0 < rep.c_upper < 10
    zero = sg.certify_frac_heat_holder(op, 0.5, 1.0, None, [[0.0]])
    assert zero.c_upper == 0 and zero.c_lower == 0
    assert math.isfinite(sg.certify_poisson_holder(op, 0.5, 1.0, None, [[0.1]]).c_upper)


def test_continuity_modulus():
    per = operator("r1", 64, 1.0, "periodic")
    assert sg.continuity_modulus(per, 0.5, 0.1, per.grid.constant(1.0).values) <= 1e-10
    vals = []
    for N in (128, 256):
        op = operator("r1", N)
        x = op.grid.coords[:, 0]
        vals.append(sg.continuity_modulus(op, 0.5, 0.1, np.exp(-(x**2) / 0.05)))
    assert max(vals) / min(vals) <= 2


def test_invalid_parameters(r1_64):
    with pytest.raises(InvalidArgument):
        sg.frac_heat_apply(r1_64, 1.5, 0.1, np.zeros(r1_64.n))
    with pytest.raises(InvalidArgument):
        sg.poisson_apply(r1_64, 1.0, 0.1, np.zeros(r1_64.n))
    with pytest.raises(InvalidArgument):
        sg.heat_apply(r1_64, -1.0, np.zeros(r1_64.n))

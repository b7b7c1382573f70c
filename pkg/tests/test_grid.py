import warnings

import numpy as np
import pytest

from stratcap.errors import InvalidArgument, ResolutionWarning, ResourceLimitError, SingularMultiplierError
from stratcap.grid import (
    Grid,
    GridFunction,
    apply_spectral_function,
    build_sublaplacian,
    convolve,
    mollify,
    read_grid_function,
    truncate,
    write_grid_function,
)

from conftest import operator


def test_node_count_and_cap():
    assert Grid("r1", 50).n == 50
    assert Grid("r2", (4, 6)).n == 24
    # the Heisenberg lattice keeps the coset where the centre index has the parity of x*y
    assert Grid("h1", 12).n == 864
    with pytest.raises(ResourceLimitError):
        Grid("r2", 100)
    with pytest.raises(InvalidArgument):
        Grid("r1", 10, boundary="neumann")


def test_spacing_and_identity():
    g = Grid("r1", 9, 1.0)
    assert g.spacing[0] == pytest.approx(0.2)
    assert g.coords[g.identity_node, 0] == 0.0
    assert np.all(Grid("h1", 8).spacing > 0)


def test_haar_weighted_norm():
    g = Grid("r1", 9, 1.0)
    u = GridFunction(g, np.arange(9.0) - 4)
    assert u.lp_norm(2) ** 2 == pytest.approx(np.sum(u.values**2) * 0.2)
    assert u.lp_norm(np.inf) == 4
    assert g.zeros().lp_norm(3) == 0


def test_r1_dirichlet_spectrum_closed_form():
    N, a = 40, 1.5
    op = build_sublaplacian(Grid("r1", N, a))
    h = 2 * a / (N + 1)
    k = np.arange(1, N + 1)
    exact = 4 / h**2 * np.sin(k * np.pi / (2 * (N + 1))) ** 2
    np.testing.assert_allclose(op.eigenvalues, exact, rtol=1e-10)


def test_r1_periodic_constant_mode(r1_periodic):
    assert r1_periodic.eigenvalues[0] == 0.0
    assert r1_periodic.zero_modes.sum() == 1
    v = r1_periodic.eigenvectors[:, 0]
    np.testing.assert_allclose(np.abs(v), 1 / np.sqrt(v.size), rtol=1e-10)


@pytest.mark.parametrize("group,points", [("r2", 12), ("h1", 8)])
def test_symmetric_positive_and_reconstructs(group, points):
    op = operator(group, points)
    M = op.matrix
    assert np.max(np.abs(M - M.T)) <= 1e-10 * np.max(np.abs(M))
    assert op.eigenvalues[0] > 0
    V, lam = op.eigenvectors, op.eigenvalues
    assert np.linalg.norm((V * lam) @ V.T - M) / np.linalg.norm(M) <= 1e-9


def test_h1_operator_is_sum_of_squares(h1_small):
    # L = sum_j D_j^T D_j plus ghost terms, so <Lu, u> >= sum_j |D_j u|^2
    u = np.random.default_rng(0).normal(size=h1_small.n)
    quad = u @ h1_small.matrix @ u
    grad = sum(np.sum((D @ u) ** 2) for D in h1_small.fields)
    assert quad >= grad - 1e-9 * quad


def test_spectral_function_examples(r1_64):
    u = np.random.default_rng(2).normal(size=r1_64.n)
    np.testing.assert_allclose(apply_spectral_function(r1_64, lambda l: np.ones_like(l), u), u, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(apply_spectral_function(r1_64, lambda l: np.exp(-0.0 * l), u), u, atol=1e-12)
    back = r1_64.apply(lambda l: 1 / l, r1_64.apply(lambda l: l, u))
    assert np.linalg.norm(back - u) / np.linalg.norm(u) <= 1e-8
    k = 5
    vk = r1_64.eigenvectors[:, k]
    np.testing.assert_allclose(r1_64.apply(lambda l: l**0.3, vk), r1_64.eigenvalues[k] ** 0.3 * vk, atol=1e-10)


def test_singular_multiplier_rejected(r1_periodic):
    with np.errstate(divide="ignore"), pytest.raises(SingularMultiplierError):
        r1_periodic.apply(lambda l: 1 / l, np.ones(r1_periodic.n))


def _direct_convolution(x, f, u, h):
    out = np.zeros_like(u)
    for i in range(len(x)):
        for j in range(len(x)):
            k = i - j + len(x) // 2
            if 0 <= k < len(x):
                out[i] += f[k] * u[j] * h
    return out


def test_convolution_of_boxes_is_triangle():
    g = Grid("r1", 81, 2.0)
    x = g.coords[:, 0]
    box = (np.abs(x) <= 0.5).astype(float)
    conv = convolve(GridFunction(g, box), GridFunction(g, box)).values
    h = g.spacing[0]
    np.testing.assert_allclose(conv, _direct_convolution(x, box, box, h), atol=1e-12)
    # continuum triangle max(0, 1 - |x|) up to one cell
    assert np.max(np.abs(conv - np.maximum(0, 1 - np.abs(x)))) <= 2 * h


def test_convolution_delta_identity(h1_small):
    g = h1_small.grid
    u = GridFunction(g, np.exp(-(g.node_norms**2) / 0.1))
    np.testing.assert_allclose(convolve(g.delta(), u).values, u.values, atol=1e-12)


def test_fields_commute_with_convolution_in_r1():
    op = operator("r1", 128, 1.0, "periodic")
    g = op.grid
    f = GridFunction(g, np.exp(-(g.node_norms**2) / 0.01))
    u = GridFunction(g, np.sin(np.pi * g.coords[:, 0]))
    D = op.fields[0]
    lhs = D @ convolve(f, u).values
    rhs = convolve(f, GridFunction(g, D @ u.values)).values
    assert np.max(np.abs(lhs - rhs)) <= 10 * g.spacing[0]


def test_mollify_constant_and_ball():
    g = Grid("r1", 200, 1.0)
    R = g.inradius()
    eps = 0.1 * R
    c = mollify(g.constant(2.0), eps).values
    interior = g.node_norms <= R - eps
    np.testing.assert_allclose(c[interior], 2.0, rtol=1e-8)
    ball = GridFunction(g, (g.node_norms < 0.5 * R).astype(float))
    m = mollify(ball, eps).values
    eroded = g.node_norms < 0.5 * R - eps
    assert np.all(m[eroded] >= 1 - 1e-12)


def test_mollify_converges_monotonically():
    g = Grid("r1", 256, 1.0)
    R = g.inradius()
    u = GridFunction(g, np.exp(-((g.node_norms / (0.3 * R)) ** 2)))
    gaps = [(mollify(u, e * R) - u).lp_norm(2) for e in (0.4, 0.2, 0.1, 0.05)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_mollify_below_resolution_warns():
    g = Grid("r1", 16, 1.0)
    u = g.constant(1.0)
    with pytest.warns(ResolutionWarning):
        out = mollify(u, 0.5 * g.spacing[0])
    assert out is u


def test_truncate_examples():
    g = Grid("h1", 8)
    u = GridFunction(g, np.random.default_rng(0).normal(size=g.n))
    big = 2 * np.max(g.node_norms)
    np.testing.assert_array_equal(truncate(u, big).values, u.values)
    one = truncate(g.constant(1.0), 0.1).values
    assert np.all((one >= 0) & (one <= 1))
    assert one[g.identity_node] == 1.0
    g1 = Grid("r1", 256, 4.0)
    w = GridFunction(g1, 1 / (1 + g1.coords[:, 0] ** 2))
    gaps = [(truncate(w, N) - w).lp_norm(2) for N in (0.25, 0.5, 1.0, 2.0)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_csv_round_trip(tmp_path):
    g = Grid("h1", 8)
    u = GridFunction(g, np.random.default_rng(4).normal(size=g.n))
    path = tmp_path / "u.csv"
    write_grid_function(path, u)
    v = read_grid_function(path, g)
    np.testing.assert_array_equal(u.values, v.values)


def test_mismatched_values_rejected():
    with pytest.raises(InvalidArgument):
        GridFunction(Grid("r1", 8), np.zeros(7))


def test_no_warning_on_resolved_mollifier():
    g = Grid("r1", 64)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mollify(g.constant(1.0), 0.3)

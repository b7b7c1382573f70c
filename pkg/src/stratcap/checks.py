"""Registry of verification checks run by the command-line driver.

Each check is a function of a :class:`CheckContext` returning a dict with
``passed`` (bool), ``metrics`` (JSON-ready numbers) and optionally ``table``
({"header": [...], "rows": [[...], ...]}) for a plot-ready CSV file. Checks
never record wall-clock time, so reports are byte-reproducible.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import besov as fs
from . import capacity as cap
from . import embedding as emb
from . import fractional as fr
from . import semigroups as sg
from .grid import Grid, GridFunction, build_sublaplacian, lp_norm, mollify
from .groups import estimate_triangle_constant, get_group
from .suites import standard_suite

__all__ = ["Check", "CheckContext", "REGISTRY", "register", "run_check", "check_ids"]


@dataclass(frozen=True)
class Check:
    id: str
    anchor: str
    func: Callable = field(repr=False)


REGISTRY: dict[str, Check] = {}


def register(check_id: str, anchor: str):
    def deco(fn):
        if check_id in REGISTRY:
            raise ValueError(f"duplicate check id {check_id}")
        REGISTRY[check_id] = Check(check_id, anchor, fn)
        return fn

    return deco


def check_ids() -> list[str]:
    return list(REGISTRY)


@dataclass
class CheckContext:
    """Parameters shared by the checks plus a cache of operators."""

    points: int = 128
    half_width: float = 1.0
    h1_points: int = 12
    alphas: tuple = (0.3, 0.5, 0.8)
    sigmas: tuple = (0.3, 0.5, 0.8)
    s_values: tuple = (0.2, 0.4)
    p: float = 2.0
    q: float = 2.0
    beta: float = 0.3
    suite_count: int = 10
    seed: int = 0
    _ops: dict = field(default_factory=dict, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    def op(self, group="r1", points=None, half_width=None, boundary="dirichlet"):
        points = self.points if points is None else points
        half_width = self.half_width if half_width is None else half_width
        key = (group, points, float(half_width), boundary)
        with self._lock:
            if key not in self._ops:
                self._ops[key] = build_sublaplacian(Grid(group, points, half_width, boundary))
            return self._ops[key]

    def suite(self, grid, count=None):
        return standard_suite(grid, self.suite_count if count is None else count, self.seed)


def run_check(check_id: str, ctx: CheckContext | None = None) -> dict:
    ctx = ctx or CheckContext()
    chk = REGISTRY[check_id]
    out = chk.func(ctx)
    out = {"id": chk.id, "anchor": chk.anchor, **out}
    out["passed"] = bool(out["passed"])
    return out


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    den = float(np.linalg.norm(b))
    return float(np.linalg.norm(a - b)) / (den if den > 0 else 1.0)


def _f(x) -> float:
    return float(x)


# ------------------------------------------------------------- group core
@register("group-laws", "group law, inverse, dilations and homogeneous norm on R1, R2, H1")
def _group_laws(ctx):
    rng = np.random.default_rng(ctx.seed)
    worst = {}
    for gid in ("r1", "r2", "h1"):
        G = get_group(gid)
        a, b, c = (rng.normal(size=(1000, G.dim)) for _ in range(3))
        assoc = np.max(np.abs(G.multiply(G.multiply(a, b), c) - G.multiply(a, G.multiply(b, c))))
        inv = np.max(np.abs(G.multiply(a, G.inverse(a))))
        hom = max(
            float(np.max(np.abs(G.hom_norm(G.dilate(r, a)) - r * G.hom_norm(a)) / np.maximum(G.hom_norm(a), 1e-300)))
            for r in (0.5, 2.0, 10.0)
        )
        auto = float(np.max(np.abs(G.dilate(2.0, G.multiply(a, b)) - G.multiply(G.dilate(2.0, a), G.dilate(2.0, b)))))
        left = float(np.max(np.abs(G.distance(G.multiply(c, a), G.multiply(c, b)) - G.distance(a, b))))
        worst[gid] = {"associativity": _f(assoc), "inverse": _f(inv), "homogeneity": hom,
                      "automorphism": auto, "left_invariance": left}
    passed = all(v <= 1e-11 for d in worst.values() for v in d.values())
    return {"passed": passed, "metrics": worst}


@register("triangle-constant", "quasi-triangle constant of the homogeneous norm by sampling")
def _triangle(ctx):
    g = {gid: estimate_triangle_constant(get_group(gid), 10000, ctx.seed) for gid in ("r1", "r2", "h1")}
    passed = g["r1"] <= 1 + 1e-12 and g["r2"] <= 1 + 1e-12 and 1.0 <= g["h1"] <= 4.0
    return {"passed": passed, "metrics": {k: _f(v) for k, v in g.items()}}


# ---------------------------------------------------------- discretization
@register("sublaplacian-spectrum", "discrete sub-Laplacian: closed-form R1 spectrum, H1 symmetry and positivity")
def _spectrum(ctx):
    N, a = 64, 1.0
    op = ctx.op("r1", N, a)
    h = 2 * a / (N + 1)
    k = np.arange(1, N + 1)
    exact = 4 / h**2 * np.sin(k * np.pi / (2 * (N + 1))) ** 2
    rel = float(np.max(np.abs(op.eigenvalues - exact) / exact))
    per = ctx.op("r1", N, a, "periodic")
    h1 = ctx.op("h1", ctx.h1_points, 1.0)
    M = h1.matrix
    sym = float(np.max(np.abs(M - M.T)) / np.max(np.abs(M)))
    recon = float(np.linalg.norm((h1.eigenvectors * h1.eigenvalues) @ h1.eigenvectors.T - M) / np.linalg.norm(M))
    metrics = {
        "r1_dirichlet_max_rel_error": rel,
        "r1_periodic_lambda1": _f(per.eigenvalues[0]),
        "h1_nodes": h1.grid.n,
        "h1_min_eigenvalue": _f(h1.eigenvalues[0]),
        "h1_symmetry": sym,
        "h1_reconstruction": recon,
    }
    passed = rel <= 1e-10 and per.eigenvalues[0] == 0 and h1.eigenvalues[0] > 0 and sym <= 1e-10 and recon <= 1e-9
    return {"passed": passed, "metrics": metrics}


@register("spectral-calculus", "spectral calculus homomorphism, self-adjointness and inverse pairs")
def _calculus(ctx):
    op = ctx.op()
    rng = np.random.default_rng(ctx.seed)
    u, v = rng.normal(size=op.n), rng.normal(size=op.n)
    hom = _rel(op.apply(lambda l: np.exp(-0.3 * l), op.apply(lambda l: l**0.4, u)),
               op.apply(lambda l: np.exp(-0.3 * l) * l**0.4, u))
    Au = op.apply(lambda l: np.exp(-0.1 * l), u)
    Av = op.apply(lambda l: np.exp(-0.1 * l), v)
    sa = abs(Au @ v - u @ Av) / (np.linalg.norm(u) * np.linalg.norm(v))
    inv = _rel(op.apply(lambda l: 1 / l, op.apply(lambda l: l, u)), u)
    ident = _rel(op.apply(lambda l: np.ones_like(l), u), u)
    m = {"homomorphism": hom, "self_adjoint": _f(sa), "inverse_pair": inv, "identity": ident}
    return {"passed": hom <= 1e-10 and sa <= 1e-10 and inv <= 1e-8 and ident <= 1e-10, "metrics": m}


@register("mollify-truncate", "mollification and truncation behave as approximate identities")
def _mollify(ctx):
    import warnings

    g = ctx.op().grid
    R = g.inradius()
    u = GridFunction(g, np.exp(-((g.node_norms / (0.3 * R)) ** 2)))
    c = g.constant(1.0)
    eps_ladder = [0.4 * R, 0.2 * R, 0.1 * R, 0.05 * R]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gaps = [float((mollify(u, e) - u).lp_norm(2)) for e in eps_ladder]
        interior = g.node_norms <= 0.5 * R
        const_err = float(np.max(np.abs(mollify(c, 0.1 * R).values[interior] - 1.0)))
    mono = all(b <= a for a, b in zip(gaps, gaps[1:]))
    m = {"gaps": gaps, "constant_error_interior": const_err}
    return {"passed": mono and const_err <= 1e-8, "metrics": m}


# -------------------------------------------------------------- semigroups
@register("subordination-check", "subordination of the heat semigroup by the 1/2-stable density")
def _subordination(ctx):
    lam = np.array([0.1, 1.0, 10.0])
    dens = sg.SubordinatorDensity(0.5, 1.0)
    scalar = np.abs(sg.subordinated_multiplier(dens, lam) - np.exp(-np.sqrt(lam))) / np.exp(-np.sqrt(lam))
    op = ctx.op()
    u = ctx.suite(op.grid)[0][1].values
    grid_err = {}
    for t in (0.5, 1.0):
        a = sg.frac_heat_via_subordination(op, sg.SubordinatorDensity(0.5, t), u)
        b = sg.frac_heat_apply(op, 0.5, t, u)
        grid_err[str(t)] = _rel(a, b)
    m = {"scalar_max_rel_error": _f(scalar.max()), "grid_l2_rel_error": grid_err}
    return {"passed": scalar.max() <= 1e-8 and max(grid_err.values()) <= 1e-6, "metrics": m}


@register("subordinator-moments", "moments of the stable subordinator density against the Gamma-ratio formula")
def _moments(ctx):
    rows, worst = [], 0.0
    for delta in (-1.0, 0.25):
        for t in (0.5, 1.0, 2.0):
            q = sg.subordinator_moment(sg.SubordinatorDensity(0.5, t), delta)
            c = sg.moment_closed_form(0.5, t, delta)
            err = abs(q - c) / abs(c)
            worst = max(worst, err)
            rows.append([delta, t, q, c, err])
    return {"passed": worst <= 1e-8, "metrics": {"max_rel_error": worst},
            "table": {"header": ["delta", "t", "quadrature", "closed_form", "rel_error"], "rows": rows}}


@register("poisson-multiplier", "fractional Poisson multiplier psi_sigma against e^{-sqrt(x)} and psi(0) = 1")
def _psi(ctx):
    x = np.array([0.01, 1.0, 100.0])
    err = float(np.max(np.abs(sg.poisson_psi(0.5, x) - np.exp(-np.sqrt(x))) / np.exp(-np.sqrt(x))))
    zero = {str(s): _f(abs(sg.poisson_psi(s, np.array([0.0]))[0] - 1.0)) for s in (0.2, 0.5, 0.8)}
    return {"passed": err <= 1e-8 and max(zero.values()) <= 1e-10,
            "metrics": {"sigma_half_max_rel_error": err, "psi_zero_error": zero}}


@register("heat-kernel-gaussian", "periodic R1 heat kernel against the Gaussian image sum")
def _heat_kernel(ctx):
    L, N, t = 20.0, 512, 0.5
    op = ctx.op("r1", N, L / 2, "periodic")
    g = op.grid
    K = sg.extract_kernel(sg.heat_apply, {"op": op, "t": t}).values
    x = g.coords[:, 0]
    G = sum(np.exp(-((x + L * m) ** 2) / (4 * t)) for m in range(-3, 4)) / math.sqrt(4 * math.pi * t)
    inner = np.abs(x) <= L / 4
    max_rel = float(np.max(np.abs(K - G)[inner]) / np.max(G[inner]))
    pointwise = float(np.max(np.abs(K - G)[inner] / G[inner]))
    rows = [[_f(a), _f(b), _f(c)] for a, b, c in zip(x[inner], K[inner], G[inner])]
    return {"passed": max_rel <= 1e-3,
            "metrics": {"max_relative_error": max_rel, "pointwise_relative_error": pointwise,
                        "mass": _f(K.sum() * g.cell_volume)},
            "table": {"header": ["x", "kernel", "gaussian"], "rows": rows}}


def _law_metrics(op, apply, t_values, rng, semigroup=True, mass_tol=1e-10):
    g = op.grid
    cv = g.cell_volume
    u = rng.normal(size=op.n)
    v = rng.normal(size=op.n)
    pos = np.abs(u)
    m = {"semigroup": 0.0, "self_adjoint": 0.0, "contraction_excess": 0.0, "positivity": 0.0, "mass": 0.0}
    for t in t_values:
        Tu, Tv = apply(t, u), apply(t, v)
        if semigroup:
            m["semigroup"] = max(m["semigroup"], _rel(apply(t, apply(t, u)), apply(2 * t, u)))
        m["self_adjoint"] = max(m["self_adjoint"], abs(Tu @ v - u @ Tv) / (np.linalg.norm(u) * np.linalg.norm(v)))
        for p in (1.0, 2.0, math.inf):
            m["contraction_excess"] = max(
                m["contraction_excess"], float(lp_norm(Tu, p, cv) / lp_norm(u, p, cv) - 1.0))
        Tp = apply(t, pos)
        m["positivity"] = max(m["positivity"], float(max(0.0, -Tp.min()) / pos.max()))
        if g.boundary == "periodic":
            m["mass"] = max(m["mass"], abs(Tp.sum() - pos.sum()) / pos.sum())
    ok = (m["semigroup"] <= 1e-10 and m["self_adjoint"] <= 1e-10 and m["contraction_excess"] <= 1e-10
          and m["positivity"] <= 1e-10 and m["mass"] <= mass_tol)
    return {k: _f(v) for k, v in m.items()}, ok


def _laws(ctx, family):
    rng = np.random.default_rng(ctx.seed)
    out, ok_all = {}, True
    params = {"heat": [None], "frac-heat": list(ctx.alphas), "poisson": list(ctx.sigmas)}[family]
    for bd in ("dirichlet", "periodic"):
        op = ctx.op("r1", 64, 1.0, bd)
        for prm in params:
            if family == "heat":
                fn = lambda t, u: sg.heat_apply(op, t, u)  # noqa: E731
            elif family == "frac-heat":
                fn = lambda t, u, a=prm: sg.frac_heat_apply(op, a, t, u)  # noqa: E731
            else:
                fn = lambda t, u, s=prm: sg.poisson_apply(op, s, t, u)  # noqa: E731
            m, ok = _law_metrics(op, fn, (0.1, 1.0), rng, semigroup=family != "poisson",
                                 mass_tol=1e-8 if family == "poisson" else 1e-10)
            out[f"{bd}:{prm}"] = m
            ok_all &= ok
    if family == "frac-heat":
        op = ctx.op()
        u = rng.normal(size=op.n)
        out["alpha_one_vs_heat"] = _rel(sg.frac_heat_apply(op, 1.0, 0.3, u), sg.heat_apply(op, 0.3, u))
        smooth = ctx.suite(op.grid)[0][1].values
        gaps = [_rel(sg.frac_heat_apply(op, 0.5, t, smooth), smooth) * np.linalg.norm(smooth)
                for t in (1.0, 0.1, 0.01, 0.001)]
        out["strong_continuity_gaps"] = [_f(x) for x in gaps]
        ok_all &= out["alpha_one_vs_heat"] <= 1e-12 and all(b < a for a, b in zip(gaps, gaps[1:]))
    return {"passed": ok_all, "metrics": out}


@register("heat-semigroup-laws", "heat semigroup: semigroup law, symmetry, contraction, positivity, unit mass")
def _heat_laws(ctx):
    return _laws(ctx, "heat")


@register("frac-heat-semigroup-laws", "fractional heat semigroup: semigroup law, symmetry, contraction, positivity, unit mass")
def _frac_laws(ctx):
    return _laws(ctx, "frac-heat")


@register("poisson-semigroup-laws", "fractional Poisson operators: symmetry, contraction, positivity, unit mass")
def _poisson_laws(ctx):
    return _laws(ctx, "poisson")


def _bound_reports(ctx):
    r1 = ctx.op("r1", 512, 20.0)
    h1 = ctx.op("h1", ctx.h1_points, 1.0)
    ts = [0.25, 0.5, 1.0]
    out = {"r1_frac_heat": sg.certify_frac_heat_bounds(r1, 0.5, ts).to_dict(),
           "r1_poisson": sg.certify_poisson_bounds(r1, 0.5, ts).to_dict()}
    for a in ctx.alphas:
        out[f"h1_frac_heat_{a}"] = sg.certify_frac_heat_bounds(h1, a, ts).to_dict()
    for s in ctx.sigmas:
        out[f"h1_poisson_{s}"] = sg.certify_poisson_bounds(h1, s, ts).to_dict()
    return out


def _finite_positive(rep):
    return rep["success"] and math.isfinite(rep["c_upper"]) and rep["c_lower"] > 0


@register("pro-frac-bounds", "two-sided fractional heat kernel bounds t/(t^{1/(2a)} + |g|)^{Q+2a}")
def _frac_bounds(ctx):
    reps = {k: v for k, v in _bound_reports(ctx).items() if "frac_heat" in k}
    passed = all(_finite_positive(r) for r in reps.values()) and reps["r1_frac_heat"]["ratio"] <= 10
    return {"passed": passed, "metrics": reps}


@register("poisson-bounds", "two-sided fractional Poisson kernel bounds t^{2s}/(t^2 + |g|^2)^{Q/2+s}")
def _poisson_bounds(ctx):
    reps = {k: v for k, v in _bound_reports(ctx).items() if "poisson" in k}
    mass = reps["r1_poisson"]["extra"]["profile_mass"]
    spread = max(mass) / min(mass) - 1.0
    passed = (all(_finite_positive(r) for r in reps.values()) and reps["r1_poisson"]["ratio"] <= 2
              and spread <= 0.1)
    return {"passed": passed, "metrics": {**reps, "r1_profile_mass_spread": _f(spread)}}


@register("kernel-holder", "Hoelder regularity of the fractional heat and Poisson kernels")
def _holder(ctx):
    r1 = ctx.op("r1", 512, 20.0)
    h1 = ctx.op("h1", ctx.h1_points, 1.0)
    sp = h1.grid.spacing
    hh = [sp * np.array([1, 0, 0]), sp * np.array([0, 1, 0]), sp * np.array([1, 1, 1])]
    out = {
        "r1_frac_heat": sg.certify_frac_heat_holder(r1, 0.5, 1.0, None, [[0.1]]).to_dict(),
        "r1_poisson": sg.certify_poisson_holder(r1, 0.5, 1.0, None, [[0.1]]).to_dict(),
        "h1_frac_heat": sg.certify_frac_heat_holder(h1, 0.5, 0.5, None, hh).to_dict(),
        "h1_poisson": sg.certify_poisson_holder(h1, 0.5, 0.5, None, hh).to_dict(),
        "identity_increment": sg.certify_frac_heat_holder(r1, 0.5, 1.0, None, [[0.0]]).to_dict(),
    }
    passed = all(math.isfinite(v["c_upper"]) and v["c_upper"] > 0 for k, v in out.items() if k != "identity_increment")
    passed &= out["identity_increment"]["c_upper"] == 0
    return {"passed": passed, "metrics": out}


@register("continuity-modulus", "continuity modulus of H_{a,t}u, stable under refinement")
def _modulus(ctx):
    vals = {}
    for N in (128, 256):
        op = ctx.op("r1", N, 1.0)
        u = ctx.suite(op.grid)[0][1]
        vals[N] = sg.continuity_modulus(op, 0.5, 0.1, u, 200, ctx.seed)
    per = ctx.op("r1", 64, 1.0, "periodic")
    const = sg.continuity_modulus(per, 0.5, 0.1, per.grid.constant(1.0), 200, ctx.seed)
    ratio = max(vals.values()) / min(vals.values())
    return {"passed": ratio <= 2 and const <= 1e-10 and all(math.isfinite(v) for v in vals.values()),
            "metrics": {"modulus": {str(k): _f(v) for k, v in vals.items()}, "refinement_ratio": _f(ratio),
                        "periodic_constant": _f(const)}}


# ------------------------------------------------------ fractional calculus
@register("riesz-inversion", "Riesz potential inverts L^s, composes additively and is self-dual")
def _inversion(ctx):
    op = ctx.op()
    rng = np.random.default_rng(ctx.seed)
    out, ok = {}, True
    for s in ctx.s_values:
        u, f = rng.normal(size=op.n), rng.normal(size=op.n)
        a = _rel(fr.riesz_potential(op, 2 * s, fr.frac_power(op, s, u)), u)
        b = _rel(fr.frac_power(op, s, fr.riesz_potential(op, 2 * s, u)), u)
        Iu, If = fr.riesz_potential(op, 2 * s, u), fr.riesz_potential(op, 2 * s, f)
        dual = abs(f @ Iu - u @ If) / abs(f @ Iu)
        comp = _rel(fr.riesz_potential(op, 0.1, fr.riesz_potential(op, 2 * s, u)), fr.riesz_potential(op, 2 * s + 0.1, u))
        pos = float(-min(0.0, fr.riesz_potential(op, 2 * s, np.abs(u)).min()))
        out[str(s)] = {"left_inverse": a, "right_inverse": b, "duality": _f(dual), "composition": comp,
                       "positivity_violation": pos}
        ok &= a <= 1e-8 and b <= 1e-8 and dual <= 1e-8 and comp <= 1e-9 and pos <= 1e-10
    return {"passed": ok, "metrics": out}


@register("frac-power-integral", "fractional power by the heat-semigroup singular integral vs the spectral power")
def _frac_integral(ctx):
    op = ctx.op()
    suite = ctx.suite(op.grid, 20)
    U = np.stack([u.values for _, u in suite], axis=1)
    out, rows = {}, []
    for s in (0.25, 0.5, 0.75):
        A = fr.frac_power_integral(op, s, U)
        B = fr.frac_power(op, s, U)
        errs = [_rel(A[:, j], B[:, j]) for j in range(U.shape[1])]
        out[str(s)] = max(errs)
        rows += [[s, name, e] for (name, _), e in zip(suite, errs)]
    return {"passed": max(out.values()) <= 1e-4, "metrics": {"max_rel_error": out},
            "table": {"header": ["s", "function", "rel_error"], "rows": rows}}


@register("hls-ratio", "Hardy-Littlewood-Sobolev ratio of the Riesz potential, stable under refinement")
def _hls(ctx):
    theta, p = 0.4, 1.5
    vals = {}
    for N in (128, 256):
        op = ctx.op("r1", N, 1.0)
        vals[str(N)] = fr.hls_ratio(op, theta, p, [u for _, u in ctx.suite(op.grid)])
    r = max(vals.values()) / min(vals.values())
    return {"passed": r <= 2 and all(math.isfinite(v) for v in vals.values()),
            "metrics": {"ratio": vals, "refinement_ratio": _f(r)}}


@register("riesz-transform", "Riesz transform L2 isometry and fractional gradient/divergence duality")
def _riesz_transform(ctx):
    op = ctx.op("r1", 256, 1.0)
    g = op.grid
    R = g.inradius()
    rng = np.random.default_rng(ctx.seed)
    ratios = []
    for name, u in ctx.suite(g):
        ratios.append(fr.riesz_transform(op, u).lp_norm(2) / u.lp_norm(2))
    u = GridFunction(g, np.exp(-((g.node_norms / (0.2 * R)) ** 2)))
    phi = fr.HorizontalGridField(g, rng.normal(size=(1, g.n)) * np.exp(-((g.node_norms / (0.3 * R)) ** 2)))
    ibp = {}
    for s in (0.3, 0.7):
        lhs = u.inner(fr.frac_divergence(op, s, phi))
        rhs = -phi.inner(fr.frac_gradient(op, s, u))
        ibp[str(s)] = abs(lhs - rhs) / abs(rhs)
    direct = _rel(fr.frac_gradient(op, 0.4, u).components, op.apply_fields(fr.riesz_potential(op, 0.6, u.values)))
    ok = 0.9 <= min(ratios) and max(ratios) <= 1.1 and max(ibp.values()) <= 1e-6 and direct <= 1e-6
    return {"passed": ok, "metrics": {"l2_ratio_min": _f(min(ratios)), "l2_ratio_max": _f(max(ratios)),
                                      "integration_by_parts": {k: _f(v) for k, v in ibp.items()},
                                      "gradient_routes": direct}}


@register("maximal-function", "Hardy-Littlewood maximal function: domination, sublinearity, L2 bound")
def _maximal(ctx):
    g = ctx.op("r1", 64, 1.0).grid
    rng = np.random.default_rng(ctx.seed)
    u, v = rng.normal(size=g.n), rng.normal(size=g.n)
    Mu, Mv = fr.maximal_function(g, u).values, fr.maximal_function(g, v).values
    Muv = fr.maximal_function(g, u + v).values
    dom = bool(np.all(Mu >= np.abs(u)))
    sub = float(np.max(Muv - Mu - Mv))
    mono = bool(np.all(fr.maximal_function(g, np.abs(u)).values <= fr.maximal_function(g, np.abs(u) + np.abs(v)).values))
    const = float(np.max(np.abs(fr.maximal_function(g, np.full(g.n, 2.0)).values - 2.0)))
    C = max(float(fr.maximal_function(g, w).lp_norm(2) / w.lp_norm(2)) for _, w in ctx.suite(g))
    ok = dom and sub <= 1e-12 and mono and math.isfinite(C)
    return {"passed": ok, "metrics": {"dominates": dom, "sublinearity_excess": sub, "monotone": mono,
                                      "constant_deviation": const, "l2_bound": C}}


@register("cone-maximal-domination", "Poisson cone supremum dominated by the maximal function")
def _cone(ctx):
    op = ctx.op()
    g = op.grid
    R = g.inradius()
    levels = [0.05 * R, 0.1 * R, 0.2 * R, 0.4 * R]
    ball = (g.node_norms < 0.3 * R).astype(float)
    C_ball = fr.cone_maximal_domination(op, 0.5, ball, levels)
    per = ctx.op("r1", 64, 1.0, "periodic")
    C_one = fr.cone_maximal_domination(per, 0.5, np.ones(per.n), levels)
    Cs = [fr.cone_maximal_domination(op, 0.5, np.abs(u.values), levels) for _, u in ctx.suite(g)]
    ok = math.isfinite(C_ball) and C_ball <= 10 and abs(C_one - 1.0) <= 1e-8 and all(math.isfinite(c) for c in Cs)
    return {"passed": ok, "metrics": {"ball_indicator": _f(C_ball), "periodic_constant": _f(C_one),
                                      "suite_max": _f(max(Cs))}}


# ---------------------------------------------------------- function spaces
@register("besov-difference-oracle", "difference Besov seminorm against a brute-force double sum")
def _diff_oracle(ctx):
    g = ctx.op("r1", 64, 1.0).grid
    prm = fs.BesovParams(2, 2, 0.3, "difference")
    lv = fs.default_levels(g, prm)
    errs = {}
    for name, u in ctx.suite(g, 4):
        a = fs.besov_seminorm(g, prm, u, lv)
        b = fs.difference_seminorm_bruteforce(g, prm, u, lv)
        errs[name] = abs(a - b) / b
    return {"passed": max(errs.values()) <= 1e-10, "metrics": {"rel_error": {k: _f(v) for k, v in errs.items()}}}


@register("besov-basic", "Besov seminorms vanish on constants and are absolutely homogeneous")
def _besov_basic(ctx):
    op = ctx.op("r1", 64, 1.0)
    g = op.grid
    u = ctx.suite(g)[2][1].values
    out, ok = {}, True
    for prm in (fs.BesovParams(2, 2, 0.6, "heat", alpha=0.5), fs.BesovParams(2, 2, 0.6, "poisson", sigma=0.5),
                fs.BesovParams(2, 2, 0.3, "difference"), fs.BesovParams(2, math.inf, 0.6, "heat")):
        const = fs.besov_seminorm(op, prm, np.full(g.n, 3.0))
        homog = abs(fs.besov_seminorm(op, prm, -2.5 * u) - 2.5 * fs.besov_seminorm(op, prm, u)) / fs.besov_seminorm(op, prm, u)
        key = f"{prm.flavor}:q={prm.q}"
        out[key] = {"constant": _f(const), "homogeneity": _f(homog)}
        ok &= const <= 1e-12 and homog <= 1e-12
    return {"passed": ok, "metrics": out}


@register("besov-minmax", "min-max inequality for the p-additive Besov energy")
def _minmax(ctx):
    op = ctx.op("r1", 64, 1.0)
    prm = fs.BesovParams(2, 2, 0.6, "heat", alpha=0.5)
    rng = np.random.default_rng(ctx.seed)
    worst, sum_norm_fail = math.inf, 0
    for _ in range(100):
        u1, u2 = rng.normal(size=op.n), rng.normal(size=op.n)
        holds, margin, info = fs.minmax_check(op, prm, u1, u2, 1e-12)
        worst = min(worst, margin / max(1.0, info["rhs"]))
        sum_norm_fail += info["sum_norm_margin"] < -1e-12 * max(1.0, info["rhs"])
        if not holds:
            break
    return {"passed": worst >= -1e-12,
            "metrics": {"min_relative_margin": _f(worst), "pairs": 100, "sum_norm_violations": int(sum_norm_fail)}}


def _equivalence(ctx, N, base=2.0):
    op = ctx.op("r1", N, 1.0)
    suite = ctx.suite(op.grid)
    rep = fs.certify_besov_equivalence(op, 2, 2, 0.3, 0.5, 0.5, [u for _, u in suite], [n for n, _ in suite])
    return rep


@register("besov-equivalence", "heat, Poisson and difference Besov seminorms are equivalent")
def _equiv(ctx):
    reps = {N: _equivalence(ctx, N) for N in (128, 256)}
    widths = {N: {k: b / a for k, (a, b) in r.ratios.items()} for N, r in reps.items()}
    stab = {}
    for k in reps[128].ratios:
        a1, b1 = reps[128].ratios[k]
        a2, b2 = reps[256].ratios[k]
        stab[k] = max(a1 / a2, a2 / a1, b1 / b2, b2 / b1)
    ok = all(w <= 100 for d in widths.values() for w in d.values()) and max(stab.values()) <= 2
    rows = [[N, name, v["heat"], v["poisson"], v["difference"]] for N, r in reps.items() for name, v in r.values.items()]
    return {"passed": ok,
            "metrics": {"brackets": {str(N): {k: list(v) for k, v in r.ratios.items()} for N, r in reps.items()},
                        "width": {str(N): w for N, w in widths.items()}, "refinement_factor": stab},
            "table": {"header": ["N", "function", "heat", "poisson", "difference"], "rows": rows}}


@register("besov-sobolev-embedding", "Besov space embeds into the fractional Sobolev space when beta > 2s")
def _embedding_bs(ctx):
    vals = {}
    for N in (128, 256):
        op = ctx.op("r1", N, 1.0)
        vals[str(N)] = fs.certify_besov_sobolev_embedding(op, 0.2, 0.5, 2, 0.6, [u for _, u in ctx.suite(op.grid, 20)])
    r = max(vals.values()) / min(vals.values())
    return {"passed": r <= 2 and all(math.isfinite(v) and v > 0 for v in vals.values()),
            "metrics": {"ratio": vals, "refinement_ratio": _f(r)}}


@register("density-convergence", "mollified truncations converge to u in the homogeneous Sobolev norm")
def _density(ctx):
    op = ctx.op()
    g = op.grid
    R = g.inradius()
    ball = GridFunction(g, (g.node_norms < 0.4 * R).astype(float))
    res = fs.density_convergence_study(op, "sobolev", ball, [0.4 * R, 0.2 * R, 0.1 * R, 0.05 * R],
                                       [0.25 * R, 0.5 * R, 1.0 * R, 4.0 * R], s=0.3, p=2)
    gaps = [r[2] for r in res["rows"]]
    dec = all(b < a for a, b in zip(gaps, gaps[1:]))
    nonneg = all(r[3] >= -1e-12 for r in res["rows"])
    ok = dec and nonneg and gaps[-1] <= 10 * res["floor"]
    return {"passed": ok, "metrics": {"gaps": gaps, "floor": _f(res["floor"])},
            "table": {"header": ["eps", "N", "gap", "min_value"], "rows": [list(r) for r in res["rows"]]}}


# ---------------------------------------------------------------- capacity
@register("capacity-kkt", "iterative Riesz capacity against a direct KKT enumeration oracle")
def _kkt(ctx):
    rng = np.random.default_rng(ctx.seed)
    worst, rows = 0.0, []
    for k in range(50):
        N = int(rng.integers(8, 33))
        op = ctx.op("r1", N, 1.0)
        m = np.zeros(N, dtype=bool)
        m[rng.choice(N, size=int(rng.integers(1, min(8, N) + 1)), replace=False)] = True
        E = cap.DiscreteSet(op.grid, m)
        s = float(rng.choice([0.2, 0.25, 0.4]))
        it = cap.riesz_capacity(op, s, 2, E, cap.SolverOptions(method="newton"))
        oracle = cap.kkt_oracle(op, s, E)
        err = abs(it.value - oracle) / oracle
        worst = max(worst, err)
        rows.append([k, N, s, E.size, it.value, oracle, err])
    return {"passed": worst <= 1e-4, "metrics": {"max_rel_error": worst, "sets": 50},
            "table": {"header": ["trial", "N", "s", "set_size", "iterative", "oracle", "rel_error"], "rows": rows}}


@register("capacity-riesz-properties", "Riesz capacity: empty set, monotone, subadditive, chain continuity")
def _riesz_props(ctx):
    op = ctx.op()
    rep = cap.capacity_property_suite(lambda E: cap.riesz_capacity(op, 0.25, 2, E), op.grid, 20, ctx.seed)
    return {"passed": rep["passed"], "metrics": rep}


@register("capacity-sobolev-comparability", "Riesz and Sobolev capacities are comparable")
def _comparability(ctx):
    op = ctx.op()
    g = op.grid
    rng = np.random.default_rng(ctx.seed)
    ratios = []
    for _ in range(20):
        E = cap._random_set(g, rng, rng.uniform(0.02, 0.2))
        a = cap.sobolev_capacity(op, 0.25, 2, E).value
        b = cap.riesz_capacity(op, 0.25, 2, E).value
        ratios.append(a / b)
    C = max(max(ratios), 1 / min(ratios))
    one = cap.DiscreteSet.from_nodes(g, [g.identity_node])
    three = one.dilate()
    mono = cap.sobolev_capacity(op, 0.25, 2, one).value <= cap.sobolev_capacity(op, 0.25, 2, three).value
    return {"passed": C <= 20 and mono, "metrics": {"C": _f(C), "ratio_min": _f(min(ratios)),
                                                   "ratio_max": _f(max(ratios)), "neighbourhood_monotone": bool(mono)}}


@register("capacity-besov-properties", "Besov capacity: set-function properties and interior/smooth variants")
def _besov_props(ctx):
    op = ctx.op()
    g = op.grid
    rep = cap.capacity_property_suite(lambda E: cap.besov_capacity(op, 0.5, 0.3, 2, E), g, 20, ctx.seed)
    R = g.inradius()
    variants = {}
    for r in (0.2, 0.3):
        E = cap.DiscreteSet.ball(g, [0.0], r * R)
        variants[str(r)] = cap.besov_capacity_variants(op, 0.5, 0.3, 2, E)
    agree = all(v["interior_relative_change"] <= 0.05 for v in variants.values())
    upper = all(v["smooth"] >= v["relaxed"] * (1 - 1e-10) for v in variants.values())
    return {"passed": rep["passed"] and agree and upper, "metrics": {"properties": rep, "variants": variants}}


@register("strong-capacitary", "strong-type capacitary inequality on the standard suite")
def _strong(ctx):
    op = ctx.op()
    suite = ctx.suite(op.grid, 20)
    riesz = lambda E: cap.riesz_capacity(op, 0.2, 2, E)  # noqa: E731
    sob = cap.strong_capacitary_check(op, riesz, 0.2, 2, suite)
    mx = cap.strong_capacitary_check(op, riesz, 0.2, 2, suite, with_maximal=True)
    bp = fs.BesovParams(2, 2, 0.3, "heat", alpha=0.5)
    bes = cap.strong_capacitary_check(op, lambda E: cap.besov_capacity(op, 0.5, 0.3, 2, E), 0.2, 2, suite,
                                      norm="besov", besov_params=bp)
    m = {k: {"ratio": _f(v["ratio"]), "max_refinement_change": _f(v["max_refinement_change"])}
         for k, v in (("sobolev", sob), ("maximal", mx), ("besov", bes))}
    ok = all(math.isfinite(v["ratio"]) and v["max_refinement_change"] < 0.01 for v in m.values())
    rows = [[k, r["name"], r["integral"], r["norm_power"], r["ratio"], r["refinement_change"]]
            for k, v in (("sobolev", sob), ("maximal", mx), ("besov", bes)) for r in v["rows"]]
    return {"passed": ok, "metrics": m,
            "table": {"header": ["variant", "function", "integral", "norm_power", "ratio", "refinement_change"],
                      "rows": rows}}


# --------------------------------------------------------------- embedding
def _family_eval(ctx, op, s, on_product=True):
    key = ("family", id(op), s, on_product)
    with ctx._lock:
        if key not in ctx._ops:
            g = op.grid
            fam = emb.build_family(g, cap=600, seed=ctx.seed)
            ctx._ops[key] = emb.FamilyEvaluation(g, fam, lambda E: cap.riesz_capacity(op, s, 2, E),
                                                 emb.default_t_levels(g) if on_product else None)
        return ctx._ops[key]


@register("tent-identities", "tents: antitone in t, intersection identity, union relations")
def _tents(ctx):
    g = ctx.op().grid
    R = g.inradius()
    tl = emb.default_t_levels(g)
    O1 = cap.DiscreteSet.ball(g, [-0.4 * R], 0.2 * R)
    O2 = cap.DiscreteSet.ball(g, [0.4 * R], 0.2 * R)
    O3 = cap.DiscreteSet.ball(g, [0.1 * R], 0.3 * R)
    disjoint = emb.tent_identity_report(g, O1, O2, tl)
    overlap = emb.tent_identity_report(g, O1 | O2, O3, tl)
    whole = emb.tent(g, cap.DiscreteSet(g, np.ones(g.n, bool)), tl)
    empty = emb.tent(g, cap.DiscreteSet.empty(g), tl)
    ok = (disjoint["intersection_identity"] and overlap["intersection_identity"] and disjoint["antitone_in_t"]
          and disjoint["union_contains_union"] and not empty.any() and whole.any())
    return {"passed": ok, "metrics": {"disjoint_balls": disjoint, "overlapping": overlap}}


@register("tent-lower-bound", "Poisson extension of |f| is bounded below on the tent of {|f| >= 1}")
def _tent_lower(ctx):
    op = ctx.op()
    g = op.grid
    R = g.inradius()
    vals = [emb.tent_lower_bound_check(op, 0.5, cap.DiscreteSet.ball(g, [0.0], r * R), g.constant(1.0))
            for r in (0.6, 0.4, 0.2)]
    O = cap.DiscreteSet.ball(g, [0.0], 0.5 * R)
    ind = emb.tent_lower_bound_check(op, 0.5, O, O.indicator())
    ok = all(0 < v <= 1 for v in vals) and all(b >= a for a, b in zip(vals, vals[1:])) and ind > 0
    return {"passed": ok, "metrics": {"shrinking_balls": vals, "indicator": _f(ind)}}


@register("cp-monotone", "capacity-minimizing function c_p(mu; t) is nondecreasing in t and family-monotone")
def _cp(ctx):
    op = ctx.op()
    ev = _family_eval(ctx, op, 0.2)
    mu = emb.random_measure(op.grid, 5, ctx.seed)
    masses = ev.masses(mu)
    ts = np.linspace(0.01, 1.0, 40) * mu.total
    cps = [emb._cp_from(ev.capacities, masses, t) for t in ts]
    inc = all(b >= a for a, b in zip(cps, cps[1:]))
    half = len(ev.family) // 2
    sub = [emb._cp_from(ev.capacities[:half], masses[:half], t) for t in ts]
    fam_mono = all(a <= b for a, b in zip(cps, sub))
    over = emb._cp_from(ev.capacities, masses, 1.01 * mu.total)
    return {"passed": inc and fam_mono and math.isinf(over),
            "metrics": {"nondecreasing": inc, "family_monotone": fam_mono, "beyond_total_is_inf": math.isinf(over)}}


@register("thm1-carleson", "Carleson embedding of the Poisson extension: constants of the four statements")
def _carleson(ctx):
    op = ctx.op()
    g = op.grid
    s = 0.2
    ev = _family_eval(ctx, op, s)
    suite = ctx.suite(g)
    rows, ok, homog, finite = [], True, 0.0, 0
    for k in range(10):
        mu = emb.random_measure(g, 5, ctx.seed + k)
        rep = emb.carleson_embedding_verify(op, 0.5, s, 2, 2, mu, suite, ev)
        c = rep.constants
        if math.isfinite(c["(iv) capacity"]) and math.isfinite(c["(ii) cp"]):
            finite += 1
            ok &= math.isfinite(c["(i) strong-type"]) and c["(iii) weak-type"] <= c["(i) strong-type"]
        for q, scale in ((2, 3.0), (4, 16.0)):
            a = emb.carleson_embedding_verify(op, 0.5, s, 2, q, mu, suite, ev).constants["(iv) capacity"]
            b = emb.carleson_embedding_verify(op, 0.5, s, 2, q, mu.scaled(scale), suite, ev).constants["(iv) capacity"]
            want = scale ** (2 / q)
            homog = max(homog, abs(b / a - want) / want)
        rows.append([k, c["(i) strong-type"], c["(iii) weak-type"], c["(iv) capacity"], c["(ii) cp"]])
    zero = emb.carleson_embedding_verify(op, 0.5, s, 2, 2, emb.random_measure(g, 5, 0).scaled(0.0), suite, ev)
    zero_ok = all(v == 0 for v in zero.constants.values())
    ok &= homog <= 1e-12 and zero_ok and finite > 0
    return {"passed": ok, "metrics": {"instances": 10, "finite_capacity_instances": finite,
                                      "homogeneity_error": _f(homog), "zero_measure": zero_ok},
            "table": {"header": ["instance", "strong_type", "weak_type", "capacity", "cp"], "rows": rows}}


@register("trace-embedding", "trace inequality for measures on the group, Sobolev and Besov variants")
def _trace(ctx):
    op = ctx.op()
    g = op.grid
    s = 0.2
    ev = _family_eval(ctx, op, s, on_product=False)
    suite = ctx.suite(g)
    ball = cap.DiscreteSet.ball(g, [0.0], 0.3 * g.inradius())
    nu = emb.DiscreteMeasure(g, ball.nodes, np.full(ball.size, g.cell_volume))
    sob = emb.trace_embedding_verify(op, s, 2, 2, nu, suite, ev)
    sob_lt = emb.trace_embedding_verify(op, s, 2, 1, nu, suite, ev)
    bp = fs.BesovParams(2, 2, 0.3, "heat", alpha=0.5)
    fam = ev.family[:150]
    bev = emb.FamilyEvaluation(g, fam, lambda E: cap.besov_capacity(op, 0.5, 0.3, 2, E))
    norm = lambda U: np.array([fs.besov_energy(op, bp, U[:, j]) ** 0.5 for j in range(U.shape[1])])  # noqa: E731
    bes = emb.trace_embedding_verify(op, s, 2, 2, nu, suite, bev, norm_fn=norm)
    bes_lt = emb.trace_embedding_verify(op, s, 2, 1, nu, suite, bev, norm_fn=norm)
    reps = {"sobolev_q2": sob, "sobolev_q1": sob_lt, "besov_q2": bes, "besov_q1": bes_lt}
    ok = all(all(math.isfinite(v) for v in r.constants.values()) and r.extra["weak_le_strong"] for r in reps.values())
    return {"passed": ok, "metrics": {k: {"constants": r.constants, "ratios": r.ratios} for k, r in reps.items()}}

"""Fractional Sobolev norms and semigroup / difference Besov seminorms.

Semigroup flavors (T = H_{alpha,t} or P_{sigma,t}):

    N(u)^q = int_0^inf J(t)^{q/p} t^{-beta q/2} dt/t,
    J(t)   = int T_t(|u - u(g)|^p)(g) dg.

Since T_t is symmetric, J(t) = cv * trace(T_t W) with W[i, g] = |u_i - u_g|^p,
so one product V^T W V gives J at every level at once.

Difference flavor:

    N(u)^q = int_0^inf (int int_{d(g,g') < r} |u(g) - u(g')|^p r^{-2 beta p - Q})^{q/p} dr/r.

Level integrals use log-spaced levels with trapezoid weights in log t. The
default window runs over the scales a grid resolves: kernel radius from one
spacing h up to the box inradius R (for the fractional heat semigroup the
radius is t^{1/(2 alpha)}, so t runs over [h^{2 alpha}, R^{2 alpha}]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EquivalenceFailure, InvalidArgument
from .grid import Grid, GridFunction, SpectralOperator, _values, lp_norm, mollify, truncate
from .semigroups import poisson_psi

__all__ = [
    "BesovParams",
    "NormReport",
    "sobolev_norm",
    "level_quadrature",
    "default_levels",
    "besov_profile",
    "besov_seminorm",
    "besov_norm",
    "besov_energy",
    "difference_seminorm_bruteforce",
    "certify_besov_equivalence",
    "certify_besov_sobolev_embedding",
    "density_convergence_study",
    "minmax_check",
]

FLAVORS = ("heat", "poisson", "difference")
DEFAULT_LEVELS = 64


@dataclass(frozen=True)
class BesovParams:
    """Exponents and flavor of a Besov seminorm.

    ``alpha`` is used by the heat flavor, ``sigma`` by the Poisson flavor.
    """

    p: float
    q: float
    beta: float
    flavor: str = "heat"
    alpha: float = 0.5
    sigma: float = 0.5

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise InvalidArgument(f"flavor must be one of {FLAVORS}")
        if not self.p >= 1:
            raise InvalidArgument("p must be >= 1")
        if not (self.q >= 1 or math.isinf(self.q)):
            raise InvalidArgument("q must be >= 1 or inf")
        if not self.beta > 0:
            raise InvalidArgument("beta must be positive")
        if self.flavor == "heat" and not 0 < self.alpha <= 1:
            raise InvalidArgument("alpha must lie in (0, 1]")
        if self.flavor == "poisson" and not 0 < self.sigma < 1:
            raise InvalidArgument("sigma must lie in (0, 1)")


@dataclass
class NormReport:
    values: dict
    ratios: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "values": self.values,
            "ratios": {k: list(v) for k, v in self.ratios.items()},
            **({"extra": self.extra} if self.extra else {}),
        }


# ---------------------------------------------------------------- Sobolev norm
def sobolev_norm(op: SpectralOperator, s: float, p: float, u) -> tuple[float, float]:
    """(||u||_p + ||L^s u||_p, ||L^s u||_p)."""
    if not 0 < s < 1:
        raise InvalidArgument("s must lie in (0, 1)")
    if not p >= 1:
        raise InvalidArgument("p must be >= 1")
    v = np.asarray(_values(u), dtype=float)
    cv = op.grid.cell_volume
    hom = float(lp_norm(op.apply(lambda lam: lam**s, v), p, cv))
    return float(lp_norm(v, p, cv)) + hom, hom


# ------------------------------------------------------------------- levels
def _grid_of(op_or_grid) -> Grid:
    return op_or_grid.grid if isinstance(op_or_grid, SpectralOperator) else op_or_grid


def default_levels(grid: Grid, params: BesovParams, count: int = DEFAULT_LEVELS) -> np.ndarray:
    """Log-spaced levels covering kernel radii from one spacing to the inradius."""
    h = float(np.min(grid.spacing[: grid.group.horizontal_dim]))
    R = grid.inradius()
    if params.flavor == "heat":
        lo, hi = h ** (2 * params.alpha), R ** (2 * params.alpha)
    else:
        lo, hi = h, R
    return np.geomspace(lo, hi, count)


def level_quadrature(levels) -> np.ndarray:
    """Trapezoid weights for int F(t) dt/t on log-spaced (or any sorted) levels."""
    t = np.asarray(levels, dtype=float)
    if t.size == 0:
        raise InvalidArgument("level set is empty")
    if t.size == 1:
        return np.ones(1)
    y = np.log(t)
    w = np.zeros_like(y)
    dy = np.diff(y)
    w[:-1] += 0.5 * dy
    w[1:] += 0.5 * dy
    return w


def _difference_weight(u_vals: np.ndarray, p: float) -> np.ndarray:
    return np.abs(u_vals[:, None] - u_vals[None, :]) ** p


def _semigroup_multipliers(op: SpectralOperator, params: BesovParams, levels) -> np.ndarray:
    """Array (levels, modes) of the multiplier of T_t on the spectrum."""
    lam = op.eigenvalues
    t = np.asarray(levels, dtype=float)
    if params.flavor == "heat":
        return np.exp(-t[:, None] * lam[None, :] ** params.alpha)
    x = (t[:, None] ** 2) * lam[None, :]
    return poisson_psi(params.sigma, x.ravel()).reshape(x.shape)


def _difference_offsets(grid: Grid, r_max: float):
    offsets = grid.lattice_ball(r_max, strict=True)
    norms = grid.group.hom_norm(offsets * grid.spacing)
    order = np.argsort(norms, kind="stable")
    return offsets[order], norms[order]


def _pair_sums(grid: Grid, u_vals: np.ndarray, offsets: np.ndarray, p: float) -> np.ndarray:
    """S_gamma = sum_g |u(g gamma) - u(g)|^p over in-window pairs (columns: functions)."""
    u2 = u_vals if u_vals.ndim == 2 else u_vals[:, None]
    out = np.zeros((offsets.shape[0], u2.shape[1]))
    for k, gamma in enumerate(offsets):
        tgt = grid.right_translate_map(gamma * grid.spacing)
        ok = tgt >= 0
        out[k] = np.sum(np.abs(u2[tgt[ok]] - u2[ok]) ** p, axis=0)
    return out


def besov_profile(op_or_grid, params: BesovParams, u, levels=None):
    """Levels and the inner quantity at each level (J(t), or the difference double integral).

    Returns ``(levels, inner)`` with ``inner`` of shape (levels,) for a
    single function or (levels, functions) when ``u`` is a 2-D array.
    """
    grid = _grid_of(op_or_grid)
    levels = default_levels(grid, params) if levels is None else np.asarray(levels, float)
    if levels.size == 0:
        raise InvalidArgument("level set is empty")
    vals = np.asarray(_values(u), dtype=float)
    single = vals.ndim == 1
    cols = vals[:, None] if single else vals
    cv = grid.cell_volume
    p = params.p
    if params.flavor == "difference":
        offsets, norms = _difference_offsets(grid, float(levels.max()))
        S = _pair_sums(grid, cols, offsets, p)
        csum = np.vstack([np.zeros((1, cols.shape[1])), np.cumsum(S, axis=0)])
        counts = np.searchsorted(norms, levels, side="left")
        Q = grid.group.hom_dimension
        scale = cv * cv * levels ** (-2 * params.beta * p - Q)
        inner = csum[counts] * scale[:, None]
    else:
        if not isinstance(op_or_grid, SpectralOperator):
            raise InvalidArgument("semigroup flavors need a SpectralOperator")
        op = op_or_grid
        V = op.eigenvectors
        mult = _semigroup_multipliers(op, params, levels)
        inner = np.empty((levels.size, cols.shape[1]))
        for c in range(cols.shape[1]):
            W = _difference_weight(cols[:, c], p)
            w = np.einsum("ik,ik->k", V, W @ V)
            inner[:, c] = cv * (mult @ w)
        inner = np.maximum(inner, 0.0)
    return levels, (inner[:, 0] if single else inner)


def _combine(params: BesovParams, levels, inner) -> np.ndarray:
    """Outer integral over levels (or supremum when q = inf)."""
    p, q, beta = params.p, params.q, params.beta
    shape = (-1,) + (1,) * (np.ndim(inner) - 1)
    lv = np.asarray(levels, dtype=float).reshape(shape)
    # the difference flavor carries its r-power inside the inner integral
    weight = 1.0 if params.flavor == "difference" else lv ** (-beta / 2.0)
    if math.isinf(q):
        return np.max(weight * inner ** (1.0 / p), axis=0)
    w = level_quadrature(levels).reshape(shape)
    return np.sum(w * (weight * inner ** (1.0 / p)) ** q, axis=0) ** (1.0 / q)


def besov_seminorm(op_or_grid, params: BesovParams, u, t_quadrature=None):
    """Besov seminorm of ``u`` (or of every column of a 2-D array)."""
    levels, inner = besov_profile(op_or_grid, params, u, t_quadrature)
    out = _combine(params, levels, inner)
    return float(out) if np.ndim(out) == 0 else out


def besov_norm(op_or_grid, params: BesovParams, u, t_quadrature=None) -> float:
    """||u||_p + N(u), the norm of the Besov space."""
    grid = _grid_of(op_or_grid)
    v = np.asarray(_values(u), dtype=float)
    return float(lp_norm(v, params.p, grid.cell_volume)) + besov_seminorm(
        op_or_grid, params, v, t_quadrature
    )


def besov_energy(op_or_grid, params: BesovParams, u, t_quadrature=None) -> float:
    """||u||_p^p + N(u)^p, the p-additive form used by capacities and min-max."""
    grid = _grid_of(op_or_grid)
    v = np.asarray(_values(u), dtype=float)
    return float(lp_norm(v, params.p, grid.cell_volume)) ** params.p + besov_seminorm(
        op_or_grid, params, v, t_quadrature
    ) ** params.p


def difference_seminorm_bruteforce(grid: Grid, params: BesovParams, u, levels) -> float:
    """Direct double loop over node pairs; reference for the difference flavor."""
    vals = np.asarray(_values(u), dtype=float)
    levels = np.asarray(levels, dtype=float)
    cv = grid.cell_volume
    Q = grid.group.hom_dimension
    n = grid.n
    inner = np.zeros(levels.size)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            step = grid.group.multiply(grid.group.inverse(grid.coords[i]), grid.coords[j])
            if grid.boundary == "periodic":
                # torus distance: shortest lattice representative
                idx = grid.index_of_point(step)
                shape = np.asarray(grid.shape)
                idx = (idx + shape // 2) % shape - shape // 2
                step = idx * grid.spacing
            d = float(grid.group.hom_norm(step))
            diff = abs(vals[i] - vals[j]) ** params.p
            for k, r in enumerate(levels):
                if d < r:
                    inner[k] += diff
    inner *= cv * cv * levels ** (-2 * params.beta * params.p - Q)
    return float(_combine(params, levels, inner))


# -------------------------------------------------------------- equivalence
def _bracket(num: np.ndarray, den: np.ndarray, tol=1e-12):
    keep = (den > tol) & (num > tol)
    if not np.any(keep):
        return None
    r = num[keep] / den[keep]
    return float(r.min()), float(r.max())


def certify_besov_equivalence(op, p, q, beta, alpha, sigma, suite, names=None, levels=None) -> NormReport:
    """Ratio brackets between the heat, Poisson and difference seminorms.

    Exponents follow the correspondences
    N_H^{alpha, 2 beta}  ~  N_P^{sigma, 2 alpha beta / sigma}  ~  N^{alpha beta}.
    """
    if not 0 < beta < 1.0 / p:
        raise InvalidArgument(f"beta must lie in (0, 1/p) = (0, {1.0 / p})")
    suite = list(suite)
    names = names or [f"f{i}" for i in range(len(suite))]
    cols = np.stack([np.asarray(_values(u), dtype=float) for u in suite], axis=1)
    ph = BesovParams(p, q, 2 * beta, "heat", alpha=alpha)
    pp = BesovParams(p, q, 2 * alpha * beta / sigma, "poisson", sigma=sigma)
    pd = BesovParams(p, q, alpha * beta, "difference")
    lv = levels or {}
    nh = np.atleast_1d(besov_seminorm(op, ph, cols, lv.get("heat")))
    npo = np.atleast_1d(besov_seminorm(op, pp, cols, lv.get("poisson")))
    nd = np.atleast_1d(besov_seminorm(op, pd, cols, lv.get("difference")))
    for name, a, b, c in zip(names, nh, npo, nd):
        finite = [np.isfinite(a), np.isfinite(b), np.isfinite(c)]
        if any(finite) and not all(finite):
            raise EquivalenceFailure(f"seminorm finiteness differs for {name}", name)
    values = {
        name: {"heat": float(a), "poisson": float(b), "difference": float(c)}
        for name, a, b, c in zip(names, nh, npo, nd)
    }
    ratios = {}
    for key, num, den in (
        ("heat/difference", nh, nd),
        ("poisson/difference", npo, nd),
        ("heat/poisson", nh, npo),
    ):
        br = _bracket(num, den)
        if br is not None:
            ratios[key] = br
    return NormReport(values, ratios)


def certify_besov_sobolev_embedding(op, s, alpha, p, beta, suite, levels=None) -> float:
    """max ||L^{s alpha} u||_p / ||u||_{B^{alpha,beta}_{p,p,H}} over the suite."""
    if p > 1 and not beta > 2 * s:
        raise InvalidArgument("embedding needs beta > 2s when p > 1")
    if p == 1 and not beta >= 2 * s:
        raise InvalidArgument("embedding needs beta >= 2s when p = 1")
    params = BesovParams(p, p, beta, "heat", alpha=alpha)
    cv = op.grid.cell_volume
    best = 0.0
    for u in suite:
        v = np.asarray(_values(u), dtype=float)
        den = besov_norm(op, params, v, levels)
        if den == 0:
            continue
        num = float(lp_norm(op.apply(lambda lam: lam ** (s * alpha), v), p, cv))
        best = max(best, num / den)
    return best


# ------------------------------------------------------------------ density
def density_convergence_study(op_or_grid, norm_id, u, eps_ladder, N_ladder, s=0.3, p=2.0, params=None):
    """Gap ||eta_N (tau_eps * u) - u|| along paired ladders.

    ``norm_id`` is "sobolev" (homogeneous ||L^s .||_p, needs an operator) or
    "besov" (``params`` seminorm plus L^p norm). Returns a dict with rows
    ``(eps, N, gap, min_value)`` and the discretization floor, defined as the
    gap of the finest resolvable mollification without truncation.
    """
    import warnings

    from .errors import ResolutionWarning

    grid = _grid_of(op_or_grid)
    u = u if isinstance(u, GridFunction) else GridFunction(grid, u)
    eps_ladder = [float(e) for e in eps_ladder]
    N_ladder = [float(n) for n in N_ladder]
    if any(b > a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise InvalidArgument("eps ladder must be decreasing")
    if any(b < a for a, b in zip(N_ladder, N_ladder[1:])):
        raise InvalidArgument("N ladder must be increasing")

    def measure(v: GridFunction) -> float:
        if norm_id == "sobolev":
            return sobolev_norm(op_or_grid, s, p, v)[1]
        if norm_id == "besov":
            return besov_norm(op_or_grid, params, v.values)
        raise InvalidArgument(f"unknown norm id {norm_id!r}")

    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        for eps, N in zip(eps_ladder, N_ladder):
            approx = truncate(mollify(u, eps), N)
            rows.append((eps, N, measure(approx - u), float(approx.values.min())))
        finest = 2.0 * grid.max_spacing
        floor = measure(mollify(u, finest) - u)
    return {"rows": rows, "floor": floor}


# ------------------------------------------------------------------ min-max
def minmax_check(op, params: BesovParams, u1, u2, slack: float = 1e-12, levels=None):
    """Check E(max) + E(min) <= E(u1) + E(u2) for E = ||.||_p^p + N^p.

    The L^p parts agree exactly and the seminorm parts satisfy the pairwise
    inequality |max(a) - max(b)|^p + |min(a) - min(b)|^p <= |a1 - b1|^p + |a2 - b2|^p
    integrated against a nonnegative kernel. Returns ``(holds, margin, info)``
    where ``margin = rhs - lhs`` (negative beyond ``-slack`` means failure)
    and ``info`` also reports the same test for the sum norm (||u||_p + N)^p.
    """
    if params.p != params.q:
        raise InvalidArgument("min-max is stated for p = q")
    a = np.asarray(_values(u1), dtype=float)
    b = np.asarray(_values(u2), dtype=float)
    hi, lo = np.maximum(a, b), np.minimum(a, b)
    cols = np.stack([hi, lo, a, b], axis=1)
    N = np.atleast_1d(besov_seminorm(op, params, cols, levels))
    cv = _grid_of(op).cell_volume
    L = np.array([float(lp_norm(c, params.p, cv)) for c in cols.T])
    p = params.p
    lhs = L[0] ** p + L[1] ** p + N[0] ** p + N[1] ** p
    rhs = L[2] ** p + L[3] ** p + N[2] ** p + N[3] ** p
    scale = max(abs(rhs), 1.0)
    margin = rhs - lhs
    sum_norm = (L + N) ** p
    info = {
        "lhs": float(lhs),
        "rhs": float(rhs),
        "seminorm_margin": float(N[2] ** p + N[3] ** p - N[0] ** p - N[1] ** p),
        "lp_margin": float(L[2] ** p + L[3] ** p - L[0] ** p - L[1] ** p),
        "sum_norm_margin": float(sum_norm[2] + sum_norm[3] - sum_norm[0] - sum_norm[1]),
    }
    return bool(margin >= -slack * scale), float(margin), info

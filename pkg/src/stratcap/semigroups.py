"""Heat, fractional heat and Poisson-type semigroups on a discrete sub-Laplacian.

The spectral route evaluates scalar multipliers on the eigenvalues:

    heat            exp(-t lam)
    fractional heat exp(-t lam^alpha)
    Poisson         psi_sigma(t^2 lam),
    psi_sigma(x) = Gamma(sigma)^{-1} int_0^inf exp(-r - x/(4r)) r^(sigma-1) dr.

The subordination route rebuilds exp(-t L^{1/2}) from heat semigroups and the
closed-form stable density, giving an independent cross-check. Kernel
certification compares extracted kernels against the two-sided profiles

    t / (t^{1/(2 alpha)} + d)^{Q + 2 alpha}     and     t^{2 sigma} / (t^2 + d^2)^{Q/2 + sigma}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import (
    CertificationFailure,
    InvalidArgument,
    NumericError,
    UnsupportedParameter,
)
from .grid import GridFunction, SpectralOperator, _values
from .quadrature import integrate_linear, integrate_log

__all__ = [
    "heat_multiplier",
    "frac_heat_multiplier",
    "poisson_psi",
    "heat_apply",
    "frac_heat_apply",
    "poisson_apply",
    "SubordinatorDensity",
    "subordinated_multiplier",
    "subordinator_moment",
    "moment_closed_form",
    "frac_heat_via_subordination",
    "extract_kernel",
    "BoundReport",
    "frac_heat_profile",
    "poisson_profile",
    "certify_frac_heat_bounds",
    "certify_frac_heat_holder",
    "certify_poisson_bounds",
    "certify_poisson_holder",
    "continuity_modulus",
]

TAIL_TOL = 1e-12


def _check_t(t):
    if not t >= 0:
        raise InvalidArgument(f"time must be nonnegative, got {t!r}")


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise InvalidArgument(f"alpha must lie in (0, 1], got {alpha!r}")


def _check_sigma(sigma):
    if not 0 < sigma < 1:
        raise InvalidArgument(f"sigma must lie in (0, 1), got {sigma!r}")


# ------------------------------------------------------------------ multipliers
def heat_multiplier(t: float):
    _check_t(t)
    return lambda lam: np.exp(-t * np.asarray(lam, dtype=float))


def frac_heat_multiplier(alpha: float, t: float):
    _check_alpha(alpha)
    _check_t(t)
    return lambda lam: np.exp(-t * np.asarray(lam, dtype=float) ** alpha)


def _psi_lower_limit(sigma: float) -> float:
    # left tail of the r-integral at x = 0: e^{sigma y} / (sigma Gamma(sigma))
    return math.log(1e-14 * sigma * math.gamma(sigma)) / sigma


def poisson_psi(sigma: float, x) -> np.ndarray:
    """psi_sigma(x) by log-variable Gauss quadrature, vectorized over x >= 0.

    With r = e^y the integrand is exp(sigma y - e^y - x e^{-y} / 4), which is
    negligible above y = log(60 + sqrt(x)) and, for every x, below the point where its
    pure-power left tail e^{sigma y} / (sigma Gamma(sigma)) drops under 1e-14.
    """
    _check_sigma(sigma)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise InvalidArgument("psi_sigma is defined on [0, inf)")
    lo = _psi_lower_limit(sigma)
    hi = math.log(60.0 + math.sqrt(float(x.max(initial=0.0))))
    c = 1.0 / math.gamma(sigma)

    def integrand(y):
        ey = np.exp(y)[:, None]
        return c * np.exp(sigma * y[:, None] - ey - 0.25 * x[None, :] / ey)

    return integrate_linear(integrand, lo, hi, rtol=1e-13, atol=1e-16)


class _PsiCache:
    """Memoize psi on the spectrum of one operator for repeated t values."""

    def __init__(self):
        self._store: dict = {}

    def __call__(self, sigma, t, lam):
        key = (float(sigma), float(t), id(lam), lam.size)
        hit = self._store.get(key)
        if hit is None or hit[0] is not lam:
            hit = (lam, poisson_psi(sigma, (t * t) * lam))
            if len(self._store) > 256:
                self._store.clear()
            self._store[key] = hit
        return hit[1]


_psi_cache = _PsiCache()


def poisson_multiplier(sigma: float, t: float):
    _check_sigma(sigma)
    _check_t(t)
    return lambda lam: _psi_cache(sigma, t, np.asarray(lam, dtype=float))


# ----------------------------------------------------------------- semigroups
def heat_apply(op: SpectralOperator, t: float, u):
    """e^{-tL} u."""
    return op.apply(heat_multiplier(t), u)


def frac_heat_apply(op: SpectralOperator, alpha: float, t: float, u):
    """H_{alpha,t} u = e^{-t L^alpha} u (alpha = 1 is the heat semigroup)."""
    return op.apply(frac_heat_multiplier(alpha, t), u)


def poisson_apply(op: SpectralOperator, sigma: float, t: float, u):
    """P_{sigma,t} u = psi_sigma(t^2 L) u."""
    return op.apply(poisson_multiplier(sigma, t), u)


# -------------------------------------------------------------- subordination
@dataclass(frozen=True)
class SubordinatorDensity:
    """One-sided stable density eta_t^alpha with Laplace transform exp(-t lam^alpha).

    Only alpha = 1/2 has a shipped closed form,
    eta_t(s) = t (4 pi)^{-1/2} s^{-3/2} exp(-t^2 / (4 s)).
    """

    alpha: float
    t: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidArgument("alpha must lie in (0, 1)")
        if not self.t > 0:
            raise InvalidArgument("t must be positive")

    def _require_closed_form(self):
        if self.alpha != 0.5:
            raise UnsupportedParameter(
                "closed-form subordinator density exists only for alpha = 1/2"
            )

    def evaluate(self, s) -> np.ndarray:
        self._require_closed_form()
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        sp = s[pos]
        t = self.t
        out[pos] = t / math.sqrt(4 * math.pi) * sp**-1.5 * np.exp(-t * t / (4 * sp))
        return out

    def envelope(self, s) -> np.ndarray:
        """Pointwise bound min{t^{-1/alpha}, t s^{-1-alpha}}."""
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.minimum(self.t ** (-1.0 / self.alpha), self.t * s ** (-1.0 - self.alpha))

    def support_window(self, delta: float = 0.0, tol: float = TAIL_TOL):
        """[s_lo, s_hi] outside which the weight eta s^delta has mass below tol.

        The upper cut uses the envelope tail int_S^inf t s^{delta-1-alpha} ds
        = t S^{delta-alpha} / (alpha - delta). The lower cut uses the closed
        form: the density is below exp(-40) relative to its scale there.
        """
        a, t = self.alpha, self.t
        if not delta < a:
            raise InvalidArgument("moments exist only for delta < alpha")
        s_hi = (tol * (a - delta) / t) ** (1.0 / (delta - a))
        s_lo = t * t / (4.0 * (60.0 + 10.0 * max(0.0, -delta)))
        return s_lo, s_hi


def subordinated_multiplier(density: SubordinatorDensity, lam) -> np.ndarray:
    """int_0^inf eta_t(s) e^{-s lam} ds for every lam (the quadrature route)."""
    density._require_closed_form()
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    s_lo, s_hi = density.support_window()

    def integrand(s):
        return density.evaluate(s)[:, None] * np.exp(-s[:, None] * lam[None, :])

    return integrate_log(integrand, s_lo, s_hi, rtol=1e-13, atol=1e-15)


def subordinator_moment(density: SubordinatorDensity, delta: float) -> float:
    """int_0^inf eta_t(s) s^delta ds by quadrature (delta < alpha)."""
    density._require_closed_form()
    s_lo, s_hi = density.support_window(delta)

    def integrand(s):
        return density.evaluate(s) * s**delta

    return float(integrate_log(integrand, s_lo, s_hi, rtol=1e-13, atol=1e-16))


def moment_closed_form(alpha: float, t: float, delta: float) -> float:
    """Gamma(1 - delta/alpha) / Gamma(1 - delta) * t^{delta/alpha}."""
    return float(gamma_fn(1 - delta / alpha) / gamma_fn(1 - delta) * t ** (delta / alpha))


def frac_heat_via_subordination(op: SpectralOperator, density: SubordinatorDensity, u):
    """H_{1/2,t} u assembled as int eta_t(s) e^{-sL} u ds.

    Each quadrature node contributes one heat-semigroup application; on the
    eigenbasis these are scalar, so the whole integral costs one quadrature
    per eigenvalue.
    """
    if density.alpha != 0.5:
        raise UnsupportedParameter("subordination route is shipped for alpha = 1/2 only")
    m = subordinated_multiplier(density, op.eigenvalues)
    return op.apply_multiplier(m, u)


# ----------------------------------------------------------------- kernels
def extract_kernel(apply_op, params: dict, base_point=None) -> GridFunction:
    """Kernel column obtained by applying ``apply_op`` to a unit-mass delta.

    ``apply_op`` is one of the ``*_apply`` functions; ``params`` holds its
    keyword arguments (including ``op``) except the input function ``u``.
    """
    op = params["op"]
    grid = op.grid
    if base_point is None:
        node = grid.identity_node
    else:
        node = int(grid.locate(np.asarray(base_point, dtype=float)))
        if node < 0:
            raise InvalidArgument(f"base point {base_point!r} is outside the box")
    return apply_op(**params, u=grid.delta(node))


def frac_heat_profile(Q: float, alpha: float, t, d):
    return t / (t ** (1.0 / (2 * alpha)) + d) ** (Q + 2 * alpha)


def poisson_profile(Q: float, sigma: float, t, d):
    return t ** (2 * sigma) / (t * t + d * d) ** (Q / 2.0 + sigma)


@dataclass
class BoundReport:
    """Measured constants of a two-sided (or one-sided Hoelder) kernel bound."""

    profile_id: str
    c_lower: float
    c_upper: float
    argmin: dict
    argmax: dict
    sample_count: int
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.c_upper / self.c_lower if self.c_lower > 0 else math.inf

    @property
    def success(self) -> bool:
        return bool(
            np.isfinite(self.c_lower)
            and np.isfinite(self.c_upper)
            and 0 < self.c_lower <= self.c_upper
        )

    def to_dict(self) -> dict:
        return {
            "profile_id": self.profile_id,
            "c_lower": float(self.c_lower),
            "c_upper": float(self.c_upper),
            "ratio": float(self.ratio),
            "argmin": self.argmin,
            "argmax": self.argmax,
            "sample_count": int(self.sample_count),
            "success": self.success,
            **({"extra": self.extra} if self.extra else {}),
        }


def _base_node(grid, base_point):
    if base_point is None:
        return grid.identity_node
    node = int(grid.locate(np.asarray(base_point, dtype=float)))
    if node < 0:
        raise InvalidArgument(f"base point {base_point!r} is outside the box")
    return node


def certification_region(grid, base_node: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes within half the box inradius of the base node, and their distances."""
    base = grid.coords[base_node]
    d = grid.group.distance(grid.coords, base)
    radius = 0.5 * grid.inradius() - float(grid.group.hom_norm(base))
    nodes = np.flatnonzero(d <= radius)
    if nodes.size == 0:
        nodes = np.array([base_node])
    return nodes, d[nodes]


def _location(grid, node, t):
    return {"g": [float(x) for x in grid.coords[node]], "t": float(t)}


def _certify(op, kernels, profile_fn, t_set, base_node, profile_id, slack=1e-10):
    grid = op.grid
    nodes, d = certification_region(grid, base_node)
    lo, hi = math.inf, -math.inf
    argmin = argmax = None
    for t, K in zip(t_set, kernels):
        k = K[nodes]
        bad = np.flatnonzero(k <= 0)
        if bad.size:
            where = _location(grid, nodes[bad[0]], t)
            if k[bad[0]] < -slack * max(1.0, np.max(np.abs(K))):
                raise CertificationFailure(
                    f"{profile_id}: kernel negative at {where}", where
                )
            raise CertificationFailure(f"{profile_id}: kernel vanishes at {where}", where)
        r = k / profile_fn(t, d)
        i, j = int(np.argmin(r)), int(np.argmax(r))
        if r[i] < lo:
            lo, argmin = float(r[i]), _location(grid, nodes[i], t)
        if r[j] > hi:
            hi, argmax = float(r[j]), _location(grid, nodes[j], t)
    return BoundReport(profile_id, lo, hi, argmin, argmax, int(nodes.size * len(t_set)))


def certify_frac_heat_bounds(op, alpha, t_set, base_point=None) -> BoundReport:
    """Measure c_lower <= K_{alpha,t}(g) (t^{1/(2 alpha)} + d)^{Q+2 alpha} / t <= c_upper."""
    _check_alpha(alpha)
    t_set = [float(t) for t in t_set]
    if not t_set:
        raise InvalidArgument("t_set is empty")
    grid = op.grid
    node = _base_node(grid, base_point)
    Q = grid.group.hom_dimension
    delta = grid.delta(node).values
    kernels = [frac_heat_apply(op, alpha, t, delta) for t in t_set]
    return _certify(
        op,
        kernels,
        lambda t, d: frac_heat_profile(Q, alpha, t, d),
        t_set,
        node,
        f"frac-heat(alpha={alpha})",
    )


def certify_poisson_bounds(op, sigma, t_set, base_point=None) -> BoundReport:
    """Measure the Poisson kernel against t^{2 sigma} / (t^2 + d^2)^{Q/2 + sigma}."""
    _check_sigma(sigma)
    t_set = [float(t) for t in t_set]
    if not t_set:
        raise InvalidArgument("t_set is empty")
    grid = op.grid
    node = _base_node(grid, base_point)
    Q = grid.group.hom_dimension
    delta = grid.delta(node).values
    kernels = [poisson_apply(op, sigma, t, delta) for t in t_set]
    report = _certify(
        op,
        kernels,
        lambda t, d: poisson_profile(Q, sigma, t, d),
        t_set,
        node,
        f"poisson(sigma={sigma})",
    )
    # Haar sum of the profile over the window for every t
    d_all = grid.group.distance(grid.coords, grid.coords[node])
    report.extra["profile_mass"] = [
        float(np.sum(poisson_profile(Q, sigma, t, d_all)) * grid.cell_volume)
        for t in t_set
    ]
    return report


def _holder(op, kernel, profile_fn, scale, t, base_node, h_set, profile_id):
    grid = op.grid
    group = grid.group
    nodes, d = certification_region(grid, base_node)
    worst, best = 0.0, math.inf
    argmax = argmin = None
    count = 0
    for h in h_set:
        # increments are realized as the nearest lattice translation
        h = grid.index_of_point(group.point(h)) * grid.spacing
        dh = float(group.hom_norm(h))
        if dh == 0.0:
            continue
        if not dh < scale:
            raise InvalidArgument(
                f"increment {h.tolist()} has d(e,h) = {dh} >= {scale}"
            )
        target = grid.right_translate_map(h)[nodes]
        ok = target >= 0
        if not np.any(ok):
            continue
        diff = np.abs(kernel[target[ok]] - kernel[nodes[ok]])
        bound = (dh / scale) * profile_fn(t, d[ok])
        r = diff / bound
        count += int(ok.sum())
        j = int(np.argmax(r))
        if r[j] > worst:
            worst = float(r[j])
            argmax = {**_location(grid, nodes[ok][j], t), "h": h.tolist()}
        rpos = np.where(r > 0, r, np.inf)
        i = int(np.argmin(rpos))
        if rpos[i] < best:
            best = float(rpos[i])
            argmin = {**_location(grid, nodes[ok][i], t), "h": h.tolist()}
    if count == 0:
        best = worst = 0.0
    return BoundReport(profile_id, best if np.isfinite(best) else 0.0, worst, argmin, argmax, count)


def certify_frac_heat_holder(op, alpha, t, base_point=None, h_set=()) -> BoundReport:
    """Smallest C with |K(gh) - K(g)| <= C (d(e,h)/t^{1/(2a)}) t/(t^{1/(2a)} + d(e,g))^{Q+2a}.

    ``c_upper`` is the measured C; ``c_lower`` is the smallest positive
    sampled ratio, reported for context only.
    """
    _check_alpha(alpha)
    grid = op.grid
    node = _base_node(grid, base_point)
    Q = grid.group.hom_dimension
    K = frac_heat_apply(op, alpha, t, grid.delta(node).values)
    return _holder(
        op,
        K,
        lambda tt, d: frac_heat_profile(Q, alpha, tt, d),
        t ** (1.0 / (2 * alpha)),
        t,
        node,
        h_set,
        f"frac-heat-holder(alpha={alpha})",
    )


def certify_poisson_holder(op, sigma, t, base_point=None, h_set=()) -> BoundReport:
    """Hoelder form of the Poisson bound with factor d(e,h)/t."""
    _check_sigma(sigma)
    grid = op.grid
    node = _base_node(grid, base_point)
    Q = grid.group.hom_dimension
    K = poisson_apply(op, sigma, t, grid.delta(node).values)
    return _holder(
        op,
        K,
        lambda tt, d: poisson_profile(Q, sigma, tt, d),
        float(t),
        t,
        node,
        h_set,
        f"poisson-holder(sigma={sigma})",
    )


def continuity_modulus(op, alpha, t, u, pair_count=200, seed=0, p=2.0) -> float:
    """max |H u(g) - H u(g0)| / (||u||_p t^{-(1+Q/p)/(2 alpha)} d(g, g0)) over sampled pairs."""
    _check_alpha(alpha)
    if not t > 0:
        raise InvalidArgument("t must be positive")
    grid = op.grid
    vals = np.asarray(_values(u), dtype=float)
    norm = float(np.sum(np.abs(vals) ** p) * grid.cell_volume) ** (1.0 / p)
    if norm == 0:
        raise InvalidArgument("u must be nonzero")
    Hu = frac_heat_apply(op, alpha, t, vals)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, grid.n, size=pair_count)
    b = rng.integers(0, grid.n, size=pair_count)
    keep = a != b
    a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0
    d = grid.group.distance(grid.coords[a], grid.coords[b])
    Q = grid.group.hom_dimension
    scale = norm * t ** (-(1.0 + Q / p) / (2 * alpha))
    return float(np.max(np.abs(Hu[a] - Hu[b]) / (scale * d)))

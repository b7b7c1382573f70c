"""Riesz, fractional Sobolev and Besov capacities as convex programs.

Riesz capacity of E:   min ||f||_p^p   s.t.  f >= 0,  (L^{-s} f) >= 1 on E.
Sobolev capacity:      min ||L^s u||_p^p  s.t.  u >= 1_E.
Besov capacity:        min ||u||_p^p + N(u)^p  s.t.  u = 1 on E, 0 <= u <= 1.

The Riesz program is solved through its dual in the multipliers of the |E|
constraints. Because L^{-s} has positive entries, the stationary primal point
f = ((A_E^T mu) / (cv p))^{1/(p-1)} is automatically nonnegative, so only the
sign constraint on mu remains:

    D(mu) = 1^T mu - (p - 1) cv sum f(mu)^p,    mu >= 0.

For p = 2 the dual is a nonnegative least-squares problem (Lawson-Hanson
active set); for other p a projected Newton method is used. Either way the
primal iterate is rescaled to exact feasibility, and the gap between that
primal value and D(mu) is the reported KKT residual.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .besov import BesovParams, _semigroup_multipliers, default_levels, level_quadrature
from .errors import InvalidArgument, ZeroModeError
from .fractional import maximal_function
from .grid import Grid, GridFunction, SpectralOperator, _values, lp_norm, mollify

__all__ = [
    "DiscreteSet",
    "SolverOptions",
    "CapacityResult",
    "riesz_capacity",
    "sobolev_capacity",
    "besov_capacity",
    "besov_capacity_variants",
    "kkt_oracle",
    "capacity_property_suite",
    "strong_capacitary_check",
    "capacitary_integral",
    "read_set_csv",
]


# ------------------------------------------------------------------ sets
@dataclass(frozen=True, eq=False)
class DiscreteSet:
    """A subset of the grid nodes, stored as a boolean membership vector."""

    grid: Grid
    membership: np.ndarray

    def __post_init__(self):
        m = np.array(self.membership, dtype=bool).ravel()
        if m.shape != (self.grid.n,):
            raise InvalidArgument(f"membership has {m.size} entries, grid has {self.grid.n} nodes")
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)

    @classmethod
    def empty(cls, grid: Grid) -> "DiscreteSet":
        return cls(grid, np.zeros(grid.n, dtype=bool))

    @classmethod
    def from_nodes(cls, grid: Grid, nodes) -> "DiscreteSet":
        m = np.zeros(grid.n, dtype=bool)
        nodes = np.asarray(list(nodes), dtype=int)
        if nodes.size and (nodes.min() < 0 or nodes.max() >= grid.n):
            raise InvalidArgument("node number out of range")
        m[nodes] = True
        return cls(grid, m)

    @classmethod
    def ball(cls, grid: Grid, center, radius: float) -> "DiscreteSet":
        """Open ball {g : d(g, center) < radius}."""
        c = grid.group.point(center)
        return cls(grid, grid.group.distance(grid.coords, c) < radius)

    @property
    def nodes(self) -> np.ndarray:
        return np.flatnonzero(self.membership)

    @property
    def size(self) -> int:
        return int(self.membership.sum())

    def is_empty(self) -> bool:
        return not self.membership.any()

    def key(self) -> bytes:
        return np.packbits(self.membership).tobytes()

    def _check(self, other: "DiscreteSet"):
        if not self.grid.same_as(other.grid):
            raise InvalidArgument("sets live on different grids")

    def __or__(self, other):
        self._check(other)
        return DiscreteSet(self.grid, self.membership | other.membership)

    def __and__(self, other):
        self._check(other)
        return DiscreteSet(self.grid, self.membership & other.membership)

    def __sub__(self, other):
        self._check(other)
        return DiscreteSet(self.grid, self.membership & ~other.membership)

    def __le__(self, other):
        self._check(other)
        return bool(np.all(~self.membership | other.membership))

    def __eq__(self, other):
        return (
            isinstance(other, DiscreteSet)
            and self.grid.same_as(other.grid)
            and bool(np.array_equal(self.membership, other.membership))
        )

    def __hash__(self):
        return hash(self.key())

    def __len__(self):
        return self.size

    def dilate(self, radius: float | None = None) -> "DiscreteSet":
        """Union of the closed lattice balls g * B(radius) over g in the set.

        The default radius is one cell (the largest spacing).
        """
        grid = self.grid
        r = grid.max_spacing * (1 + 1e-9) if radius is None else float(radius)
        out = self.membership.copy()
        for gamma in grid.lattice_ball(r, strict=False):
            tgt = grid.right_translate_map(gamma * grid.spacing)
            src = self.membership & (tgt >= 0)
            out[tgt[src]] = True
        return DiscreteSet(grid, out)

    def indicator(self) -> GridFunction:
        return GridFunction(self.grid, self.membership.astype(float))


def read_set_csv(path, grid: Grid) -> DiscreteSet:
    """Read a node list (coordinate columns) or ball specs (coordinates plus ``radius``)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return DiscreteSet.empty(grid)
    header = [h.strip().lower() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    d = grid.dim
    if "radius" in header:
        ri = header.index("radius")
        cols = [i for i in range(len(header)) if i != ri][:d]
        out = DiscreteSet.empty(grid)
        for r in body:
            center = [float(r[i]) for i in cols]
            out = out | DiscreteSet.ball(grid, center, float(r[ri]))
        return out
    if len(header) < d:
        raise InvalidArgument(f"set file needs {d} coordinate columns")
    pts = np.array([[float(c) for c in r[:d]] for r in body]) if body else np.zeros((0, d))
    nodes = grid.locate(pts) if len(pts) else np.zeros(0, dtype=int)
    if np.any(nodes < 0):
        raise InvalidArgument("set file lists points outside the grid")
    return DiscreteSet.from_nodes(grid, nodes)


# --------------------------------------------------------------- results
@dataclass(frozen=True)
class SolverOptions:
    """``method``: "auto", "active-set" (p = 2 only) or "newton"."""

    method: str = "auto"
    tol: float = 1e-11
    max_iter: int = 500


@dataclass
class CapacityResult:
    value: float
    minimizer: GridFunction
    iterations: int
    kkt_residual: float
    converged: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "converged": self.converged,
            **self.extra,
        }


def _check_exponent(p: float):
    if not p > 1:
        raise InvalidArgument("p must exceed 1")


def _check_set(op: SpectralOperator, E: DiscreteSet):
    if not op.grid.same_as(E.grid):
        raise InvalidArgument("set and operator live on different grids")


def _zero_result(grid: Grid, converged=True) -> CapacityResult:
    return CapacityResult(0.0, grid.zeros(), 0, 0.0, converged)


def _riesz_matrix(op: SpectralOperator, s: float) -> np.ndarray:
    if op.grid.boundary != "dirichlet" or np.any(op.zero_modes):
        raise ZeroModeError("Riesz capacity needs a Dirichlet grid (no zero mode)")
    if not s > 0:
        raise InvalidArgument("s must be positive")
    return op.function_matrix(lambda lam: lam ** (-s))


# ----------------------------------------------------------- Riesz (dual)
class _RieszDual:
    def __init__(self, A_E: np.ndarray, cv: float, p: float):
        self.A = A_E
        self.cv = cv
        self.p = p
        self.r = 1.0 / (p - 1.0)

    def primal(self, mu):
        w = self.A.T @ mu
        f = (np.maximum(w, 0.0) / (self.cv * self.p)) ** self.r
        return w, f

    def value(self, mu) -> float:
        _, f = self.primal(mu)
        return float(mu.sum() - (self.p - 1.0) * self.cv * np.sum(f**self.p))

    def start(self) -> np.ndarray:
        mu = np.ones(self.A.shape[0])
        _, f = self.primal(mu)
        # f scales like c^r under mu -> c mu
        c = float(np.mean(self.A @ f)) ** (-(self.p - 1.0))
        return c * mu


def _feasible_primal(A_E, f, cv, p):
    """Rescale f >= 0 so that min(A_E f) = 1; returns (f, value)."""
    m = float(np.min(A_E @ f))
    if not m > 0:
        raise InvalidArgument("primal iterate cannot be rescaled to feasibility")
    f = f / m
    return f, float(cv * np.sum(f**p))


def _dual_newton(dual: _RieszDual, tol: float, max_iter: int, mu0=None):
    mu = dual.start() if mu0 is None else np.array(mu0, dtype=float)
    A = dual.A
    phi = -dual.value(mu)
    it = 0
    for it in range(1, max_iter + 1):
        w, f = dual.primal(mu)
        g = A @ f - 1.0
        pg = np.where(mu > 0, g, np.minimum(g, 0.0))
        if np.max(np.abs(pg)) <= tol:
            break
        # Bertsekas' active-set tolerance: min(eps_bar, ||mu - [mu - g]_+||)
        eps = min(1e-3 * max(1.0, float(mu.max())), float(np.linalg.norm(mu - np.maximum(mu - g, 0.0))))
        bound = (mu <= eps) & (g > 0)
        free = ~bound
        d = np.zeros_like(mu)
        if np.any(free):
            with np.errstate(divide="ignore", invalid="ignore"):
                curv = np.where(w > 0, dual.r * f / w, 0.0)
            H = (A[free] * curv) @ A[free].T
            H[np.diag_indices_from(H)] += 1e-14 * max(1.0, float(np.trace(H)) / H.shape[0])
            try:
                d[free] = -linalg.solve(H, g[free], assume_a="pos")
            except linalg.LinAlgError:
                d[free] = -np.linalg.lstsq(H, g[free], rcond=None)[0]
        d[bound] = -g[bound]
        step = 1.0
        # near the optimum decreases fall below the rounding of phi; allow that slack
        slack = 64 * np.finfo(float).eps * abs(phi)
        for _ in range(60):
            trial = np.maximum(mu + step * d, 0.0)
            phi_t = -dual.value(trial)
            if phi_t <= phi + 1e-4 * float(g @ (trial - mu)) + slack:
                break
            step *= 0.5
        else:
            return mu, it, False
        mu, phi = trial, phi_t
    else:
        return mu, it, False
    return mu, it, True


def _dual_active_set(A_E: np.ndarray, cv: float):
    """Exact p = 2 dual: min_{mu >= 0} mu^T G mu / (4 cv) - 1^T mu by NNLS."""
    Q = (A_E @ A_E.T) / (2.0 * cv)
    R = linalg.cholesky(Q, lower=False)
    b = linalg.solve_triangular(R, np.ones(Q.shape[0]), trans="T", lower=False)
    mu, _ = optimize.nnls(R, b, maxiter=50 * Q.shape[0])
    return mu


def riesz_capacity(op: SpectralOperator, s: float, p: float, E: DiscreteSet, solver_opts=None) -> CapacityResult:
    """Riesz capacity min{||f||_p^p : f >= 0, L^{-s} f >= 1 on E}."""
    _check_exponent(p)
    _check_set(op, E)
    opts = solver_opts or SolverOptions()
    A = _riesz_matrix(op, s)
    if E.is_empty():
        return _zero_result(op.grid)
    A_E = A[E.nodes]
    cv = op.grid.cell_volume
    dual = _RieszDual(A_E, cv, p)
    method = opts.method
    if method == "auto":
        method = "active-set" if p == 2 else "newton"
    if method == "active-set":
        if p != 2:
            raise InvalidArgument("the active-set solver is for p = 2")
        mu = _dual_active_set(A_E, cv)
        iters, ok = 1, True
    elif method == "newton":
        mu, iters, ok = _dual_newton(dual, opts.tol, opts.max_iter)
    else:
        raise InvalidArgument(f"unknown method {opts.method!r}")
    _, f = dual.primal(mu)
    f, value = _feasible_primal(A_E, f, cv, p)
    lower = dual.value(mu)
    gap = max(0.0, (value - lower) / value)
    return CapacityResult(
        value,
        GridFunction(op.grid, f),
        iters,
        gap,
        bool(ok and gap <= max(1e-8, 10 * opts.tol)),
        {"dual_value": lower, "method": method},
    )


def kkt_oracle(op: SpectralOperator, s: float, E: DiscreteSet, max_size: int = 16) -> float:
    """p = 2 Riesz capacity by enumerating active constraint sets.

    For every S subset of E (smallest first) solve G_SS mu_S = 2 cv 1, put
    f = A_S^T mu_S / (2 cv) and accept the first S with mu_S >= 0 and
    A_E f >= 1. The sign constraint f >= 0 carries a zero multiplier because
    A has nonnegative entries.
    """
    if E.size > max_size:
        raise InvalidArgument(f"oracle enumerates subsets; |E| <= {max_size} required")
    if E.is_empty():
        return 0.0
    A = _riesz_matrix(op, s)
    A_E = A[E.nodes]
    cv = op.grid.cell_volume
    m = A_E.shape[0]
    G = A_E @ A_E.T
    for k in range(1, m + 1):
        for S in itertools.combinations(range(m), k):
            S = list(S)
            try:
                mu = linalg.solve(G[np.ix_(S, S)], np.full(k, 2.0 * cv), assume_a="pos")
            except linalg.LinAlgError:
                continue
            if np.any(mu < -1e-12):
                continue
            f = A_E[S].T @ mu / (2.0 * cv)
            if np.all(A_E @ f >= 1.0 - 1e-10):
                return float(cv * f @ f)
    raise InvalidArgument("no KKT point found")


# ------------------------------------------------------------- Sobolev
def sobolev_capacity(op: SpectralOperator, s: float, p: float, E: DiscreteSet, solver_opts=None) -> CapacityResult:
    """Sobolev capacity min{||L^s u||_p^p : u >= 1_E}.

    p = 2 is a bound-constrained least-squares problem (BVLS); other p use
    L-BFGS-B started from the p = 2 minimizer.
    """
    _check_exponent(p)
    _check_set(op, E)
    opts = solver_opts or SolverOptions()
    if not 0 < s < 1:
        raise InvalidArgument("s must lie in (0, 1)")
    grid = op.grid
    if E.is_empty():
        return _zero_result(grid)
    cv = grid.cell_volume
    B = op.function_matrix(lambda lam: lam**s)
    lb = E.membership.astype(float)
    ls = optimize.lsq_linear(
        math.sqrt(cv) * B, np.zeros(grid.n), bounds=(lb, np.full(grid.n, np.inf)),
        method="bvls", tol=1e-14, max_iter=max(opts.max_iter, 10 * grid.n),
    )
    u = np.maximum(ls.x, lb)
    iters, ok = int(ls.nit), bool(ls.status > 0)

    def energy(v):
        f = B @ v
        val = cv * np.sum(np.abs(f) ** p)
        grad = cv * p * (B @ (np.abs(f) ** (p - 1) * np.sign(f)))
        return val, grad

    if p != 2:
        res = optimize.minimize(
            energy, u, jac=True, method="L-BFGS-B",
            bounds=list(zip(lb, [None] * grid.n)),
            options={"maxiter": 50 * opts.max_iter, "ftol": 1e-15, "gtol": 1e-12},
        )
        u = np.maximum(res.x, lb)
        iters += int(res.nit)
        ok = bool(res.success)
    value, grad = energy(u)
    # projected gradient: free coordinates and bound coordinates pushing inward
    at_bound = u <= lb + 1e-12
    pg = np.where(at_bound, np.minimum(grad, 0.0), grad)
    resid = float(np.max(np.abs(pg)) / max(value, 1e-300))
    return CapacityResult(float(value), GridFunction(grid, u), iters, resid, ok, {"method": "bvls" if p == 2 else "lbfgsb"})


# --------------------------------------------------------------- Besov
def _besov_kernel(op: SpectralOperator, params: BesovParams, levels) -> np.ndarray:
    """K = sum_t w_t t^{-beta p / 2} T_t, so N(u)^p = cv sum K_gi |u_i - u_g|^p."""
    levels = default_levels(op.grid, params) if levels is None else np.asarray(levels, float)
    w = level_quadrature(levels) * levels ** (-params.beta * params.p / 2.0)
    m = _semigroup_multipliers(op, params, levels)
    V = op.eigenvectors
    return (V * (w @ m)) @ V.T


def _besov_solve(op, params, K, E: DiscreteSet, opts: SolverOptions):
    grid = op.grid
    cv = grid.cell_volume
    p = params.p
    n = grid.n
    fixed = E.membership
    free = ~fixed
    u = fixed.astype(float)
    if not np.any(free):
        return u, 0, True
    Ksym = 0.5 * (K + K.T)
    if p == 2:
        Qm = cv * np.eye(n) + 2.0 * cv * (np.diag(Ksym.sum(axis=1)) - Ksym)
        R = linalg.cholesky(Qm, lower=False)
        rhs = -R[:, fixed] @ np.ones(int(fixed.sum()))
        ls = optimize.lsq_linear(
            R[:, free], rhs, bounds=(0.0, 1.0), method="bvls", tol=1e-14,
            max_iter=max(opts.max_iter, 10 * n),
        )
        u[free] = np.clip(ls.x, 0.0, 1.0)
        return u, int(ls.nit), bool(ls.status > 0)

    def energy(x):
        v = u.copy()
        v[free] = x
        diff = v[:, None] - v[None, :]
        a = np.abs(diff)
        val = cv * np.sum(np.abs(v) ** p) + cv * np.sum(Ksym * a**p)
        g = cv * p * np.abs(v) ** (p - 1) * np.sign(v)
        g = g + 2.0 * cv * p * np.sum(Ksym * a ** (p - 1) * np.sign(diff), axis=1)
        return val, g[free]

    x0 = np.full(int(free.sum()), 0.0)
    res = optimize.minimize(
        energy, x0, jac=True, method="L-BFGS-B", bounds=[(0.0, 1.0)] * x0.size,
        options={"maxiter": 50 * opts.max_iter, "ftol": 1e-15, "gtol": 1e-12},
    )
    u[free] = np.clip(res.x, 0.0, 1.0)
    return u, int(res.nit), bool(res.success)


def _besov_value(op, params, K, u) -> float:
    cv = op.grid.cell_volume
    p = params.p
    a = np.abs(u[:, None] - u[None, :]) ** p
    return float(cv * np.sum(np.abs(u) ** p) + cv * np.sum(K * a))


def besov_capacity(op: SpectralOperator, alpha: float, beta: float, p: float, E: DiscreteSet,
                   solver_opts=None, levels=None) -> CapacityResult:
    """Besov capacity over u = 1 on E, 0 <= u <= 1, energy ||u||_p^p + N_H(u)^p.

    The heat-flavor seminorm uses the fixed level ladder ``levels`` (default:
    the resolvable window of the grid).
    """
    if not p >= 1:
        raise InvalidArgument("p must be >= 1")
    _check_set(op, E)
    params = BesovParams(p, p, beta, "heat", alpha=alpha)
    if E.is_empty():
        return _zero_result(op.grid)
    opts = solver_opts or SolverOptions()
    K = _besov_kernel(op, params, levels)
    u, iters, ok = _besov_solve(op, params, K, E, opts)
    value = _besov_value(op, params, K, u)
    # KKT residual: projected gradient of the energy on the free box coordinates
    cv = op.grid.cell_volume
    diff = u[:, None] - u[None, :]
    Ks = 0.5 * (K + K.T)
    g = cv * p * np.abs(u) ** (p - 1) * np.sign(u) + 2.0 * cv * p * np.sum(
        Ks * np.abs(diff) ** (p - 1) * np.sign(diff), axis=1
    )
    free = ~E.membership
    pg = np.where(u <= 1e-12, np.minimum(g, 0.0), np.where(u >= 1 - 1e-12, np.maximum(g, 0.0), g))
    resid = float(np.max(np.abs(pg[free]), initial=0.0) / max(value, 1e-300))
    return CapacityResult(value, GridFunction(op.grid, u), iters, resid, ok)


def besov_capacity_variants(op, alpha, beta, p, E: DiscreteSet, solver_opts=None, levels=None) -> dict:
    """Relaxed, interior (one-cell dilation) and smooth-class values for one set.

    The smooth-class value takes the interior minimizer, mollifies it at the
    finest resolvable radius, rescales so it is >= 1 on E and clips to [0, 1];
    it is an upper bound for the relaxed value.
    """
    relaxed = besov_capacity(op, alpha, beta, p, E, solver_opts, levels)
    interior = besov_capacity(op, alpha, beta, p, E.dilate(), solver_opts, levels)
    params = BesovParams(p, p, beta, "heat", alpha=alpha)
    K = _besov_kernel(op, params, levels)
    smooth = relaxed.value
    if not E.is_empty():
        v = mollify(interior.minimizer, 2.0 * op.grid.max_spacing).values
        low = float(np.min(v[E.membership]))
        if low > 0:
            v = np.clip(v / low, 0.0, 1.0)
            smooth = _besov_value(op, params, K, v)
        else:
            smooth = math.inf
    rel = abs(interior.value - relaxed.value) / relaxed.value if relaxed.value > 0 else 0.0
    return {
        "relaxed": relaxed.value,
        "interior": interior.value,
        "smooth": smooth,
        "interior_relative_change": rel,
    }


# -------------------------------------------------------- property suite
def _random_set(grid: Grid, rng, density: float) -> DiscreteSet:
    m = rng.random(grid.n) < density
    if not m.any():
        m[rng.integers(grid.n)] = True
    return DiscreteSet(grid, m)


def capacity_property_suite(cap_op, grid: Grid, trials: int = 20, seed: int = 0,
                            tol: float = 1e-8, workers: int = 1) -> dict:
    """Empty set, monotonicity, subadditivity and chain continuity of a set function.

    ``cap_op`` maps a DiscreteSet to a CapacityResult (or a float). Values are
    cached per set; distinct sets may be evaluated concurrently with
    ``workers`` > 1 (the operator is only read).
    """
    if trials < 20:
        raise InvalidArgument("trials must be at least 20")
    rng = np.random.default_rng(seed)
    pairs_nested, pairs_union, chains = [], [], []
    for _ in range(trials):
        small = _random_set(grid, rng, rng.uniform(0.02, 0.15))
        extra = _random_set(grid, rng, rng.uniform(0.02, 0.15))
        pairs_nested.append((small, small | extra))
        pairs_union.append((small, extra))
    for _ in range(max(1, trials // 10)):
        base = _random_set(grid, rng, 0.3)
        nodes = rng.permutation(base.nodes)
        k = len(nodes)
        cuts = sorted({max(1, int(round(k * f))) for f in (0.25, 0.5, 0.75, 1.0)})
        chains.append([DiscreteSet.from_nodes(grid, nodes[:c]) for c in cuts])
    single = DiscreteSet.from_nodes(grid, [grid.identity_node])

    sets: dict[bytes, DiscreteSet] = {}

    def remember(S):
        sets.setdefault(S.key(), S)

    for a, b in pairs_nested:
        remember(a), remember(b)
    for a, b in pairs_union:
        remember(a), remember(b), remember(a | b)
    for ch in chains:
        for S in ch:
            remember(S)
    remember(single)
    empty = DiscreteSet.empty(grid)
    remember(empty)

    def value(S):
        r = cap_op(S)
        return float(r.value if isinstance(r, CapacityResult) else r)

    keys = sorted(sets)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(lambda k: value(sets[k]), keys))
    else:
        vals = [value(sets[k]) for k in keys]
    cache = dict(zip(keys, vals))
    cap = lambda S: cache[S.key()]  # noqa: E731

    def slack(*vs):
        return tol * max(1.0, *[abs(v) for v in vs])

    mono = [cap(a) <= cap(b) + slack(cap(b)) for a, b in pairs_nested]
    sub = [cap(a | b) <= cap(a) + cap(b) + slack(cap(a), cap(b)) for a, b in pairs_union]
    dec = [all(cap(x) >= cap(y) - slack(cap(x)) for x, y in zip(ch[::-1], ch[::-1][1:])) for ch in chains]
    inc = [all(cap(x) <= cap(y) + slack(cap(y)) for x, y in zip(ch, ch[1:])) and cap(ch[-1]) == cap(ch[-1]) for ch in chains]
    same = value(single) == cap(single)
    report = {
        "empty": cap(empty) == 0.0,
        "monotone": all(mono),
        "subadditive": all(sub),
        "decreasing_chain": all(dec),
        "increasing_chain": all(inc),
        "singleton_repeat": bool(same),
        "evaluations": len(keys),
        "failures": {
            "monotone": [i for i, ok in enumerate(mono) if not ok],
            "subadditive": [i for i, ok in enumerate(sub) if not ok],
        },
        "max_subadditive_ratio": max(
            (cap(a | b) / (cap(a) + cap(b)) for a, b in pairs_union if cap(a) + cap(b) > 0),
            default=0.0,
        ),
    }
    report["passed"] = all(report[k] for k in ("empty", "monotone", "subadditive", "decreasing_chain",
                                               "increasing_chain", "singleton_repeat"))
    return report


# ------------------------------------------------ strong capacitary check
def capacitary_integral(cap_op, u, p: float, levels: int = 40, span: float = 2.0**-20,
                        rtol: float = 1e-3, detail: bool = False):
    """int_0^inf Cap({|u| >= lam}) d(lam^p) from a geometric lambda ladder.

    The ladder has ``levels`` points from ``span * max|u|`` to ``max|u|``.
    Since lam -> Cap({|u| >= lam}) is nonincreasing, every ladder interval
    carries a lower (right endpoint) and an upper (left endpoint) Riemann
    bound. Intervals are bisected where the bounds differ most until the
    total bracket width is at most ``rtol`` times the estimate. An interval
    holding a single distinct value of |u| is split at that value, after
    which its lower bound is exact, so the loop always terminates. The piece
    below the ladder is bracketed by Cap at its bottom level and Cap of the
    support. Returns the bracket midpoint (and the bracket with ``detail``).
    """
    vals = np.abs(np.asarray(_values(u), dtype=float))
    M = float(vals.max(initial=0.0))
    if M == 0:
        return (0.0, {"lower": 0.0, "upper": 0.0, "evaluations": 0}) if detail else 0.0
    if not isinstance(u, GridFunction):
        raise InvalidArgument("u must be a GridFunction")
    grid = u.grid
    cache: dict[bytes, float] = {}

    def C(lam: float) -> float:
        S = DiscreteSet(grid, vals >= lam)
        k = S.key()
        if k not in cache:
            r = cap_op(S)
            cache[k] = float(r.value if isinstance(r, CapacityResult) else r)
        return cache[k]

    lam = list(np.geomspace(span * M, M, levels))
    caps = [C(x) for x in lam]
    distinct = np.unique(vals[vals > 0])

    def gap(i):
        return (caps[i] - caps[i + 1]) * (lam[i + 1] ** p - lam[i] ** p)

    def inside(i):
        a, b = lam[i], lam[i + 1]
        lo, hi = np.searchsorted(distinct, a, side="right"), np.searchsorted(distinct, b, side="left")
        return distinct[lo:hi]

    def bounds():
        # an interval without interior values of |u| has Cap constant on
        # (lam_i, lam_{i+1}], so its right-endpoint value is exact
        lower = upper = 0.0
        for i in range(len(lam) - 1):
            d = lam[i + 1] ** p - lam[i] ** p
            lower += caps[i + 1] * d
            upper += (caps[i] if inside(i).size else caps[i + 1]) * d
        below = distinct[distinct < lam[0]]
        top = C(float(below[0])) if below.size else caps[0]
        return lower + caps[0] * lam[0] ** p, upper + top * lam[0] ** p

    lower, upper = bounds()
    while upper - lower > rtol * 0.5 * (upper + lower):
        gaps = [gap(i) if inside(i).size else 0.0 for i in range(len(lam) - 1)]
        i = int(np.argmax(gaps))
        if gaps[i] <= 0:
            break
        pts = inside(i)
        x = float(pts[0]) if pts.size == 1 else math.sqrt(lam[i] * lam[i + 1])
        lam.insert(i + 1, x)
        caps.insert(i + 1, C(x))
        lower, upper = bounds()
    est = 0.5 * (lower + upper)
    if detail:
        return est, {"lower": lower, "upper": upper, "evaluations": len(cache), "levels": len(lam)}
    return est


def strong_capacitary_check(op: SpectralOperator, cap_op, s: float, p: float, suite,
                            with_maximal: bool = False, levels: int = 40, norm: str = "sobolev",
                            besov_params: BesovParams | None = None) -> dict:
    """max over the suite of int Cap({|u| >= lam}) d(lam^p) / ||u||^p.

    ``norm`` is "sobolev" (||L^s u||_p^p) or "besov" (||u||_p^p + N(u)^p with
    ``besov_params``). With ``with_maximal`` the level sets are those of the
    maximal function of u. The ladder is also doubled (2 levels - 1) and the
    largest relative change is reported.
    """
    grid = op.grid
    Q = grid.group.hom_dimension
    if norm == "sobolev" and not 1 < p < Q / (2 * s):
        raise InvalidArgument(f"need 1 < p < Q/(2s) = {Q / (2 * s)}")
    if norm == "besov" and besov_params is None:
        raise InvalidArgument("besov norm needs besov_params")
    from .besov import besov_energy

    cv = grid.cell_volume
    ratios, changes, rows = [], [], []
    for item in suite:
        name, u = item if isinstance(item, tuple) else (f"f{len(rows)}", item)
        u = u if isinstance(u, GridFunction) else GridFunction(grid, u)
        if norm == "sobolev":
            denom = float(lp_norm(op.apply(lambda lam: lam**s, u.values), p, cv)) ** p
        else:
            denom = besov_energy(op, besov_params, u.values)
        w = maximal_function(grid, u) if with_maximal else u
        coarse = capacitary_integral(cap_op, w, p, levels)
        fine = capacitary_integral(cap_op, w, p, 2 * levels - 1)
        ratio = fine / denom if denom > 0 else (0.0 if fine == 0 else math.inf)
        change = abs(fine - coarse) / fine if fine > 0 else 0.0
        ratios.append(ratio)
        changes.append(change)
        rows.append({"name": name, "integral": fine, "norm_power": denom, "ratio": ratio,
                     "refinement_change": change})
    return {
        "ratio": max(ratios, default=0.0),
        "max_refinement_change": max(changes, default=0.0),
        "rows": rows,
    }

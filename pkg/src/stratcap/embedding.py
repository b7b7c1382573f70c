"""Tents, capacity-minimizing functions and embedding verifiers.

A measure on G x R_+ is a list of atoms (node, level, weight) with the level
an index into a fixed ladder of t values. The tent over O is

    T(O) = {(g, t) : B(g, t) is contained in O},

with B(g, t) the open lattice ball {g gamma : |gamma| < t}. Infima over all
open sets are replaced by a declared finite family of sets (grid balls on a
coarse subgrid with dyadic radii and small unions of them), so every
capacity-side constant computed here is relative to that family.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import CapacityResult, DiscreteSet
from .errors import InvalidArgument
from .grid import Grid, GridFunction, SpectralOperator, _values, lp_norm
from .semigroups import frac_heat_apply, poisson_apply

__all__ = [
    "DiscreteMeasure",
    "EmbeddingReport",
    "FamilyEvaluation",
    "default_t_levels",
    "tent",
    "tent_identity_report",
    "build_family",
    "cp_minimizing",
    "random_measure",
    "carleson_embedding_verify",
    "trace_embedding_verify",
    "tent_lower_bound_check",
    "read_measure_csv",
]


def default_t_levels(grid: Grid, top_fraction: float = 0.5) -> np.ndarray:
    """Dyadic levels h, 2h, 4h, ... not exceeding ``top_fraction`` of the inradius."""
    h = float(np.min(grid.spacing[: grid.group.horizontal_dim]))
    top = top_fraction * grid.inradius()
    k = int(np.floor(np.log2(max(top / h, 1.0))))
    return h * 2.0 ** np.arange(k + 1)


# --------------------------------------------------------------- measures
@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms (node, level index, weight); ``t_levels`` is None for measures on G."""

    grid: Grid
    nodes: np.ndarray
    weights: np.ndarray
    levels: np.ndarray | None = None
    t_levels: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape != w.shape:
            raise InvalidArgument("nodes and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidArgument("weights must be finite and nonnegative")
        if nodes.size and (nodes.min() < 0 or nodes.max() >= self.grid.n):
            raise InvalidArgument("atom node out of range")
        if (self.levels is None) != (self.t_levels is None):
            raise InvalidArgument("levels and t_levels go together")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", w)
        if self.levels is not None:
            lv = np.asarray(self.levels, dtype=np.int64).ravel()
            tl = np.asarray(self.t_levels, dtype=float).ravel()
            if lv.shape != nodes.shape:
                raise InvalidArgument("levels and nodes differ in length")
            if lv.size and (lv.min() < 0 or lv.max() >= tl.size):
                raise InvalidArgument("level index out of range")
            if np.any(tl <= 0) or np.any(np.diff(tl) <= 0):
                raise InvalidArgument("t_levels must be positive and increasing")
            object.__setattr__(self, "levels", lv)
            object.__setattr__(self, "t_levels", tl)

    @property
    def on_product(self) -> bool:
        return self.levels is not None

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def scaled(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.grid, self.nodes, c * self.weights, self.levels, self.t_levels)

    def mass_of(self, mask: np.ndarray) -> float:
        """Mass of a set given as a boolean array over nodes (or nodes x levels)."""
        if self.on_product:
            hit = mask[self.nodes, self.levels]
        else:
            hit = mask[self.nodes]
        return float(np.sum(np.where(hit, self.weights, 0.0)))


def read_measure_csv(path, grid: Grid, t_levels=None) -> DiscreteMeasure:
    """Read rows of coordinates, optional ``t`` and ``weight``.

    With a ``t`` column every t must match one of ``t_levels`` (default: the
    dyadic ladder of the grid) to relative precision 1e-9.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidArgument("measure file is empty")
    header = [h.strip().lower() for h in rows[0]]
    if "weight" not in header:
        raise InvalidArgument("measure file needs a weight column")
    wi = header.index("weight")
    ti = header.index("t") if "t" in header else None
    coord_cols = [i for i in range(len(header)) if i not in (wi, ti)][: grid.dim]
    body = rows[1:]
    pts = np.array([[float(r[i]) for i in coord_cols] for r in body]).reshape(-1, grid.dim)
    nodes = grid.locate(pts) if len(pts) else np.zeros(0, dtype=int)
    if np.any(nodes < 0):
        raise InvalidArgument("measure atom outside the grid")
    w = np.array([float(r[wi]) for r in body])
    if ti is None:
        return DiscreteMeasure(grid, nodes, w)
    tl = default_t_levels(grid) if t_levels is None else np.asarray(t_levels, dtype=float)
    ts = np.array([float(r[ti]) for r in body])
    lv = np.array([int(np.argmin(np.abs(tl - t))) for t in ts], dtype=int)
    if ts.size and np.max(np.abs(tl[lv] - ts) / ts) > 1e-9:
        raise InvalidArgument("measure t values must lie on the t ladder")
    return DiscreteMeasure(grid, nodes, w, lv, tl)


def random_measure(grid: Grid, atoms: int, seed: int = 0, t_levels=None, on_product: bool = True) -> DiscreteMeasure:
    """Atoms at nodes within half the inradius, weights uniform in [0.5, 1.5]."""
    rng = np.random.default_rng(seed)
    pool = np.flatnonzero(grid.node_norms <= 0.5 * grid.inradius())
    nodes = rng.choice(pool, size=atoms, replace=True)
    w = rng.uniform(0.5, 1.5, size=atoms)
    if not on_product:
        return DiscreteMeasure(grid, nodes, w)
    tl = default_t_levels(grid) if t_levels is None else np.asarray(t_levels, dtype=float)
    lv = rng.integers(0, tl.size, size=atoms)
    return DiscreteMeasure(grid, nodes, w, lv, tl)


# ------------------------------------------------------------------ tents
def tent(grid: Grid, O: DiscreteSet, t_levels) -> np.ndarray:
    """Boolean (nodes, levels) array of T(O) = {(g, t) : B(g, t) inside O}."""
    t_levels = np.asarray(t_levels, dtype=float)
    out = np.zeros((grid.n, t_levels.size), dtype=bool)
    member = O.membership
    if not member.any():
        return out
    for k, t in enumerate(t_levels):
        inside = member.copy()
        for gamma in grid.lattice_ball(float(t)):
            tgt = grid.right_translate_map(gamma * grid.spacing)
            ok = tgt >= 0
            inside &= ok
            inside[ok] &= member[tgt[ok]]
        out[:, k] = inside
    return out


def tent_identity_report(grid: Grid, O1: DiscreteSet, O2: DiscreteSet, t_levels) -> dict:
    """Compare tents of unions and intersections of two sets.

    ``intersection_identity`` is T(O1 & O2) = T(O1) & T(O2), which holds for
    every pair. ``union_as_intersection`` tests T(O1 | O2) = T(O1) & T(O2)
    literally; it fails whenever one tent is nonempty and the sets are
    disjoint. ``union_contains_union`` is T(O1 | O2) containing T(O1) | T(O2).
    """
    T1, T2 = tent(grid, O1, t_levels), tent(grid, O2, t_levels)
    Tu, Ti = tent(grid, O1 | O2, t_levels), tent(grid, O1 & O2, t_levels)
    antitone = all(
        bool(np.all(T[:, 1:] <= T[:, :-1])) for T in (T1, T2, Tu, Ti)
    )
    return {
        "intersection_identity": bool(np.array_equal(Ti, T1 & T2)),
        "union_as_intersection": bool(np.array_equal(Tu, T1 & T2)),
        "union_contains_union": bool(np.all(Tu >= (T1 | T2))),
        "antitone_in_t": antitone,
    }


# ----------------------------------------------------------------- family
def build_family(grid: Grid, stride: int = 4, max_union: int = 3, cap: int = 1000, seed: int = 0,
                 radii=None) -> list[DiscreteSet]:
    """Balls on a coarse subgrid with dyadic radii, plus unions of up to ``max_union``.

    Centres are the nodes whose lattice indices are multiples of ``stride``
    on every horizontal axis (and zero on higher strata). All single balls
    are kept; unions are drawn with a seeded generator until the family
    holds ``cap`` distinct nonempty sets.
    """
    n1 = grid.group.horizontal_dim
    idx = grid.indices
    centre_mask = np.all(idx[:, :n1] % stride == 0, axis=1) & np.all(idx[:, n1:] == 0, axis=1)
    centres = np.flatnonzero(centre_mask)
    if radii is None:
        radii = default_t_levels(grid, top_fraction=1.0)[1:]
    balls: dict[bytes, DiscreteSet] = {}
    for c in centres:
        for r in radii:
            B = DiscreteSet.ball(grid, grid.coords[c], float(r))
            if not B.is_empty():
                balls.setdefault(B.key(), B)
    singles = [balls[k] for k in sorted(balls)]
    family = dict(balls)
    rng = np.random.default_rng(seed)
    attempts = 0
    while len(family) < cap and attempts < 20 * cap and max_union >= 2 and len(singles) > 1:
        attempts += 1
        k = int(rng.integers(2, max_union + 1))
        pick = rng.choice(len(singles), size=k, replace=False)
        S = singles[pick[0]]
        for j in pick[1:]:
            S = S | singles[j]
        family.setdefault(S.key(), S)
    order = singles + [family[k] for k in family if k not in balls]
    return order[:cap]


class FamilyEvaluation:
    """Capacities and tents of a family, computed once and shared by measures."""

    def __init__(self, grid: Grid, family, cap_op, t_levels=None):
        if not family:
            raise InvalidArgument("family is empty")
        self.grid = grid
        self.family = list(family)
        self.t_levels = None if t_levels is None else np.asarray(t_levels, dtype=float)
        vals = []
        for S in self.family:
            r = cap_op(S)
            vals.append(float(r.value if isinstance(r, CapacityResult) else r))
        self.capacities = np.array(vals)
        self._tents = None

    @property
    def tents(self) -> list[np.ndarray]:
        if self._tents is None:
            if self.t_levels is None:
                raise InvalidArgument("family was evaluated without t levels")
            self._tents = [tent(self.grid, S, self.t_levels) for S in self.family]
        return self._tents

    def masses(self, mu: DiscreteMeasure) -> np.ndarray:
        """mu(T(O)) for product measures, mu(O) for measures on G."""
        if mu.on_product:
            if self.t_levels is None or not np.array_equal(mu.t_levels, self.t_levels):
                raise InvalidArgument("measure and family use different t ladders")
            return np.array([mu.mass_of(T) for T in self.tents])
        return np.array([mu.mass_of(S.membership) for S in self.family])


def _cp_from(capacities: np.ndarray, masses: np.ndarray, t: float) -> float:
    ok = masses >= t
    return float(np.min(capacities[ok])) if np.any(ok) else math.inf


def cp_minimizing(op, cap_op, mu: DiscreteMeasure, t: float, family) -> float:
    """c_p(mu; t) = min Cap(O) over family members with mu(T(O)) >= t (inf if none)."""
    if not t > 0:
        raise InvalidArgument("t must be positive")
    ev = family if isinstance(family, FamilyEvaluation) else FamilyEvaluation(
        op.grid, family, cap_op, mu.t_levels
    )
    return _cp_from(ev.capacities, ev.masses(mu), t)


# ---------------------------------------------------------------- reports
@dataclass
class EmbeddingReport:
    constants: dict
    ratios: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"constants": self.constants, "ratios": self.ratios, **self.extra}


def _step_integral(masses, capacities, p, q):
    """int_0^inf t^{p/(p-q) - 1} / c(t)^{q/(p-q)} dt for the step function c(t)."""
    a = p / (p - q)
    ts = np.unique(masses[masses > 0])
    total, prev = 0.0, 0.0
    for m in ts:
        c = _cp_from(capacities, masses, m)
        if c == 0:
            return math.inf
        total += (m**a - prev**a) / a / c ** (q / (p - q))
        prev = m
    return total


def _dyadic_sum(masses, capacities, p, q):
    """sum_j 2^{jp/(p-q)} / c(2^j)^{q/(p-q)} over dyadic 2^j up to the largest mass."""
    pos = masses[masses > 0]
    if pos.size == 0:
        return 0.0
    hi = int(np.floor(np.log2(pos.max())))
    lo = int(np.floor(np.log2(pos.min()))) - 1
    total = 0.0
    for j in range(lo, hi + 1):
        c = _cp_from(capacities, masses, 2.0**j)
        if c == 0:
            return math.inf
        if math.isfinite(c):
            total += 2.0 ** (j * p / (p - q)) / c ** (q / (p - q))
    return total


def _ratio_terms(F: np.ndarray, w: np.ndarray, q: float):
    """Strong-type sum and the weak-type sup, built so that weak <= strong exactly.

    Both use elementwise-smaller terms over the same summation order, and
    floating-point addition and powers are monotone.
    """
    a = np.abs(F)
    strong = float(np.sum(w * a**q))
    weak = 0.0
    for v in np.unique(a):
        if v <= 0:
            continue
        weak = max(weak, float(np.sum(np.where(a >= v, w * v**q, 0.0))))
    return strong, weak


def _analysis_constants(values: np.ndarray, w: np.ndarray, norms: np.ndarray, q: float):
    A1 = A2 = 0.0
    for j in range(values.shape[1]):
        if norms[j] <= 0:
            continue
        strong, weak = _ratio_terms(values[:, j], w, q)
        A1 = max(A1, strong ** (1.0 / q) / norms[j])
        A2 = max(A2, weak ** (1.0 / q) / norms[j])
    return A1, A2


def _capacity_constants(masses, capacities, p, q):
    out = {}
    if q >= p:
        with np.errstate(divide="ignore"):
            terms = np.where(masses > 0, masses ** (p / q) / capacities, 0.0)
        A3 = float(np.max(terms, initial=0.0))
        A4 = 0.0
        for m in np.unique(masses[masses > 0]):
            c = _cp_from(capacities, masses, m)
            A4 = max(A4, m ** (1.0 / q) / c ** (1.0 / p) if c > 0 else math.inf)
        out["capacity"] = A3
        out["cp"] = A4
    else:
        out["capacity"] = math.nan
        out["cp_integral"] = _step_integral(masses, capacities, p, q)
        out["cp_dyadic"] = _dyadic_sum(masses, capacities, p, q)
    return out


def _suite_matrix(grid, suite):
    cols, names = [], []
    for k, item in enumerate(suite):
        name, u = item if isinstance(item, tuple) else (f"f{k}", item)
        cols.append(np.asarray(_values(u), dtype=float))
        names.append(name)
    if not cols:
        raise InvalidArgument("suite is empty")
    return np.stack(cols, axis=1), names


def _sobolev_norms(op, s, p, U):
    cv = op.grid.cell_volume
    return np.asarray(lp_norm(op.apply(lambda lam: lam**s, U), p, cv))


def carleson_embedding_verify(op: SpectralOperator, sigma: float, s: float, p: float, q: float,
                              mu: DiscreteMeasure, suite, family, cap_op=None,
                              parameterization: str = "poisson", alpha: float = 0.5) -> EmbeddingReport:
    """Constants of the four equivalent statements for the extension embedding.

    (i)   strong type: max_u ||T_t u||_{L^q(mu)} / ||L^s u||_p
    (iii) weak type:   max_u sup_lam lam mu(|T_t u| >= lam)^{1/q} / ||L^s u||_p
    (iv)  capacity:    sup_O mu(T(O))^{p/q} / Cap(O)             (q >= p)
    (ii)  cp:          sup_t t^{1/q} / c_p(mu; t)^{1/p}          (q >= p)
                       int and dyadic sum of c_p                  (q < p)

    T_t is P_{sigma,t} or, with ``parameterization="heat"``, the fractional
    heat semigroup at time t^{2 alpha}. ``family`` is a list of sets (then
    ``cap_op`` gives their capacities) or a prepared FamilyEvaluation.
    """
    if not mu.on_product:
        raise InvalidArgument("the extension embedding needs a measure on G x R+")
    if not p > 1 or not q > 0:
        raise InvalidArgument("need p > 1 and q > 0")
    grid = op.grid
    Q = grid.group.hom_dimension
    ev = family if isinstance(family, FamilyEvaluation) else FamilyEvaluation(grid, family, cap_op, mu.t_levels)
    U, names = _suite_matrix(grid, suite)
    norms = _sobolev_norms(op, s, p, U)
    vals = np.zeros((mu.nodes.size, U.shape[1]))
    for k, t in enumerate(mu.t_levels):
        at = mu.levels == k
        if not np.any(at):
            continue
        if parameterization == "poisson":
            TU = poisson_apply(op, sigma, float(t), U)
        elif parameterization == "heat":
            TU = frac_heat_apply(op, alpha, float(t) ** (2 * alpha), U)
        else:
            raise InvalidArgument(f"unknown parameterization {parameterization!r}")
        vals[at] = TU[mu.nodes[at]]
    A1, A2 = _analysis_constants(vals, mu.weights, norms, q)
    masses = ev.masses(mu)
    cap_side = _capacity_constants(masses, ev.capacities, p, q)
    constants = {"(i) strong-type": float(A1), "(iii) weak-type": float(A2)}
    if q >= p:
        constants["(iv) capacity"] = float(cap_side["capacity"])
        constants["(ii) cp"] = float(cap_side["cp"])
    else:
        constants["(ii) cp integral"] = float(cap_side["cp_integral"])
        constants["(ii) cp dyadic sum"] = float(cap_side["cp_dyadic"])
    ratios = {}
    if q >= p and cap_side["capacity"] > 0:
        ratios["(i) / (iv)^(1/p)"] = float(A1 / cap_side["capacity"] ** (1.0 / p))
    pre = 1 < p < Q / (2 * s)
    chain = (not math.isfinite(cap_side.get("capacity", math.inf)) and q >= p) or math.isfinite(A1)
    return EmbeddingReport(
        constants,
        ratios,
        {
            "weak_le_strong": bool(A2 <= A1),
            "chain_iv_implies_i": bool(chain),
            "preconditions": {"p_range": bool(pre), "p_upper": Q / (2 * s)},
            "family_size": len(ev.family),
            "suite": names,
        },
    )


def trace_embedding_verify(op: SpectralOperator, s: float, p: float, q: float, nu: DiscreteMeasure,
                           suite, family, cap_op=None, norm_fn=None) -> EmbeddingReport:
    """Constants for the trace inequality ||u||_{L^q(nu)} <= C ||u||.

    (i) strong and weak type as in the extension case; (ii) for q >= p the
    capacity constant sup_E nu(E)^{1/q} / Cap(E)^{1/p}, for q < p the
    integral and dyadic sum of h_p(t) = min{Cap(E) : nu(E) >= t}.
    ``norm_fn`` maps the (nodes, functions) matrix to function norms; the
    default is ||L^s u||_p. Passing a Besov norm and a Besov capacity gives
    the Besov variant.
    """
    if nu.on_product:
        raise InvalidArgument("the trace embedding needs a measure on G")
    grid = op.grid
    Q = grid.group.hom_dimension
    ev = family if isinstance(family, FamilyEvaluation) else FamilyEvaluation(grid, family, cap_op)
    U, names = _suite_matrix(grid, suite)
    norms = _sobolev_norms(op, s, p, U) if norm_fn is None else np.asarray(norm_fn(U), dtype=float)
    B1, B_weak = _analysis_constants(U[nu.nodes], nu.weights, norms, q)
    masses = ev.masses(nu)
    constants = {"(i) strong-type": float(B1), "(i) weak-type": float(B_weak)}
    if q >= p:
        with np.errstate(divide="ignore"):
            terms = np.where(masses > 0, masses ** (1.0 / q) / ev.capacities ** (1.0 / p), 0.0)
        constants["(ii) capacity"] = float(np.max(terms, initial=0.0))
    else:
        constants["(ii) h_p integral"] = float(_step_integral(masses, ev.capacities, p, q))
        constants["(ii) h_p dyadic sum"] = float(_dyadic_sum(masses, ev.capacities, p, q))
    ratios = {}
    if q >= p and constants["(ii) capacity"] > 0:
        ratios["(i) / (ii)"] = float(B1 / constants["(ii) capacity"])
    return EmbeddingReport(
        constants,
        ratios,
        {
            "weak_le_strong": bool(B_weak <= B1),
            "preconditions": {"p_range": bool(1 < p < Q / (2 * s)), "p_upper": Q / (2 * s)},
            "family_size": len(ev.family),
            "suite": names,
        },
    )


def tent_lower_bound_check(op: SpectralOperator, sigma: float, O: DiscreteSet, f, t_levels=None) -> float:
    """inf over (g, t) in T(O) of P_{sigma,t}(|f|)(g), for O inside {|f| >= 1}."""
    grid = op.grid
    vals = np.abs(np.asarray(_values(f), dtype=float))
    if np.any(O.membership & (vals < 1.0)):
        raise InvalidArgument("O must lie inside the level set {|f| >= 1}")
    t_levels = default_t_levels(grid) if t_levels is None else np.asarray(t_levels, dtype=float)
    T = tent(grid, O, t_levels)
    if not T.any():
        raise InvalidArgument("the tent of O is empty on this t ladder")
    best = math.inf
    for k, t in enumerate(t_levels):
        if T[:, k].any():
            P = poisson_apply(op, sigma, float(t), vals)
            best = min(best, float(np.min(P[T[:, k]])))
    return best

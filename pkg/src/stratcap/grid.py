"""Bounded lattice grids on a stratified group and the discrete sub-Laplacian.

Nodes form a finite window of a lattice *subgroup*: horizontal steps ``h``
and, on H1, vertical step ``h_x h_y / 2``. Right translation by one
horizontal step therefore maps nodes to nodes exactly, and the discrete
horizontal fields

    D_j u(g) = (u(g exp(h_j X_j)) - u(g)) / h_j

are differences of a (partial) permutation and the identity. The operator
``L = sum_j D_j^T D_j`` is then symmetric, positive semidefinite and an
M-matrix, which is what makes every semigroup built from it positivity
preserving.

Boundary handling:

* ``dirichlet``: values outside the window are zero.
* ``periodic``: indices wrap. On R^n this is the torus; on H1 it is the
  twisted torus obtained by wrapping the lattice indices.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    InvalidArgument,
    NumericError,
    ResolutionWarning,
    ResourceLimitError,
    SingularMultiplierError,
)
from .groups import GroupDescriptor, get_group

__all__ = [
    "MAX_NODES",
    "Grid",
    "GridFunction",
    "SpectralOperator",
    "build_sublaplacian",
    "apply_spectral_function",
    "convolve",
    "mollify",
    "truncate",
    "bump_profile",
    "write_grid_function",
    "read_grid_function",
]

MAX_NODES = 8192
BOUNDARIES = ("dirichlet", "periodic")


class Grid:
    """A window of a lattice subgroup, centred so the identity is a node.

    Parameters
    ----------
    group : GroupDescriptor or str
        Group instance or its id ("r1", "r2", "h1").
    points_per_axis : int or sequence of int
        Node count along every coordinate axis.
    half_width : float
        Half width ``a`` of the horizontal box. The horizontal spacing is
        ``2a/(N+1)`` for Dirichlet (the zero ghost nodes sit at ``+-a``) and
        ``2a/N`` for periodic boundaries. Higher-stratum spacings follow from
        the lattice rule of the group.
    boundary : {"dirichlet", "periodic"}
    """

    def __init__(
        self,
        group: GroupDescriptor | str,
        points_per_axis: int | Sequence[int],
        half_width: float = 1.0,
        boundary: str = "dirichlet",
    ):
        self.group = get_group(group) if isinstance(group, str) else group
        d = self.group.dim
        counts = np.broadcast_to(np.asarray(points_per_axis, dtype=int), (d,))
        if np.any(counts < 1):
            raise InvalidArgument("points_per_axis must be positive")
        n = int(np.prod(counts))
        if n > MAX_NODES:
            raise ResourceLimitError(f"{n} nodes requested, cap is {MAX_NODES}")
        if not half_width > 0:
            raise InvalidArgument("half_width must be positive")
        boundary = str(boundary).lower()
        if boundary not in BOUNDARIES:
            raise InvalidArgument(f"boundary must be one of {BOUNDARIES}")
        if (
            boundary == "periodic"
            and self.group.lattice_index > 1
            and np.any(counts % 2)
        ):
            raise InvalidArgument("periodic H1 windows need an even count on every axis")
        self.boundary = boundary
        self.shape = tuple(int(c) for c in counts)
        self.half_width = float(half_width)
        n1 = self.group.horizontal_dim
        denom = counts[:n1] + (1 if boundary == "dirichlet" else 0)
        self.spacing = self.group.lattice_spacings(2.0 * self.half_width / denom)
        self.lower = -(counts // 2)
        self.upper = self.lower + counts - 1
        grids = np.meshgrid(
            *[np.arange(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)],
            indexing="ij",
        )
        box = np.stack([g.ravel() for g in grids], axis=1)
        keep = self.group.lattice_mask(box)
        self._box_to_node = np.full(box.shape[0], -1, dtype=np.int64)
        self._box_to_node[keep] = np.arange(int(keep.sum()))
        self.indices = box[keep]
        self.coords = self.indices * self.spacing
        self.n = int(self.indices.shape[0])
        # each node owns one fundamental cell of the generated lattice
        self.cell_volume = float(np.prod(self.spacing)) * self.group.lattice_index
        self.identity_node = int(self.lookup(np.zeros(d, dtype=int)))
        self._norms = None

    # ------------------------------------------------------------------ basics
    @property
    def dim(self) -> int:
        return self.group.dim

    @property
    def max_spacing(self) -> float:
        return float(np.max(self.spacing))

    @property
    def node_norms(self) -> np.ndarray:
        """Homogeneous norm |g| of every node."""
        if self._norms is None:
            self._norms = self.group.hom_norm(self.coords)
        return self._norms

    def __repr__(self) -> str:
        return (
            f"Grid({self.group.id!r}, shape={self.shape}, "
            f"half_width={self.half_width}, boundary={self.boundary!r})"
        )

    def describe(self) -> dict:
        return {
            "group": self.group.id,
            "points_per_axis": list(self.shape),
            "half_width": self.half_width,
            "boundary": self.boundary,
            "spacing": [float(h) for h in self.spacing],
            "nodes": self.n,
        }

    def same_as(self, other: "Grid") -> bool:
        return (
            other is self
            or (
                other.group == self.group
                and other.shape == self.shape
                and other.boundary == self.boundary
                and np.allclose(other.spacing, self.spacing, rtol=0, atol=0)
            )
        )

    def inradius(self) -> float:
        """Largest r such that the homogeneous ball B(e, r) fits in the box."""
        ext = self.group.unit_ball_extent
        exps = self.group.dilation_exponents
        margin = np.minimum(-self.lower, self.upper).astype(float)
        margin += 1.0 if self.boundary == "dirichlet" else 0.5
        face = margin * self.spacing
        return float(np.min((face / ext) ** (1.0 / exps)))

    # ----------------------------------------------------------------- lookup
    def lookup(self, index) -> np.ndarray:
        """Flat node number of integer lattice indices.

        Dirichlet windows return -1 outside the box; periodic windows wrap.
        """
        idx = np.asarray(index, dtype=np.int64)
        shifted = idx - self.lower
        shape = np.asarray(self.shape)
        if self.boundary == "periodic":
            shifted = np.mod(shifted, shape)
            flat = np.ravel_multi_index(tuple(np.moveaxis(shifted, -1, 0)), self.shape)
            return self._box_to_node[flat]
        inside = np.all((shifted >= 0) & (shifted < shape), axis=-1)
        clipped = np.where(inside[..., None], shifted, 0)
        flat = np.ravel_multi_index(tuple(np.moveaxis(clipped, -1, 0)), self.shape)
        return np.where(inside, self._box_to_node[flat], -1)

    def index_of_point(self, points) -> np.ndarray:
        """Nearest lattice index vector of arbitrary group points."""
        pts = self.group.point(points)
        return self.group.snap_index(pts / self.spacing)

    def locate(self, points) -> np.ndarray:
        """Flat node number of the nearest node (-1 if outside a Dirichlet box)."""
        return self.lookup(self.index_of_point(points))

    def left_translate_map(self, gamma) -> np.ndarray:
        """Node numbers of gamma^{-1} g for every node g (lattice point gamma)."""
        prod = self.group.multiply(self.group.inverse(gamma), self.coords)
        return self.locate(prod)

    def right_translate_map(self, step) -> np.ndarray:
        """Node numbers of g * step for every node g (lattice point step)."""
        prod = self.group.multiply(self.coords, step)
        return self.locate(prod)

    def lattice_ball(self, radius: float, strict: bool = True) -> np.ndarray:
        """Integer index vectors gamma of the full lattice with |gamma| < radius."""
        ext = self.group.unit_ball_extent
        exps = self.group.dilation_exponents
        reach = np.floor(ext * radius**exps / self.spacing).astype(int) + 1
        axes = [np.arange(-r, r + 1) for r in reach]
        mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        mesh = mesh[self.group.lattice_mask(mesh)]
        norms = self.group.hom_norm(mesh * self.spacing)
        keep = norms < radius if strict else norms <= radius
        return mesh[keep]

    # --------------------------------------------------------------- functions
    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def from_callable(self, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Sample ``fn`` (called on the (n, dim) coordinate array) at the nodes."""
        return GridFunction(self, np.asarray(fn(self.coords), dtype=float))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n))

    def constant(self, c: float) -> "GridFunction":
        return GridFunction(self, np.full(self.n, float(c)))

    def delta(self, node: int | None = None) -> "GridFunction":
        """Discrete delta of unit Haar mass at ``node`` (default: identity)."""
        node = self.identity_node if node is None else int(node)
        v = np.zeros(self.n)
        v[node] = 1.0 / self.cell_volume
        return GridFunction(self, v)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on the nodes of a grid with Haar-weighted norms."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise InvalidArgument(
                f"expected {self.grid.n} values, got shape {v.shape}"
            )
        object.__setattr__(self, "values", v)

    def lp_norm(self, p: float = 2.0) -> float:
        return lp_norm(self.values, p, self.grid.cell_volume)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def inner(self, other: "GridFunction") -> float:
        return float(np.dot(self.values, _values(other)) * self.grid.cell_volume)

    def _wrap(self, v) -> "GridFunction":
        return GridFunction(self.grid, v)

    def __add__(self, other):
        return self._wrap(self.values + _values(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - _values(other))

    def __rsub__(self, other):
        return self._wrap(_values(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * _values(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / _values(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def __abs__(self):
        return self._wrap(np.abs(self.values))


def _values(u):
    return u.values if isinstance(u, GridFunction) else u


def lp_norm(values: np.ndarray, p: float, cell_volume: float, axis=0) -> np.ndarray:
    """Haar-weighted L^p norm (``p = inf`` is the max norm)."""
    a = np.abs(values)
    if np.isinf(p):
        return np.max(a, axis=axis) if a.size else 0.0
    if p <= 0:
        raise InvalidArgument("p must be positive")
    return (np.sum(a**p, axis=axis) * cell_volume) ** (1.0 / p)


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """Discrete sub-Laplacian together with its full eigendecomposition."""

    grid: Grid
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    fields: tuple = field(repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def zero_modes(self) -> np.ndarray:
        return self.eigenvalues == 0.0

    def multiplier(self, phi) -> np.ndarray:
        """Evaluate ``phi`` on the spectrum, rejecting non-finite values."""
        lam = self.eigenvalues
        m = np.asarray(phi(lam) if callable(phi) else phi, dtype=float)
        m = np.broadcast_to(m, lam.shape)
        bad = np.flatnonzero(~np.isfinite(m))
        if bad.size:
            k = int(bad[0])
            raise SingularMultiplierError(k, float(lam[k]))
        return m

    def apply_multiplier(self, m: np.ndarray, u):
        """V diag(m) V^T u for a vector, a matrix of columns or a GridFunction."""
        V = self.eigenvectors
        arr = _values(u)
        arr = np.asarray(arr, dtype=float)
        coef = V.T @ arr
        if coef.ndim == 1:
            out = V @ (m * coef)
        else:
            out = V @ (m[:, None] * coef)
        if isinstance(u, GridFunction):
            return GridFunction(self.grid, out)
        return out

    def apply(self, phi, u):
        return self.apply_multiplier(self.multiplier(phi), u)

    def function_matrix(self, phi) -> np.ndarray:
        """Dense matrix V diag(phi(lambda)) V^T."""
        m = self.multiplier(phi)
        V = self.eigenvectors
        return (V * m) @ V.T

    def coefficients(self, u) -> np.ndarray:
        return self.eigenvectors.T @ np.asarray(_values(u), dtype=float)

    def apply_fields(self, u) -> np.ndarray:
        """Stack of discrete horizontal derivatives D_j u, shape (n1, n)."""
        arr = np.asarray(_values(u), dtype=float)
        return np.stack([D @ arr for D in self.fields])

    def divergence(self, components) -> np.ndarray:
        """Discrete divergence -sum_j D_j^T phi_j, the exact L^2 adjoint of -D."""
        comps = [np.asarray(_values(c), dtype=float) for c in components]
        return -sum(D.T @ c for D, c in zip(self.fields, comps))


def build_sublaplacian(grid: Grid, check: bool = True) -> SpectralOperator:
    """Assemble ``L = sum_j D_j^T D_j`` and diagonalize it.

    On Dirichlet windows each D_j also carries the edges that enter the
    window from a zero ghost node, so every node has two neighbours per
    direction and R^1 reproduces the textbook second-difference matrix. The
    stored ``fields`` are the square node-based parts of D_j.

    Eigenvalues with ``|lambda| <= 1e-12 * lambda_max`` are snapped to zero,
    so zero modes are detected exactly (the periodic constant mode).
    """
    group = grid.group
    n = grid.n
    eye = sp.identity(n, format="csr")
    fields = []
    assembled = []
    for j in range(group.horizontal_dim):
        step = np.zeros(group.dim)
        step[j] = grid.spacing[j]
        target = grid.right_translate_map(step)
        rows = np.flatnonzero(target >= 0)
        P = sp.csr_matrix(
            (np.ones(rows.size), (rows, target[rows])), shape=(n, n)
        )
        D = ((P - eye) / grid.spacing[j]).tocsr()
        fields.append(D)
        # Dirichlet: edges entering the window from a zero ghost node
        entering = np.flatnonzero(grid.right_translate_map(-step) < 0)
        G = sp.csr_matrix(
            (np.ones(entering.size), (np.arange(entering.size), entering)),
            shape=(entering.size, n),
        ) / grid.spacing[j]
        assembled.append(D.T @ D + G.T @ G)
    M = sum(assembled).toarray()
    M = 0.5 * (M + M.T)
    try:
        lam, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    lam_max = float(np.max(np.abs(lam))) if n else 0.0
    lam = np.where(np.abs(lam) <= 1e-12 * lam_max, 0.0, lam)
    if np.any(lam < 0):
        raise NumericError("sub-Laplacian has a negative eigenvalue", float(lam.min()))
    if check and n:
        probe = np.random.default_rng(0).standard_normal((n, 4))
        resid = np.linalg.norm(M @ probe - V @ (lam[:, None] * (V.T @ probe)))
        scale = np.linalg.norm(M @ probe)
        if scale > 0 and resid / scale > 1e-9:
            raise NumericError("eigendecomposition residual too large", resid / scale)
    return SpectralOperator(grid, M, lam, V, tuple(fields))


def apply_spectral_function(op: SpectralOperator, phi, u):
    """Return ``phi(L) u`` through the stored eigendecomposition."""
    return op.apply(phi, u)


# ----------------------------------------------------------------- convolution
def _check_same(f: GridFunction, u: GridFunction):
    if not f.grid.same_as(u.grid):
        raise InvalidArgument("functions live on different grids")


def _translation_sum(grid: Grid, offsets: np.ndarray, weights: np.ndarray, u):
    """sum_gamma w_gamma u(gamma^{-1} g) for lattice index offsets gamma."""
    arr = np.asarray(_values(u), dtype=float)
    out = np.zeros_like(arr)
    for gamma, w in zip(offsets, weights):
        src = grid.left_translate_map(gamma * grid.spacing)
        ok = src >= 0
        out[ok] += w * arr[src[ok]]
    return out


def convolve(f: GridFunction, u: GridFunction) -> GridFunction:
    """Group convolution (f * u)(g) = int f(g g'^{-1}) u(g') dg'.

    Writing g' = gamma^{-1} g turns the sum into
    ``sum_gamma f(gamma) u(gamma^{-1} g)`` over the nodes gamma where f is
    sampled; on the lattice subgroup every product is again a lattice point,
    so the quadrature needs no interpolation.
    """
    _check_same(f, u)
    grid = f.grid
    support = np.flatnonzero(f.values)
    out = _translation_sum(
        grid, grid.indices[support], f.values[support] * grid.cell_volume, u
    )
    return GridFunction(grid, out)


def bump_profile(r: np.ndarray) -> np.ndarray:
    """Unnormalized radial bump exp(-1/(1 - r^2)) supported in r < 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def mollifier_weights(grid: Grid, eps: float):
    """Lattice offsets and weights of tau_eps, normalized to unit Haar mass."""
    offsets = grid.lattice_ball(eps)
    w = bump_profile(grid.group.hom_norm(offsets * grid.spacing) / eps)
    keep = w > 0
    offsets, w = offsets[keep], w[keep]
    return offsets, w / np.sum(w)


def mollify(u: GridFunction, eps: float) -> GridFunction:
    """Convolve with the normalized bump tau_eps supported in B(e, eps).

    Scales below two grid spacings cannot be resolved; ``u`` is then returned
    unchanged and a :class:`ResolutionWarning` is issued.
    """
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    grid = u.grid
    if eps < 2.0 * grid.max_spacing:
        warnings.warn(
            f"mollifier radius {eps} below two grid spacings; returning input",
            ResolutionWarning,
            stacklevel=2,
        )
        return u
    offsets, w = mollifier_weights(grid, eps)
    return GridFunction(grid, _translation_sum(grid, offsets, w, u))


def smooth_ramp(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 1 for x <= 1, 0 for x >= 2, monotone in between."""
    x = np.asarray(x, dtype=float)

    def f(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    a = f(2.0 - x)
    b = f(x - 1.0)
    return a / (a + b)


def truncate(u: GridFunction, N: float) -> GridFunction:
    """Multiply by eta_N(g) = ramp(|g| / N): 1 on B(e, N), 0 outside B(e, 2N)."""
    if not N > 0:
        raise InvalidArgument("N must be positive")
    eta = smooth_ramp(u.grid.node_norms / N)
    return GridFunction(u.grid, eta * u.values)


# ------------------------------------------------------------------------ I/O
def coord_names(grid: Grid) -> list[str]:
    return ["x", "y", "z"][: grid.dim] if grid.dim <= 3 else [f"x{i}" for i in range(grid.dim)]


def write_grid_function(path, u: GridFunction, name: str = "value") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coord_names(u.grid) + [name])
        for c, v in zip(u.grid.coords, u.values):
            w.writerow([repr(float(x)) for x in c] + [repr(float(v))])


def read_grid_function(path, grid: Grid) -> GridFunction:
    """Read ``coords..., value`` rows; unlisted nodes are zero."""
    vals = np.zeros(grid.n)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgument(f"{path}: empty file")
    body = rows[1:] if not _is_numeric_row(rows[0]) else rows
    for row in body:
        if not row:
            continue
        if len(row) != grid.dim + 1:
            raise InvalidArgument(f"{path}: expected {grid.dim + 1} columns per row")
        node = int(grid.locate(np.array([float(x) for x in row[:-1]])))
        if node < 0:
            raise InvalidArgument(f"{path}: point {row[:-1]} outside the grid")
        vals[node] = float(row[-1])
    return GridFunction(grid, vals)


def _is_numeric_row(row) -> bool:
    try:
        [float(x) for x in row]
    except ValueError:
        return False
    return True

"""Exact arithmetic on the shipped stratified groups.

Points are stored in exponential coordinates as float arrays whose last axis
has length ``dim``; every operation broadcasts over leading axes, so a batch
of points is just a 2-D array.

Two families are provided: the Euclidean groups R^n (n = 1, 2) and the first
Heisenberg group H1 with law

    (x, y, z)(x', y', z') = (x + x', y + y', z + z' + (x y' - y x') / 2)

and Koranyi norm ((x^2 + y^2)^2 + 16 z^2)^(1/4).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "GroupDescriptor",
    "EuclideanGroup",
    "HeisenbergGroup",
    "get_group",
    "multiply",
    "inverse",
    "dilate",
    "hom_norm",
    "distance",
    "estimate_triangle_constant",
]


class GroupDescriptor:
    """A step-<=2 stratified group in exponential coordinates.

    Subclasses fill in the law, the homogeneous norm and the horizontal
    frame. The descriptor itself is stateless and immutable.
    """

    id: str = ""
    strata_dims: tuple[int, ...] = ()

    @property
    def dim(self) -> int:
        return sum(self.strata_dims)

    @property
    def hom_dimension(self) -> int:
        return sum((j + 1) * nj for j, nj in enumerate(self.strata_dims))

    @property
    def horizontal_dim(self) -> int:
        return self.strata_dims[0]

    @property
    def dilation_exponents(self) -> np.ndarray:
        return np.concatenate(
            [np.full(nj, j + 1, dtype=int) for j, nj in enumerate(self.strata_dims)]
        )

    # Radius of the unit homogeneous ball measured along each coordinate.
    @property
    def unit_ball_extent(self) -> np.ndarray:
        raise NotImplementedError

    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    def point(self, coords) -> np.ndarray:
        g = np.asarray(coords, dtype=float)
        if g.ndim == 0:
            g = g.reshape(1)
        if g.shape[-1] != self.dim:
            raise InvalidArgument(
                f"{self.id}: expected {self.dim} coordinates, got {g.shape[-1]}"
            )
        return g

    def multiply(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, g) -> np.ndarray:
        # exp-coordinates of a step-2 group: g^{-1} = -g
        return -self.point(g)

    def dilate(self, r: float, g) -> np.ndarray:
        if not np.all(np.asarray(r) > 0):
            raise InvalidArgument(f"dilation factor must be positive, got {r!r}")
        g = self.point(g)
        return g * np.asarray(r, dtype=float)[..., None] ** self.dilation_exponents

    def hom_norm(self, g) -> np.ndarray:
        raise NotImplementedError

    def distance(self, g, h) -> np.ndarray:
        """d(g, h) = |h^{-1} g|; left invariant by construction."""
        return self.hom_norm(self.multiply(self.inverse(h), g))

    def horizontal_fields(self, points) -> np.ndarray:
        """Coefficients a[j, ..., i] of X_j = sum_i a_i(g) d_i at ``points``."""
        raise NotImplementedError

    def lattice_spacings(self, horizontal_spacing) -> np.ndarray:
        """Per-coordinate steps of the ambient integer lattice."""
        raise NotImplementedError

    # Index of the horizontally generated subgroup inside the ambient lattice.
    lattice_index: int = 1

    def lattice_mask(self, index: np.ndarray) -> np.ndarray:
        """Which ambient lattice points belong to the generated subgroup."""
        return np.ones(np.shape(index)[:-1], dtype=bool)

    def snap_index(self, index_float: np.ndarray) -> np.ndarray:
        """Nearest subgroup lattice point to fractional lattice coordinates."""
        return np.rint(index_float).astype(np.int64)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.id!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupDescriptor) and other.id == self.id

    def __hash__(self) -> int:
        return hash(self.id)


@dataclass(frozen=True, eq=False, repr=False)
class EuclideanGroup(GroupDescriptor):
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument("dimension must be positive")

    @property
    def id(self) -> str:  # type: ignore[override]
        return f"r{self.n}"

    @property
    def strata_dims(self) -> tuple[int, ...]:  # type: ignore[override]
        return (self.n,)

    @property
    def unit_ball_extent(self) -> np.ndarray:
        return np.ones(self.n)

    def multiply(self, a, b) -> np.ndarray:
        return self.point(a) + self.point(b)

    def hom_norm(self, g) -> np.ndarray:
        return np.linalg.norm(self.point(g), axis=-1)

    def horizontal_fields(self, points) -> np.ndarray:
        pts = self.point(points)
        eye = np.eye(self.n)
        return np.broadcast_to(
            eye.reshape((self.n,) + (1,) * (pts.ndim - 1) + (self.n,)),
            (self.n,) + pts.shape,
        ).copy()

    def lattice_spacings(self, horizontal_spacing) -> np.ndarray:
        return np.broadcast_to(np.asarray(horizontal_spacing, float), (self.n,)).copy()


@dataclass(frozen=True, eq=False, repr=False)
class HeisenbergGroup(GroupDescriptor):
    @property
    def id(self) -> str:  # type: ignore[override]
        return "h1"

    @property
    def strata_dims(self) -> tuple[int, ...]:  # type: ignore[override]
        return (2, 1)

    @property
    def unit_ball_extent(self) -> np.ndarray:
        return np.array([1.0, 1.0, 0.25])

    def multiply(self, a, b) -> np.ndarray:
        a = self.point(a)
        b = self.point(b)
        out = a + b
        out[..., 2] += 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
        return out

    def hom_norm(self, g) -> np.ndarray:
        g = self.point(g)
        r2 = g[..., 0] ** 2 + g[..., 1] ** 2
        return (r2 * r2 + 16.0 * g[..., 2] ** 2) ** 0.25

    def horizontal_fields(self, points) -> np.ndarray:
        # X1 = dx - (y/2) dz,  X2 = dy + (x/2) dz
        pts = self.point(points)
        a = np.zeros((2,) + pts.shape)
        a[0, ..., 0] = 1.0
        a[0, ..., 2] = -0.5 * pts[..., 1]
        a[1, ..., 1] = 1.0
        a[1, ..., 2] = 0.5 * pts[..., 0]
        return a

    def lattice_spacings(self, horizontal_spacing) -> np.ndarray:
        hx, hy = np.broadcast_to(np.asarray(horizontal_spacing, float), (2,))
        return np.array([hx, hy, 0.5 * hx * hy])

    # Words in the two horizontal steps reach exactly the points (i, j, k)
    # with k = i*j mod 2 (k counts multiples of hx*hy/2).
    lattice_index = 2

    def lattice_mask(self, index: np.ndarray) -> np.ndarray:
        index = np.asarray(index)
        return (index[..., 2] - index[..., 0] * index[..., 1]) % 2 == 0

    def snap_index(self, index_float: np.ndarray) -> np.ndarray:
        index_float = np.asarray(index_float, dtype=float)
        out = np.rint(index_float).astype(np.int64)
        ij = out[..., 0] * out[..., 1]
        out[..., 2] = 2 * np.rint((index_float[..., 2] - ij) / 2.0).astype(np.int64) + ij
        return out


_REGISTRY = {
    "r1": EuclideanGroup(1),
    "r2": EuclideanGroup(2),
    "h1": HeisenbergGroup(),
}


def get_group(group_id: str) -> GroupDescriptor:
    """Look up a shipped descriptor by id ("r1", "r2", "h1")."""
    try:
        return _REGISTRY[str(group_id).lower()]
    except KeyError:
        raise InvalidArgument(
            f"unknown group {group_id!r}; choose from {sorted(_REGISTRY)}"
        ) from None


def multiply(group: GroupDescriptor, a, b) -> np.ndarray:
    return group.multiply(a, b)


def inverse(group: GroupDescriptor, g) -> np.ndarray:
    return group.inverse(g)


def dilate(group: GroupDescriptor, r: float, g) -> np.ndarray:
    return group.dilate(r, g)


def hom_norm(group: GroupDescriptor, g) -> np.ndarray:
    return group.hom_norm(g)


def distance(group: GroupDescriptor, g, h) -> np.ndarray:
    return group.distance(g, h)


def _sample_unit_ball(group: GroupDescriptor, count: int, rng) -> np.ndarray:
    ext = group.unit_ball_extent
    out = np.empty((0, group.dim))
    while out.shape[0] < count:
        cand = rng.uniform(-1.0, 1.0, size=(2 * count, group.dim)) * ext
        cand = cand[group.hom_norm(cand) <= 1.0]
        out = np.vstack([out, cand])
    return out[:count]


def estimate_triangle_constant(
    group: GroupDescriptor, sample_count: int = 10_000, seed: int = 0
) -> float:
    """Empirical quasi-triangle constant max |g g'| / (|g| + |g'|).

    Pairs are drawn uniformly from the unit homogeneous ball with a fixed
    seed, so the returned value is reproducible. The first pair is (e, g),
    whose ratio is exactly 1, so the estimate never falls below the value the
    supremum attains at the identity.
    """
    if sample_count < 1:
        raise InvalidArgument("sample_count must be positive")
    rng = np.random.default_rng(seed)
    g = _sample_unit_ball(group, sample_count, rng)
    h = _sample_unit_ball(group, sample_count, rng)
    g[0] = 0.0
    denom = group.hom_norm(g) + group.hom_norm(h)
    keep = denom > 0
    if not np.any(keep):
        return 1.0
    ratio = group.hom_norm(group.multiply(g[keep], h[keep])) / denom[keep]
    return float(np.max(ratio))

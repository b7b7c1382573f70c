"""Named test-function families used by the verifiers.

Every function is defined on the continuum group (through coordinates and the
homogeneous norm) and then sampled, so the same family can be compared across
grid refinements. Length scales are fractions of the box inradius, which keeps
supports away from the window boundary.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument
from .grid import Grid, GridFunction, bump_profile

__all__ = ["standard_suite", "random_smooth", "SUITE_NAMES"]

SUITE_NAMES = (
    "gauss-wide",
    "gauss-narrow",
    "bump",
    "hat",
    "ball",
    "ball-offset",
    "oscillatory",
    "gauss-offset",
    "two-bumps",
    "smooth-random-0",
)


def _offset_norm(grid: Grid, center: np.ndarray) -> np.ndarray:
    return grid.group.distance(grid.coords, center)


def random_smooth(grid: Grid, rng, terms: int = 3) -> np.ndarray:
    """Sum of a few Gaussians with random centres, widths and signs."""
    R = grid.inradius()
    out = np.zeros(grid.n)
    for _ in range(terms):
        c = np.zeros(grid.dim)
        c[: grid.group.horizontal_dim] = rng.uniform(-0.3, 0.3, grid.group.horizontal_dim) * R
        w = rng.uniform(0.1, 0.25) * R
        a = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
        out += a * np.exp(-((_offset_norm(grid, c) / w) ** 2))
    return out


def standard_suite(grid: Grid, count: int = 10, seed: int = 0) -> list[tuple[str, GridFunction]]:
    """``count`` named functions: bumps, hats, oscillatory, ball indicators, random mixes."""
    if count < 1:
        raise InvalidArgument("count must be positive")
    R = grid.inradius()
    r = grid.node_norms
    x1 = grid.coords[:, 0]
    shift = np.zeros(grid.dim)
    shift[0] = 0.2 * R
    r_off = _offset_norm(grid, shift)
    two = np.zeros(grid.dim)
    two[0] = -0.25 * R
    base = {
        "gauss-wide": np.exp(-((r / (0.25 * R)) ** 2)),
        "gauss-narrow": np.exp(-((r / (0.1 * R)) ** 2)),
        "bump": bump_profile(r / (0.5 * R)),
        "hat": np.maximum(0.0, 1.0 - r / (0.4 * R)),
        "ball": (r < 0.3 * R).astype(float),
        "ball-offset": (r_off < 0.2 * R).astype(float),
        "oscillatory": np.cos(6.0 * np.pi * x1 / R) * np.exp(-((r / (0.3 * R)) ** 2)),
        "gauss-offset": np.exp(-((r_off / (0.15 * R)) ** 2)),
        "two-bumps": bump_profile(r_off / (0.15 * R)) + 0.5 * bump_profile(_offset_norm(grid, two) / (0.2 * R)),
    }
    out = [(k, GridFunction(grid, v)) for k, v in base.items()]
    rng = np.random.default_rng(seed)
    k = 0
    while len(out) < count:
        out.append((f"smooth-random-{k}", GridFunction(grid, random_smooth(grid, rng))))
        k += 1
    return out[:count]

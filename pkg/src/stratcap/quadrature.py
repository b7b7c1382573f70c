"""Composite Gauss-Legendre quadrature in a logarithmic variable.

Every improper integral in the library has the form ``int_a^b F(s) ds`` over
a range spanning many decades, with F smooth in ``y = log s``. Panels of unit
width in ``y`` are refined by halving until two successive estimates agree.
Integrands may return arrays (one column per eigenvalue), and convergence is
judged on the whole vector at once.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import NumericError

__all__ = ["gauss_panels", "integrate_log", "integrate_linear"]


@lru_cache(maxsize=None)
def _legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_panels(lo: float, hi: float, panels: int, order: int = 16):
    """Nodes and weights of ``panels`` equal Gauss-Legendre panels on [lo, hi]."""
    x, w = _legendre(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _refine(evaluate, lo, hi, panels, order, rtol, atol, max_doublings):
    prev = None
    for _ in range(max_doublings + 1):
        y, w = gauss_panels(lo, hi, panels, order)
        est = np.tensordot(w, evaluate(y), axes=(0, 0))
        if prev is not None:
            err = np.max(np.abs(est - prev))
            scale = np.max(np.abs(est)) if np.size(est) else 0.0
            if err <= atol + rtol * scale:
                return est, err
        prev = est
        panels *= 2
    raise NumericError(
        f"quadrature did not converge on [{lo}, {hi}] after {max_doublings} doublings",
        float(err),
    )


def integrate_log(
    integrand,
    s_lo: float,
    s_hi: float,
    *,
    rtol: float = 1e-13,
    atol: float = 1e-15,
    panel_width: float = 1.0,
    order: int = 16,
    max_doublings: int = 8,
):
    """``int_{s_lo}^{s_hi} integrand(s) ds`` via the substitution s = e^y.

    ``integrand`` receives a 1-D array of s values and returns an array whose
    first axis matches it.
    """
    lo, hi = np.log(s_lo), np.log(s_hi)
    panels = max(1, int(np.ceil((hi - lo) / panel_width)))

    def evaluate(y):
        s = np.exp(y)
        vals = np.asarray(integrand(s), dtype=float)
        return vals * s.reshape((-1,) + (1,) * (vals.ndim - 1))

    est, _ = _refine(evaluate, lo, hi, panels, order, rtol, atol, max_doublings)
    return est


def integrate_linear(
    integrand,
    lo: float,
    hi: float,
    *,
    rtol: float = 1e-13,
    atol: float = 1e-15,
    panel_width: float = 1.0,
    order: int = 16,
    max_doublings: int = 8,
):
    """``int_lo^hi integrand(y) dy`` with the same panel refinement."""
    panels = max(1, int(np.ceil((hi - lo) / panel_width)))

    def evaluate(y):
        return np.asarray(integrand(y), dtype=float)

    est, _ = _refine(evaluate, lo, hi, panels, order, rtol, atol, max_doublings)
    return est

"""Disc functionals built from J and from boundary integrals of a majorant.

J is computed from the zeros of the zeroth component (root finding), never
from boundary quadrature.  :func:`riesz_residual` compares the two routes
through Jensen's formula and so serves as an independent self-check.

Boundary integrals use the trapezoid rule on a :class:`~discenv.core.CircleGrid`.
A node counts as "outside" when the disc value there is not in the open set
(nodes exactly on the boundary count as outside).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import CircleGrid
from .discs import RationalDisc, boundary_trace, deflate_common_factors, zeros_in_disc
from .domains import Domain

logger = logging.getLogger(__name__)

DEFAULT_GRID = CircleGrid(1024)

ScalarField = Callable[[np.ndarray], np.ndarray]


class InfinityOnCircleError(ValueError):
    """A quadrature node is mapped to the hyperplane at infinity."""


@dataclass(frozen=True)
class FunctionalValue:
    value: float
    j_part: float
    poisson_part: float
    bad_boundary_measure: float


def j_functional(f: RationalDisc) -> float:
    """J: minus the multiplicity-weighted sum of log-moduli of the disc's poles in the unit disc.

    Common factors of all components are removed first.  Returns ``inf`` when
    ``p_0`` vanishes identically and 0 when the disc stays in C^n.
    """
    f = deflate_common_factors(f)
    return zeros_in_disc(f.components[0]).j_value()


def _affine_trace(f: RationalDisc, grid: CircleGrid) -> np.ndarray:
    tr = boundary_trace(f, grid)
    if np.any(tr.at_infinity):
        k = int(np.flatnonzero(tr.at_infinity)[0])
        raise InfinityOnCircleError(f"node {tr.nodes[k]} is mapped to the hyperplane at infinity")
    return tr.affine


def poisson_integral(u: ScalarField, f: RationalDisc, grid: CircleGrid, X: Domain):
    """Average of ``u`` over the boundary nodes mapped outside ``X`` (zero elsewhere).

    Returns
    -------
    value : float
        ``(1/N) * sum of u(f(zeta_i))`` over nodes with ``f(zeta_i)`` not in ``X``.
    bad : float
        Fraction of nodes mapped outside ``X``.
    """
    pts = _affine_trace(f, grid)
    outside = ~X.contains_many(pts)
    if not np.any(outside):
        return 0.0, 0.0
    vals = np.asarray(u(pts[outside]), dtype=float)
    return float(np.sum(vals) / grid.n), float(np.count_nonzero(outside) / grid.n)


def h_functional(f: RationalDisc, X: Domain, ebj: ScalarField, grid: CircleGrid = DEFAULT_GRID) -> FunctionalValue:
    """J(f) plus the boundary integral of the good-set envelope over the part of the circle leaving ``X``."""
    j = j_functional(f)
    if not np.isfinite(j):
        return FunctionalValue(float("inf"), j, float("nan"), float("nan"))
    pois, bad = poisson_integral(ebj, f, grid, X)
    return FunctionalValue(j + pois, j, pois, bad)


def ball_majorant_functional(f: RationalDisc, X: Domain, a, r: float, grid: CircleGrid = DEFAULT_GRID) -> float:
    """Boundary integral of ``log(|f - a| / r)`` over the nodes mapped outside ``X``.

    The closed ball ``B(a, r)`` must lie in ``X``; then ``log(|. - a| / r)``
    is the extremal function of the ball and is positive off ``X``.
    """
    a = np.asarray(a, dtype=complex)
    pts = _affine_trace(f, grid)
    outside = ~X.contains_many(pts)
    if not np.any(outside):
        return 0.0
    dist = np.linalg.norm(pts[outside] - a, axis=1)
    if np.any(dist == 0):
        raise ValueError("disc passes through the ball centre at an outside node")
    return float((np.sum(np.log(dist)) - np.count_nonzero(outside) * np.log(r)) / grid.n)


def riesz_residual(f: RationalDisc, grid: CircleGrid = CircleGrid(2048)) -> float:
    """|mean of log|p_0| over the circle - log|p_0(0)| - J(f)| for the deflated disc."""
    f = deflate_common_factors(f)
    p0 = f.components[0]
    if p0[0] == 0:
        raise ValueError("centre lies on the hyperplane at infinity")
    j = zeros_in_disc(p0).j_value()
    vals = np.polynomial.polynomial.polyval(grid.nodes, p0)
    mean_log = grid.mean(np.log(np.abs(vals)))
    return float(abs(mean_log - np.log(abs(p0[0])) - j))

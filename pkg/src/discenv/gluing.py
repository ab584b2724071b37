"""Gluing a circle's worth of analytic discs into one disc.

Given a disc ``h`` in C^n and, for each ``zeta`` on the unit circle, a disc
``F(., zeta)`` with boundary in X and centre ``h(zeta)``, :func:`glue_family`
produces a single disc ``g`` with ``g(0) = h(0)``, boundary in X, and J(g)
at most the circle average of J(F(., zeta)) up to a small slack.

The construction works with lifts to C^{n+1} minus the origin:

1. lift every member so that its zeroth component is 1 at the centre;
2. expand the coefficient functions ``zeta -> F~(., zeta) - h~(zeta)`` in
   Fourier series and keep the modes ``|m| <= j``;
3. substitute ``xi -> xi * zeta**K`` with ``K >= j``, which shifts every
   negative mode to a nonnegative power of ``zeta``;
4. restrict to ``xi = exp(i theta0) zeta`` with ``theta0`` minimising the
   boundary mean of ``log|g~_0|``.  By Jensen's formula that mean is J of
   the result, and its average over ``theta0`` equals the family average.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import CircleGrid, as_vector
from .discs import RationalDisc, boundary_trace, chordal_distance, make_touching_disc
from .domains import Domain
from .functionals import j_functional

logger = logging.getLogger(__name__)


class InvalidFamilyError(ValueError):
    """A family member leaves X on the circle or is not centred on ``h``."""


class GluingError(RuntimeError):
    """No twist order up to the configured maximum keeps the lift away from the origin."""


@dataclass(frozen=True, eq=False)
class DiscFamily:
    """Discs indexed by the nodes of a circle grid.

    Values between nodes are defined by trigonometric interpolation of the
    lifted coefficient table.
    """

    grid: CircleGrid
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) != self.grid.n:
            raise ValueError(f"need one member per grid node ({self.grid.n}), got {len(members)}")
        if len({m.dim for m in members}) != 1:
            raise ValueError("family members have different dimensions")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_function(cls, fn: Callable[[complex], RationalDisc], grid: CircleGrid) -> "DiscFamily":
        return cls(grid, tuple(fn(z) for z in grid.nodes))

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def table(self) -> np.ndarray:
        """Coefficients, shape ``(N, n+1, d+1)``, zero padded to a common degree."""
        width = max(m.components.shape[1] for m in self.members)
        out = np.zeros((self.grid.n, self.dim + 1, width), dtype=complex)
        for i, m in enumerate(self.members):
            out[i, :, :m.components.shape[1]] = m.components
        return out

    def lifted_table(self) -> np.ndarray:
        """Table scaled so every member has zeroth component 1 at the centre."""
        t = self.table()
        c00 = t[:, 0, 0]
        if np.any(c00 == 0):
            raise InvalidFamilyError("a family member has its centre on the hyperplane at infinity")
        return t / c00[:, None, None]

    def fourier(self) -> tuple:
        """Fourier coefficients of the lifted table in the circle variable and their frequencies."""
        n = self.grid.n
        coef = np.fft.fft(self.lifted_table(), axis=0) / n
        freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        return coef, freqs

    def interpolate(self, zeta: complex) -> RationalDisc:
        """Trigonometric interpolant of the lifted table at ``zeta`` on the unit circle."""
        zeta = complex(zeta)
        coef, freqs = self.fourier()
        n = self.grid.n
        w = zeta ** freqs.astype(float)
        if n % 2 == 0:
            # split the Nyquist mode symmetrically so the interpolant is real-symmetric
            k = n // 2
            w[freqs == -k] = 0.5 * (zeta ** k + zeta ** (-k))
        return RationalDisc(np.tensordot(w, coef, axes=(0, 0)))


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, all derivatives vanish at both ends."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inner = (s > 0) & (s < 1)
    a = np.exp(-1.0 / s[inner])
    b = np.exp(-1.0 / (1.0 - s[inner]))
    out[inner] = a / (a + b)
    out[s >= 1] = 1.0
    return out


def two_arc_switch(theta, width: float):
    """Periodic C-infinity function equal to 0 near the upper half circle and 1 near the lower.

    The transitions have length ``width`` and are centred at ``pi`` (0 to 1)
    and at ``0`` (1 back to 0).
    """
    theta = np.asarray(theta, dtype=float)
    t = np.mod(theta - 0.5 * width, 2 * np.pi) + 0.5 * width
    return smoothstep((t - np.pi + 0.5 * width) / width) - smoothstep((t - 2 * np.pi + 0.5 * width) / width)


def touching_family(h: RationalDisc, centers: Callable, radii: Callable, grid: CircleGrid) -> DiscFamily:
    """Touching discs ``f_{h(zeta), w(theta), r(theta)}`` along the circle.

    ``centers(theta)`` returns a point of C^n and ``radii(theta)`` a radius;
    both should be smooth and periodic so that the family is smooth.
    """
    hv = h.affine(grid.nodes)
    members = [
        make_touching_disc(hv[i], as_vector(centers(th)), float(radii(th)))
        for i, th in enumerate(grid.angles)
    ]
    return DiscFamily(grid, tuple(members))


def two_arc_family(h: RationalDisc, w_first, w_second, r: float, grid: CircleGrid, width: float = 0.75) -> DiscFamily:
    """Touching discs aimed at ``w_first`` on the upper arc and ``w_second`` on the lower arc.

    Between the arcs the target moves along the segment joining the two
    centres, switched by :func:`two_arc_switch`.  The caller must make sure
    ``r`` stays below the boundary distance all along that segment.
    """
    w1 = as_vector(w_first)
    w2 = as_vector(w_second)

    def centers(th):
        s = float(two_arc_switch(th, width))
        return (1.0 - s) * w1 + s * w2

    return touching_family(h, centers, lambda th: r, grid)


@dataclass(frozen=True)
class GlueParams:
    fourier_tol: float = 1e-6
    t: float = 1.0
    bidisc_points: int = 64
    k_max: int = 4096
    theta_candidates: int = 256
    min_nodes: int = 1024
    member_nodes: int = 256
    verify_nodes: int = 4096
    nonzero_tol: float = 1e-6
    center_tol: float = 1e-9
    degree_budget: Optional[int] = None


@dataclass(frozen=True, eq=False)
class GlueResult:
    disc: RationalDisc
    j_value: float
    family_average_j: float
    majorant_average: Optional[float]
    fourier_order: int
    twist: int
    theta0: float
    fourier_tail: float
    truncation_residual: float
    feasible: bool
    center_error: float
    within_bound: bool


def _polar_grid(count: int) -> np.ndarray:
    side = max(2, int(round(np.sqrt(count))))
    radii = np.linspace(0.0, 1.0, side)
    ang = 2 * np.pi * np.arange(side) / side
    return (radii[:, None] * np.exp(1j * ang)[None, :]).ravel()


def _lift_h(h: RationalDisc) -> np.ndarray:
    c = h.components
    if np.any(c[0, 1:] != 0) or c[0, 0] == 0:
        raise InvalidFamilyError("h must be a polynomial disc in C^n (constant nonzero p_0)")
    return c / c[0, 0]


def glue_family(
    h: RationalDisc,
    family: DiscFamily,
    X: Domain,
    v: Optional[Sequence[float]] = None,
    eps: float = 0.1,
    params: GlueParams = GlueParams(),
) -> GlueResult:
    """Glue the family into a single disc centred at ``h(0)``.

    Parameters
    ----------
    h : RationalDisc
        Polynomial disc in C^n; member ``i`` must be centred at ``h(zeta_i)``.
    family : DiscFamily
        Members with boundary in ``X``.
    X : Domain
    v : sequence of float, optional
        Majorant values at the grid nodes; only their average is reported.
    eps : float
        Slack used for the ``within_bound`` flag.
    params : GlueParams

    Raises
    ------
    InvalidFamilyError
        A member leaves ``X`` on the circle or is centred away from ``h``.
    GluingError
        No twist order ``K <= params.k_max`` keeps the lift off the origin.
    """
    grid = family.grid
    nodes = grid.nodes
    h_lift = _lift_h(h)
    table = family.lifted_table()
    hv = h.affine(nodes)
    cerr = np.abs(table[:, 1:, 0] - hv)
    if np.any(cerr > params.center_tol * (1.0 + np.abs(hv))):
        i = int(np.argmax(np.max(cerr, axis=1)))
        raise InvalidFamilyError(f"member {i} is not centred at h(zeta_{i})")
    check = CircleGrid(params.member_nodes)
    for i, m in enumerate(family.members):
        tr = boundary_trace(m, check)
        if np.any(tr.at_infinity) or not np.all(X.contains_many(tr.affine[~tr.at_infinity])):
            raise InvalidFamilyError(f"member {i} (zeta = {nodes[i]:.6f}) leaves X on the circle")

    n_nodes = grid.n
    diff = table.copy()
    diff[:, :, 0] = 0.0  # the xi**0 coefficient is h~(zeta) itself
    coef = np.fft.fft(diff, axis=0) / n_nodes
    freqs = np.fft.fftfreq(n_nodes, d=1.0 / n_nodes).astype(int)
    d = diff.shape[2] - 1
    tw = params.t ** np.arange(d + 1)
    mag = np.sum(np.abs(coef) * tw[None, None, :], axis=(1, 2))
    absf = np.abs(freqs)
    if n_nodes % 2 == 0:
        absf[freqs == -(n_nodes // 2)] = n_nodes // 2

    j_cap = n_nodes // 2 - 1
    j = 0
    while True:
        tail = float(np.sum(mag[absf > j]))
        if tail < params.fourier_tol or j >= j_cap:
            break
        j = min(max(2 * j, 1), j_cap)
    if tail >= params.fourier_tol:
        logger.warning("Fourier tail %.3g above tolerance at the cap j = %d", tail, j)
    keep = absf <= j
    ms = freqs[keep]
    D = coef[keep]  # (M, n+1, d+1)

    xi_grid = _polar_grid(params.bidisc_points)
    zeta_grid = _polar_grid(params.bidisc_points)
    h_on = np.polynomial.polynomial.polyval(zeta_grid, h_lift.T)  # (n+1, Mz)

    def lift_on_bidisc(K: int) -> np.ndarray:
        out = np.repeat(h_on[:, None, :], xi_grid.size, axis=1).astype(complex)
        for k in range(1, d + 1):
            pw = zeta_grid[None, :] ** (ms[:, None] + K * k)  # (M, Mz)
            A = np.einsum("mi,mz->iz", D[:, :, k], pw)
            out += A[:, None, :] * (xi_grid ** k)[None, :, None]
        return out

    K = j
    while True:
        G = lift_on_bidisc(K)
        gmin = float(np.min(np.max(np.abs(G), axis=0)))
        if gmin > params.nonzero_tol:
            break
        if 2 * K > params.k_max:
            raise GluingError(f"lift reaches the origin for every twist up to {params.k_max} (min norm {gmin:.3g})")
        K = max(2 * K, 1)

    deg = max(h_lift.shape[1] - 1, int(np.max(ms)) + (K + 1) * d)
    base = np.zeros((h_lift.shape[0], deg + 1), dtype=complex)
    base[:, :h_lift.shape[1]] = h_lift
    B = np.zeros((d + 1, h_lift.shape[0], deg + 1), dtype=complex)
    for k in range(1, d + 1):
        B[k][:, ms + (K + 1) * k] = D[:, :, k].T

    M = max(params.min_nodes, 4 * (deg + 1))
    M = 1 << int(np.ceil(np.log2(M)))
    thetas = 2 * np.pi * np.arange(params.theta_candidates) / params.theta_candidates
    scores = np.empty(thetas.size)
    for q, th in enumerate(thetas):
        c0 = base[0] + sum(np.exp(1j * k * th) * B[k][0] for k in range(1, d + 1))
        pad = np.zeros(M, dtype=complex)
        pad[:c0.size] = c0
        vals = M * np.fft.ifft(pad)
        with np.errstate(divide="ignore"):
            scores[q] = np.mean(np.log(np.abs(vals)))
    # ties (up to rounding) go to the smallest angle, so a constant family is returned unrotated
    q0 = int(np.flatnonzero(scores <= scores.min() + 1e-12 * (1.0 + abs(scores.min())))[0])
    theta0 = float(thetas[q0])
    comps = base + sum(np.exp(1j * k * theta0) * B[k] for k in range(1, d + 1))
    g_full = RationalDisc(comps)

    vgrid = CircleGrid(max(params.verify_nodes, M))
    residual = 0.0
    g = g_full
    if params.degree_budget is not None and deg > params.degree_budget:
        g = RationalDisc(comps[:, :params.degree_budget + 1])
        residual = float(np.max(chordal_distance(g_full.lifted(vgrid.nodes), g.lifted(vgrid.nodes))))
        logger.warning("glued disc truncated from degree %d to %d (residual %.3g)", deg, params.degree_budget, residual)

    jg = j_functional(g)
    tr = boundary_trace(g, vgrid)
    feasible = bool(not np.any(tr.at_infinity) and np.all(X.contains_many(tr.affine)))
    avg_j = float(np.mean([j_functional(m) for m in family.members]))
    maj = None if v is None else float(np.mean(np.asarray(v, dtype=float)))
    center_err = float(np.max(np.abs(g.center_affine() - h.center_affine())))
    logger.info("glued: j=%d K=%d theta0=%.4f degree=%d J=%.6f family avg=%.6f", j, K, theta0, g.degree, jg, avg_j)
    return GlueResult(
        disc=g,
        j_value=float(jg),
        family_average_j=avg_j,
        majorant_average=maj,
        fourier_order=j,
        twist=K,
        theta0=theta0,
        fourier_tail=tail,
        truncation_residual=residual,
        feasible=feasible,
        center_error=center_err,
        within_bound=bool(jg <= avg_j + eps),
    )

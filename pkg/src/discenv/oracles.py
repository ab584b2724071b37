"""Reference values used to check envelope estimates.

* :func:`v_ball`: the extremal function of a ball, ``log+(|z - a| / R)``.
* :func:`v_union_upper`: minimum of the part oracles of a disjoint union of
  balls.  It bounds the extremal function of the union from above and is
  the exact value of the boundary-in-X envelope of J there.
* :func:`brute_force_envelope`: exhaustive search over a small grid of
  one-pole discs in C^1, independent of the optimiser.
* :func:`non_psh_certificate`: value at a centre minus the circle mean;
  a positive value shows the field is not plurisubharmonic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import CircleGrid, as_vector
from .discs import make_one_pole_disc
from .domains import Ball, Domain, Union

logger = logging.getLogger(__name__)


class NoOracleError(ValueError):
    """A part of the union has no closed-form oracle."""


def v_ball(a, R: float, z) -> float:
    """Extremal function of the ball ``B(a, R)`` at ``z``."""
    if not R > 0:
        raise ValueError("radius must be positive")
    a = as_vector(a)
    z = as_vector(z)
    return float(max(0.0, np.log(np.linalg.norm(z - a) / R)))


def v_ball_many(a, R: float, pts) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=complex))
    with np.errstate(divide="ignore"):  # the centre itself gives log 0 = -inf, clipped to 0
        return np.maximum(0.0, np.log(np.linalg.norm(pts - np.asarray(a), axis=1) / R))


def _ball_list(parts) -> list:
    if isinstance(parts, Union):
        parts = parts.parts
    out = []
    for p in parts:
        if isinstance(p, Union):
            out.extend(_ball_list(p))
        elif isinstance(p, Ball):
            out.append(p)
        else:
            raise NoOracleError(f"no closed-form oracle for a {type(p).__name__} part")
    return out


def v_union_upper(parts, z) -> float:
    """Minimum over ball parts of their extremal functions (an upper bound for the union's)."""
    return float(min(v_ball(b.center, b.radius, z) for b in _ball_list(parts)))


def v_union_upper_many(parts, pts) -> np.ndarray:
    balls = _ball_list(parts)
    return np.min(np.stack([v_ball_many(b.center, b.radius, pts) for b in balls]), axis=0)


def non_psh_certificate(field: Callable, c, s: float, direction=None, nodes: int = 64) -> float:
    """``field(c)`` minus the mean of ``field`` on the circle ``c + s exp(it) direction``.

    ``field`` maps an ``(m, n)`` array of points to ``m`` values.  A positive
    result is a violation of the sub-mean-value inequality on that complex
    line.
    """
    c = as_vector(c)
    if direction is None:
        direction = np.zeros(c.size, dtype=complex)
        direction[0] = 1.0
    u = as_vector(direction)
    u = u / np.linalg.norm(u)
    grid = CircleGrid(nodes)
    pts = c[None, :] + s * grid.nodes[:, None] * u[None, :]
    centre = float(np.asarray(field(c[None, :]))[0])
    return centre - grid.mean(np.asarray(field(pts), dtype=float))


@dataclass(frozen=True)
class BruteForceGrid:
    """One-pole discs ``z + zeta g / (zeta - zeta0)`` in C^1 with constant ``g``.

    ``j_levels`` are the J values scanned (``|zeta0| = exp(-J)``) in
    increasing order; ``angles`` the arguments of ``zeta0``; ``g_re`` and
    ``g_im`` the real and imaginary parts of ``g``.
    """

    j_levels: np.ndarray
    angles: np.ndarray
    g_re: np.ndarray
    g_im: np.ndarray

    @classmethod
    def default(cls, z, j_max: float = 4.0, j_step: float = 0.01, n_angles: int = 32, n_g: int = 41):
        z = as_vector(z)
        S = 2.0 * (1.0 + float(np.linalg.norm(z)))
        g = np.linspace(-S, S, n_g)
        return cls(np.arange(1, int(round(j_max / j_step)) + 1) * j_step,
                   2 * np.pi * np.arange(n_angles) / n_angles, g, g.copy())


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    zeta0: Optional[complex]
    g: Optional[complex]
    evaluated: int


def brute_force_envelope(X: Domain, z, param_grid: Optional[BruteForceGrid] = None, screen_nodes: int = 64,
                         fine_nodes: int = 1024) -> BruteForceResult:
    """Smallest J over the grid of one-pole discs centred at ``z`` whose boundary lies in X.

    Levels are scanned from the smallest J upwards; at each level every
    (angle, g) pair is screened on ``screen_nodes`` boundary nodes, and
    survivors are confirmed on ``fine_nodes`` nodes.  The first confirmed
    level is the minimum.  Returns ``inf`` if no grid disc is admissible.
    """
    z = as_vector(z)
    if z.size != 1:
        raise ValueError("brute force search is limited to C^1 (four real grid dimensions)")
    if X.contains(z):
        return BruteForceResult(0.0, None, None, 1)
    pg = param_grid or BruteForceGrid.default(z)
    nodes = CircleGrid(screen_nodes).nodes
    fine = CircleGrid(fine_nodes).nodes
    G = (pg.g_re[:, None] + 1j * pg.g_im[None, :]).ravel()
    count = 0
    # nodes ordered coarse to fine so most infeasible discs are discarded after a few nodes
    order = np.concatenate([np.arange(k, screen_nodes, 8) for k in (0, 4, 2, 6, 1, 5, 3, 7)])
    nodes = nodes[order]
    for J in pg.j_levels:
        zeta0 = np.exp(-J) * np.exp(1j * pg.angles)
        M = nodes[None, :] / (nodes[None, :] - zeta0[:, None])  # (A, N)
        gi, ai = np.meshgrid(np.arange(G.size), np.arange(zeta0.size), indexing="ij")
        gi, ai = gi.ravel(), ai.ravel()
        count += gi.size
        for lo, hi in ((0, 8), (8, 16), (16, screen_nodes)):
            if gi.size == 0:
                break
            vals = z[0] + G[gi][:, None] * M[ai, lo:hi]
            ok = np.all(X.signed_distance(vals.reshape(-1, 1)).reshape(vals.shape) > 0, axis=1)
            gi, ai = gi[ok], ai[ok]
        for g_idx, a_idx in zip(gi, ai):
            Mf = fine / (fine - zeta0[a_idx])
            if np.all(X.signed_distance((z[0] + G[g_idx] * Mf)[:, None]) > 0):
                return BruteForceResult(float(J), complex(zeta0[a_idx]), complex(G[g_idx]), count)
    return BruteForceResult(float("inf"), None, None, count)


def brute_force_disc(result: BruteForceResult, z):
    """The disc found by :func:`brute_force_envelope` (None when nothing was admissible)."""
    if result.zeta0 is None:
        return None
    return make_one_pole_disc(z, result.zeta0, [[result.g]])


@dataclass(frozen=True)
class OracleReport:
    point: tuple
    oracle: float
    estimate: float
    gap: float
    violation: bool
    passed: bool

    def to_dict(self) -> dict:
        return {
            "point": [[float(c.real), float(c.imag)] for c in self.point],
            "oracle": self.oracle,
            "estimate": self.estimate,
            "gap": self.gap,
            "violation": self.violation,
            "passed": self.passed,
        }


def oracle_report(point, oracle: float, estimate: float, tol: float, slack: float = 1e-9) -> OracleReport:
    """Compare an estimate with an oracle value; estimates must not fall below the oracle."""
    gap = float(estimate - oracle)
    violation = gap < -slack
    return OracleReport(tuple(as_vector(point)), float(oracle), float(estimate), gap, bool(violation),
                        bool(-slack <= gap <= tol))


def summarize(reports: Sequence[OracleReport]) -> dict:
    gaps = [r.gap for r in reports]
    return {
        "count": len(reports),
        "max_gap": float(max(gaps)) if gaps else 0.0,
        "min_gap": float(min(gaps)) if gaps else 0.0,
        "violations": int(sum(r.violation for r in reports)),
        "failed": int(sum(not r.passed for r in reports)),
    }

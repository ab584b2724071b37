"""Rational analytic discs in projective space.

A disc is stored as an ``(n+1, d+1)`` complex coefficient array whose row
``i`` holds the ascending coefficients of the homogeneous component ``p_i``.
The disc is ``zeta -> [p_0(zeta) : ... : p_n(zeta)]``; it meets the
hyperplane at infinity exactly at the zeros of ``p_0`` that are not common
zeros of all components.

Besides evaluation and the zero locator used by the J functional, this
module holds the explicit disc families used by the envelope estimators
(touching discs, one-pole discs, polynomial discs) and the multiplicity
splitting procedure.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .core import CircleGrid, ProjectivePoint, affine_embed, as_vector, proj_normalize

logger = logging.getLogger(__name__)

TAU_BOUNDARY = 1e-6
TAU_CLUSTER = 1e-8
# coefficients below this fraction of the largest one are treated as zero
COEFF_EPS = 1e-14
# loose radius used to propose root clusters before verification
GROUP_RADIUS = 1e-3


class BoundaryZeroError(ValueError):
    """The zeroth component vanishes on or too near the unit circle."""


class PoleOutsideDiscError(ValueError):
    """Touching-disc radius is not smaller than the distance |z - w|."""


class RemovablePoleWarning(UserWarning):
    """The requested pole is cancelled by a common factor of all components."""


class DiscPreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# zeros of the zeroth component


@dataclass(frozen=True)
class ZeroSet:
    """Zeros of a polynomial inside the open unit disc, with multiplicities."""

    locations: tuple = ()
    multiplicities: tuple = ()
    degenerate: bool = False

    @property
    def entries(self):
        return list(zip(self.locations, self.multiplicities))

    @property
    def total(self) -> int:
        return int(sum(self.multiplicities))

    def j_value(self) -> float:
        if self.degenerate:
            return float("inf")
        total = 0.0
        for a, m in self.entries:
            if a == 0:
                return float("inf")
            total -= m * np.log(abs(a))
        return float(total)


def _strip(c: np.ndarray):
    """Split ``c`` into (order of vanishing at 0, trimmed coefficients)."""
    c = np.asarray(c, dtype=complex)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return None, None
    small = np.abs(c) <= COEFF_EPS * scale
    nz = np.flatnonzero(~small)
    lo, hi = nz[0], nz[-1]
    return int(lo), c[lo:hi + 1]


def taylor_coefficients(c: np.ndarray, center: complex, count: int) -> np.ndarray:
    """First ``count`` Taylor coefficients of the polynomial ``c`` (ascending) at ``center``."""
    rem = np.asarray(c, dtype=complex)[::-1].copy()  # descending
    out = []
    for _ in range(count):
        if rem.size == 0:
            out.append(0j)
            continue
        # synthetic division by (x - center): quotient and remainder
        acc = np.empty_like(rem)
        acc[0] = rem[0]
        for i in range(1, rem.size):
            acc[i] = acc[i - 1] * center + rem[i]
        out.append(acc[-1])
        rem = acc[:-1]
    return np.array(out)


def _refine_multiple(c: np.ndarray, a: complex, m: int, radius: float, steps: int = 3) -> complex:
    """Newton steps for an m-fold zero, run on the (m-1)-th derivative where it is simple.

    A step is kept only if it lowers the derivative's modulus and stays
    within ``radius`` of the starting point.
    """
    dc = P.polyder(c, m - 1)
    ddc = P.polyder(dc)
    start = a
    val = P.polyval(a, dc)
    for _ in range(steps):
        d = P.polyval(a, ddc)
        if d == 0 or val == 0:
            break
        b = a - val / d
        vb = P.polyval(b, dc)
        if not (abs(vb) < abs(val) and abs(b - start) <= radius):
            break
        a, val = b, vb
    return complex(a)


def _cluster(roots: np.ndarray, c: np.ndarray, tol: float):
    """Group numerically repeated roots.

    Roots of a polynomial with an m-fold zero spread by about eps**(1/m), so a
    plain distance test at ``tol`` cannot recognise them.  Roots are first
    grouped by a loose radius; a group of size m is accepted as one m-fold
    zero at its centroid when the first m Taylor coefficients there are below
    ``tol`` times the m-th one (up to rounding level).  Measuring against the
    m-th coefficient keeps distinct zeros a few 1e-4 apart from merging.  Rejected groups
    fall back to merging roots closer than ``tol`` (relative).
    """
    order = np.argsort(-np.abs(roots), kind="stable")
    remaining = list(roots[order])
    groups = []
    while remaining:
        a = remaining.pop(0)
        rad = GROUP_RADIUS * max(1.0, abs(a))
        members = [a] + [b for b in remaining if abs(b - a) <= rad]
        remaining = [b for b in remaining if abs(b - a) > rad]
        groups.append(members)

    locs, mults = [], []
    for members in groups:
        m = len(members)
        centroid = complex(np.mean(members))
        if m == 1:
            locs.append(members[0])
            mults.append(1)
            continue
        q = taylor_coefficients(c, centroid, m + 1)
        head = np.sum(np.abs(q[:m]))
        # rounding level of the Taylor coefficients computed from c
        noise = 1e-14 * np.sum(taylor_coefficients(np.abs(c), abs(centroid), m).real)
        if head <= tol * abs(q[m]) + noise:
            locs.append(_refine_multiple(c, centroid, m, rad))
            mults.append(m)
            continue
        # fallback: tight clustering by distance
        pending = list(members)
        while pending:
            a = pending.pop(0)
            close = [b for b in pending if abs(b - a) <= tol * max(1.0, abs(a))]
            pending = [b for b in pending if abs(b - a) > tol * max(1.0, abs(a))]
            locs.append(complex(np.mean([a] + close)))
            mults.append(1 + len(close))
    return locs, mults


def all_zeros(p) -> tuple:
    """All zeros of ``p`` (ascending coefficients) as (locations, multiplicities, order at 0).

    Returns ``None`` when ``p`` vanishes identically.
    """
    lo, c = _strip(p)
    if c is None:
        return None
    if c.size == 1:
        return [], [], lo
    roots = np.roots(c[::-1])
    locs, mults = _cluster(roots, c, TAU_CLUSTER)
    return locs, mults, lo


def zeros_in_disc(p, tau_boundary: float = TAU_BOUNDARY) -> ZeroSet:
    """Zeros of ``p`` in the open unit disc, clustered, with multiplicities.

    Raises
    ------
    BoundaryZeroError
        If some zero has modulus within ``tau_boundary`` of 1.
    """
    res = all_zeros(p)
    if res is None:
        return ZeroSet(degenerate=True)
    locs, mults, lo = res
    out_l, out_m = [], []
    if lo > 0:
        out_l.append(0j)
        out_m.append(lo)
    for a, m in zip(locs, mults):
        r = abs(a)
        if abs(r - 1.0) <= tau_boundary:
            raise BoundaryZeroError(f"zero at {a} lies within {tau_boundary} of the unit circle")
        if r < 1.0:
            out_l.append(complex(a))
            out_m.append(int(m))
    order = np.argsort([abs(a) for a in out_l], kind="stable")
    return ZeroSet(tuple(out_l[i] for i in order), tuple(out_m[i] for i in order), False)


# ---------------------------------------------------------------------------
# disc representation


@dataclass(frozen=True, eq=False)
class RationalDisc:
    """Disc ``zeta -> [p_0 : ... : p_n]`` with ascending coefficient rows."""

    components: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.array(self.components, dtype=complex))
        if c.ndim != 2 or c.shape[0] < 2:
            raise ValueError(f"need n+1 >= 2 component rows, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("disc coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @property
    def dim(self) -> int:
        return self.components.shape[0] - 1

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(np.any(self.components != 0, axis=0))
        return int(nz[-1]) if nz.size else 0

    @property
    def p0(self) -> np.ndarray:
        return self.components[0]

    def lifted(self, zeta) -> np.ndarray:
        """Homogeneous values, shape ``(n+1,) + shape(zeta)``."""
        return P.polyval(np.asarray(zeta, dtype=complex), self.components.T)

    def affine(self, zeta) -> np.ndarray:
        """Affine values ``p_i / p_0`` with shape ``shape(zeta) + (n,)``."""
        v = self.lifted(zeta)
        return np.moveaxis(v[1:] / v[0], 0, -1)

    def center_affine(self) -> np.ndarray:
        """Affine centre ``p(0)[1:] / p_0(0)``, computed from the constant coefficients."""
        c0 = self.components[:, 0]
        if c0[0] == 0:
            raise DiscPreconditionError("disc centre lies on the hyperplane at infinity")
        return c0[1:] / c0[0]

    @property
    def radius_of_validity(self) -> float:
        """Smallest modulus of a common zero of all components (inf when none)."""
        res = all_zeros(self.components[0])
        if res is None:
            # p_0 identically zero: common zeros are those of the other components
            others = [all_zeros(row) for row in self.components[1:]]
            if any(o is None for o in others) and all(o is None for o in others):
                return 0.0
            cand = []
            for o in others:
                if o is None:
                    continue
                cand.extend(o[0])
                if o[2]:
                    cand.append(0j)
            return _common_min_modulus(self.components, cand)
        locs, _, lo = res
        cand = list(locs) + ([0j] if lo else [])
        return _common_min_modulus(self.components, cand)

    def to_dict(self) -> dict:
        return {"components": [[[float(c.real), float(c.imag)] for c in row] for row in self.components]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RationalDisc":
        comps = [[complex(re, im) for re, im in row] for row in d["components"]]
        width = max(len(r) for r in comps)
        arr = np.zeros((len(comps), width), dtype=complex)
        for i, r in enumerate(comps):
            arr[i, :len(r)] = r
        return cls(arr)


def _is_common_zero(components: np.ndarray, a: complex, rtol: float = 1e-8) -> bool:
    r = max(1.0, abs(a))
    powers = r ** np.arange(components.shape[1])
    for row in components:
        scale = np.sum(np.abs(row) * powers)
        if scale == 0:
            continue
        if abs(P.polyval(a, row)) > rtol * scale:
            return False
    return True


def _common_min_modulus(components, candidates) -> float:
    common = [abs(a) for a in candidates if _is_common_zero(components, a)]
    return float(min(common)) if common else float("inf")


def _divide_linear(row: np.ndarray, a: complex) -> np.ndarray:
    """Quotient of ``row`` (ascending) by ``(zeta - a)``, dropping the remainder."""
    desc = row[::-1]
    q = np.empty(max(desc.size - 1, 1), dtype=complex)
    if desc.size == 1:
        return np.zeros(1, dtype=complex)
    acc = desc[0]
    q[0] = acc
    for i in range(1, desc.size - 1):
        acc = acc * a + desc[i]
        q[i] = acc
    return q[::-1]


def deflate_common_factors(f: RationalDisc, radius: float = 1.0 + 1e-3) -> RationalDisc:
    """Divide out linear factors ``(zeta - a)`` shared by all components for |a| <= ``radius``.

    Such factors do not change the map but would be counted as spurious
    intersections with the hyperplane at infinity.
    """
    comps = np.array(f.components)
    changed = False
    while True:
        res = all_zeros(comps[0])
        if res is None:
            break
        locs, mults, lo = res
        cand = ([0j] if lo else []) + [a for a in locs if abs(a) <= radius]
        hit = next((a for a in cand if _is_common_zero(comps, a)), None)
        if hit is None or comps.shape[1] < 2:
            break
        comps = np.array([_divide_linear(row, hit) for row in comps])
        changed = True
    return RationalDisc(comps) if changed else f


# ---------------------------------------------------------------------------
# evaluation


def evaluate(f: RationalDisc, zeta: complex) -> ProjectivePoint:
    """The point ``f(zeta)`` of projective space."""
    return proj_normalize(f.lifted(complex(zeta)))


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Values of a disc at the nodes of a circle grid.

    ``affine`` has shape ``(N, n)`` with NaN rows where the node is flagged as
    (numerically) on the hyperplane at infinity.
    """

    nodes: np.ndarray
    lifted: np.ndarray
    affine: np.ndarray
    at_infinity: np.ndarray

    def projective(self) -> list:
        return [proj_normalize(col) if np.any(col != 0) else None for col in self.lifted.T]


def boundary_trace(f: RationalDisc, grid: CircleGrid, tol: float = 1e-12) -> BoundaryTrace:
    """Evaluate ``f`` at every node of ``grid``, flagging nodes at or near infinity."""
    nodes = grid.nodes
    v = f.lifted(nodes)
    norm = np.linalg.norm(v, axis=0)
    near = np.abs(v[0]) <= tol * np.maximum(norm, np.finfo(float).tiny)
    near |= norm == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        aff = (v[1:] / v[0]).T
    aff[near] = np.nan
    return BoundaryTrace(nodes, v, aff, near)


def chordal_distance(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Fubini-Study chordal distance between lifted points (columns of ``u`` and ``v``)."""
    uh = u / np.linalg.norm(u, axis=0)
    vh = v / np.linalg.norm(v, axis=0)
    # sine of the angle via the component of vh orthogonal to uh (no cancellation near 0)
    inner = np.sum(np.conj(uh) * vh, axis=0)
    return np.clip(np.linalg.norm(vh - inner * uh, axis=0), 0.0, 1.0)


# ---------------------------------------------------------------------------
# transformations


def rotate(f: RationalDisc, theta: float) -> RationalDisc:
    """Precompose with ``zeta -> exp(i theta) zeta``."""
    k = np.arange(f.components.shape[1])
    return RationalDisc(f.components * np.exp(1j * theta * k))


def power_substitute(f: RationalDisc, k: int) -> RationalDisc:
    """Precompose with ``zeta -> zeta**k``."""
    if k < 1:
        raise ValueError("power must be a positive integer")
    c = f.components
    out = np.zeros((c.shape[0], k * (c.shape[1] - 1) + 1), dtype=complex)
    out[:, ::k] = c
    return RationalDisc(out)


# ---------------------------------------------------------------------------
# explicit families


def make_constant_disc(x) -> RationalDisc:
    x = as_vector(x)
    return RationalDisc(np.concatenate(([1.0 + 0j], x))[:, None])


def make_touching_disc(z, w, r: float) -> RationalDisc:
    """One-pole disc centred at ``z`` whose boundary is the circle of radius ``r`` about ``w``.

    The circle lies in the complex line through ``z`` and ``w``.  The
    representation is scaled so that ``p_0(0) = 1``; the single intersection
    with the hyperplane at infinity is at ``-r / |z - w|``.
    """
    z = as_vector(z)
    w = as_vector(w)
    if z.size != w.size:
        raise ValueError("z and w must have the same dimension")
    L = float(np.linalg.norm(z - w))
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    if L == 0.0 or r >= L:
        raise PoleOutsideDiscError(f"need 0 < r < |z - w| (r={r}, |z - w|={L})")
    lam = L / r
    comps = np.zeros((z.size + 1, 2), dtype=complex)
    comps[0] = [1.0, lam]
    comps[1:, 0] = z
    comps[1:, 1] = lam * w + (z - w) / lam
    return RationalDisc(comps)


def make_one_pole_disc(z, zeta0: complex, g) -> RationalDisc:
    """Disc with ``p_0 = zeta - zeta0`` and ``p_i = (zeta - zeta0) z_i + zeta g_i(zeta)``.

    Stored scaled by ``-1/zeta0`` so the centre is exactly ``z``.

    Parameters
    ----------
    z : array_like, shape (n,)
    zeta0 : complex
        Pole location, ``0 < |zeta0| < 1``.
    g : array_like, shape (n, m)
        Ascending coefficients of the polynomials ``g_i``.
    """
    z = as_vector(z)
    zeta0 = complex(zeta0)
    if not 0 < abs(zeta0) < 1:
        raise ValueError(f"pole must satisfy 0 < |zeta0| < 1, got {zeta0}")
    g = np.atleast_2d(np.asarray(g, dtype=complex))
    if g.shape[0] != z.size:
        raise ValueError(f"g needs {z.size} rows, got {g.shape[0]}")
    if not np.any(g):
        raise ValueError("g must not vanish identically (the pole would be removable)")
    s = -1.0 / zeta0
    width = max(2, g.shape[1] + 1)
    comps = np.zeros((z.size + 1, width), dtype=complex)
    comps[0, 0] = 1.0
    comps[0, 1] = s
    comps[1:, 0] = z
    comps[1:, 1] += s * z
    comps[1:, 1:g.shape[1] + 1] += s * g
    f = RationalDisc(comps)
    gval = P.polyval(zeta0, g.T)
    if np.all(np.abs(gval) <= 1e-10 * np.maximum(1.0, np.sum(np.abs(g), axis=1))):
        warnings.warn(f"g vanishes at the pole {zeta0}; the pole is removable", RemovablePoleWarning, stacklevel=2)
        return deflate_common_factors(f)
    return f


def make_polynomial_disc(z, c=None) -> RationalDisc:
    """Disc in C^n: ``p_0 = 1``, ``p_i = z_i + sum_k c[k-1, i] zeta^k``.

    ``c`` has shape ``(d, n)``; ``None`` or an empty array gives the constant disc.
    """
    z = as_vector(z)
    if c is None:
        c = np.zeros((0, z.size), dtype=complex)
    c = np.asarray(c, dtype=complex).reshape(-1, z.size)
    comps = np.zeros((z.size + 1, c.shape[0] + 1), dtype=complex)
    comps[0, 0] = 1.0
    comps[1:, 0] = z
    comps[1:, 1:] = c.T
    return RationalDisc(comps)


# ---------------------------------------------------------------------------
# multiplicity splitting


def split_angles(m: int, delta: float) -> np.ndarray:
    """``m`` distinct angles in ``[-delta/2, delta/2]`` summing to zero."""
    if m == 1:
        return np.zeros(1)
    j = np.arange(m)
    return 0.5 * delta * (2 * j - (m - 1)) / (m - 1)


def simplify_multiplicities(f: RationalDisc, delta: float) -> RationalDisc:
    """Replace each multiple zero ``a`` of ``p_0`` in the disc by simple zeros on the circle ``|zeta| = |a|``.

    An m-fold zero ``a`` becomes the zeros ``a exp(i d_j)`` with distinct
    ``d_j``, ``|d_j| <= delta`` and ``sum d_j = 0``.  Moduli are unchanged,
    so J is unchanged, and the product of the zeros is unchanged, so
    ``p_0(0)`` and hence the centre are unchanged.  The constant coefficient
    of the new ``p_0`` is copied from ``f`` so the centre is preserved
    exactly in floating point as well.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    f = deflate_common_factors(f)
    p0 = np.array(f.components[0])
    if p0[0] == 0:
        raise DiscPreconditionError("p_0 vanishes at the origin: the centre is at infinity")
    zs = zeros_in_disc(p0)
    if zs.degenerate:
        raise DiscPreconditionError("p_0 vanishes identically")
    multiple = [(a, m) for a, m in zs.entries if m > 1]
    if not multiple:
        return f
    q = p0
    new_factor = np.array([1.0 + 0j])
    for a, m in multiple:
        for _ in range(m):
            q = _divide_linear(q, a)
        for d in split_angles(m, delta):
            new_factor = P.polymul(new_factor, [-a * np.exp(1j * d), 1.0])
    g0 = P.polymul(q, new_factor)
    width = max(g0.size, f.components.shape[1])
    comps = np.zeros((f.components.shape[0], width), dtype=complex)
    comps[:, :f.components.shape[1]] = f.components
    comps[0] = 0
    comps[0, :g0.size] = g0
    comps[0, 0] = p0[0]
    return RationalDisc(comps)

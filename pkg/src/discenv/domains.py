"""Open subsets of C^n with exact membership and boundary-distance oracles.

Four kinds are supported, each with a closed-form Euclidean distance to the
boundary: open balls, (possibly unbounded) convex polytopes given by strict
real half-spaces, disjoint unions with positive separation, and an outer
domain with a closed ball removed.

All geometric evaluation goes through :meth:`Domain.signed_distance`, which
is vectorized over an ``(m, n)`` complex array of points.  It equals the
boundary distance at points of the set and is negative outside (a distance
proxy there, used only as a penalty).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .core import as_vector

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """Invalid domain description (schema, emptiness, overlap)."""


class DimensionMismatchError(ValueError):
    pass


class OutsideDomainError(ValueError):
    pass


def _points(z, dim: int) -> np.ndarray:
    a = np.asarray(z, dtype=complex)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != dim:
        raise DimensionMismatchError(f"expected points in C^{dim}, got array of shape {np.shape(z)}")
    return a


class Domain:
    """Base class.  Subclasses implement ``_sdf`` on an (m, n) array."""

    dim: int
    connected: bool

    def signed_distance(self, z) -> np.ndarray:
        return self._sdf(_points(z, self.dim))

    def contains(self, z) -> bool:
        return bool(self._contains(_points(z, self.dim))[0])

    def contains_many(self, z) -> np.ndarray:
        return self._contains(_points(z, self.dim))

    def _contains(self, pts: np.ndarray) -> np.ndarray:
        return self._sdf(pts) > 0

    def boundary_distance(self, w) -> float:
        w = as_vector(w)
        pts = _points(w, self.dim)
        if not self._contains(pts)[0]:
            raise OutsideDomainError(f"point {w} is not in the domain")
        return float(self._sdf(pts)[0])

    def interior_seeds(self) -> np.ndarray:
        """A few well-inside points, used to start inner optimizations."""
        raise NotImplementedError

    def sample_interior(self, rng: np.random.Generator, m: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _connected_default(self) -> bool:
        return True


def _cvec_to_json(v: np.ndarray) -> list:
    return [[float(c.real), float(c.imag)] for c in v]


def _cvec_from_json(obj, what: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{what}: expected a list of [re, im] pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise DomainError(f"{what}: expected a nonempty list of [re, im] pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what}: non-finite entries")
    return arr[:, 0] + 1j * arr[:, 1]


@dataclass(frozen=True, eq=False)
class Ball(Domain):
    center: np.ndarray
    radius: float
    connected: bool = True

    def __post_init__(self):
        c = as_vector(self.center)
        object.__setattr__(self, "center", c)
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    def _dist(self, pts):
        diff = pts - self.center
        return np.sqrt(np.sum(diff.real ** 2 + diff.imag ** 2, axis=1))

    def _sdf(self, pts):
        return self.radius - self._dist(pts)

    def _contains(self, pts):
        return self._dist(pts) < self.radius

    def interior_seeds(self):
        return self.center[None, :].copy()

    def sample_interior(self, rng, m):
        n = self.dim
        g = rng.normal(size=(m, 2 * n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = self.radius * rng.random(m) ** (1.0 / (2 * n))
        x = g * rad[:, None]
        return self.center + x[:, :n] + 1j * x[:, n:]

    def to_dict(self):
        d = {"type": "ball", "center": _cvec_to_json(self.center), "radius": self.radius}
        if not self.connected:
            d["connected"] = False
        return d


@dataclass(frozen=True, eq=False)
class Polytope(Domain):
    """Intersection of open half-spaces Re<normal_j, z> < offset_j.

    The real inner product is the one of R^{2n}: Re(sum normal_i * conj(z_i)).
    """

    normals: np.ndarray
    offsets: np.ndarray
    connected: bool = True

    def __post_init__(self):
        nu = np.atleast_2d(np.asarray(self.normals, dtype=complex))
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if nu.shape[0] != b.size or nu.shape[0] == 0:
            raise DomainError("polytope needs one offset per normal and at least one half-space")
        norms = np.linalg.norm(nu, axis=1)
        if np.any(norms == 0):
            raise DomainError("polytope normals must be nonzero")
        object.__setattr__(self, "normals", nu)
        object.__setattr__(self, "offsets", b)
        if self._chebyshev[1] <= 0:
            raise DomainError("polytope is empty")

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @cached_property
    def _norms(self):
        return np.linalg.norm(self.normals, axis=1)

    def _inner(self, pts):
        return (pts @ self.normals.conj().T).real

    def _sdf(self, pts):
        return np.min((self.offsets - self._inner(pts)) / self._norms, axis=1)

    def _contains(self, pts):
        return np.all(self._inner(pts) < self.offsets, axis=1)

    @cached_property
    def _real_normals(self):
        return np.hstack([self.normals.real, self.normals.imag])

    @cached_property
    def _chebyshev(self):
        """Centre and radius of the largest inscribed ball (radius capped for unbounded sets)."""
        A = self._real_normals
        n2 = A.shape[1]
        cap = 1e3 * (1.0 + np.max(np.abs(self.offsets) / self._norms))
        A_ub = np.hstack([A, self._norms[:, None]])
        c = np.zeros(n2 + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=A_ub, b_ub=self.offsets, bounds=[(None, None)] * n2 + [(None, cap)],
                      method="highs")
        if res.status != 0:
            return np.zeros(self.normals.shape[1], dtype=complex), -1.0
        x = res.x[:n2]
        n = n2 // 2
        return x[:n] + 1j * x[n:], float(res.x[-1])

    @cached_property
    def _box(self):
        """Per-coordinate real bounds, clipped around the Chebyshev centre when unbounded."""
        A = self._real_normals
        n2 = A.shape[1]
        c0, rho = self._chebyshev
        x0 = np.concatenate([c0.real, c0.imag])
        span = 10.0 * max(rho, 1e-3)
        lo, hi = x0 - span, x0 + span
        for i in range(n2):
            for sgn in (1.0, -1.0):
                e = np.zeros(n2)
                e[i] = sgn
                res = linprog(-e, A_ub=A, b_ub=self.offsets, bounds=[(x0[k] - span, x0[k] + span) for k in range(n2)],
                              method="highs")
                if res.status == 0:
                    if sgn > 0:
                        hi[i] = res.x[i]
                    else:
                        lo[i] = res.x[i]
        return lo, hi

    def interior_seeds(self):
        return self._chebyshev[0][None, :].copy()

    def sample_interior(self, rng, m):
        lo, hi = self._box
        n = self.dim
        out = []
        while sum(len(o) for o in out) < m:
            x = lo + (hi - lo) * rng.random((4 * m, lo.size))
            z = x[:, :n] + 1j * x[:, n:]
            out.append(z[self._contains(z)])
        return np.concatenate(out)[:m]

    def to_dict(self):
        hs = [{"normal": _cvec_to_json(nu), "offset": float(b)} for nu, b in zip(self.normals, self.offsets)]
        d = {"type": "polytope", "halfspaces": hs}
        if not self.connected:
            d["connected"] = False
        return d


@dataclass(frozen=True, eq=False)
class Union(Domain):
    """Disjoint union of domains with positive pairwise separation."""

    parts: tuple
    connected: bool = False
    check_samples: int = 2000

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise DomainError("union needs at least one part")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DomainError(f"union parts have different dimensions {sorted(dims)}")
        object.__setattr__(self, "parts", parts)
        self._check_disjoint()

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def _check_disjoint(self):
        rng = np.random.default_rng(12345)
        for i, p in enumerate(self.parts):
            for j in range(i + 1, len(self.parts)):
                q = self.parts[j]
                if isinstance(p, Ball) and isinstance(q, Ball):
                    gap = np.linalg.norm(p.center - q.center) - p.radius - q.radius
                    if gap <= 0:
                        raise DomainError(f"union parts {i} and {j} are not disjoint with positive separation")
                    continue
                # sampling check: no sample of one part lies in the other, nor within a
                # thin collar of it
                for a, b in ((p, q), (q, p)):
                    s = a.sample_interior(rng, self.check_samples)
                    if np.any(b.signed_distance(s) > -1e-9):
                        raise DomainError(f"union parts {i} and {j} overlap or touch")
                    seeds = a.interior_seeds()
                    if np.any(b.signed_distance(seeds) > -1e-9):
                        raise DomainError(f"union parts {i} and {j} overlap or touch")

    def _sdf(self, pts):
        return np.max(np.stack([p._sdf(pts) for p in self.parts]), axis=0)

    def _contains(self, pts):
        return np.any(np.stack([p._contains(pts) for p in self.parts]), axis=0)

    def interior_seeds(self):
        return np.concatenate([p.interior_seeds() for p in self.parts])

    def sample_interior(self, rng, m):
        k = len(self.parts)
        return np.concatenate([p.sample_interior(rng, -(-m // k)) for p in self.parts])[:m]

    def to_dict(self):
        d = {"type": "union", "parts": [p.to_dict() for p in self.parts]}
        if self.connected:
            d["connected"] = True
        return d


@dataclass(frozen=True, eq=False)
class Difference(Domain):
    """``outer`` minus the closed ball of radius ``inner_radius`` about ``inner_center``."""

    outer: Domain
    inner_center: np.ndarray
    inner_radius: float
    connected: bool = True

    def __post_init__(self):
        c = as_vector(self.inner_center)
        object.__setattr__(self, "inner_center", c)
        if c.size != self.outer.dim:
            raise DomainError("inner ball dimension does not match the outer domain")
        if not (np.isfinite(self.inner_radius) and self.inner_radius > 0):
            raise DomainError("inner radius must be positive")
        object.__setattr__(self, "inner_radius", float(self.inner_radius))
        if not self.outer.contains(c) or self.outer.boundary_distance(c) <= self.inner_radius:
            raise DomainError("removed closed ball must lie strictly inside the outer domain")

    @property
    def dim(self) -> int:
        return self.outer.dim

    def _hole(self, pts):
        return np.linalg.norm(pts - self.inner_center, axis=1) - self.inner_radius

    def _sdf(self, pts):
        return np.minimum(self.outer._sdf(pts), self._hole(pts))

    def _contains(self, pts):
        return self.outer._contains(pts) & (np.linalg.norm(pts - self.inner_center, axis=1) > self.inner_radius)

    def interior_seeds(self):
        seeds = [s for s in self.outer.interior_seeds() if self._contains(s[None, :])[0]]
        # points halfway between the hole and the outer boundary along each axis
        d_out = self.outer.boundary_distance(self.inner_center)
        t = 0.5 * (self.inner_radius + d_out)
        for k in range(self.dim):
            for u in (1.0, -1.0, 1j, -1j):
                e = np.zeros(self.dim, dtype=complex)
                e[k] = u
                seeds.append(self.inner_center + t * e)
        pts = np.array(seeds)
        return pts[self._contains(pts)]

    def sample_interior(self, rng, m):
        out = []
        while sum(len(o) for o in out) < m:
            s = self.outer.sample_interior(rng, 2 * m)
            out.append(s[self._contains(s)])
        return np.concatenate(out)[:m]

    def to_dict(self):
        d = {
            "type": "difference",
            "outer": self.outer.to_dict(),
            "inner_center": _cvec_to_json(self.inner_center),
            "inner_radius": self.inner_radius,
        }
        if not self.connected:
            d["connected"] = False
        return d


def contains(X: Domain, z) -> bool:
    return X.contains(as_vector(z))


def boundary_distance(X: Domain, w) -> float:
    return X.boundary_distance(w)


def signed_distance(X: Domain, z) -> np.ndarray:
    return X.signed_distance(z)


def is_closed_form(X: Domain) -> bool:
    """True when the inf over inscribed balls has a closed form (balls and disjoint unions of balls)."""
    if isinstance(X, Ball):
        return True
    if isinstance(X, Union):
        return all(is_closed_form(p) for p in X.parts)
    return False


def ball_parts(X: Domain) -> list:
    """Flatten a closed-form domain into its ball parts."""
    if isinstance(X, Ball):
        return [X]
    if isinstance(X, Union):
        return [b for p in X.parts for b in ball_parts(p)]
    raise TypeError(f"{type(X).__name__} is not a ball or a union of balls")


def domain_from_dict(d: dict) -> Domain:
    if not isinstance(d, dict) or "type" not in d:
        raise DomainError("domain object needs a 'type' key")
    kind = d["type"]
    connected = d.get("connected")
    if connected is not None and not isinstance(connected, bool):
        raise DomainError("'connected' must be true or false")
    if kind == "ball":
        _require(d, ("center", "radius"), kind)
        c = _cvec_from_json(d["center"], "ball center")
        r = _number(d["radius"], "ball radius")
        return Ball(c, r, connected=True if connected is None else connected)
    if kind == "polytope":
        _require(d, ("halfspaces",), kind)
        hs = d["halfspaces"]
        if not isinstance(hs, list) or not hs:
            raise DomainError("polytope needs a nonempty 'halfspaces' list")
        normals, offsets = [], []
        for h in hs:
            if not isinstance(h, dict):
                raise DomainError("each half-space must be an object with 'normal' and 'offset'")
            _require(h, ("normal", "offset"), "halfspace")
            normals.append(_cvec_from_json(h["normal"], "half-space normal"))
            offsets.append(_number(h["offset"], "half-space offset"))
        if len({v.size for v in normals}) != 1:
            raise DomainError("half-space normals have different dimensions")
        return Polytope(np.array(normals), np.array(offsets), connected=True if connected is None else connected)
    if kind == "union":
        _require(d, ("parts",), kind)
        if not isinstance(d["parts"], list) or not d["parts"]:
            raise DomainError("union needs a nonempty 'parts' list")
        parts = tuple(domain_from_dict(p) for p in d["parts"])
        return Union(parts, connected=False if connected is None else connected)
    if kind == "difference":
        _require(d, ("outer", "inner_center", "inner_radius"), kind)
        outer = domain_from_dict(d["outer"])
        c = _cvec_from_json(d["inner_center"], "inner center")
        r = _number(d["inner_radius"], "inner radius")
        return Difference(outer, c, r, connected=True if connected is None else connected)
    raise DomainError(f"unknown domain type {kind!r}")


def _require(d, keys, what):
    missing = [k for k in keys if k not in d]
    if missing:
        raise DomainError(f"{what}: missing key(s) {', '.join(missing)}")


def _number(x, what) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise DomainError(f"{what} must be a number")
    return float(x)


def parse_domain(text: str) -> Domain:
    """Parse a domain from its JSON document."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"invalid JSON: {exc}") from exc
    return domain_from_dict(d)


def dump_domain(X: Domain) -> str:
    return json.dumps(X.to_dict())

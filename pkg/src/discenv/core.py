"""Projective points over complex vectors, plus equispaced quadrature grids on the circle.

Everything here works in double precision.  Affine points of C^n are plain
1-D complex numpy arrays; points of P^n are :class:`ProjectivePoint`
instances holding a canonical representative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class InvalidPointError(ValueError):
    """Raised for an all-zero homogeneous coordinate vector."""


class PointAtInfinityError(ValueError):
    """Raised when an affine part is requested for a point on z_0 = 0."""


def as_vector(z) -> np.ndarray:
    """Coerce ``z`` to a 1-D complex array with finite entries."""
    v = np.atleast_1d(np.asarray(z, dtype=complex))
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty 1-D complex vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("complex vector has non-finite entries")
    return v


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A point [z_0 : ... : z_n] of complex projective space.

    ``coords`` is the canonical representative: the coordinate of largest
    modulus (lowest index on ties) equals 1.  When the point was built from
    an affine vector the exact affine coordinates are kept in ``_affine`` so
    that ``affine_part(affine_embed(z))`` returns ``z`` bit for bit.
    """

    coords: np.ndarray
    _affine: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.coords.setflags(write=False)
        if self._affine is not None:
            self._affine.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.coords.size - 1

    @property
    def is_at_infinity(self) -> bool:
        return self.coords[0] == 0

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        return self.coords.shape == other.coords.shape and bool(np.all(self.coords == other.coords))

    def __hash__(self):
        return hash(self.coords.tobytes())

    def isclose(self, other: "ProjectivePoint", tol: float = 1e-12) -> bool:
        return self.coords.shape == other.coords.shape and bool(
            np.max(np.abs(self.coords - other.coords)) <= tol
        )


def proj_normalize(raw) -> ProjectivePoint:
    """Canonical representative of the projective point with coordinates ``raw``.

    Divides by the coordinate of largest modulus, taking the first one when
    several agree to within rounding.  The division is done on
    values of modulus at most one, so tiny or huge inputs do not overflow.
    """
    v = np.atleast_1d(np.asarray(raw, dtype=complex))
    if v.ndim != 1 or v.size < 2:
        raise InvalidPointError(f"need n+1 >= 2 homogeneous coordinates, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidPointError("homogeneous coordinates must be finite")
    mod = np.abs(v)
    top = mod.max()
    if top == 0:
        raise InvalidPointError("all homogeneous coordinates are zero")
    # first index on ties; moduli a few ulps apart count as tied so that
    # rescaling the coordinates cannot change which one is chosen
    k = int(np.argmax(mod >= top * (1.0 - 16 * np.finfo(float).eps)))
    out = v / v[k]
    out[k] = 1.0
    return ProjectivePoint(out)


def affine_embed(z) -> ProjectivePoint:
    """The point [1 : z_1 : ... : z_n] of P^n."""
    v = as_vector(z)
    p = proj_normalize(np.concatenate(([1.0 + 0j], v)))
    return ProjectivePoint(p.coords, v.copy())


def affine_part(p: ProjectivePoint) -> np.ndarray:
    """Affine coordinates (z_1/z_0, ..., z_n/z_0) of ``p``."""
    if p.is_at_infinity:
        raise PointAtInfinityError("point lies on the hyperplane at infinity")
    if p._affine is not None:
        return p._affine.copy()
    return p.coords[1:] / p.coords[0]


@dataclass(frozen=True, eq=False)
class CircleGrid:
    """N equispaced nodes exp(2 pi i k / N) on the unit circle, weight 1/N each."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"circle grid needs an integer N >= 8, got {self.n}")

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.exp(1j * self.angles)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def mean(self, values) -> float:
        """Trapezoid-rule average of node values (normalized arc length)."""
        return float(np.mean(values))

    def refine(self, factor: int = 4) -> "CircleGrid":
        return CircleGrid(self.n * factor)

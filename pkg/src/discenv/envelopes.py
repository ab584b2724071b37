"""Envelope estimators: minimise disc functionals over parametrised disc classes.

Every estimator returns an :class:`EnvelopeEstimate` whose value is the
functional of an explicit disc, recomputed on a grid four times finer than
the one used during the search.  When that disc is admissible the value is
an upper bound for the extremal function at the query point.

Search strategy
---------------
Multi-start Nelder-Mead over the real and imaginary parts of the disc
parameters.  Boundary constraints (for classes requiring the boundary in X)
enter through a quadratic penalty on the signed distance at the nodes,
followed by a restoration pass with a larger weight and margin.  Analytic
seeds (the constant disc and the touching disc of the best inscribed ball)
are always evaluated first, so no estimate is worse than the inscribed-ball
bound.  The restarts stop early once ``patience`` consecutive restarts
fail to improve the incumbent.  Restart ``k`` searches over discs of degree ``min(d, 2**(k // 2))``
and draws its random perturbations from a generator seeded by
``(seed, point index, k)``.
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .core import CircleGrid, as_vector
from .discs import (
    RationalDisc,
    boundary_trace,
    make_constant_disc,
    make_polynomial_disc,
    make_touching_disc,
)
from .domains import Ball, Domain, ball_parts, is_closed_form
from .functionals import ball_majorant_functional, h_functional, j_functional, poisson_integral

logger = logging.getLogger(__name__)

DISC_CLASSES = ("touching_balls", "one_pole", "boundary_in_X", "affine", "all_projective")


class ConnectivityError(ValueError):
    """The boundary-in-X envelope was requested for a domain declared disconnected."""


class EmptyDomainError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 8
    budget: int = 2000
    penalty: float = 1e4
    seed: int = 0
    quad_n: int = 1024
    tol: float = 1e-10
    degree: int = 16
    poles: int = 2
    margin: float = 1e-4
    seed_shrink: float = 1e-10
    candidates: int = 2048
    patience: int = 4

    def __post_init__(self):
        for name in ("restarts", "budget", "quad_n", "degree", "poles", "candidates"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("penalty", "tol", "margin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.patience < 0:
            raise ValueError("patience must be nonnegative")
        if self.quad_n < 8:
            raise ValueError("quad_n must be at least 8")


@dataclass(frozen=True, eq=False)
class EnvelopeEstimate:
    value: float
    best_disc: RationalDisc
    feasible: bool
    iterations: int
    restarts: int
    certified_upper_bound: bool
    j_part: float = 0.0
    poisson_part: float = 0.0
    method: str = ""
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# inscribed-ball envelope


def _closed_form_ebj(X: Domain, pts: np.ndarray) -> np.ndarray:
    parts = ball_parts(X)
    vals = np.stack([np.log(np.linalg.norm(pts - b.center, axis=1) / b.radius) for b in parts])
    return np.maximum(0.0, np.min(vals, axis=0))


def _closed_form_witness(X: Domain, z: np.ndarray):
    parts = ball_parts(X)
    ratios = [np.linalg.norm(z - b.center) / b.radius for b in parts]
    b = parts[int(np.argmin(ratios))]
    return b.center.copy(), b.radius


def _ratio_objective(X: Domain, z: np.ndarray, n: int):
    def obj(x):
        w = x[:n] + 1j * x[n:]
        d = X.signed_distance(w)[0]
        if d <= 0:
            return 1e3 - d
        return float(np.log(np.linalg.norm(z - w)) - np.log(d))

    return obj


def ebj_witness(X: Domain, z, opt: Optional[OptimizerConfig] = None):
    """Best inscribed ball for ``z``: returns ``(value, w, d(w))``.

    ``value`` is ``inf`` over balls ``B(w, d(w))`` in X of
    ``log+(|z - w| / d(w))``; for points of X the witness is ``(0, z, d(z))``.
    """
    opt = opt or OptimizerConfig()
    z = as_vector(z)
    if X.contains(z):
        return 0.0, z.copy(), float(X.signed_distance(z)[0])
    if is_closed_form(X):
        w, d = _closed_form_witness(X, z)
        return float(max(0.0, np.log(np.linalg.norm(z - w) / d))), w, d
    n = X.dim
    rng = np.random.default_rng([opt.seed, 7919])
    cands = np.concatenate([X.interior_seeds(), X.sample_interior(rng, opt.candidates)])
    dists = X.signed_distance(cands)
    ok = dists > 0
    cands, dists = cands[ok], dists[ok]
    if cands.shape[0] == 0:
        raise EmptyDomainError("could not find interior points of X")
    vals = np.log(np.linalg.norm(cands - z, axis=1) / dists)
    order = np.argsort(vals, kind="stable")[: max(1, min(opt.restarts, 8))]
    obj = _ratio_objective(X, z, n)
    best = (float(vals[order[0]]), cands[order[0]])
    for k in order:
        x0 = np.concatenate([cands[k].real, cands[k].imag])
        res = minimize(obj, x0, method="Nelder-Mead",
                       options={"maxfev": opt.budget, "xatol": 1e-10, "fatol": 1e-13, "adaptive": True})
        if res.fun < best[0]:
            best = (float(res.fun), res.x[:n] + 1j * res.x[n:])
    w = best[1]
    d = float(X.signed_distance(w)[0])
    val = float(np.log(np.linalg.norm(z - w) / d))
    return max(0.0, val), w, d


def ebj_ball_inf(X: Domain, z, opt: Optional[OptimizerConfig] = None) -> float:
    """Infimum over balls B(w, d(w)) contained in X of ``log+(|z - w| / d(w))``.

    Closed form for balls and disjoint unions of balls (the optimal ball is
    the part itself); multi-start Nelder-Mead over ``w`` otherwise.  The
    result is 0 on X.
    """
    return ebj_witness(X, z, opt)[0]


PRUNE_SLACK = 1e-3


def _prune_nested_balls(w: np.ndarray, d: np.ndarray, slack: float):
    """Drop balls B(w_i, d_i) contained in some B(w_k, (1 + slack) d_k) of a larger kept ball.

    The extremal function of a ball decreases when the ball grows, so a
    dropped ball raises the minimum by at most ``log(1 + slack)``.
    """
    order = np.argsort(-d, kind="stable")
    kept: list = []
    for i in order:
        if kept:
            k = np.asarray(kept)
            if np.any(np.linalg.norm(w[k] - w[i], axis=1) + d[i] <= (1.0 + slack) * d[k]):
                continue
        kept.append(i)
    kept = np.sort(np.asarray(kept))
    return w[kept], d[kept]


class EBJField:
    """Vectorised evaluator of the inscribed-ball envelope.

    ``mode="closed"`` is exact and only available for balls and unions of
    balls.  ``mode="candidates"`` minimises over a fixed sample of inscribed
    balls (nested ones pruned, see :func:`_prune_nested_balls`); it is an
    upper bound for the exact envelope and therefore still a valid majorant.  ``mode="exact"`` runs :func:`ebj_ball_inf` per point
    with a cache keyed on coordinates rounded to ``1e-6``.
    """

    def __init__(self, X: Domain, opt: Optional[OptimizerConfig] = None, mode: str = "auto"):
        self.X = X
        self.opt = opt or OptimizerConfig()
        if mode == "auto":
            mode = "closed" if is_closed_form(X) else "candidates"
        if mode == "closed" and not is_closed_form(X):
            raise ValueError("closed-form mode needs a ball or a union of balls")
        if mode not in ("closed", "candidates", "exact"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self._cache: dict = {}
        self._lock = threading.Lock()
        if mode == "candidates":
            rng = np.random.default_rng([self.opt.seed, 104729])
            c = np.concatenate([X.interior_seeds(), X.sample_interior(rng, self.opt.candidates)])
            d = X.signed_distance(c)
            keep = d > 0
            w, d = _prune_nested_balls(c[keep], d[keep], PRUNE_SLACK)
            # |p - w|^2 / d^2 = (|p|^2 + |w|^2 - 2 <p, w>) / d^2 as one product of augmented vectors
            wr = np.concatenate([w.real, w.imag], axis=1)
            inv = 1.0 / d ** 2
            self._aug = np.concatenate([inv[:, None], (np.sum(wr ** 2, axis=1) * inv)[:, None],
                                        -2.0 * wr * inv[:, None]], axis=1).T.copy()

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=complex))
        if self.mode == "closed":
            return _closed_form_ebj(self.X, pts)
        inside = self.X.contains_many(pts)
        out = np.zeros(pts.shape[0])
        idx = np.flatnonzero(~inside)
        if self.mode == "candidates":
            pr = np.concatenate([pts[idx].real, pts[idx].imag], axis=1)
            lhs = np.concatenate([np.sum(pr ** 2, axis=1)[:, None], np.ones((idx.size, 1)), pr], axis=1)
            for s in range(0, idx.size, 1024):
                ratio = np.min(lhs[s:s + 1024] @ self._aug, axis=1)
                with np.errstate(invalid="ignore", divide="ignore"):
                    out[idx[s:s + 1024]] = 0.5 * np.log(ratio)
            # points outside X are at distance >= d(w) from every centre, so the ratio is >= 1 up to rounding
            return np.maximum(np.nan_to_num(out, nan=0.0), 0.0)
        for i in idx:
            key = tuple(np.round(np.concatenate([pts[i].real, pts[i].imag]), 6))
            val = self._cache.get(key)
            if val is None:
                val = ebj_ball_inf(self.X, pts[i], self.opt)
                with self._lock:
                    self._cache[key] = val
            out[i] = val
        return out


# ---------------------------------------------------------------------------
# disc parametrisations


class PoleParam:
    """Discs ``p_0 = prod (1 - zeta / a_k)``, ``p_i = p_0 z_i + zeta q_i(zeta)``.

    Parameters are ``(s_k, phi_k)`` with ``a_k = exp(s_k + i phi_k)``,
    followed by the real and imaginary parts of the coefficients of ``q``
    (``n`` polynomials of degree ``qdeg``).  The centre is ``z`` for every
    parameter value and J equals ``-sum s_k`` when no pole is cancelled.
    """

    def __init__(self, z: np.ndarray, poles: int, qdeg: int, nodes: np.ndarray):
        self.z = z
        self.n = z.size
        self.poles = poles
        self.qdeg = qdeg
        self.size = 2 * poles + 2 * self.n * (qdeg + 1)
        self._set_nodes(nodes)

    def _set_nodes(self, nodes):
        self.nodes = nodes
        self.V = nodes[:, None] ** np.arange(self.qdeg + 1)[None, :] * nodes[:, None]

    def split(self, x):
        s = x[0:2 * self.poles:2]
        phi = x[1:2 * self.poles:2]
        m = self.n * (self.qdeg + 1)
        q = (x[2 * self.poles:2 * self.poles + m] + 1j * x[2 * self.poles + m:]).reshape(self.qdeg + 1, self.n)
        return s, phi, q

    def j_value(self, x) -> float:
        return float(-np.sum(self.split(x)[0]))

    def pole_violation(self, x) -> float:
        s = self.split(x)[0]
        return float(np.sum(np.maximum(0.0, s + 1e-6) ** 2))

    def values(self, x) -> np.ndarray:
        return self.evaluate(x)[2]

    def evaluate(self, x):
        """``(J, pole-constraint violation, affine boundary values)`` in one pass."""
        s, phi, q = self.split(x)
        viol = float(np.sum(np.maximum(0.0, s + 1e-6) ** 2))
        if self.poles == 1:
            p0 = 1.0 - self.nodes * np.exp(-(s[0] + 1j * phi[0]))
        else:
            p0 = np.prod(1.0 - self.nodes[:, None] * np.exp(-(s + 1j * phi))[None, :], axis=1)
        return float(-s.sum()), viol, self.z[None, :] + (self.V @ q) / p0[:, None]

    def build(self, x) -> RationalDisc:
        s, phi, q = self.split(x)
        p0 = np.array([1.0 + 0j])
        for ak in np.exp(s + 1j * phi):
            p0 = np.polynomial.polynomial.polymul(p0, [1.0, -1.0 / ak])
        width = max(p0.size, self.qdeg + 2)
        comps = np.zeros((self.n + 1, width), dtype=complex)
        comps[0, :p0.size] = p0
        comps[1:, :p0.size] = np.outer(self.z, p0)
        comps[1:, 1:self.qdeg + 2] += q.T
        comps[1:, 0] = self.z
        return RationalDisc(comps)

    def pack(self, s, phi, q) -> np.ndarray:
        q = np.asarray(q, dtype=complex).reshape(-1, self.n)
        qq = np.zeros((self.qdeg + 1, self.n), dtype=complex)
        k = min(q.shape[0], self.qdeg + 1)
        qq[:k] = q[:k]
        sp = np.empty(2 * self.poles)
        sp[0::2] = s
        sp[1::2] = phi
        return np.concatenate([sp, qq.real.ravel(), qq.imag.ravel()])

    def random_start(self, rng, scale: float) -> np.ndarray:
        s = np.log(rng.uniform(0.2, 0.9, self.poles))
        phi = rng.uniform(0, 2 * np.pi, self.poles)
        q = scale * (rng.normal(size=(self.qdeg + 1, self.n)) + 1j * rng.normal(size=(self.qdeg + 1, self.n)))
        q /= np.arange(1, self.qdeg + 2)[:, None]
        return self.pack(s, phi, q)


class PolyParam:
    """Polynomial discs ``z + sum_k c_k zeta^k`` with ``c_k`` in C^n, ``k = 1..deg``."""

    poles = 0

    def __init__(self, z: np.ndarray, deg: int, nodes: np.ndarray):
        self.z = z
        self.n = z.size
        self.deg = deg
        self.size = 2 * self.n * deg
        self._set_nodes(nodes)

    def _set_nodes(self, nodes):
        self.nodes = nodes
        self.V = nodes[:, None] ** np.arange(1, self.deg + 1)[None, :]

    def coeffs(self, x):
        m = self.n * self.deg
        return (x[:m] + 1j * x[m:]).reshape(self.deg, self.n)

    def j_value(self, x) -> float:
        return 0.0

    def pole_violation(self, x) -> float:
        return 0.0

    def values(self, x) -> np.ndarray:
        return self.z[None, :] + self.V @ self.coeffs(x)

    def evaluate(self, x):
        return 0.0, 0.0, self.values(x)

    def build(self, x) -> RationalDisc:
        return make_polynomial_disc(self.z, self.coeffs(x))

    def pack(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=complex).reshape(-1, self.n)
        cc = np.zeros((self.deg, self.n), dtype=complex)
        k = min(c.shape[0], self.deg)
        cc[:k] = c[:k]
        return np.concatenate([cc.real.ravel(), cc.imag.ravel()])

    def random_start(self, rng, scale: float) -> np.ndarray:
        c = scale * (rng.normal(size=(self.deg, self.n)) + 1j * rng.normal(size=(self.deg, self.n)))
        c /= np.arange(1, self.deg + 1)[:, None]
        return self.pack(c)


def _param_from_disc(param, f: RationalDisc):
    """Parameter vector reproducing ``f`` in ``param`` when ``f`` has the matching form, else None."""
    if isinstance(param, PolyParam):
        c = f.components
        if np.any(c[0, 1:]) or c[0, 0] != 1:
            return None
        return param.pack(c[1:, 1:].T)
    if isinstance(param, PoleParam):
        c = f.components
        if param.poles != 1 or c.shape[1] != 2 or c[0, 0] != 1 or c[0, 1] == 0:
            return None
        a = -1.0 / c[0, 1]
        q = (c[1:, 1] - c[1:, 0] * c[0, 1])[None, :]
        return param.pack([np.log(abs(a))], [np.angle(a)], q)
    return None


# ---------------------------------------------------------------------------
# the search engine


@dataclass
class _Problem:
    """A functional on one parametrisation at one centre."""

    X: Domain
    z: np.ndarray
    kind: str  # "lempert", "poisson", "mixed"
    field: Optional[Callable] = None


def _verify(problem: _Problem, f: RationalDisc, n_fine: int):
    """Functional value and admissibility of ``f`` at the fine resolution.

    Returns ``(value, feasible, j_part, poisson_part)``.
    """
    grid = CircleGrid(n_fine)
    X = problem.X
    try:
        j = j_functional(f)
    except ValueError:
        return float("inf"), False, float("inf"), 0.0
    if not np.isfinite(j):
        return float("inf"), False, j, 0.0
    tr = boundary_trace(f, grid)
    if np.any(tr.at_infinity):
        return float("inf"), False, j, 0.0
    if problem.kind == "lempert":
        sd = X.signed_distance(tr.affine)
        feasible = bool(np.all(sd > 0) and _refine_between_nodes(X, f, grid, sd))
        return j, feasible, j, 0.0
    pois, _ = poisson_integral(problem.field, f, grid, X)
    return j + pois, True, j, pois


def _refine_between_nodes(X: Domain, f: RationalDisc, grid: CircleGrid, sd: np.ndarray, worst: int = 16, sub: int = 32) -> bool:
    """Check the boundary between the nodes where the signed distance is smallest."""
    idx = np.argsort(sd)[:worst]
    h = 2 * np.pi / grid.n
    t = (np.arange(-sub, sub + 1) / (2.0 * sub)) * h
    th = (grid.angles[idx][:, None] + t[None, :]).ravel()
    pts = f.affine(np.exp(1j * th))
    return bool(np.all(X.signed_distance(pts) > 0))


def _objective(problem: _Problem, param, mu: float, margin: float, n_nodes: int):
    X = problem.X

    def obj(x):
        j, pv, vals = param.evaluate(x)
        if pv > 0:
            return 1e6 * (1.0 + pv)
        if not np.isfinite(vals).all():
            return 1e6
        if problem.kind == "lempert":
            viol = np.maximum(0.0, margin - X._sdf(vals))
            return j + mu * float(np.dot(viol, viol)) / n_nodes
        outside = ~X.contains_many(vals)
        if not np.any(outside):
            return j
        return j + float(np.sum(problem.field(vals[outside]))) / n_nodes

    return obj


def _nm(obj, x0, budget, tol, rng, scale):
    d = x0.size
    simplex = np.empty((d + 1, d))
    simplex[0] = x0
    step = scale * (0.5 + rng.random(d))
    for i in range(d):
        simplex[i + 1] = x0
        simplex[i + 1, i] += step[i]
    res = minimize(obj, x0, method="Nelder-Mead",
                   options={"maxfev": budget, "xatol": tol, "fatol": tol, "adaptive": d > 4,
                            "initial_simplex": simplex})
    return res.x, float(res.fun), int(res.nfev)


def _search(problem: _Problem, make_params: Callable, seeds: Sequence[RationalDisc], opt: OptimizerConfig,
            point_index: int, method: str) -> EnvelopeEstimate:
    """Evaluate the seeds, then run the restarts; keep the best verified disc."""
    grid = CircleGrid(opt.quad_n)
    n_fine = 4 * opt.quad_n
    best = None  # (value, disc, j, pois, feasible)
    total = 0
    accepted = []

    def consider(f: RationalDisc, tag: str):
        nonlocal best
        v, ok, j, p = _verify(problem, f, n_fine)
        if not ok or not np.isfinite(v):
            return False
        if best is None or v < best[0] - 1e-12 * (1.0 + abs(best[0])):
            best = (v, f, j, p, ok)
            accepted.append(tag)
            return True
        return False

    for k, s in enumerate(seeds):
        consider(s, f"seed{k}")

    used = 0
    stale = 0
    for r in range(opt.restarts):
        if opt.patience and stale >= opt.patience:
            break
        rng = np.random.default_rng([opt.seed, point_index, r])
        deg = min(opt.degree, 2 ** (r // 2))
        for param in make_params(deg, r, grid.nodes):
            x0 = None
            if r % 2 == 0 and best is not None:
                x0 = _param_from_disc(param, best[1])
                if x0 is not None:
                    x0 = x0 + 1e-3 * rng.normal(size=x0.size)
            if x0 is None:
                scale = 0.5 * (1.0 + float(np.linalg.norm(problem.z)))
                x0 = param.random_start(rng, scale)
            obj = _objective(problem, param, opt.penalty, opt.margin, grid.n)
            x, fx, nfev = _nm(obj, x0, opt.budget, opt.tol, rng, 0.1)
            total += nfev
            f = param.build(x)
            if problem.kind == "lempert" and not _verify(problem, f, n_fine)[1]:
                # restoration: heavier penalty, larger margin, restart from the search result
                obj2 = _objective(problem, param, 100 * opt.penalty, 10 * opt.margin, grid.n)
                x, fx, nfev = _nm(obj2, x, opt.budget // 2 + 1, opt.tol, rng, 0.01)
                total += nfev
                f = param.build(x)
            improved = consider(f, f"restart{r}")
        stale = 0 if improved else stale + 1
        used += 1

    if best is None:
        f = seeds[0] if seeds else make_constant_disc(problem.z)
        return EnvelopeEstimate(float("inf"), f, False, total, used, False, method=method,
                                diagnostics={"accepted": accepted})
    v, f, j, p, ok = best
    return EnvelopeEstimate(float(v), f, bool(ok), total, used, bool(ok), j_part=float(j), poisson_part=float(p),
                            method=method, diagnostics={"accepted": accepted})


def _touching_seed(X: Domain, z: np.ndarray, opt: OptimizerConfig):
    val, w, d = ebj_witness(X, z, opt)
    r = d * (1.0 - opt.seed_shrink)
    return make_touching_disc(z, w, r), val


def _inside_estimate(z, method):
    f = make_constant_disc(z)
    return EnvelopeEstimate(0.0, f, True, 0, 0, True, method=method)


# ---------------------------------------------------------------------------
# public estimators


def boundary_envelope(X: Domain, z, disc_class: str = "one_pole", opt: Optional[OptimizerConfig] = None,
                      point_index: int = 0, allow_disconnected: bool = False) -> EnvelopeEstimate:
    """Envelope of J over discs with boundary in X (one simple pole, or up to ``opt.poles`` poles).

    Parameters
    ----------
    disc_class : {"one_pole", "boundary_in_X"}
    allow_disconnected : bool
        Skip the connectivity refusal.  On a disconnected X the result is an
        estimate of the envelope itself, which can be strictly larger than
        the extremal function.

    Raises
    ------
    ConnectivityError
        When X is declared disconnected and ``allow_disconnected`` is false.
    """
    opt = opt or OptimizerConfig()
    if disc_class not in ("one_pole", "boundary_in_X"):
        raise ValueError(f"disc class must be one_pole or boundary_in_X, got {disc_class!r}")
    if not X.connected and not allow_disconnected:
        raise ConnectivityError(
            "domain is declared disconnected; the envelope of J over discs with boundary in X "
            "can exceed the extremal function there (a disc boundary stays in one component)")
    z = as_vector(z)
    method = "lempert1pole" if disc_class == "one_pole" else "lempert"
    if X.contains(z):
        return _inside_estimate(z, method)
    seed, _ = _touching_seed(X, z, opt)
    max_poles = 1 if disc_class == "one_pole" else opt.poles

    def make_params(deg, r, nodes):
        poles = 1 + (r // 2) % max_poles if max_poles > 1 else 1
        return [PoleParam(z, poles, max(0, deg - poles), nodes)]

    prob = _Problem(X, z, "lempert")
    return _search(prob, make_params, [seed], opt, point_index, method)


def lempert_envelope(X: Domain, z, disc_class: str = "one_pole", opt: Optional[OptimizerConfig] = None,
                     point_index: int = 0) -> EnvelopeEstimate:
    """Envelope of J over discs with boundary in a connected X."""
    return boundary_envelope(X, z, disc_class, opt, point_index, allow_disconnected=False)


def theorem2_envelope(X: Domain, z, opt: Optional[OptimizerConfig] = None, field: Optional[Callable] = None,
                      point_index: int = 0) -> EnvelopeEstimate:
    """Poisson envelope of the inscribed-ball majorant over polynomial discs centred at ``z``."""
    opt = opt or OptimizerConfig()
    z = as_vector(z)
    if X.contains(z):
        return _inside_estimate(z, "theorem2")
    field = field or EBJField(X, opt)
    prob = _Problem(X, z, "poisson", field)

    def make_params(deg, r, nodes):
        return [PolyParam(z, deg, nodes)]

    return _search(prob, make_params, [make_constant_disc(z)], opt, point_index, "theorem2")


def theorem1_envelope(X: Domain, z, opt: Optional[OptimizerConfig] = None, field: Optional[Callable] = None,
                      point_index: int = 0, extra_seeds: Sequence[RationalDisc] = ()) -> EnvelopeEstimate:
    """Envelope of J plus the boundary integral of the majorant, over one-pole and polynomial discs."""
    opt = opt or OptimizerConfig()
    z = as_vector(z)
    if X.contains(z):
        return _inside_estimate(z, "theorem1")
    field = field or EBJField(X, opt)
    prob = _Problem(X, z, "mixed", field)
    seed, _ = _touching_seed(X, z, opt)

    def make_params(deg, r, nodes):
        if r % 2 == 0:
            return [PoleParam(z, 1, max(0, deg - 1), nodes)]
        return [PolyParam(z, deg, nodes)]

    seeds = [make_constant_disc(z), seed, *extra_seeds]
    return _search(prob, make_params, seeds, opt, point_index, "theorem1")


def ball_majorant_envelope(X: Domain, z, a, r: float, opt: Optional[OptimizerConfig] = None,
                           point_index: int = 0) -> EnvelopeEstimate:
    """Envelope of the ball-majorant functional over polynomial discs (CLI method ``hr``)."""
    opt = opt or OptimizerConfig()
    z = as_vector(z)
    a = as_vector(a)
    if not (X.contains(a) and X.boundary_distance(a) > r):
        raise ValueError("the closed ball B(a, r) must lie in X")
    if X.contains(z):
        return _inside_estimate(z, "hr")

    def field(pts):
        return np.log(np.linalg.norm(pts - a, axis=1) / r)

    prob = _Problem(X, z, "poisson", field)

    def make_params(deg, rr, nodes):
        return [PolyParam(z, deg, nodes)]

    return _search(prob, make_params, [make_constant_disc(z)], opt, point_index, "hr")


def ebj_estimate(X: Domain, z, opt: Optional[OptimizerConfig] = None, point_index: int = 0) -> EnvelopeEstimate:
    """:func:`ebj_ball_inf` packaged as an estimate, with the touching disc as witness."""
    opt = opt or OptimizerConfig()
    z = as_vector(z)
    if X.contains(z):
        return _inside_estimate(z, "ebj")
    val, w, d = ebj_witness(X, z, opt)
    f = make_touching_disc(z, w, d * (1.0 - opt.seed_shrink))
    return EnvelopeEstimate(val, f, True, 0, 0, True, j_part=val, method="ebj")


def estimate_many(fn: Callable, X: Domain, points: Sequence, opt: Optional[OptimizerConfig] = None,
                  threads: int = 1, **kw) -> list:
    """Run ``fn(X, z, opt=opt, point_index=i, **kw)`` over points; results in input order."""
    opt = opt or OptimizerConfig()

    def one(i):
        return fn(X, points[i], opt=opt, point_index=i, **kw)

    if threads <= 1:
        return [one(i) for i in range(len(points))]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(one, range(len(points))))


# ---------------------------------------------------------------------------
# almost extremal discs


@dataclass(frozen=True, eq=False)
class AlmostExtremalResult:
    disc: RationalDisc
    h_value: float
    bad_measure: float
    radius: float
    converged: bool
    history: tuple = ()

    def __iter__(self):
        return iter((self.disc, self.h_value, self.bad_measure))


def _flat_top_profile(angles, width, base, edge):
    """Smooth even profile: ``base`` away from angle 0, a bump of fraction ``width`` of the circle at 0.

    The bump height makes the mean exactly zero.
    """
    from .gluing import smoothstep

    x = np.abs((angles + np.pi) % (2 * np.pi) - np.pi) / (2 * np.pi)  # in [0, 1/2]
    S = smoothstep((0.5 * width - x) / edge + 0.5)
    m = float(np.mean(S))
    top = -base * (1.0 - m) / m
    return base + (top - base) * S


def _radial_disc_coeffs(width, base, edge, degree, n_fft):
    """Taylor coefficients of ``exp(F)`` where Re F on the circle is the flat-top profile and F(0) = 0."""
    angles = 2 * np.pi * np.arange(n_fft) / n_fft
    u = _flat_top_profile(angles, width, base, edge)
    c = np.fft.fft(u) / n_fft
    F = np.zeros(n_fft, dtype=complex)
    F[1:n_fft // 2] = 2 * c[1:n_fft // 2]
    vals = np.exp(np.fft.ifft(F) * n_fft)
    tay = np.fft.fft(vals) / n_fft
    return tay[:degree + 1]


def almost_extremal_disc(X: Domain, K: Ball, z, eps: float, opt: Optional[OptimizerConfig] = None,
                         degree: int = 1024, schedule: int = 6, field: Optional[Callable] = None) -> AlmostExtremalResult:
    """Polynomial disc centred at ``z`` that spends all but ``eps`` of the circle in ``X`` minus ``K``.

    The search follows a decreasing schedule of balls ``B(a, r)`` inside
    ``X`` minus ``K``; for each radius the ball-majorant functional relative
    to ``X`` minus ``K`` is minimised over a family of polynomial discs in
    the complex line through ``z`` and the centre of ``K``.  A member of the
    family is ``c + (z - c) * T(exp F)`` where ``c`` is the centre of ``K``,
    ``Re F`` is a flat-top profile (constant on most of the circle, one bump
    of small angular width) with ``F(0) = 0``, and ``T`` truncates the
    Taylor series at ``degree``.  The family parameters are the bump width,
    the modulus level on the flat part and the bump edge length.

    The schedule stops at the first radius whose disc has outside fraction
    below ``eps`` and boundary majorant integral below the inscribed-ball
    estimate at ``z`` plus ``eps``.
    """
    opt = opt or OptimizerConfig()
    z = as_vector(z)
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not isinstance(K, Ball):
        raise TypeError("K must be a closed ball")
    hub = K.center
    rk = K.radius
    if not X.contains(hub) or X.boundary_distance(hub) <= rk:
        raise ValueError("the closed ball K must lie in X")
    field = field or EBJField(X, opt)
    rest = _RestDomain(X, K)
    if rest.contains(z):
        return AlmostExtremalResult(make_constant_disc(z), 0.0, 0.0, 0.0, True)

    dhub = X.boundary_distance(hub)
    L = float(np.linalg.norm(z - hub))
    u = (z - hub) / L if L > 0 else np.eye(1, X.dim, dtype=complex)[0]
    ring = 0.5 * (rk + dhub)
    R = 0.5 * (dhub - rk)
    a = hub + ring * u
    n_fft = max(8192, 8 * degree)
    n_q = max(4096, 4 * degree)
    grid = CircleGrid(n_q)
    v_est = ebj_ball_inf(X, z, opt)

    def build(p):
        width = 0.5 / (1.0 + np.exp(-p[0]))
        level = rk + (dhub - rk) / (1.0 + np.exp(-p[1]))
        edge = 0.1 / (1.0 + np.exp(-p[2]))
        scale = L if L > 0 else ring
        base = np.log(level / scale)
        tay = _radial_disc_coeffs(width, base, edge, degree, n_fft)
        c = np.outer(tay[1:], scale * u)
        return make_polynomial_disc(z, c)

    def start_vector(width, level, edge):
        lg = lambda t: np.log(t / (1.0 - t))
        return np.array([lg(width / 0.5), lg((level - rk) / (dhub - rk)), lg(edge / 0.1)])

    def measures(f):
        pts = f.affine(grid.nodes)
        bad = float(np.mean(~rest.contains_many(pts)))
        hv, _ = poisson_integral(field, f, grid, X)
        return bad, hv, pts

    history = []
    best = None
    p = start_vector(0.06, dhub * np.exp(-0.05), 0.02)
    for s in range(schedule):
        r = R * 2.0 ** (-s)

        def obj(pp):
            try:
                return ball_majorant_functional(build(pp), rest, a, r, grid)
            except ValueError:
                return 1e6

        res = minimize(obj, p, method="Nelder-Mead",
                       options={"maxfev": max(20, opt.budget // 20), "xatol": 1e-4, "fatol": 1e-6})
        p = res.x
        f = build(p)
        bad, hv, _ = measures(f)
        history.append((r, bad, hv))
        logger.info("schedule r=%.4g: outside fraction %.4f, majorant integral %.6f", r, bad, hv)
        key = (not (bad < eps and hv < v_est + eps), hv + bad)
        if best is None or key < best[0]:
            best = (key, f, hv, bad, r)
        if bad < eps and hv < v_est + eps:
            return AlmostExtremalResult(f, hv, bad, r, True, tuple(history))
    logger.warning("schedule exhausted without meeting eps=%.3g; returning the best disc found", eps)
    _, f, hv, bad, r = best
    return AlmostExtremalResult(f, hv, bad, r, False, tuple(history))


@dataclass(frozen=True, eq=False)
class _RestDomain(Domain):
    """X minus the closed ball K, as a domain usable by the quadrature routines."""

    X: Domain
    K: Ball
    connected: bool = True

    @property
    def dim(self):
        return self.X.dim

    def _sdf(self, pts):
        return np.minimum(self.X._sdf(pts), np.linalg.norm(pts - self.K.center, axis=1) - self.K.radius)


# ---------------------------------------------------------------------------
# disc-class validation


@dataclass
class ClassReport:
    disc_class: str
    entries: list
    property4: str
    passed: bool


_PROPERTY4 = {
    "touching_balls": (
        "The envelope of J over this class is the infimum over inscribed balls B(w, d(w)) of "
        "log+(|. - w| / d(w)); an infimum of continuous functions is upper semicontinuous, and "
        "the term of any single ball is at most log+|.| plus a constant."),
    "one_pole": (
        "Contains the touching discs, so its J envelope is bounded by the inscribed-ball envelope; "
        "semicontinuity follows from small perturbations of a disc keeping its boundary in X."),
    "boundary_in_X": (
        "Contains the touching discs; the set of discs with boundary in an open X is stable under "
        "small perturbation of the centre, which gives upper semicontinuity of the envelope."),
    "affine": "Not a good class on its own: discs in C^n with boundary in X need not exist for far centres.",
    "all_projective": "Used only with a majorant built from a good class; membership of the boundary is not required.",
}


def validate_disc_class(disc_class: str, X: Domain, sample: Sequence, opt: Optional[OptimizerConfig] = None) -> ClassReport:
    """Exhibit a member centred at each sampled point and check its boundary, plus constants in X.

    The upper-semicontinuity and growth property of the J envelope is not
    testable on finite samples; the report carries the argument for it.
    """
    if disc_class not in DISC_CLASSES:
        raise ValueError(f"unknown disc class {disc_class!r}")
    opt = opt or OptimizerConfig()
    grid = CircleGrid(256)
    entries = []
    for z in sample:
        z = as_vector(z)
        inside = X.contains(z)
        member = None
        detail = ""
        if inside:
            member = make_constant_disc(z)
            entries.append({"centre": z, "property": 3, "passed": True, "detail": "constant disc admitted"})
        elif disc_class in ("touching_balls", "one_pole", "boundary_in_X"):
            member, _ = _touching_seed(X, z, opt)
        elif disc_class == "all_projective":
            member = make_constant_disc(z)
        else:
            est = _affine_feasibility(X, z, opt)
            member = est
            if member is None:
                detail = "no polynomial disc with boundary in X found at this degree budget"
        entries.append({"centre": z, "property": 2, "passed": member is not None, "detail": detail})
        if member is None:
            entries.append({"centre": z, "property": 1, "passed": False, "detail": "no member to test"})
            continue
        if disc_class == "all_projective":
            entries.append({"centre": z, "property": 1, "passed": True, "detail": "boundary condition not required"})
            continue
        tr = boundary_trace(member, grid)
        ok = bool(not np.any(tr.at_infinity) and np.all(X.contains_many(tr.affine)))
        entries.append({"centre": z, "property": 1, "passed": ok, "detail": "" if ok else "boundary leaves X"})
    passed = all(e["passed"] for e in entries)
    return ClassReport(disc_class, entries, _PROPERTY4[disc_class], passed)


def _affine_feasibility(X: Domain, z: np.ndarray, opt: OptimizerConfig):
    """Search for a polynomial disc centred at ``z`` with boundary in X (penalty minimisation)."""
    grid = CircleGrid(min(opt.quad_n, 256))
    rng = np.random.default_rng([opt.seed, 31337])
    for deg in (1, 2, 4, min(opt.degree, 8)):
        param = PolyParam(z, deg, grid.nodes)
        x0 = param.random_start(rng, 0.5)

        def obj(x):
            sd = X.signed_distance(param.values(x))
            return float(np.sum(np.maximum(0.0, opt.margin - sd) ** 2))

        res = minimize(obj, x0, method="Nelder-Mead", options={"maxfev": opt.budget})
        f = param.build(res.x)
        tr = boundary_trace(f, CircleGrid(4 * grid.n))
        if np.all(X.contains_many(tr.affine)):
            return f
    return None

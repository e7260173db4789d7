"""Complex eigenvalues of ``-Delta + V`` for radial ``V`` and eigenvalue sums.

Eigenvalues are located per angular sector with the Birman-Schwinger
principle: ``z`` off ``[0, inf)`` is an eigenvalue with angular degree ``k``
exactly when ``1 + K_k(z)`` is singular, where ``K(z) = sqrt|V| R0(z) sqrt V``
and ``sqrt V = sqrt|V| sgn V``.  Zeros of ``det(1 + K_k(z))`` are counted by
the argument principle on rectangles, isolated by quadrisection and polished
by a secant iteration on the smallest eigenvalue of ``1 + K_k(z)``.

Two independent oracles are provided: the transcendental equation of the
three-dimensional square well and a shooting/Jost-function solver for the
radial ODE.  Eigenvalue-sum functionals and a derivative-free scan over
profile families complete the module.
"""
from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from scipy import optimize, special
from scipy.integrate import solve_ivp

from .angular import dim_harmonics
from .bessel import SectorOrder
from .errors import InvalidArgument, UnresolvedRegion
from .radial import (ExponentConfig, QuadratureRule, RadialProfile, check_dimension,
                     lq_norm)
from .resolvent import SectorOperator, SpectralPoint, delta_dist, sector_sandwich

SCHEMA_VERSION = "1.0"
DEFAULT_MARGIN = 1e-6
RESIDUAL_TOL = 1e-8
# split fraction for quadrisection; deliberately off-centre so that roots on
# a symmetry line of the parent box (e.g. the real axis) do not sit on an edge
_SPLIT = 0.5 + 0.0173


# --------------------------------------------------------------------------
# Search rectangles and configuration

@dataclass(frozen=True)
class SearchBox:
    """Closed rectangle ``[re_min, re_max] x [im_min, im_max]`` in the plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        vals = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(math.isfinite(x) for x in vals):
            raise InvalidArgument("search box edges must be finite")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise InvalidArgument(f"degenerate search box {vals}")

    @property
    def size(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def distance_to_half_line(self) -> float:
        """Distance from the rectangle to ``[0, inf)``."""
        if self.im_min > 0:
            dy = self.im_min
        elif self.im_max < 0:
            dy = -self.im_max
        else:
            dy = 0.0
        dx = max(0.0, -self.re_max)
        if self.re_max >= 0:
            return dy
        return math.hypot(dx, dy)

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return (self.re_min - slack <= z.real <= self.re_max + slack
                and self.im_min - slack <= z.imag <= self.im_max + slack)

    def corners(self) -> List[complex]:
        """Counter-clockwise corners starting at the lower left."""
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def farthest_point(self) -> complex:
        return max(self.corners(), key=abs)

    def split(self, frac: float = _SPLIT) -> List["SearchBox"]:
        xm = self.re_min + frac * (self.re_max - self.re_min)
        ym = self.im_min + frac * (self.im_max - self.im_min)
        return [SearchBox(self.re_min, xm, self.im_min, ym),
                SearchBox(xm, self.re_max, self.im_min, ym),
                SearchBox(self.re_min, xm, ym, self.im_max),
                SearchBox(xm, self.re_max, ym, self.im_max)]

    def as_list(self) -> List[float]:
        return [self.re_min, self.re_max, self.im_min, self.im_max]


@dataclass(frozen=True)
class BSConfig:
    """Birman-Schwinger search configuration.

    ``search_box`` holds one or more rectangles, each at distance at least
    ``margin`` (itself at least ``1e-6``) from ``[0, inf)``.  ``grid`` is the
    quadrature rule; ``None`` means the profile's own rule.  Sectors are
    searched for ``k <= k_max`` and stop earlier once ``||K_k|| < 1/2`` on all
    box boundaries.
    """

    d: int
    k_max: int = 64
    search_box: Tuple[SearchBox, ...] = ()
    grid: Optional[QuadratureRule] = None
    margin: float = DEFAULT_MARGIN
    max_depth: int = 12
    edge_points: int = 12
    max_boundary_points: int = 20000
    residual_tol: float = RESIDUAL_TOL
    norm_samples: int = 16

    def __post_init__(self):
        check_dimension(self.d)
        if int(self.k_max) != self.k_max or self.k_max < 0:
            raise InvalidArgument("k_max must be a nonnegative integer")
        if not self.margin >= DEFAULT_MARGIN:
            raise InvalidArgument(f"margin must be >= {DEFAULT_MARGIN}")
        boxes = self.search_box
        if isinstance(boxes, SearchBox):
            boxes = (boxes,)
        boxes = tuple(b if isinstance(b, SearchBox) else SearchBox(*b) for b in boxes)
        if not boxes:
            raise InvalidArgument("at least one search box is required")
        for b in boxes:
            if b.distance_to_half_line() < self.margin * (1 - 1e-12):
                raise InvalidArgument(
                    f"search box {b.as_list()} comes closer than {self.margin} to [0, inf)")
        object.__setattr__(self, "search_box", boxes)

    @classmethod
    def for_profile(cls, v: RadialProfile, k_max: int = 64, margin: float = DEFAULT_MARGIN,
                    re_max: Optional[float] = None, pad: float = 0.5, **kw) -> "BSConfig":
        """Three boxes covering the numerical-range strip of ``-Delta + V``.

        Eigenvalues satisfy ``Re z >= min Re v`` and
        ``min Im v <= Im z <= max Im v``; the boxes cover that strip, padded by
        ``pad``, up to ``Re z = re_max`` (default ``2 max|v| + 4 / R^2`` with
        ``R`` the support radius), minus the ``margin`` band around
        ``[0, inf)``.
        """
        vals = v.values
        lo_im = min(float(vals.imag.min()), 0.0) - pad
        hi_im = max(float(vals.imag.max()), 0.0) + pad
        re_min = min(float(vals.real.min()), 0.0) - pad
        if re_max is None:
            re_max = 2.0 * v.abs_max() + 4.0 / v.support_radius ** 2
        boxes = (SearchBox(re_min, -margin, lo_im, hi_im),
                 SearchBox(-margin, re_max, margin, hi_im),
                 SearchBox(-margin, re_max, lo_im, -margin))
        return cls(v.d, k_max, boxes, margin=margin, **kw)

    def as_dict(self) -> dict:
        return {"d": self.d, "k_max": self.k_max,
                "search_box": [b.as_list() for b in self.search_box],
                "margin": self.margin, "max_depth": self.max_depth,
                "edge_points": self.edge_points, "residual_tol": self.residual_tol,
                "norm_samples": self.norm_samples,
                "grid": None if self.grid is None else {
                    "edges": [float(e) for e in self.grid.edges],
                    "nodes_per_panel": self.grid.nodes_per_panel}}


@dataclass(frozen=True)
class FrankBoundParams:
    """Parameters ``(p, sigma, eps, M)`` of the bound ``||K(z)|| <= M |z|^{-sigma}`` family."""

    p: float
    sigma: float
    eps: float
    M: float

    def __post_init__(self):
        if not self.p >= 1:
            raise InvalidArgument("p must be >= 1")
        if not (self.sigma > 0 and self.eps > 0 and self.M > 0):
            raise InvalidArgument("sigma, eps and M must be positive")

    @classmethod
    def from_exponents(cls, cfg: ExponentConfig, M: float, eps: float) -> "FrankBoundParams":
        """Wire ``sigma = 1 - d/(2q)`` from an exponent configuration."""
        return cls(cfg.p, 1.0 - cfg.d / (2.0 * cfg.q), eps, M)

    @property
    def gamma(self) -> float:
        """``(2 p sigma - 1 + eps)_+``."""
        return max(2.0 * self.p * self.sigma - 1.0 + self.eps, 0.0)

    @property
    def lhs_exponent(self) -> float:
        return -0.5 + self.gamma / 2.0

    @property
    def rhs_exponent(self) -> float:
        return (1.0 + self.gamma) / (2.0 * self.sigma)


@dataclass(frozen=True)
class Eigenvalue:
    """One eigenvalue found in sector ``k``; ``winding`` is its multiplicity
    as a zero of ``det(1 + K_k)``."""

    z: complex
    k: int
    residual: float
    winding: int = 1

    def multiplicity(self, d: int) -> int:
        """Multiplicity in the full space: winding times ``dim H_k``."""
        return self.winding * dim_harmonics(d, self.k)


@dataclass(frozen=True)
class EigenvalueSet:
    """Eigenvalues sorted by ``(k, Re z, Im z)`` plus search diagnostics."""

    d: int
    entries: Tuple[Eigenvalue, ...] = ()
    unresolved: Tuple[dict, ...] = ()
    k_searched: int = -1
    cap_certified: bool = True
    sector_norms: Tuple[float, ...] = ()
    evaluations: int = 0

    def __post_init__(self):
        check_dimension(self.d)
        for e in self.entries:
            if e.z.imag == 0 and e.z.real >= 0:
                raise InvalidArgument(f"eigenvalue {e.z} lies on [0, inf)")
        ent = tuple(sorted(self.entries, key=lambda e: (e.k, e.z.real, e.z.imag)))
        object.__setattr__(self, "entries", ent)

    @classmethod
    def from_values(cls, zs: Sequence[complex], d: int = 3, k: int = 0) -> "EigenvalueSet":
        """Synthetic set: each value once, in sector ``k`` with zero residual."""
        return cls(d, tuple(Eigenvalue(complex(z), k, 0.0, 1) for z in zs))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.z for e in self.entries], dtype=complex)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([e.multiplicity(self.d) for e in self.entries], dtype=float)

    def in_sector(self, k: int) -> np.ndarray:
        return np.array([e.z for e in self.entries if e.k == k], dtype=complex)

    def conj(self) -> "EigenvalueSet":
        return EigenvalueSet(self.d, tuple(Eigenvalue(e.z.conjugate(), e.k, e.residual, e.winding)
                                           for e in self.entries),
                             self.unresolved, self.k_searched, self.cap_certified,
                             self.sector_norms, self.evaluations)

    def scaled(self, factor: float) -> "EigenvalueSet":
        """Eigenvalues multiplied by a positive ``factor`` (dilation bookkeeping)."""
        return EigenvalueSet(self.d, tuple(Eigenvalue(e.z * factor, e.k, e.residual, e.winding)
                                           for e in self.entries))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "re_z", "im_z", "residual", "winding"])
        for e in self.entries:
            w.writerow([e.k, repr(float(e.z.real)), repr(float(e.z.imag)),
                        repr(float(e.residual)), e.winding])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"d": self.d,
                "eigenvalues": [{"k": e.k, "re_z": e.z.real, "im_z": e.z.imag,
                                 "residual": e.residual, "winding": e.winding,
                                 "multiplicity": e.multiplicity(self.d)}
                                for e in self.entries],
                "unresolved": list(self.unresolved),
                "k_searched": self.k_searched,
                "cap_certified": self.cap_certified,
                "sector_norms": list(self.sector_norms),
                "evaluations": self.evaluations,
                "multiplicity_convention": "winding number times dim H_k"}


# --------------------------------------------------------------------------
# Birman-Schwinger matrices

def _bs_weights(v: RadialProfile) -> Tuple[RadialProfile, RadialProfile]:
    a = np.abs(v.values)
    root = np.sqrt(a)
    phase = np.zeros_like(v.values)
    nz = a > 0
    phase[nz] = v.values[nz] / a[nz]
    return v.with_values(root + 0j), v.with_values(root * phase)


def _on_grid(v: RadialProfile, grid: Optional[QuadratureRule]) -> RadialProfile:
    if grid is None or grid.same_as(v.rule):
        return v
    return RadialProfile(grid, v.evaluate(grid.nodes), v.support_radius, v.label, v.d, v.func)


def bs_matrix(v: RadialProfile, order: SectorOrder, zp: SpectralPoint) -> SectorOperator:
    """Sector matrix of ``K(z) = sqrt|V| R0(z) sqrt V`` on the profile's rule."""
    if v.d != order.d:
        raise InvalidArgument("dimension mismatch")
    w1, w2 = _bs_weights(v)
    return sector_sandwich(w1, w2, order, zp)


class _Sector:
    """Cached evaluation of ``1 + K_k(z)`` for one profile and sector."""

    def __init__(self, v: RadialProfile, k: int):
        self.order = SectorOrder(v.d, k)
        self.w1, self.w2 = _bs_weights(v)
        self.n = v.rule.size
        self.count = 0
        self._phase: Dict[complex, complex] = {}

    def matrix(self, z: complex) -> np.ndarray:
        self.count += 1
        K = sector_sandwich(self.w1, self.w2, self.order, SpectralPoint(z)).matrix
        return np.eye(self.n) + K

    def unit_phase(self, z: complex) -> complex:
        """``det(1 + K_k(z)) / |det|`` from the LU factorisation (0 if singular)."""
        z = complex(z)
        got = self._phase.get(z)
        if got is None:
            sign, _ = np.linalg.slogdet(self.matrix(z))
            got = complex(sign)
            self._phase[z] = got
        return got

    def smallest_eigenvalue(self, z: complex) -> complex:
        ev = np.linalg.eigvals(self.matrix(z))
        return complex(ev[np.argmin(np.abs(ev))])

    def norm(self, z: complex) -> float:
        self.count += 1
        K = sector_sandwich(self.w1, self.w2, self.order, SpectralPoint(z)).matrix
        return float(np.linalg.norm(K, 2))


class _BoundaryRoot(Exception):
    """The phase could not be resolved along an edge (zero on or near it)."""


def _edge_increment(sec: _Sector, a: complex, b: complex, min_len: float,
                    budget: List[int]) -> float:
    """Continuous change of ``arg det`` along the segment ``[a, b]``."""
    total = 0.0
    stack = [(a, b)]
    while stack:
        p, q = stack.pop()
        sp, sq = sec.unit_phase(p), sec.unit_phase(q)
        if sp == 0 or sq == 0:
            raise _BoundaryRoot()
        step = cmath.phase(sq / sp)
        if abs(step) > math.pi / 4:
            if abs(q - p) < min_len or budget[0] <= 0:
                raise _BoundaryRoot()
            budget[0] -= 1
            m = 0.5 * (p + q)
            stack.append((m, q))
            stack.append((p, m))
        else:
            total += step
    return total


def _winding(sec: _Sector, box: SearchBox, cfg: BSConfig) -> int:
    """Number of zeros of ``det(1 + K_k)`` inside ``box``."""
    c = box.corners()
    min_len = 1e-9 * box.size
    budget = [cfg.max_boundary_points]
    total = 0.0
    for j in range(4):
        a, b = c[j], c[(j + 1) % 4]
        n = cfg.edge_points
        pts = [a + (b - a) * t / n for t in range(n + 1)]
        for p, q in zip(pts[:-1], pts[1:]):
            total += _edge_increment(sec, p, q, min_len, budget)
    w = total / (2 * math.pi)
    n = int(round(w))
    if abs(w - n) > 0.05:
        raise _BoundaryRoot()
    return n


def _polish(sec: _Sector, z0: complex, scale: float, tol: float) -> Tuple[complex, float, bool]:
    """Secant iteration on the smallest eigenvalue of ``1 + K_k(z)``."""
    def admissible(z):
        return not (z.imag == 0 and z.real >= 0)

    za, zb = z0, z0 + 1e-3 * scale
    fa, fb = sec.smallest_eigenvalue(za), sec.smallest_eigenvalue(zb)
    for _ in range(60):
        if fb == fa:
            break
        zc = zb - fb * (zb - za) / (fb - fa)
        if not (admissible(zc) and math.isfinite(zc.real) and math.isfinite(zc.imag)
                and abs(zc - z0) <= 2 * scale):
            return zb, abs(fb), False
        za, fa = zb, fb
        zb, fb = zc, sec.smallest_eigenvalue(zc)
        if abs(zb - za) <= 4e-16 * max(1.0, abs(zb)) or abs(fb) < 1e-15:
            break
    return zb, abs(fb), abs(fb) <= tol


def _search_box(sec: _Sector, box: SearchBox, cfg: BSConfig, k: int,
                roots: List[Eigenvalue], unresolved: List[dict]) -> None:
    """Quadrisection of one box; appends roots and unresolved regions."""
    try:
        n = _winding(sec, box, cfg)
    except _BoundaryRoot:
        # shift the box slightly and retry; the enclosing partition then has
        # a tiny overlap or gap, which deduplication and the recount cover
        eps = 1e-4 * box.size
        if box.distance_to_half_line() - eps < cfg.margin:
            shifted = SearchBox(box.re_min - eps, box.re_max - eps, box.im_min, box.im_max) \
                if box.re_max < 0 else SearchBox(box.re_min - eps, box.re_max + eps,
                                                 box.im_min, box.im_max)
        else:
            shifted = SearchBox(box.re_min - eps, box.re_max + eps,
                                box.im_min - eps, box.im_max + eps)
        try:
            n = _winding(sec, shifted, cfg)
            box = shifted
        except _BoundaryRoot:
            unresolved.append({"k": k, "box": box.as_list(), "reason": "phase unresolved on boundary"})
            return
    _resolve(sec, box, cfg, k, n, 0, roots, unresolved)


def _resolve(sec: _Sector, box: SearchBox, cfg: BSConfig, k: int, n: int, depth: int,
             roots: List[Eigenvalue], unresolved: List[dict]) -> None:
    if n == 0:
        return
    if n < 0:
        unresolved.append({"k": k, "box": box.as_list(), "winding": n,
                           "reason": "negative winding"})
        return
    if n == 1 or depth >= cfg.max_depth:
        z, res, ok = _polish(sec, box.center, box.size, cfg.residual_tol)
        inside = ok and box.contains(z, 1e-9 * box.size) and not (z.imag == 0 and z.real >= 0)
        # a winding count above one is attributed to a single (multiple) root
        # only once the box has shrunk to the polishing accuracy
        if inside and (n == 1 or box.size <= 1e-8 * max(1.0, abs(z))):
            roots.append(Eigenvalue(z, k, res, n))
            return
        if depth >= cfg.max_depth:
            unresolved.append({"k": k, "box": box.as_list(), "winding": n,
                               "reason": "winding inconsistency after max subdivision depth"})
            return
    counted = 0
    children = []
    for child in box.split():
        try:
            m = _winding(sec, child, cfg)
        except _BoundaryRoot:
            children = None
            break
        children.append((child, m))
        counted += m
    if children is None or counted != n:
        # retry with a different split point before giving up on this level
        children, counted = [], 0
        for child in box.split(0.5 - 0.0411):
            try:
                m = _winding(sec, child, cfg)
            except _BoundaryRoot:
                unresolved.append({"k": k, "box": box.as_list(), "winding": n,
                                   "reason": "phase unresolved on subdivision edge"})
                return
            children.append((child, m))
            counted += m
        if counted != n:
            unresolved.append({"k": k, "box": box.as_list(), "winding": n,
                               "reason": f"children count {counted} != {n}"})
            return
    for child, m in children:
        _resolve(sec, child, cfg, k, m, depth + 1, roots, unresolved)


def _boundary_samples(box: SearchBox, per_edge: int) -> List[complex]:
    c = box.corners()
    out = []
    for j in range(4):
        a, b = c[j], c[(j + 1) % 4]
        out.extend(a + (b - a) * t / per_edge for t in range(per_edge))
    return out


def find_eigenvalues(v: RadialProfile, cfg: Optional[BSConfig] = None,
                     strict: bool = False) -> EigenvalueSet:
    """Eigenvalues of ``-Delta + V`` inside the configured boxes.

    Sector ``k`` is searched while ``k <= cfg.k_max`` and the largest
    ``||K_k(z)||`` over the box boundaries is at least ``1/2``; below that the
    Neumann series rules out eigenvalues in the boxes (the norm of an analytic
    operator family is subharmonic, so its maximum over a box sits on the
    boundary).  ``cap_certified`` is ``False`` when ``k_max`` was reached
    first.  Regions where the count could not be resolved are listed in
    ``unresolved``; with ``strict=True`` they raise :class:`UnresolvedRegion`.
    """
    if cfg is None:
        cfg = BSConfig.for_profile(v)
    if cfg.d != v.d:
        raise InvalidArgument("dimension mismatch between profile and configuration")
    v = _on_grid(v, cfg.grid)
    if not np.any(v.values):
        return EigenvalueSet(v.d, (), (), -1, True, (), 0)
    roots: List[Eigenvalue] = []
    unresolved: List[dict] = []
    norms: List[float] = []
    evaluations = 0
    certified = False
    k_done = -1
    samples = [z for b in cfg.search_box for z in _boundary_samples(b, cfg.norm_samples)]
    for k in range(cfg.k_max + 1):
        sec = _Sector(v, k)
        nmax = max(sec.norm(z) for z in samples)
        norms.append(nmax)
        if nmax < 0.5:
            certified = True
            evaluations += sec.count
            break
        found: List[Eigenvalue] = []
        for box in cfg.search_box:
            _search_box(sec, box, cfg, k, found, unresolved)
        roots.extend(_dedupe(found))
        evaluations += sec.count
        k_done = k
    out = EigenvalueSet(v.d, tuple(roots), tuple(unresolved), k_done, certified,
                        tuple(norms), evaluations)
    if strict and unresolved:
        raise UnresolvedRegion(f"{len(unresolved)} unresolved region(s)", unresolved)
    return out


def _dedupe(found: List[Eigenvalue]) -> List[Eigenvalue]:
    out: List[Eigenvalue] = []
    for e in found:
        if any(abs(e.z - o.z) <= 1e-9 * max(1.0, abs(e.z)) for o in out):
            continue
        out.append(e)
    return out


# --------------------------------------------------------------------------
# Independent oracles

def square_well_ground_states(depth: float, radius: float = 1.0,
                              n_grid: int = 2000) -> List[complex]:
    """Degree-zero bound states of ``-Delta - depth 1_{|x|<=radius}`` in three dimensions.

    Roots ``s`` of ``q cot q = -s R`` with ``q = R sqrt(depth - s^2)``, found
    by bisection after a sign scan of ``q cos q + s R sin q``; returns
    ``z = -s^2`` in increasing order.
    """
    if not (depth > 0 and radius > 0):
        raise InvalidArgument("depth and radius must be positive")
    top = math.sqrt(depth)

    def f(s):
        q = radius * math.sqrt(max(depth - s * s, 0.0))
        return q * math.cos(q) + s * radius * math.sin(q)

    grid = np.linspace(0.0, top, n_grid + 1)[1:]
    grid[-1] = top * (1 - 1e-15)
    vals = [f(s) for s in grid]
    out = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            out.append(a)
        elif fa * fb < 0:
            out.append(optimize.bisect(f, a, b, xtol=1e-16, rtol=8.9e-16, maxiter=400))
    return [complex(-s * s) for s in sorted(out, reverse=True)]


@dataclass(frozen=True)
class StepPotential:
    """Piecewise-constant radial potential: ``values[i]`` on ``[breaks[i], breaks[i+1])``.

    ``breaks`` starts at 0; the last break is the support radius.
    """

    breaks: Tuple[float, ...]
    values: Tuple[complex, ...]

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        vals = tuple(complex(x) for x in self.values)
        if len(b) != len(vals) + 1 or b[0] != 0 or any(y <= x for x, y in zip(b, b[1:])):
            raise InvalidArgument("breaks must be 0 = b0 < b1 < ... with one more entry than values")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", vals)

    @classmethod
    def well(cls, value: complex, radius: float = 1.0) -> "StepPotential":
        return cls((0.0, radius), (value,))

    @property
    def radius(self) -> float:
        return self.breaks[-1]


def _outgoing(nu: float, kappa: complex, r: float) -> Tuple[complex, complex]:
    """``h(r) = sqrt(r) H1_nu(kappa r)`` and ``h'(r)`` via mpmath."""
    with mpmath.workdps(30):
        x = mpmath.mpc(kappa) * r
        H = mpmath.hankel1(nu, x)
        dH = 0.5 * (mpmath.hankel1(nu - 1, x) - mpmath.hankel1(nu + 1, x))
        sr = mpmath.sqrt(r)
        h = sr * H
        dh = H / (2 * sr) + sr * mpmath.mpc(kappa) * dH
        scale = abs(h)
        return complex(h / scale), complex(dh / scale)


def _regular_solution(pot: StepPotential, d: int, k: int, z: complex,
                      rtol: float = 1e-12) -> Tuple[complex, complex]:
    """Integrate ``u'' = ((nu^2 - 1/4)/r^2 + v - z) u`` from the origin to the support edge.

    Starts at a small ``r0`` with the regular series
    ``u = (r/r0)^{nu+1/2} (1 - c r^2 ...)``; returns ``(u, u')`` at the edge,
    normalised to unit modulus of ``u`` where possible.
    """
    nu = (d + 2 * k - 2) / 2.0
    a = nu * nu - 0.25
    r0 = 1e-4 * min(pot.breaks[1], 1.0)
    c = (pot.values[0] - z) / (4.0 * (nu + 1.0))
    u0 = 1.0 + c * r0 * r0
    du0 = ((nu + 0.5) * (1.0 + c * r0 * r0) + 2.0 * c * r0 * r0) / r0
    y = np.array([u0, du0], dtype=complex)

    def rhs(r, y, vv):
        return [y[1], (a / (r * r) + vv - z) * y[0]]

    start = r0
    for lo, hi, vv in zip(pot.breaks[:-1], pot.breaks[1:], pot.values):
        lo = max(lo, start)
        if hi <= lo:
            continue
        sol = solve_ivp(rhs, (lo, hi), y, method="DOP853", rtol=rtol, atol=1e-14 * abs(y[0]) + 1e-300,
                        args=(vv,))
        if not sol.success:
            raise ArithmeticError(sol.message)
        y = sol.y[:, -1]
        y = y / max(abs(y[0]), 1e-300)
    return complex(y[0]), complex(y[1])


def jost_function(pot: StepPotential, d: int, k: int, z: complex) -> complex:
    """Wronskian of the regular solution and the outgoing solution at the edge.

    Vanishes exactly at eigenvalues ``z`` (``Im sqrt z > 0``) of degree ``k``.
    """
    zp = SpectralPoint(z)
    u, du = _regular_solution(pot, d, k, zp.z)
    h, dh = _outgoing((d + 2 * k - 2) / 2.0, zp.kappa, pot.radius)
    return u * dh - du * h


def shooting_eigenvalue(pot: StepPotential, d: int, k: int, z0: complex,
                        tol: float = 1e-13, max_iter: int = 60) -> complex:
    """Newton iteration on the Jost function from ``z0`` (difference-quotient derivative)."""
    z = complex(z0)
    for _ in range(max_iter):
        h = 1e-6 * max(1.0, abs(z))
        f = jost_function(pot, d, k, z)
        df = (jost_function(pot, d, k, z + h) - jost_function(pot, d, k, z - h)) / (2 * h)
        if df == 0:
            break
        step = f / df
        z_new = z - step
        if z_new.imag == 0 and z_new.real >= 0:
            raise ArithmeticError("Newton step landed on [0, inf)")
        z = z_new
        if abs(step) <= tol * max(1.0, abs(z)):
            return z
    raise ArithmeticError(f"Jost-function Newton iteration did not converge from {z0}")


def _real_jost(pot: StepPotential, d: int, k: int, s: float) -> float:
    """Real Jost function at ``z = -s^2`` for a real potential (modified Bessel tail)."""
    nu = (d + 2 * k - 2) / 2.0
    R = pot.radius
    u, du = _regular_solution(pot, d, k, complex(-s * s))
    K = special.kve(nu, s * R)
    dK = -0.5 * (special.kve(nu - 1, s * R) + special.kve(nu + 1, s * R)) * s
    h = math.sqrt(R) * K
    dh = K / (2 * math.sqrt(R)) + math.sqrt(R) * dK
    return (u * dh - du * h).real


def ode_bound_states(pot: StepPotential, d: int, k_max: int = 64,
                     n_grid: int = 120) -> List[Tuple[int, complex]]:
    """All negative eigenvalues of a real step potential, by sector.

    For each ``k`` the real Jost function at ``z = -s^2`` is scanned for sign
    changes on ``s in (0, sqrt(max(-v))]`` and refined by Brent's method;
    the scan stops at the first sector without bound states (the effective
    potential grows with ``k``).
    """
    if any(v.imag != 0 for v in pot.values):
        raise InvalidArgument("ode_bound_states needs a real potential")
    depth = max(-v.real for v in pot.values)
    if depth <= 0:
        return []
    top = math.sqrt(depth)
    out = []
    for k in range(k_max + 1):
        grid = np.linspace(top / n_grid, top, n_grid)
        vals = [_real_jost(pot, d, k, s) for s in grid]
        roots = []
        for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if fa * fb < 0:
                s = optimize.brentq(lambda t: _real_jost(pot, d, k, t), a, b,
                                    xtol=1e-15, rtol=8.9e-16)
                roots.append(-s * s + 0j)
        if not roots:
            break
        out.extend((k, z) for z in sorted(roots, key=lambda w: w.real))
    return out


# --------------------------------------------------------------------------
# Eigenvalue-sum functionals

def _weights(eigs: EigenvalueSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = eigs.values
    dl = np.array([delta_dist(w) for w in z], dtype=float)
    return np.abs(z), dl, eigs.multiplicities


def theorem1_lhs(eigs: EigenvalueSet, cfg: ExponentConfig, beta: float = 1.0) -> float:
    """``(sum_j delta(z_j)^beta |z_j|^{beta p (1 - d/(2q)) - 1})^{q/(beta p)}``.

    ``beta = 1`` is the eigenvalue sum bounded by ``C int |V|^q``; each
    eigenvalue counts with its multiplicity (winding number times
    ``dim H_k``).
    """
    if not 0 < beta <= 1:
        raise InvalidArgument("beta must lie in (0, 1]")
    if len(eigs) == 0:
        return 0.0
    a, dl, m = _weights(eigs)
    expo = beta * cfg.p * (1.0 - cfg.d / (2.0 * cfg.q)) - 1.0
    s = float(np.sum(m * dl ** beta * a ** expo))
    return s ** (cfg.q / (beta * cfg.p))


def frank_functional(eigs: EigenvalueSet, fp: FrankBoundParams) -> Tuple[float, float]:
    """``(sum_j delta(z_j) |z_j|^{-1/2 + gamma/2}, M^{(1+gamma)/(2 sigma)})``,
    ``gamma = (2 p sigma - 1 + eps)_+``."""
    rhs = fp.M ** fp.rhs_exponent
    if len(eigs) == 0:
        return 0.0, rhs
    a, dl, m = _weights(eigs)
    return float(np.sum(m * dl * a ** fp.lhs_exponent)), rhs


# --------------------------------------------------------------------------
# Family scans

Family = Callable[..., RadialProfile]
BSFactory = Union[BSConfig, Callable[[RadialProfile], BSConfig], None]


def _bs_for(bs: BSFactory, v: RadialProfile) -> BSConfig:
    if bs is None:
        return BSConfig.for_profile(v)
    if isinstance(bs, BSConfig):
        return bs
    return bs(v)


def evaluate_member(family: Family, params: Sequence[float], cfg: ExponentConfig,
                    bs: BSFactory = None, beta: float = 1.0) -> dict:
    """Eigenvalues of one family member and the ratio of the functional to ``int |V|^q``."""
    row = {"params": [float(x) for x in params]}
    try:
        v = family(*params)
        eigs = find_eigenvalues(v, _bs_for(bs, v))
    except Exception as exc:  # flagged row, the scan goes on
        row.update({"ok": False, "error": f"{type(exc).__name__}: {exc}",
                    "n_eigenvalues": 0, "functional": math.nan,
                    "lq_q": math.nan, "ratio": math.nan})
        return row
    val = theorem1_lhs(eigs, cfg, beta)
    lq = lq_norm(v, cfg.q) ** cfg.q
    row.update({"ok": not eigs.unresolved and eigs.cap_certified,
                "n_eigenvalues": len(eigs),
                "total_multiplicity": int(eigs.multiplicities.sum()) if len(eigs) else 0,
                "functional": val, "lq_q": lq,
                "ratio": val / lq if lq > 0 else math.nan,
                "unresolved": len(eigs.unresolved),
                "cap_certified": eigs.cap_certified,
                "k_searched": eigs.k_searched})
    if eigs.unresolved:
        row["error"] = "unresolved regions"
    return row


def sharpness_scan(family: Family, cfg: ExponentConfig, bs: BSFactory = None,
                   beta: float = 1.0, grid: Sequence[Sequence[float]] = (),
                   bounds: Optional[Sequence[Tuple[float, float]]] = None,
                   budget: int = 0) -> dict:
    """Scan a profile family for the ratio ``functional / int |V|^q``.

    Every parameter tuple in ``grid`` is evaluated; then, when ``budget > 0``,
    a Nelder-Mead ascent starts from the best grid point (deterministic) and
    spends at most ``budget`` further evaluations, clipped to ``bounds``.
    The report records the ratio trace, its max/min over nonzero entries and
    the log-log trend slope of the ratio against the first parameter.
    """
    if not 0 < beta <= 1:
        raise InvalidArgument("beta must lie in (0, 1]")
    grid = [tuple(float(x) for x in g) for g in grid]
    if not grid:
        raise InvalidArgument("the scan needs at least one family member")
    rows = [evaluate_member(family, g, cfg, bs, beta) for g in grid]
    ratios = np.array([r["ratio"] for r in rows], dtype=float)
    good = np.isfinite(ratios) & (ratios > 0)
    summary = {"max_ratio": float(ratios[good].max()) if good.any() else math.nan,
               "min_ratio": float(ratios[good].min()) if good.any() else math.nan,
               "zero_rows": int(np.sum(np.isfinite(ratios) & (ratios == 0))),
               "flagged_rows": int(sum(not r["ok"] for r in rows))}
    summary["max_over_min"] = (summary["max_ratio"] / summary["min_ratio"]
                               if good.any() else math.nan)
    x = np.array([g[0] for g in grid])
    sel = good & (x > 0)
    if sel.sum() >= 2:
        summary["trend_slope"] = float(np.polyfit(np.log(x[sel]), np.log(ratios[sel]), 1)[0])
    else:
        summary["trend_slope"] = math.nan
    ascent = None
    if budget > 0:
        start = np.array(grid[int(np.nanargmax(np.where(good, ratios, -np.inf)))]
                         if good.any() else grid[0], dtype=float)
        lo = np.array([b[0] for b in bounds]) if bounds else None
        hi = np.array([b[1] for b in bounds]) if bounds else None
        trace = []

        def neg_ratio(p):
            if lo is not None:
                p = np.clip(p, lo, hi)
            row = evaluate_member(family, p, cfg, bs, beta)
            trace.append(row)
            r = row["ratio"]
            return -r if math.isfinite(r) else 0.0

        res = optimize.minimize(neg_ratio, start, method="Nelder-Mead",
                                options={"maxfev": budget, "xatol": 1e-3, "fatol": 1e-9,
                                         "initial_simplex": None})
        best = max((r for r in trace if math.isfinite(r["ratio"])),
                   key=lambda r: r["ratio"], default=None)
        ascent = {"start": start.tolist(), "evaluations": len(trace),
                  "best_params": None if best is None else best["params"],
                  "best_ratio": None if best is None else best["ratio"],
                  "converged": bool(res.success)}
        if best is not None and best["ratio"] > summary["max_ratio"]:
            summary["max_ratio_with_ascent"] = best["ratio"]
        else:
            summary["max_ratio_with_ascent"] = summary["max_ratio"]
    return {"schema_version": SCHEMA_VERSION, "config": cfg.as_dict(), "beta": beta,
            "multiplicity_convention": "winding number times dim H_k",
            "rows": rows, "summary": summary, "ascent": ascent}


def scan_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(type(x))

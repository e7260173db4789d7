"""Radial profiles on composite Gauss-Legendre grids.

A :class:`RadialProfile` stores the values of a (possibly complex) radial
function ``v(r)`` at the nodes of a :class:`QuadratureRule`.  All norms use the
d-dimensional measure ``sigma_{d-1} r^{d-1} dr`` so that they coincide with the
usual ``L^q(R^d)`` norms of ``V(x) = v(|x|)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidArgument

DEFAULT_CUBE_SIZE = 1.0 / 16.0


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    check_dimension(d)
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def check_dimension(d: int) -> int:
    if int(d) != d or d < 2:
        raise InvalidArgument(f"dimension must be an integer >= 2, got {d!r}")
    return int(d)


@dataclass(frozen=True)
class ExponentConfig:
    """Exponent pair (q, p) in dimension d.

    ``strict`` configurations require ``d/2 <= q < d``; relaxed ones only
    ``1 <= q < d``.  In both cases ``p > (d-1)q/(d-q)``.
    """

    q: float
    p: float
    d: int
    relaxed: bool = False

    def __post_init__(self):
        check_dimension(self.d)
        lo = 1.0 if self.relaxed else self.d / 2
        if not (lo <= self.q < self.d):
            raise InvalidArgument(f"q={self.q} outside [{lo}, {self.d})")
        if not self.p > self.critical_p:
            raise InvalidArgument(
                f"p={self.p} must exceed (d-1)q/(d-q)={self.critical_p:.6g}")

    @property
    def critical_p(self) -> float:
        return (self.d - 1) * self.q / (self.d - self.q)

    def as_dict(self) -> dict:
        return {"q": self.q, "p": self.p, "d": self.d, "relaxed": self.relaxed}


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Composite Gauss-Legendre rule on ``[0, r_max]``.

    ``edges`` are the panel boundaries; every panel carries the same number of
    nodes.  Discontinuities of a profile must sit on panel edges.
    """

    edges: np.ndarray
    nodes_per_panel: int
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise InvalidArgument("panel edges must be strictly increasing")
        if edges[0] != 0.0:
            raise InvalidArgument("rules start at r = 0")
        if self.nodes_per_panel < 2:
            raise InvalidArgument("nodes_per_panel must be >= 2")
        x, w = leggauss(self.nodes_per_panel)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        edges.setflags(write=False)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def r_max(self) -> float:
        return float(self.edges[-1])

    @property
    def panels(self) -> int:
        return self.edges.size - 1

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, values) -> complex:
        return np.dot(self.weights, values)

    def scaled(self, lam: float) -> "QuadratureRule":
        return QuadratureRule(self.edges * lam, self.nodes_per_panel)

    def refined(self, factor: int = 2) -> "QuadratureRule":
        """Split every panel into ``factor`` equal sub-panels."""
        t = np.linspace(0.0, 1.0, factor + 1)[:-1]
        lo, hi = self.edges[:-1], self.edges[1:]
        inner = (lo[:, None] + (hi - lo)[:, None] * t[None, :]).ravel()
        return QuadratureRule(np.append(inner, self.edges[-1]), self.nodes_per_panel)

    def panel_of(self, r) -> np.ndarray:
        idx = np.searchsorted(self.edges, r, side="right") - 1
        return np.clip(idx, 0, self.panels - 1)

    def same_as(self, other: "QuadratureRule") -> bool:
        return (self.nodes_per_panel == other.nodes_per_panel
                and self.edges.shape == other.edges.shape
                and np.array_equal(self.edges, other.edges))


def make_rule(r_max: float, panels: int, nodes_per_panel: int,
              breaks: Sequence[float] = ()) -> QuadratureRule:
    """Uniform composite rule on ``[0, r_max]``.

    Extra ``breaks`` are merged into the uniform panel edges (used to put jump
    radii of piecewise profiles on panel boundaries), so the panel count can
    exceed ``panels`` by ``len(breaks)``.
    """
    if not r_max > 0:
        raise InvalidArgument(f"r_max must be positive, got {r_max}")
    if panels < 1:
        raise InvalidArgument("panels must be >= 1")
    if nodes_per_panel < 2:
        raise InvalidArgument("nodes_per_panel must be >= 2")
    edges = np.linspace(0.0, r_max, panels + 1)
    extra = [b for b in breaks if 0 < b < r_max]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
        keep = np.concatenate([[True], np.diff(edges) > 1e-12 * r_max])
        edges = edges[keep]
        edges[-1] = r_max
    return QuadratureRule(edges, nodes_per_panel)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Values of ``v(r)`` at the nodes of ``rule``.

    ``func``, when present, is the generating closed form and is used for
    evaluation between nodes; otherwise panel-local Lagrange interpolation is
    used.
    """

    rule: QuadratureRule
    values: np.ndarray
    support_radius: float
    label: str = ""
    d: int = 3
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False, compare=False)

    def __post_init__(self):
        check_dimension(self.d)
        values = np.array(self.values, dtype=complex)
        if values.shape != self.rule.nodes.shape:
            raise InvalidArgument("profile values must match the rule's nodes")
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("profile values must be finite")
        if not self.support_radius > 0:
            raise InvalidArgument("support radius must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nodes(self) -> np.ndarray:
        return self.rule.nodes

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.values.imag == 0))

    def abs_max(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def evaluate(self, r) -> np.ndarray:
        """Evaluate the profile at arbitrary radii (zero outside the rule)."""
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=complex)
        inside = (r >= 0) & (r <= self.rule.r_max) & (r <= self.support_radius)
        if self.func is not None:
            out[inside] = self.func(r[inside])
            return out
        rule = self.rule
        m = rule.nodes_per_panel
        pidx = rule.panel_of(r[inside])
        vals = self.values.reshape(rule.panels, m)
        nodes = rule.nodes.reshape(rule.panels, m)
        res = np.empty(pidx.shape, dtype=complex)
        for p in np.unique(pidx):
            sel = pidx == p
            res[sel] = lagrange_matrix(nodes[p], r[inside][sel]) @ vals[p]
        out[inside] = res
        return out

    def with_values(self, values, label: Optional[str] = None,
                    func=None) -> "RadialProfile":
        return RadialProfile(self.rule, values, self.support_radius,
                             self.label if label is None else label, self.d, func)

    def scaled(self, c: complex) -> "RadialProfile":
        f = None if self.func is None else (lambda r, f0=self.func: c * f0(r))
        return self.with_values(c * self.values, func=f)

    def conj(self) -> "RadialProfile":
        f = None if self.func is None else (lambda r, f0=self.func: np.conj(f0(r)))
        return self.with_values(np.conj(self.values), func=f)

    def abs(self) -> "RadialProfile":
        f = None if self.func is None else (lambda r, f0=self.func: np.abs(f0(r)))
        return self.with_values(np.abs(self.values), func=f)

    def to_json(self) -> str:
        doc = {
            "label": self.label,
            "d": self.d,
            "r_max": self.rule.r_max,
            "panels": self.rule.panels,
            "nodes_per_panel": self.rule.nodes_per_panel,
            "edges": [float(e) for e in self.rule.edges],
            "support_radius": float(self.support_radius),
            "values": [[float(z.real), float(z.imag)] for z in self.values],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "RadialProfile":
        doc = json.loads(text)
        if "edges" in doc:
            rule = QuadratureRule(np.array(doc["edges"], dtype=float),
                                  int(doc["nodes_per_panel"]))
        else:
            rule = make_rule(doc["r_max"], doc["panels"], doc["nodes_per_panel"])
        vals = np.array([complex(a, b) for a, b in doc["values"]])
        return cls(rule, vals, doc.get("support_radius", rule.r_max),
                   doc.get("label", ""), int(doc["d"]))


def lagrange_matrix(x_nodes: np.ndarray, x_eval: np.ndarray) -> np.ndarray:
    """Matrix ``L`` with ``L[i, j] = l_j(x_eval[i])`` (barycentric form)."""
    x_nodes = np.asarray(x_nodes, dtype=float)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    diff = x_nodes[:, None] - x_nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    dx = x_eval[:, None] - x_nodes[None, :]
    exact = dx == 0
    dx[exact] = 1.0
    tmp = bw[None, :] / dx
    L = tmp / tmp.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    L[rows] = exact[rows].astype(float)
    return L


def from_function(func: Callable, rule: QuadratureRule, d: int,
                  support_radius: Optional[float] = None, label: str = "") -> RadialProfile:
    vals = np.asarray(func(rule.nodes), dtype=complex)
    return RadialProfile(rule, vals, support_radius or rule.r_max, label, d, func)


def lq_norm(v: RadialProfile, q: float, d: Optional[int] = None) -> float:
    """``L^q(R^d)`` norm of ``V(x) = v(|x|)``."""
    if q < 1:
        raise InvalidArgument(f"q must be >= 1, got {q}")
    d = v.d if d is None else check_dimension(d)
    r = v.rule.nodes
    s = np.dot(v.rule.weights, np.abs(v.values) ** q * r ** (d - 1))
    return float((sphere_area(d) * s) ** (1.0 / q))


def _level_cells(v: RadialProfile, d: int):
    """Cells (value, d-measure) of the node-wise step approximation."""
    mu = sphere_area(d) * v.rule.weights * v.rule.nodes ** (d - 1)
    return np.abs(v.values), mu


def rearrangement_norm(values, measures, q: float, r: float) -> float:
    """Lorentz ``L^{q,r}`` norm of a step function from its level cells.

    Uses ``||f||_{q,r} = (int_0^inf (t^{1/q} f*(t))^r dt/t)^{1/r}``, which for a
    decreasing step rearrangement with heights ``a_j`` on ``[T_{j-1}, T_j)``
    equals ``((q/r) sum_j a_j^r (T_j^{r/q} - T_{j-1}^{r/q}))^{1/r}``.
    """
    if not q > 0 or r < 1:
        raise InvalidArgument("need q > 0 and r >= 1")
    a = np.asarray(values, dtype=float)
    m = np.asarray(measures, dtype=float)
    keep = (a > 0) & (m > 0)
    a, m = a[keep], m[keep]
    if a.size == 0:
        return 0.0
    order = np.argsort(-a, kind="stable")
    a, m = a[order], m[order]
    T = np.cumsum(m)
    if math.isinf(r):
        return float(np.max(a * T ** (1.0 / q)))
    T_prev = np.concatenate([[0.0], T[:-1]])
    s = (q / r) * np.sum(a ** r * (T ** (r / q) - T_prev ** (r / q)))
    return float(s ** (1.0 / r))


def lorentz_norm(v: RadialProfile, q: float, r: float, d: Optional[int] = None) -> float:
    """Lorentz norm of ``V(x) = v(|x|)`` via its decreasing rearrangement.

    The profile is treated as constant on the quadrature cell of each node,
    which is exact for piecewise-constant profiles with jumps on panel edges.
    """
    d = v.d if d is None else check_dimension(d)
    a, mu = _level_cells(v, d)
    return rearrangement_norm(a, mu, q, r)


def dilate(v: RadialProfile, lam: float) -> RadialProfile:
    """Return ``r -> v(r / lam)`` on the rule scaled by ``lam``."""
    if not lam > 0:
        raise InvalidArgument(f"dilation factor must be positive, got {lam}")
    f = None if v.func is None else (lambda r, f0=v.func: f0(r / lam))
    return RadialProfile(v.rule.scaled(lam), v.values, v.support_radius * lam,
                         v.label, v.d, f)


def _indicator(radius: float, value: complex):
    return lambda r: np.where(np.asarray(r) <= radius, value, 0.0).astype(complex)


def standard_profiles(name: str, params: Optional[dict] = None) -> RadialProfile:
    """Deterministic library of test profiles.

    ``square_well``   ``-depth`` on ``[0, radius]``
    ``gaussian``      ``amplitude * exp(-(r/width)^2)`` truncated at ``cutoff*width``
    ``complex_well``  ``g e^{i alpha}`` on ``[0, radius]``
    ``random_simple`` seeded step function with ``levels`` steps on c-cells
    """
    p = dict(params or {})
    d = check_dimension(p.pop("d", 3))
    npp = int(p.pop("nodes_per_panel", 16))
    if name == "square_well":
        depth = p.get("depth", 1.0)
        radius = p.get("radius", 1.0)
        rule = make_rule(radius, p.get("panels", 8), npp)
        return from_function(_indicator(radius, -depth), rule, d, radius,
                             f"square_well(depth={depth},radius={radius})")
    if name == "indicator":
        radius = p.get("radius", 1.0)
        value = p.get("value", 1.0)
        rule = make_rule(radius, p.get("panels", 8), npp)
        return from_function(_indicator(radius, value), rule, d, radius,
                             f"indicator(value={value},radius={radius})")
    if name == "complex_well":
        g = p.get("g", 1.0)
        alpha = p.get("alpha", 0.0)
        radius = p.get("radius", 1.0)
        value = g * complex(math.cos(alpha), math.sin(alpha))
        if alpha == math.pi / 2:
            value = complex(0.0, g)
        rule = make_rule(radius, p.get("panels", 8), npp)
        return from_function(_indicator(radius, value), rule, d, radius,
                             f"complex_well(g={g},alpha={alpha:.6g},radius={radius})")
    if name == "gaussian":
        amp = p.get("amplitude", 1.0)
        width = p.get("width", 1.0)
        cutoff = p.get("cutoff", 7.0)
        r_max = cutoff * width
        rule = make_rule(r_max, p.get("panels", 28), npp)
        f = lambda r: amp * np.exp(-(np.asarray(r) / width) ** 2) + 0j  # noqa: E731
        return from_function(f, rule, d, r_max, f"gaussian(amplitude={amp},width={width})")
    if name == "random_simple":
        if "seed" not in p:
            raise InvalidArgument("random_simple requires an explicit seed")
        return random_simple(p["seed"], p.get("levels", 5), d=d,
                             cell=p.get("cell", DEFAULT_CUBE_SIZE),
                             n_cells=p.get("n_cells", 64), nodes_per_panel=npp)
    raise InvalidArgument(f"unknown profile {name!r}")


def random_simple(seed: int, levels: int = 5, d: int = 3,
                  cell: float = DEFAULT_CUBE_SIZE, n_cells: int = 64,
                  nodes_per_panel: int = 4) -> RadialProfile:
    """Nonnegative step profile that is constant on cells ``[m c, (m+1) c)``.

    Each cell independently takes one of ``levels`` positive heights or zero.
    """
    rng = np.random.default_rng(seed)
    heights = np.sort(rng.uniform(0.1, 10.0, size=levels))[::-1]
    choice = rng.integers(-1, levels, size=n_cells)
    cell_vals = np.where(choice >= 0, heights[np.maximum(choice, 0)], 0.0)
    edges = cell * np.arange(n_cells + 1)
    rule = QuadratureRule(edges, nodes_per_panel)
    vals = np.repeat(cell_vals, nodes_per_panel).astype(complex)
    nz = np.nonzero(cell_vals)[0]
    support = cell * (nz[-1] + 1) if nz.size else cell * n_cells

    def f(r, cv=cell_vals):
        idx = np.clip((np.asarray(r) / cell).astype(int), 0, n_cells - 1)
        return cv[idx].astype(complex)

    return RadialProfile(rule, vals, float(support),
                         f"random_simple(seed={seed},levels={levels})", d, f)

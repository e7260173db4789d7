"""Sector decomposition of ``Sigma = E* V E`` on ``L^2(S^{d-1})``.

For radial ``V`` the operator acts on the degree-``k`` harmonics as the
scalar ``lambda_k = int psi_k(s)^2 v(s) s^{d-1} ds`` with multiplicity
``dim H_k``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

from .bessel import SectorOrder, bessel_j
from .errors import AccuracyFailure, InvalidArgument
from .radial import ExponentConfig, RadialProfile, check_dimension, lq_norm

K_CAP = 2048
MAX_PANEL_WIDTH = math.pi / 2


def dim_harmonics(d: int, k: int) -> int:
    """Dimension of the space of degree-``k`` spherical harmonics on ``S^{d-1}``."""
    check_dimension(d)
    if k < 0:
        raise InvalidArgument("k must be >= 0")
    if k == 0:
        return 1
    return (2 * k + d - 2) * math.factorial(k + d - 3) // (
        math.factorial(k) * math.factorial(d - 2))


def oscillation_grid(v: RadialProfile, scale: float = 1.0, max_width: float = MAX_PANEL_WIDTH):
    """Nodes, weights and profile values on panels no wider than
    ``max_width / scale`` (so ``J_nu(scale * r)`` is resolved).

    Profile panels are subdivided, never merged, so jump radii stay on edges.
    """
    rule = v.rule
    lim = max_width / scale
    widths = np.diff(rule.edges)
    if np.all(widths <= lim):
        return rule.nodes, rule.weights, v.values
    x, w = leggauss(rule.nodes_per_panel)
    nodes, weights = [], []
    for a, b in zip(rule.edges[:-1], rule.edges[1:]):
        n = max(1, int(math.ceil((b - a) / lim)))
        e = np.linspace(a, b, n + 1)
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[1:] + e[:-1])
        nodes.append((mid[:, None] + half[:, None] * x).ravel())
        weights.append((half[:, None] * w).ravel())
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    return nodes, weights, v.evaluate(nodes)


@dataclass(frozen=True)
class SectorEigenvalue:
    k: int
    value: complex
    dim: int


def _eigenvalues(v: RadialProfile, d: int, ks, scale: float = 1.0) -> np.ndarray:
    nodes, weights, vals = oscillation_grid(v, scale)
    nus = (d + 2 * np.asarray(ks, dtype=float) - 2) / 2
    J = bessel_j(nus[:, None], scale * nodes[None, :])
    # psi_k(mu s)^2 s^{d-1} = (2 pi)^d mu^{2-d} J_nu(mu s)^2 s
    pref = (2 * math.pi) ** d * scale ** (2 - d)
    return pref * (J ** 2 * (weights * nodes)[None, :]) @ vals


def sector_eigenvalue(v: RadialProfile, order: SectorOrder, scale: float = 1.0) -> SectorEigenvalue:
    """``lambda_k = int psi_k(scale * s)^2 v(s) s^{d-1} ds``.

    ``scale`` is the radius of the sphere carrying the extension operator;
    the default 1 is the unit-sphere case.
    """
    if order.d != v.d:
        raise InvalidArgument("profile and sector live in different dimensions")
    if v.support_radius > v.rule.r_max * (1 + 1e-12):
        raise InvalidArgument("quadrature range shorter than the profile support")
    if not scale > 0:
        raise InvalidArgument("scale must be positive")
    lam = complex(_eigenvalues(v, order.d, [order.k], scale)[0])
    return SectorEigenvalue(order.k, lam, dim_harmonics(order.d, order.k))


def log_bessel_moment_bound(nu, a: float):
    """log of an upper bound for ``int_0^a J_nu(s)^2 s ds``.

    Uses ``|J_nu(s)| <= (s/2)^nu / Gamma(nu+1)``.
    """
    nu = np.asarray(nu, dtype=float)
    return 2 * nu * math.log(a / 2) + 2 * math.log(a) - 2 * gammaln(nu + 1) - np.log(2 * nu + 2)


def _tail_sum(d: int, log_term, k_from: int, p: float) -> float:
    """Sum of ``dim_k * exp(p * log_term(k))`` over ``k >= k_from``.

    Terms are summed until they are eventually decreasing and negligible.
    """
    total = 0.0
    k = k_from
    prev = math.inf
    while True:
        ks = np.arange(k, k + 256)
        logs = p * log_term(ks) + np.log([float(dim_harmonics(d, int(kk))) for kk in ks])
        terms = np.exp(np.minimum(logs, 700.0))
        total += float(terms.sum())
        last = float(terms[-1])
        if last <= prev and last <= 1e-300 + 1e-18 * total and np.all(np.diff(logs[-16:]) < 0):
            return total
        prev = last
        k += 256
        if k > 10 ** 6:
            return math.inf


@dataclass(frozen=True)
class SectorSum:
    """Partial Schatten norm over ``k <= k_max`` and a bound on what is missing."""

    norm: float
    tail_bound: float
    k_max: int
    eigenvalues: np.ndarray

    def rows(self, d: int) -> List[tuple]:
        return [(k, dim_harmonics(d, k), float(z.real), float(z.imag))
                for k, z in enumerate(self.eigenvalues)]

    def to_csv(self, d: int) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "dim", "re_lambda", "im_lambda"])
        for row in self.rows(d):
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
        return buf.getvalue()


def norm_from_sectors(d: int, values, p: float) -> float:
    a = np.abs(np.asarray(values))
    if a.size == 0 or a.max() == 0:
        return 0.0
    dims = np.array([float(dim_harmonics(d, k)) for k in range(a.size)])
    top = a.max()
    return float(top * np.sum(dims * (a / top) ** p) ** (1.0 / p))


def tail_in_norm_units(partial: float, tail_p: float, p: float) -> float:
    if tail_p == 0.0:
        return 0.0
    if partial == 0.0:
        return tail_p ** (1.0 / p)
    x = tail_p / partial ** p
    return partial * math.expm1(math.log1p(x) / p)


def sigma_schatten(v: RadialProfile, cfg: ExponentConfig, k_max: Optional[int] = None,
                   rel_tol: float = 1e-6, scale: float = 1.0) -> SectorSum:
    """Schatten ``p``-norm of ``E* V E`` summed over sectors.

    With ``k_max=None`` the cutoff doubles from 8 until the tail bound drops
    below ``rel_tol * norm``; the cap is :data:`K_CAP` (and in practice the
    Bessel order limit).  ``scale`` is the sphere radius as in
    :func:`sector_eigenvalue`.
    """
    d = cfg.d
    if v.d != d:
        raise InvalidArgument("profile and config use different dimensions")
    if not (1 <= cfg.q < d) or not cfg.p > cfg.critical_p:
        raise InvalidArgument("sector sum not summable for this exponent pair")
    vmax = v.abs_max()
    a = float(min(v.support_radius, v.rule.r_max)) * scale
    # |lambda_k| <= (2 pi)^d mu^{-d} |v|_inf int_0^{mu a} J_nu(t)^2 t dt
    log_pref = d * math.log(2 * math.pi / scale) + (math.log(vmax) if vmax > 0 else -math.inf)

    def log_bound(ks):
        return log_pref + log_bessel_moment_bound((d + 2 * ks - 2) / 2, a)

    def evaluate(km):
        lam = _eigenvalues(v, d, np.arange(km + 1), scale)
        norm = norm_from_sectors(d, lam, cfg.p)
        tail_p = 0.0 if vmax == 0 else _tail_sum(d, log_bound, km + 1, cfg.p)
        return SectorSum(norm, tail_in_norm_units(norm, tail_p, cfg.p), km, lam)

    if k_max is not None:
        if k_max < 1:
            raise InvalidArgument("k_max must be >= 1")
        return evaluate(int(k_max))
    km = 8
    while True:
        res = evaluate(km)
        if res.tail_bound <= rel_tol * res.norm or res.norm == 0.0:
            return res
        nxt = min(2 * km, K_CAP)
        if nxt == km:
            raise AccuracyFailure(
                f"tail bound {res.tail_bound:.3g} above tolerance at k_max={km}")
        km = nxt


def theorem3_ratio(v: RadialProfile, cfg: ExponentConfig, k_max: Optional[int] = None,
                   scale: float = 1.0) -> float:
    """``||E* V E||_{S^p} / ||V||_{L^q}`` (an empirical constant).

    Homogeneous of degree 0 in ``v``.  Under dilation it is covariant rather
    than invariant: ``ratio(dilate(v, s), scale=mu) = s^{d - d/q} ratio(v, scale=s mu)``.
    """
    denom = lq_norm(v, cfg.q, cfg.d)
    if denom == 0.0:
        raise InvalidArgument("zero profile")
    return sigma_schatten(v, cfg, k_max, scale=scale).norm / denom

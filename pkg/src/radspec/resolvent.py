"""Sandwiched free resolvent ``W1 (-Delta - z)^{-1} W2`` for radial weights.

Per sector the resolvent kernel with respect to ``r'^{d-1} dr'`` is

    G_k(r, r'; z) = (i pi / 2) (r r')^{-(d-2)/2} J_nu(kappa r_<) H^(1)_nu(kappa r_>)

with ``kappa = sqrt(z)``, ``Im kappa > 0``.  The same kernel is also produced
from the spectral measure, ``int m(lam) c_d lam^{d-1} psi_k(lam r) psi_k(lam r')
/ (lam^2 - z) dlam``, which is the cross-check used throughout the tests.
"""
from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss

from .angular import dim_harmonics, tail_in_norm_units
from .bessel import SectorOrder, _check_order
from .errors import AccuracyFailure, InvalidArgument
from .radial import ExponentConfig, RadialProfile, lagrange_matrix, lq_norm
from .schatten import SingularSpectrum, svd_singular_values
from scipy import special

SCHEMA_VERSION = 1


def delta_dist(z: complex) -> float:
    """Distance from ``z`` to the half line ``[0, inf)``."""
    z = complex(z)
    return abs(z.imag) if z.real >= 0 else abs(z)


@dataclass(frozen=True)
class SpectralPoint:
    """A point ``z`` off ``[0, inf)`` with its outgoing square root."""

    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if z.imag == 0 and z.real >= 0:
            raise InvalidArgument(f"z={z} lies on [0, inf)")
        object.__setattr__(self, "z", z)

    @property
    def kappa(self) -> complex:
        k = cmath.sqrt(self.z)
        return k if k.imag > 0 else -k

    @property
    def delta(self) -> float:
        return delta_dist(self.z)

    def conj(self) -> "SpectralPoint":
        return SpectralPoint(self.z.conjugate())


def _h(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth radial cutoff equal to 1 on ``|xi| <= inner`` and 0 beyond ``outer``.

    ``eta(t) = h((outer-t)/w) / (h((outer-t)/w) + h((t-inner)/w))`` with
    ``w = outer - inner`` and ``h(s) = e^{-1/s}`` for ``s > 0`` (else 0).
    """

    inner: float = 2.0
    outer: float = 4.0

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        w = self.outer - self.inner
        a = _h((self.outer - t) / w)
        b = _h((t - self.inner) / w)
        return a / (a + b)


# --------------------------------------------------------------------------
# Green kernel

def _mp_value(f, nu, w):
    """Mantissa/log-magnitude split of an mpmath Bessel value."""
    with mpmath.workdps(30):
        v = f(nu, mpmath.mpc(w.real, w.imag))
        if v == 0:
            return 0j, 0.0
        e = mpmath.log(abs(v))
        return complex(v / mpmath.exp(e)), float(e)


def _kernel_vectors(nu: float, kappa: complex, x):
    """``J_nu(kappa x) = mJ e^{eJ}`` and ``H_nu(kappa x) = mH e^{eH}``.

    Values come from the exponentially scaled AMOS routines; points where
    those under/overflow (small ``x`` at large order) are evaluated with
    mpmath and stored as mantissa and log-magnitude.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    zx = kappa * x
    with np.errstate(all="ignore"):
        mJ = np.array(special.jve(nu, zx), dtype=complex)
        mH = np.array(special.hankel1e(nu, zx) * np.exp(1j * kappa.real * x), dtype=complex)
    eJ = np.array(kappa.imag * x, dtype=float)
    eH = np.array(-kappa.imag * x, dtype=float)
    badJ = ~np.isfinite(mJ) | (np.abs(mJ) < 1e-280)
    badH = ~np.isfinite(mH) | (np.abs(mH) > 1e280)
    for t in zip(*np.nonzero(badJ)):
        mJ[t], eJ[t] = _mp_value(mpmath.besselj, nu, complex(zx[t]))
    for t in zip(*np.nonzero(badH)):
        mH[t], eH[t] = _mp_value(mpmath.hankel1, nu, complex(zx[t]))
    return mJ, eJ, mH, eH


def _jh_products(nu: float, kappa: complex, r_lo, r_hi):
    """``J_nu(kappa r_lo) H_nu(kappa r_hi)`` elementwise."""
    mJ, eJ, _, _ = _kernel_vectors(nu, kappa, r_lo)
    _, _, mH, eH = _kernel_vectors(nu, kappa, r_hi)
    return mJ * mH * np.exp(eJ + eH)


def green_kernel(order: SectorOrder, zp: SpectralPoint, r, rp):
    """Sector resolvent kernel ``G_k(r, r'; z)`` (vectorised over ``r, r'``)."""
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    if np.any(r <= 0) or np.any(rp <= 0):
        raise InvalidArgument("green_kernel needs r, r' > 0")
    kappa = zp.kappa
    _check_order(order.nu, np.abs(kappa) * np.maximum(r, rp))
    if np.any(np.abs(kappa) * np.maximum(r, rp) > 1e3):
        raise AccuracyFailure("|kappa r| beyond the Hankel accuracy region")
    lo = np.minimum(r, rp)
    hi = np.maximum(r, rp)
    prod = _jh_products(order.nu, kappa, lo, hi).reshape(lo.shape)
    val = 0.5j * math.pi * (r * rp) ** (-(order.d - 2) / 2) * prod
    return val[()] if np.ndim(val) == 0 else val


# --------------------------------------------------------------------------
# Spectral-integral representation

def _hankel_coeffs(nu: float, n: int) -> List[float]:
    """Coefficients ``a_k(nu)`` of the large-argument Hankel expansion."""
    mu = 4 * nu * nu
    out = [1.0]
    for k in range(1, n + 1):
        out.append(out[-1] * (mu - (2 * k - 1) ** 2) / (k * 8))
    return out


def _tail_integral(nu: float, z: complex, a: float, b: float, lam0: float,
                   n_hankel: int = 8, n_geom: int = 6) -> complex:
    """``int_lam0^inf lam J_nu(lam a) J_nu(lam b) / (lam^2 - z) dlam`` from the
    Hankel expansions, integrated term by term with exponential integrals."""
    coeff = _hankel_coeffs(nu, n_hankel)
    phi = nu * math.pi / 2 + math.pi / 4
    max_pow = n_hankel + 2 * n_geom + 2
    total = mpmath.mpc(0)
    with mpmath.workdps(30):
        for sa in (1, -1):
            for sb in (1, -1):
                s = sa * a + sb * b
                # series in 1/lam of (A_sa)(B_sb), A = sum (sa i)^k a_k (lam a)^{-k}
                poly = [0j] * (2 * n_hankel + 1)
                for k in range(n_hankel + 1):
                    for l in range(n_hankel + 1):
                        poly[k + l] += ((sa * 1j) ** k * (sb * 1j) ** l * coeff[k] * coeff[l]
                                        / (a ** k * b ** l))
                # times 1/(lam^2 - z) = sum z^n lam^{-2n-2}
                series = {}
                for j, c in enumerate(poly):
                    for n in range(n_geom + 1):
                        pw = j + 2 * n + 2
                        if pw <= max_pow:
                            series[pw] = series.get(pw, 0j) + c * z ** n
                phase = cmath.exp(-1j * (sa + sb) * phi)
                for pw, c in series.items():
                    if c == 0:
                        continue
                    if s == 0:
                        integral = mpmath.mpf(lam0) ** (1 - pw) / (pw - 1)
                    else:
                        w = mpmath.mpc(0, -s * lam0)
                        integral = mpmath.mpf(lam0) ** (1 - pw) * mpmath.expint(pw, w)
                    total += mpmath.mpc(c * phase) * integral
    return complex(total) * (2 / math.pi) / math.sqrt(a * b) / 4


def _lambda_grid(zp: SpectralPoint, r_big: float, lam_max: float,
                 cutoff: Optional[CutoffSpec], n: int = 16):
    """Composite Gauss-Legendre nodes on ``[0, lam_max]``, graded towards the
    near-pole at ``Re kappa`` and aligned with the cutoff's transition."""
    width = min(0.5, math.pi / (2 * r_big))
    edges = set(np.linspace(0.0, lam_max, int(math.ceil(lam_max / width)) + 1).tolist())
    kappa = zp.kappa
    lam0, eta = kappa.real, kappa.imag
    if lam0 > 0 and eta < width:
        if eta < 1e-12 * max(lam0, 1.0):
            raise AccuracyFailure("near-pole too narrow to resolve in double precision")
        step = eta
        while step < 4 * width:
            for e in (lam0 - step, lam0 + step):
                if 0 < e < lam_max:
                    edges.add(e)
            step *= 2
    if cutoff is not None and zp.z.real > 0:
        sr = math.sqrt(zp.z.real)
        for e in np.linspace(cutoff.inner * sr, cutoff.outer * sr, 9):
            if 0 < e < lam_max:
                edges.add(float(e))
    e = np.array(sorted(edges))
    keep = np.concatenate([[True], np.diff(e) > 1e-14 * lam_max])
    e = e[keep]
    x, w = leggauss(n)
    half = 0.5 * np.diff(e)
    mid = 0.5 * (e[1:] + e[:-1])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    if lam0 > 0 and eta < width:
        near = np.abs(nodes - lam0) < 4 * eta
        if np.count_nonzero(near) > 1:
            spacing = np.max(np.diff(nodes[near]))
            if not spacing < zp.delta / (8 * math.sqrt(max(zp.z.real, 1e-300))):
                raise AccuracyFailure("lambda grid does not resolve the near-pole")
    return nodes, weights


@dataclass(frozen=True)
class KernelParts:
    low: complex
    high: complex
    full: complex


def spectral_integral_parts(order: SectorOrder, zp: SpectralPoint, r: float, rp: float,
                            cutoff: Optional[CutoffSpec] = None) -> KernelParts:
    """Low/high/full spectral-integral kernels evaluated on one lambda grid.

    ``low`` uses the multiplier ``chi(lam / sqrt(Re z))``, ``high`` uses
    ``1 - chi``; without a cutoff (or for ``Re z <= 0``) everything is ``high``.
    """
    if r <= 0 or rp <= 0:
        raise InvalidArgument("radii must be positive")
    d, nu = order.d, order.nu
    z = zp.z
    r_big = max(r, rp)
    r_small = min(r, rp)
    lam_max = max(60.0, 40.0 * (nu + 1) ** 2 / r_small, 8.0 * math.sqrt(abs(z)))
    if cutoff is not None and z.real > 0:
        lam_max = max(lam_max, 2 * cutoff.outer * math.sqrt(z.real))
    lam, w = _lambda_grid(zp, r_big, lam_max, cutoff)
    _check_order(nu, lam_max * r_big)
    f = lam * special.jv(nu, lam * r) * special.jv(nu, lam * rp) / (lam ** 2 - z)
    if cutoff is not None and z.real > 0:
        chi = cutoff(lam / math.sqrt(z.real))
    else:
        chi = np.zeros_like(lam)
    tail = _tail_integral(nu, z, r, rp, lam_max)
    pref = (r * rp) ** (-(d - 2) / 2)
    low = pref * np.dot(w, chi * f)
    high = pref * (np.dot(w, (1 - chi) * f) + tail)
    full = pref * (np.dot(w, f) + tail)
    return KernelParts(complex(low), complex(high), complex(full))


def spectral_integral_kernel(order: SectorOrder, zp: SpectralPoint, r: float, rp: float,
                             cutoff: Optional[CutoffSpec] = None, part: str = "full") -> complex:
    """One part (``"low"``, ``"high"`` or ``"full"``) of the spectral-integral kernel."""
    if part not in ("low", "high", "full"):
        raise InvalidArgument(f"unknown part {part!r}")
    if part != "full" and (cutoff is None or zp.z.real <= 0):
        raise InvalidArgument("low/high split needs a cutoff and Re z > 0")
    return getattr(spectral_integral_parts(order, zp, r, rp, cutoff), part)


def spectral_low_matrix(order: SectorOrder, zp: SpectralPoint, rows, cols,
                        cutoff: Optional[CutoffSpec] = None) -> np.ndarray:
    """Low-frequency kernel ``K_low(rows_i, cols_j)`` for all pairs at once.

    The multiplier ``chi(lam/sqrt(Re z))`` vanishes beyond ``outer*sqrt(Re z)``,
    so the lambda integral is over a finite interval and needs no tail.
    """
    cutoff = cutoff or CutoffSpec()
    if zp.z.real <= 0:
        raise InvalidArgument("the low-frequency part needs Re z > 0")
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    sr = math.sqrt(zp.z.real)
    lam_max = cutoff.outer * sr
    r_big = float(max(rows.max(), cols.max()))
    lam, w = _lambda_grid(zp, r_big, lam_max, cutoff)
    _check_order(order.nu, lam_max * r_big)
    g = w * cutoff(lam / sr) * lam / (lam ** 2 - zp.z)
    Jr = special.jv(order.nu, np.outer(lam, rows))
    Jc = special.jv(order.nu, np.outer(lam, cols))
    d = order.d
    return (rows[:, None] * cols[None, :]) ** (-(d - 2) / 2) * ((Jr * g[:, None]).T @ Jc)


# --------------------------------------------------------------------------
# Sector operators

def _green_matrix(order: SectorOrder, zp: SpectralPoint, rows, cols) -> np.ndarray:
    """``G_k(rows_i, cols_j)`` from per-node Bessel vectors (semiseparable form)."""
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    kappa = zp.kappa
    nu = order.nu
    r_top = float(max(rows.max(), cols.max()))
    _check_order(nu, abs(kappa) * r_top)
    if abs(kappa) * r_top > 1e3:
        raise AccuracyFailure("|kappa r| beyond the Hankel accuracy region")
    jr, ejr, hr, ehr = _kernel_vectors(nu, kappa, rows)
    jc, ejc, hc, ehc = _kernel_vectors(nu, kappa, cols)
    lower = rows[:, None] <= cols[None, :]
    m = np.where(lower, jr[:, None] * hc[None, :], jc[None, :] * hr[:, None])
    e = np.where(lower, ejr[:, None] + ehc[None, :], ejc[None, :] + ehr[:, None])
    d = order.d
    return 0.5j * math.pi * (rows[:, None] * cols[None, :]) ** (-(d - 2) / 2) * m * np.exp(e)


_KINK_CACHE: dict = {}


def _kink_data(rule):
    """Sub-quadrature splitting each node's own panel at the node.

    Returns ``(ys, ws, L)`` with shapes ``(N, 2n)``, ``(N, 2n)`` and
    ``(N, 2n, n)``; ``L`` interpolates from the panel nodes to ``ys``.
    """
    key = (rule.edges.tobytes(), rule.nodes_per_panel)
    hit = _KINK_CACHE.get(key)
    if hit is not None:
        return hit
    n = rule.nodes_per_panel
    t, wt = leggauss(n)
    s01 = 0.5 * (t + 1)
    N = rule.size
    ys = np.empty((N, 2 * n))
    ws = np.empty((N, 2 * n))
    L = np.empty((N, 2 * n, n))
    for p in range(rule.panels):
        a, b = rule.edges[p], rule.edges[p + 1]
        xp = rule.nodes[p * n:(p + 1) * n]
        for m, xi in enumerate(xp):
            i = p * n + m
            ys[i, :n] = a + (xi - a) * s01
            ys[i, n:] = xi + (b - xi) * s01
            ws[i, :n] = 0.5 * (xi - a) * wt
            ws[i, n:] = 0.5 * (b - xi) * wt
            L[i] = lagrange_matrix(xp, ys[i])
    if len(_KINK_CACHE) > 64:
        _KINK_CACHE.clear()
    _KINK_CACHE[key] = (ys, ws, L)
    return ys, ws, L


@dataclass(frozen=True)
class SectorOperator:
    """Quadrature matrix of one sector block (unitary node scaling)."""

    order: SectorOrder
    z: complex
    matrix: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return dim_harmonics(self.order.d, self.order.k)

    def singular_values(self) -> SingularSpectrum:
        return svd_singular_values(self.matrix)

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


def _unitary_scale(rule, d):
    return np.sqrt(rule.weights * rule.nodes ** (d - 1))


def sector_sandwich(w1: RadialProfile, w2: RadialProfile, order: SectorOrder,
                    zp: SpectralPoint, corrected: bool = True,
                    kernel: str = "green", cutoff: Optional[CutoffSpec] = None) -> SectorOperator:
    """Nyström matrix of the sector block of ``W1 R0(z) W2`` on ``L^2(r^{d-1} dr)``.

    ``M[m, n] = sqrt(om_m r_m^{d-1}) w1(r_m) G_k(r_m, r_n) w2(r_n) sqrt(om_n r_n^{d-1})``.
    With ``corrected=True`` (default) the panel containing ``r_m`` is
    integrated on sub-panels split at ``r_m``, which removes the loss of
    order caused by the kink of ``G_k`` on the diagonal; off-diagonal panels
    are untouched.

    ``kernel`` selects ``"green"`` (closed form) or the spectral-integral
    kernels ``"low"``, ``"high"``, ``"full_spectral"``; those are much more
    expensive and always use the plain rule.
    """
    if not w1.rule.same_as(w2.rule):
        raise InvalidArgument("profiles must share a quadrature rule")
    if not (w1.d == w2.d == order.d):
        raise InvalidArgument("dimension mismatch")
    rule = w1.rule
    d = order.d
    x, om = rule.nodes, rule.weights
    s = _unitary_scale(rule, d)
    if not (np.any(w1.values) and np.any(w2.values)):
        return SectorOperator(order, zp.z, np.zeros((rule.size, rule.size), dtype=complex))
    if kernel == "green":
        G = _green_matrix(order, zp, x, x)
    elif kernel == "low":
        G = spectral_low_matrix(order, zp, x, x, cutoff)
        corrected = False
    elif kernel in ("high", "full_spectral"):
        if kernel == "high" and (cutoff is None or zp.z.real <= 0):
            raise InvalidArgument("high part needs a cutoff and Re z > 0")
        part = "high" if kernel == "high" else "full"
        G = np.empty((x.size, x.size), dtype=complex)
        for i in range(x.size):
            for j in range(i, x.size):
                val = getattr(spectral_integral_parts(order, zp, x[i], x[j], cutoff), part)
                G[i, j] = G[j, i] = val
        corrected = False
    else:
        raise InvalidArgument(f"unknown kernel {kernel!r}")
    A = G * om[None, :]
    if corrected:
        ys, ws, L = _kink_data(rule)
        xi = np.repeat(x[:, None], ys.shape[1], axis=1)
        lo, hi = np.minimum(xi, ys), np.maximum(xi, ys)
        Gs = 0.5j * math.pi * (xi * ys) ** (-(d - 2) / 2) * _jh_products(order.nu, zp.kappa, lo, hi)
        block = np.einsum("is,is,isj->ij", ws, Gs, L)
        n = rule.nodes_per_panel
        for p in range(rule.panels):
            sl = slice(p * n, (p + 1) * n)
            A[sl, sl] = block[sl]
    M = (s * w1.values)[:, None] * A * (w2.values * x ** (d - 1) / s)[None, :]
    return SectorOperator(order, zp.z, M)


# --------------------------------------------------------------------------
# Schatten norms over sectors

RESOLVENT_K_CAP = 128


@dataclass(frozen=True)
class ResolventNorm:
    """Schatten norm over sectors ``k <= k_max`` plus a bound on the rest.

    ``hs_norms`` holds the Hilbert-Schmidt norm of every sector block that was
    assembled, i.e. for ``k <= 2 k_max``; the tail uses the ones above
    ``k_max`` directly and a power law fitted to them beyond ``2 k_max``.
    """

    norm: float
    tail_bound: float
    k_max: int
    spectrum: SingularSpectrum = field(repr=False)
    hs_norms: np.ndarray = field(repr=False)
    decay_exponent: float = math.nan

    def __iter__(self):
        # allows ``norm, tail = resolvent_schatten(...)``
        return iter((self.norm, self.tail_bound))


def _hs_to_sp_factor(p: float, rank: int) -> float:
    """``||M||_p <= factor * ||M||_HS`` for a matrix of the given rank."""
    return 1.0 if p >= 2 else rank ** (1.0 / p - 0.5)


def _fit_power(ks: np.ndarray, vals: np.ndarray):
    """Least-squares fit ``vals ~ C k^{-alpha}``; returns ``(log C, alpha)``."""
    sel = vals > 0
    if np.count_nonzero(sel) < 2:
        return -math.inf, math.inf
    A = np.vstack([np.ones(np.count_nonzero(sel)), -np.log(ks[sel])]).T
    (logc, alpha), *_ = np.linalg.lstsq(A, np.log(vals[sel]), rcond=None)
    return float(logc), float(alpha)


def _power_tail(d: int, log_c: float, beta: float, k0: int) -> float:
    """Upper bound for ``sum_{k > k0} dim_k e^{log_c} k^{-beta}``.

    Uses ``dim_k <= (2k+d-2)(k+d-3)^{d-3}/(d-2)!`` and comparison with the
    integral ``int_{k0}^inf k^{d-2-beta} dk``.
    """
    if beta <= d - 1:
        return math.inf
    k1 = k0 + 1
    grow = (1 + (d - 2) / (2 * k1)) * (1 + max(d - 3, 0) / k1) ** max(d - 3, 0)
    const = 2 * grow / math.factorial(d - 2)
    # the summand is decreasing beyond k0, so the sum is below the integral from k0
    return const * math.exp(log_c) * k0 ** (d - 1 - beta) / (beta - d + 1)


def _assemble_norm(w1, w2, cfg: ExponentConfig, zp: SpectralPoint, km: int,
                   cache: dict, **kw) -> ResolventNorm:
    d, p = cfg.d, cfg.p
    size = w1.rule.size

    def block(k):
        if k not in cache:
            cache[k] = sector_sandwich(w1, w2, SectorOrder(d, k), zp, **kw).matrix
        return cache[k]

    svals, mults = [], []
    hs = []
    for k in range(km + 1):
        s = svd_singular_values(block(k)).s
        svals.append(s)
        mults.append(np.full(s.size, dim_harmonics(d, k)))
        hs.append(float(np.linalg.norm(s)))
    spec = SingularSpectrum(np.concatenate(svals), np.concatenate(mults))
    s_all = spec.s
    top = float(s_all.max()) if s_all.size else 0.0
    norm = 0.0 if top == 0 else float(top * np.sum(spec.mult * (s_all / top) ** p) ** (1 / p))
    for k in range(km + 1, 2 * km + 1):
        hs.append(float(np.linalg.norm(block(k))))
    hs = np.array(hs)
    fac = _hs_to_sp_factor(p, size)
    upper = np.arange(km + 1, 2 * km + 1)
    direct = sum(dim_harmonics(d, int(k)) * (fac * hs[k]) ** p for k in upper)
    logc, alpha = _fit_power(upper.astype(float), hs[upper])
    if math.isinf(logc):
        far = 0.0
    else:
        # dominate the fitted law by its value at the last computed sector
        logc = max(logc, math.log(hs[2 * km]) + alpha * math.log(2 * km)) if hs[2 * km] > 0 else logc
        far = _power_tail(d, p * (math.log(fac) + logc), alpha * p, 2 * km)
    tail = tail_in_norm_units(norm, direct + far, p)
    return ResolventNorm(norm, tail, km, spec, hs, alpha)


def resolvent_schatten(w1: RadialProfile, w2: RadialProfile, cfg: ExponentConfig,
                       zp: SpectralPoint, k_max: Optional[int] = None,
                       rel_tol: float = 1e-6, **kw) -> ResolventNorm:
    """Schatten ``p``-norm of ``W1 R0(z) W2`` summed over sectors.

    Sectors ``k <= k_max`` contribute their singular values with multiplicity
    ``dim H_k``.  The tail is ``sum_{k > k_max} dim_k ||M_k||_HS^p`` (for
    ``p >= 2``; a rank factor is applied for ``p < 2``), computed directly up
    to ``2 k_max`` and continued by a power law fitted on that octave.  With
    ``k_max=None`` the cut doubles from 8 until ``tail <= rel_tol * norm``.
    Extra keyword arguments go to :func:`sector_sandwich`.
    """
    d = cfg.d
    if w1.d != d or w2.d != d:
        raise InvalidArgument("profiles and config use different dimensions")
    if not (d / 2 <= cfg.q < d) or not cfg.p > cfg.critical_p:
        if not cfg.relaxed:
            raise InvalidArgument("exponent pair outside the admissible range")
    cache: dict = {}
    if k_max is not None:
        if k_max < 1:
            raise InvalidArgument("k_max must be >= 1")
        return _assemble_norm(w1, w2, cfg, zp, int(k_max), cache, **kw)
    km = 8
    while True:
        res = _assemble_norm(w1, w2, cfg, zp, km, cache, **kw)
        if res.norm == 0.0 or res.tail_bound <= rel_tol * res.norm:
            return res
        if 2 * km > RESOLVENT_K_CAP:
            raise AccuracyFailure(
                f"sector tail {res.tail_bound:.3g} above tolerance at k_max={km}")
        km *= 2


# --------------------------------------------------------------------------
# Scans

def uniform_bound_scan(w1: RadialProfile, w2: RadialProfile, cfg: ExponentConfig,
                       theta_grid: Sequence[float], k_max: Optional[int] = None,
                       growth_tol: float = 1.1, **kw) -> dict:
    """Ratios ``||W1 R0(e^{i theta}) W2||_p / (|z|^{d/(2q)-1} ||w1||_{2q} ||w2||_{2q})``.

    Accuracy failures are recorded per ``theta`` and the scan goes on.  The
    report flags growth when the ratio at the smallest ``theta`` exceeds
    ``growth_tol`` times the ratio at the largest ``theta <= 1e-2`` (or the
    largest angle if there is none besides the smallest).
    """
    thetas = [float(t) for t in theta_grid]
    for t in thetas:
        if not 0 < t <= math.pi:
            raise InvalidArgument(f"theta={t} outside (0, pi]")
    d, q = cfg.d, cfg.q
    denom = lq_norm(w1, 2 * q) * lq_norm(w2, 2 * q)
    if denom == 0:
        raise InvalidArgument("zero weight")
    ratios: List[Optional[float]] = []
    tails: List[Optional[float]] = []
    kms: List[Optional[int]] = []
    failures = []
    for t in thetas:
        z = cmath.exp(1j * t)
        if t == math.pi:
            z = complex(-1.0, 0.0)
        try:
            res = resolvent_schatten(w1, w2, cfg, SpectralPoint(z), k_max, **kw)
        except (AccuracyFailure, InvalidArgument) as exc:
            ratios.append(None)
            tails.append(None)
            kms.append(None)
            failures.append({"theta": t, "error": type(exc).__name__, "message": str(exc)})
            continue
        ratios.append(res.norm / (abs(z) ** (d / (2 * q) - 1) * denom))
        tails.append(res.tail_bound)
        kms.append(res.k_max)
    ok = [(t, r) for t, r in zip(thetas, ratios) if r is not None]
    summary = {}
    if ok:
        vals = np.array([r for _, r in ok])
        summary["max_over_min"] = float(vals.max() / vals.min()) if vals.min() > 0 else math.inf
        ts = sorted(ok)
        t_small, r_small = ts[0]
        ref = [r for tt, r in ts[1:] if tt <= 1e-2] or [r for _, r in ts[1:]]
        summary["growth_ratio"] = float(r_small / ref[-1]) if ref and ref[-1] > 0 else None
        summary["growth_flag"] = bool(summary["growth_ratio"] is not None
                                      and summary["growth_ratio"] > growth_tol)
    return {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.as_dict(),
        "theta_grid": thetas,
        "ratios": ratios,
        "tail_bounds": tails,
        "failures": failures,
        "k_max_used": kms,
        "summary": summary,
    }


def scan_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


def scan_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "ratio", "tail_bound", "k_max", "failed"])
    failed = {f["theta"] for f in report["failures"]}
    for t, r, tb, km in zip(report["theta_grid"], report["ratios"],
                            report["tail_bounds"], report["k_max_used"]):
        w.writerow([repr(t), "" if r is None else repr(r), "" if tb is None else repr(tb),
                    "" if km is None else km, int(t in failed)])
    return buf.getvalue()


def separation_scan(d: int, separations: Sequence[float], z: complex = None,
                    width: float = 1.0, panels_per_unit: int = 4, nodes_per_panel: int = 16) -> dict:
    """Decay of the sector-0 block of ``W1 R0(z) W2`` with ``w1 = 1_{[0,width]}``
    and ``w2 = 1_{[L, L+width]}``, for ``L`` in ``separations``.

    The quantity reported is the normalised Hilbert-Schmidt norm
    ``||M_0||_HS / (||w1||_2 ||w2||_2)``, i.e. the root-mean-square size of the
    sector kernel over the two supports.  Its log-log slope in ``L`` is fitted
    and returned as ``slope``.
    """
    from .radial import QuadratureRule  # local: only needed here

    if z is None:
        z = cmath.exp(1e-6j)
    zp = SpectralPoint(z)
    order = SectorOrder(d, 0)
    values = []
    for L in separations:
        if not L > width:
            raise InvalidArgument("separation must exceed the support width")
        h = 1.0 / panels_per_unit
        e1 = np.arange(0.0, width + h / 2, h)
        e2 = np.arange(L, L + width + h / 2, h)
        gap = np.linspace(width, L, max(2, int(math.ceil((L - width) / 4)) + 1))
        edges = np.unique(np.concatenate([e1, gap, e2]))
        rule = QuadratureRule(edges, nodes_per_panel)
        x = rule.nodes
        v1 = np.where(x <= width, 1.0, 0.0).astype(complex)
        v2 = np.where((x >= L) & (x <= L + width), 1.0, 0.0).astype(complex)
        s = _unitary_scale(rule, d)
        i1, i2 = np.nonzero(v1)[0], np.nonzero(v2)[0]
        G = _green_matrix(order, zp, x[i1], x[i2])
        M = s[i1, None] * G * s[None, i2]
        n1 = math.sqrt(float(np.sum(rule.weights[i1] * x[i1] ** (d - 1))))
        n2 = math.sqrt(float(np.sum(rule.weights[i2] * x[i2] ** (d - 1))))
        values.append(float(np.linalg.norm(M)) / (n1 * n2))
    Ls = np.array(separations, dtype=float)
    slope = float(np.polyfit(np.log(Ls), np.log(values), 1)[0]) if len(Ls) >= 2 else math.nan
    return {
        "schema_version": SCHEMA_VERSION,
        "d": d,
        "z": [zp.z.real, zp.z.imag],
        "separations": [float(x) for x in Ls],
        "normalised_hs": values,
        "slope": slope,
        "expected_slope": -(d - 1) / 2,
    }

"""Bessel and Hankel functions, sector profile functions and the Bessel
moment integral with its power-of-order envelope.

Point values come from ``scipy.special`` (AMOS); this module adds the domain
checks that turn out-of-range requests into :class:`AccuracyFailure` instead
of quietly returning garbage.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from .errors import AccuracyFailure, DivergenceError, InvalidArgument
from .radial import check_dimension

MAX_ORDER = 300.0
MAX_REAL_ARG = 1.0e4
MAX_COMPLEX_ARG = 1.0e3
# orders above MAX_ORDER are served only far inside the monotone region
EXTENDED_ORDER = 5000.0
EXTENDED_ARG_RATIO = 0.5


@dataclass(frozen=True)
class SectorOrder:
    """Angular sector ``k`` in dimension ``d``; Bessel order ``(d+2k-2)/2``."""

    d: int
    k: int

    def __post_init__(self):
        check_dimension(self.d)
        if int(self.k) != self.k or self.k < 0:
            raise InvalidArgument(f"sector index must be a nonnegative integer, got {self.k}")

    @property
    def nu(self) -> float:
        return (self.d + 2 * self.k - 2) / 2.0


def _check_order(nu, arg_abs=None):
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(nu_arr < 0):
        raise InvalidArgument("negative Bessel orders are not supported")
    high = nu_arr > MAX_ORDER
    if not np.any(high):
        return
    if np.any(nu_arr > EXTENDED_ORDER) or arg_abs is None:
        raise AccuracyFailure(f"Bessel order {float(np.max(nu_arr))} exceeds {MAX_ORDER}")
    nu_b, x_b = np.broadcast_arrays(nu_arr, np.asarray(arg_abs, dtype=float))
    sel = nu_b > MAX_ORDER
    if np.any(x_b[sel] > EXTENDED_ARG_RATIO * nu_b[sel]):
        raise AccuracyFailure(
            f"order above {MAX_ORDER} is only supported for |x| <= {EXTENDED_ARG_RATIO} nu")


def bessel_j(nu, x):
    """``J_nu(x)`` for real ``nu >= 0`` and ``0 <= x <= 1e4``.

    Orders up to 5000 are accepted when ``x <= nu / 2``.
    """
    x = np.asarray(x, dtype=float)
    _check_order(nu, x)
    if np.any(x < 0):
        raise InvalidArgument("bessel_j takes x >= 0")
    if np.any(x > MAX_REAL_ARG):
        raise AccuracyFailure(f"argument beyond {MAX_REAL_ARG}")
    out = special.jv(nu, x)
    if not np.all(np.isfinite(out)):
        raise AccuracyFailure("non-finite J_nu value")
    return out[()] if out.ndim == 0 else out


def bessel_j_complex(nu, z, scaled=False):
    """``J_nu(z)`` in the closed upper half plane; ``scaled`` divides by ``e^{|Im z|}``."""
    z = np.asarray(z, dtype=complex)
    _check_order(nu, np.abs(z))
    if np.any(np.abs(z) > MAX_COMPLEX_ARG):
        raise AccuracyFailure(f"|z| beyond {MAX_COMPLEX_ARG}")
    out = special.jve(nu, z) if scaled else special.jv(nu, z)
    if not np.all(np.isfinite(out)):
        raise AccuracyFailure("non-finite J_nu value")
    return out


def hankel1(nu, zeta, scaled=False):
    """``H^(1)_nu(zeta)`` for ``Im zeta >= 0``, ``zeta != 0``.

    With ``scaled=True`` the factor ``e^{-i zeta}`` is applied, which keeps
    values bounded for large ``Im zeta``.
    """
    zeta = np.asarray(zeta, dtype=complex)
    _check_order(nu, np.abs(zeta))
    if np.any(zeta == 0):
        raise InvalidArgument("H^(1) is singular at 0")
    if np.any(zeta.imag < -1e-14 * np.abs(zeta)):
        raise InvalidArgument("hankel1 is restricted to the closed upper half plane")
    if np.any(np.abs(zeta) > MAX_COMPLEX_ARG):
        raise AccuracyFailure(f"|zeta| beyond {MAX_COMPLEX_ARG}")
    out = special.hankel1e(nu, zeta) if scaled else special.hankel1(nu, zeta)
    if not np.all(np.isfinite(out)):
        raise AccuracyFailure("H^(1) overflow; use scaled=True")
    return out[()] if out.ndim == 0 else out


def psi_k(order: SectorOrder, r):
    """Radial factor of the extension operator on sector ``k``.

    ``psi_k(r) = (2 pi)^{d/2} r^{-(d-2)/2} J_nu(r)``, so that the Fourier
    extension of a degree-``k`` harmonic ``H`` is ``i^k psi_k(|x|) H(x/|x|)``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise InvalidArgument("psi_k needs r > 0")
    d = order.d
    return (2 * math.pi) ** (d / 2) * r ** (-(d - 2) / 2) * bessel_j(order.nu, r)


@dataclass(frozen=True)
class BesselLemmaParams:
    mu: float
    p: float
    rho: float

    def __post_init__(self):
        if not self.mu > 0.5:
            raise InvalidArgument("order must exceed 1/2")
        if not self.p > self.rho + 1:
            raise InvalidArgument("need p > rho + 1")
        if not 2 * self.p / 3 > self.rho + 1 / 3:
            raise InvalidArgument("need 2p/3 > rho + 1/3")


def lemma_envelope(params: BesselLemmaParams) -> float:
    """``max(mu^{-p+rho+1}, mu^{-2p/3+rho+1/3})``.

    For ``p == 2`` the two powers coincide and the true bound carries an
    extra ``log(mu)`` that the caller must supply.
    """
    mu, p, rho = params.mu, params.p, params.rho
    return max(mu ** (-p + rho + 1), mu ** (-2 * p / 3 + rho + 1 / 3))


def _gl_panels(a, b, width, n=16):
    npan = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, npan + 1)
    x, w = leggauss(n)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


@dataclass(frozen=True)
class MomentIntegral:
    """Bessel moment integral over ``[1, s_max]`` plus a certified tail bound."""

    body: float
    tail_bound: float
    s_max: float
    tail_estimate: float = math.nan

    @property
    def value(self) -> float:
        return self.body + self.tail_bound


def bessel_moment_integral(params: BesselLemmaParams, s_max: float = 100.0,
                           panel_width: float = 0.125) -> MomentIntegral:
    """``int_1^inf |J_mu(2 pi s)|^{2p} s^rho ds`` as body + certified tail.

    The tail beyond ``s_max`` is bounded with the envelope
    ``J_mu(x)^2 <= 2 / (pi sqrt(x^2 - mu^2))`` (valid for ``mu >= 1/2``,
    ``x > mu``), which requires ``2 pi s_max > mu``.
    """
    mu, p, rho = params.mu, params.p, params.rho
    if p - rho <= 1:
        raise DivergenceError("tail integral diverges (p - rho <= 1)")
    if s_max < 2:
        raise InvalidArgument("s_max must be >= 2")
    x0 = 2 * math.pi * s_max
    if x0 <= mu * 1.01:
        raise InvalidArgument(f"s_max={s_max} too small for order {mu}")
    s, w = _gl_panels(1.0, s_max, panel_width)
    body = float(np.dot(w, np.abs(bessel_j(mu, 2 * math.pi * s)) ** (2 * p) * s ** rho))
    c = 2.0 / (math.pi * 2 * math.pi * math.sqrt(1.0 - (mu / x0) ** 2))
    tail = c ** p * s_max ** (rho - p + 1) / (p - rho - 1)
    # leading-order Hankel asymptotics with the mean of |cos|^{2p}; an
    # estimate (relative error O(1/x0 + mu^2/x0^2)), not a bound
    mean_cos = math.exp(math.lgamma(p + 0.5) - math.lgamma(p + 1.0)) / math.sqrt(math.pi)
    est = (1.0 / (math.pi ** 2)) ** p * mean_cos * s_max ** (rho - p + 1) / (p - rho - 1)
    return MomentIntegral(body, float(tail), float(s_max), float(min(est, tail)))


def lemma_scan(p: float, rho: float, mus: Sequence[float] = (2, 4, 8, 16, 32, 64, 128),
               s_max: float = 100.0) -> dict:
    """Ratios ``bessel_moment_integral / lemma_envelope`` over orders ``mus``.

    ``ratios``/``slope`` use the certified upper value (body + tail bound);
    ``estimate_ratios``/``estimate_slope`` replace the tail bound by the
    leading-order asymptotic tail.  The log-log slope of the ratios against ``mu`` is the growth beyond the
    envelope; a slope near or below zero means the envelope captures the
    decay.  For ``p == 2`` the envelope is multiplied by ``log(mu)``.
    """
    mus = [float(m) for m in mus]
    if len(mus) < 2:
        raise InvalidArgument("need at least two orders")
    ratios, values, tails, envs, ests = [], [], [], [], []
    for mu in mus:
        prm = BesselLemmaParams(mu, p, rho)
        sm = max(s_max, 1.05 * mu / (2 * math.pi) + 2.0)
        res = bessel_moment_integral(prm, sm)
        env = lemma_envelope(prm) * (math.log(mu) if p == 2 else 1.0)
        values.append(res.value)
        tails.append(res.tail_bound)
        envs.append(env)
        ratios.append(res.value / env)
        ests.append((res.body + res.tail_estimate) / env)
    lm = np.log(mus)
    slope = float(np.polyfit(lm, np.log(ratios), 1)[0])
    est_slope = float(np.polyfit(lm, np.log(ests), 1)[0])
    return {"p": p, "rho": rho, "mus": mus, "s_max": s_max, "integrals": values,
            "tail_bounds": tails, "envelopes": envs, "ratios": ratios,
            "slope": slope, "estimate_ratios": ests, "estimate_slope": est_slope}

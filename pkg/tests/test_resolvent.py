import cmath
import math

import numpy as np
import pytest

from radspec.bessel import SectorOrder
from radspec.errors import InvalidArgument
from radspec.radial import ExponentConfig, dilate, from_function, standard_profiles
from radspec.resolvent import (CutoffSpec, SpectralPoint, delta_dist, green_kernel,
                               resolvent_schatten, scan_csv, scan_json, sector_sandwich,
                               separation_scan, spectral_integral_kernel,
                               spectral_integral_parts, spectral_low_matrix,
                               uniform_bound_scan)
from radspec.schatten import schatten_norm, svd_singular_values

CFG = ExponentConfig(q=2, p=4.5, d=3)


def closed_form_d3(r, rp, kappa):
    lo, hi = min(r, rp), max(r, rp)
    return cmath.sin(kappa * lo) * cmath.exp(1j * kappa * hi) / (kappa * r * rp)


@pytest.mark.parametrize("z,expected", [(3 + 4j, 4.0), (-3 + 4j, 5.0), (-1, 1.0), (2 - 0.5j, 0.5)])
def test_delta_dist(z, expected):
    assert delta_dist(z) == pytest.approx(expected)


def test_spectral_point_branch():
    for z in [-1, 1 + 1j, 1 - 1j, -4 - 1e-9j, 1e-3j]:
        k = SpectralPoint(z).kappa
        assert k.imag > 0
        assert k * k == pytest.approx(complex(z), rel=1e-14, abs=1e-300)
    assert SpectralPoint(-1).kappa == pytest.approx(1j)
    with pytest.raises(InvalidArgument):
        SpectralPoint(2.0)
    with pytest.raises(InvalidArgument):
        SpectralPoint(0)


def test_cutoff_formula():
    chi = CutoffSpec()
    t = np.linspace(0, 6, 601)
    v = chi(t)
    assert np.all(v[t <= 2] == 1.0) and np.all(v[t >= 4] == 0.0)
    assert np.all((v >= 0) & (v <= 1)) and np.all(np.diff(v) <= 0)
    # symmetric transition: eta(3) = 1/2, eta(3+s) = 1 - eta(3-s)
    assert chi(3.0) == pytest.approx(0.5)
    s = np.linspace(0, 1, 11)
    assert np.allclose(chi(3 + s), 1 - chi(3 - s), atol=1e-15)
    h = lambda x: math.exp(-1 / x)  # noqa: E731
    assert chi(2.5) == pytest.approx(h(0.75) / (h(0.75) + h(0.25)), rel=1e-15)


def test_green_closed_form_grid():
    o = SectorOrder(3, 0)
    zp = SpectralPoint(-1)
    r = np.linspace(0.05, 4.0, 20)
    R, RP = np.meshgrid(r, r, indexing="ij")
    G = green_kernel(o, zp, R, RP)
    exact = np.sinh(np.minimum(R, RP)) * np.exp(-np.maximum(R, RP)) / (R * RP)
    assert np.max(np.abs(G - exact) / np.abs(exact)) < 1e-10
    assert green_kernel(o, zp, 1.0, 2.0) == pytest.approx(0.0795230932008946, rel=1e-12)


@pytest.mark.parametrize("z", [2 + 0.5j, 1 + 1j, -3 + 0.2j])
def test_green_closed_form_complex(z):
    zp = SpectralPoint(z)
    for r, rp in [(0.3, 0.9), (2.0, 1.1), (1.5, 1.5)]:
        g = green_kernel(SectorOrder(3, 0), zp, r, rp)
        assert g == pytest.approx(closed_form_d3(r, rp, zp.kappa), rel=1e-12)


def test_green_symmetry_and_conjugation():
    for d, k in [(2, 0), (3, 2), (4, 1), (5, 7)]:
        o = SectorOrder(d, k)
        zp = SpectralPoint(2 + 1j)
        a = green_kernel(o, zp, 0.4, 1.7)
        assert a == green_kernel(o, zp, 1.7, 0.4)
        b = green_kernel(o, zp.conj(), 0.4, 1.7)
        # conj(z) has kappa' = -conj(kappa); the kernel is the conjugate one
        assert b == pytest.approx(a.conjugate(), rel=1e-12)


def test_green_large_order_small_radius_mpmath():
    import mpmath
    o = SectorOrder(3, 120)
    zp = SpectralPoint(1 + 0.1j)
    r, rp = 1e-3, 2e-3
    got = green_kernel(o, zp, r, rp)
    with mpmath.workdps(40):
        k = mpmath.sqrt(mpmath.mpc(1, 0.1))
        ref = (1j * mpmath.pi / 2 * (r * rp) ** -0.5
               * mpmath.besselj(o.nu, k * r) * mpmath.hankel1(o.nu, k * rp))
    assert got == pytest.approx(complex(ref), rel=1e-10)


def test_green_satisfies_radial_ode():
    # (-d^2/dr^2 - (d-1)/r d/dr + nu'(nu'+...)) : check via second differences for r != r'
    d, k = 3, 1
    o = SectorOrder(d, k)
    zp = SpectralPoint(1.5 + 0.7j)
    rp, r, h = 2.0, 0.9, 1e-3
    f = lambda x: green_kernel(o, zp, x, rp)  # noqa: E731
    f0, fp, fm = f(r), f(r + h), f(r - h)
    lap = (fp - 2 * f0 + fm) / h ** 2 + (d - 1) / r * (fp - fm) / (2 * h)
    ang = k * (k + d - 2) / r ** 2
    resid = -lap + ang * f0 - zp.z * f0
    assert abs(resid) < 1e-5 * abs(f0)


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("z", [-1, 2 + 0.5j, cmath.exp(1j * math.pi / 6)])
def test_spectral_integral_matches_green(k, z):
    o = SectorOrder(3, k)
    zp = SpectralPoint(z)
    for r, rp in [(0.5, 1.5), (1.0, 1.2)]:
        full = spectral_integral_kernel(o, zp, r, rp)
        g = green_kernel(o, zp, r, rp)
        assert abs(full - g) < 1e-6 * abs(g)


@pytest.mark.parametrize("d,k", [(2, 0), (2, 1), (4, 0), (5, 2)])
def test_spectral_integral_other_dimensions(d, k):
    o = SectorOrder(d, k)
    zp = SpectralPoint(1.3 + 0.6j)
    full = spectral_integral_kernel(o, zp, 0.6, 1.1)
    g = green_kernel(o, zp, 0.6, 1.1)
    assert abs(full - g) < 1e-6 * abs(g)


def test_low_high_partition():
    o = SectorOrder(3, 1)
    for z in [2 + 0.5j, 1 + 1e-2j]:
        parts = spectral_integral_parts(o, SpectralPoint(z), 0.7, 1.3, CutoffSpec())
        assert abs(parts.low + parts.high - parts.full) < 1e-10
        assert abs(parts.full - green_kernel(o, SpectralPoint(z), 0.7, 1.3)) < 1e-8


def test_low_matrix_matches_pointwise():
    o = SectorOrder(3, 0)
    zp = SpectralPoint(2 + 0.5j)
    x = np.array([0.3, 0.8, 1.4])
    M = spectral_low_matrix(o, zp, x, x)
    for i in range(3):
        for j in range(3):
            ref = spectral_integral_kernel(o, zp, x[i], x[j], CutoffSpec(), "low")
            assert M[i, j] == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_low_high_need_cutoff():
    with pytest.raises(InvalidArgument):
        spectral_integral_kernel(SectorOrder(3, 0), SpectralPoint(-1), 1, 2, CutoffSpec(), "low")
    with pytest.raises(InvalidArgument):
        spectral_integral_kernel(SectorOrder(3, 0), SpectralPoint(1j), 1, 2, None, "high")


def test_sandwich_zero_and_mismatch():
    w = standard_profiles("indicator")
    z0 = w.with_values(np.zeros(w.rule.size))
    M = sector_sandwich(z0, w, SectorOrder(3, 0), SpectralPoint(-1)).matrix
    assert not np.any(M)
    other = standard_profiles("indicator", {"panels": 5})
    with pytest.raises(InvalidArgument):
        sector_sandwich(w, other, SectorOrder(3, 0), SpectralPoint(-1))


def test_sandwich_refinement_oracle():
    w = standard_profiles("indicator", {"panels": 4})
    wr = from_function(w.func, w.rule.refined(2), 3, 1.0)
    o, zp = SectorOrder(3, 0), SpectralPoint(-1)
    s1 = sector_sandwich(w, w, o, zp).singular_values().s[0]
    s2 = sector_sandwich(wr, wr, o, zp).singular_values().s[0]
    assert abs(s1 - s2) < 1e-8 * s2


def test_sandwich_kink_correction_improves_convergence():
    o, zp = SectorOrder(3, 0), SpectralPoint(-1)
    w = standard_profiles("indicator", {"panels": 4})
    ref = sector_sandwich(from_function(w.func, w.rule.refined(4), 3, 1.0),
                          from_function(w.func, w.rule.refined(4), 3, 1.0), o, zp).singular_values().s[0]
    plain = sector_sandwich(w, w, o, zp, corrected=False).singular_values().s[0]
    corr = sector_sandwich(w, w, o, zp).singular_values().s[0]
    assert abs(corr - ref) < 1e-3 * abs(plain - ref)


def test_sandwich_trace_positive():
    w = standard_profiles("indicator")
    M = sector_sandwich(w, w, SectorOrder(3, 0), SpectralPoint(-1)).matrix
    tr = np.trace(M)
    assert abs(tr.imag) < 1e-14 and tr.real > 0
    # uncorrected diagonal is the quadrature of int w^2 G(r,r) r^2 dr = 1/2 - (1 - e^-2)/4
    M0 = sector_sandwich(w, w, SectorOrder(3, 0), SpectralPoint(-1), corrected=False).matrix
    assert np.trace(M0).real == pytest.approx(0.5 - (1 - math.exp(-2)) / 4, rel=1e-12)


def test_sandwich_positive_semidefinite_for_negative_z():
    w = standard_profiles("gaussian", {"panels": 14})
    M = sector_sandwich(w, w, SectorOrder(3, 1), SpectralPoint(-2)).matrix
    ev = np.linalg.eigvals(M)
    assert np.all(ev.real > -1e-12) and np.max(np.abs(ev.imag)) < 1e-10


def test_resolvent_zero_weight():
    w = standard_profiles("gaussian", {"panels": 14})
    z0 = w.with_values(np.zeros(w.rule.size))
    res = resolvent_schatten(z0, w, CFG, SpectralPoint(-1), k_max=4)
    assert res.norm == 0.0 and res.tail_bound == 0.0
    norm, tail = res
    assert norm == 0.0


@pytest.mark.parametrize("lam,z", [(2.0, -1 + 1j), (0.5, 2 + 0.5j), (3.0, cmath.exp(0.3j))])
def test_resolvent_dilation_identity(lam, z):
    g = standard_profiles("gaussian")
    a = resolvent_schatten(g, g, CFG, SpectralPoint(z), k_max=8).norm
    gd = dilate(g, lam)
    b = resolvent_schatten(gd, gd, CFG, SpectralPoint(z / lam ** 2), k_max=8).norm / lam ** 2
    assert abs(a - b) < 1e-7 * a


def test_resolvent_refinement_oracle():
    g = standard_profiles("gaussian")
    zp = SpectralPoint(cmath.exp(1j * math.pi / 3))
    a = resolvent_schatten(g, g, CFG, zp, k_max=12).norm
    g2 = from_function(g.func, g.rule.refined(2), 3, g.support_radius)
    b = resolvent_schatten(g2, g2, CFG, zp, k_max=12).norm
    assert abs(a - b) < 1e-6 * a


def test_resolvent_truncation_monotone_and_certified():
    g = standard_profiles("gaussian")
    zp = SpectralPoint(1 + 0.3j)
    prev = None
    for km in (4, 8, 16):
        res = resolvent_schatten(g, g, CFG, zp, k_max=km)
        if prev is not None:
            assert res.norm >= prev.norm
            assert res.norm <= prev.norm + prev.tail_bound
        prev = res
    auto = resolvent_schatten(g, g, CFG, zp)
    assert auto.tail_bound <= 1e-6 * auto.norm


@pytest.mark.slow
def test_low_high_split_schatten_linearity():
    w = standard_profiles("indicator", {"panels": 2, "nodes_per_panel": 4})
    zp, c = SpectralPoint(2 + 0.5j), CutoffSpec()
    o = SectorOrder(3, 0)
    lo = sector_sandwich(w, w, o, zp, kernel="low", cutoff=c).matrix
    hi = sector_sandwich(w, w, o, zp, kernel="high", cutoff=c).matrix
    full = sector_sandwich(w, w, o, zp, kernel="full_spectral").matrix
    green = sector_sandwich(w, w, o, zp, corrected=False).matrix
    n = lambda m: schatten_norm(svd_singular_values(m), 4.5)  # noqa: E731
    assert abs(n(lo + hi) - n(full)) < 1e-9 * n(full)
    assert abs(n(full) - n(green)) < 1e-9 * n(green)


def test_uniform_scan_report():
    g = standard_profiles("gaussian", {"panels": 14})
    rep = uniform_bound_scan(g, g, CFG, [1e-2, 1.0, math.pi], k_max=6)
    assert rep["theta_grid"] == [1e-2, 1.0, math.pi]
    assert all(r is not None and r > 0 for r in rep["ratios"])
    assert rep["failures"] == []
    assert "max_over_min" in rep["summary"]
    assert scan_json(rep) == scan_json(uniform_bound_scan(g, g, CFG, [1e-2, 1.0, math.pi], k_max=6))
    lines = scan_csv(rep).strip().splitlines()
    assert lines[0].startswith("theta,ratio") and len(lines) == 4
    with pytest.raises(InvalidArgument):
        uniform_bound_scan(g, g, CFG, [0.0])


def test_uniform_scan_records_failures(monkeypatch):
    import radspec.resolvent as res
    from radspec.errors import AccuracyFailure

    real = res.resolvent_schatten

    def flaky(w1, w2, cfg, zp, k_max=None, **kw):
        if abs(zp.z.imag) < 0.5:
            raise AccuracyFailure("synthetic")
        return real(w1, w2, cfg, zp, k_max, **kw)

    monkeypatch.setattr(res, "resolvent_schatten", flaky)
    g = standard_profiles("gaussian", {"panels": 14})
    rep = uniform_bound_scan(g, g, CFG, [1e-3, 1.0], k_max=4)
    assert rep["ratios"][0] is None and rep["failures"][0]["error"] == "AccuracyFailure"
    assert rep["ratios"][1] is not None


@pytest.mark.parametrize("d", [2, 3, 4])
def test_separation_decay(d):
    rep = separation_scan(d, [9, 18, 36, 72])
    assert abs(rep["slope"] + (d - 1) / 2) < 0.1

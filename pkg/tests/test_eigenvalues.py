"""Birman-Schwinger eigenvalue search, its oracles and the eigenvalue-sum functionals."""
from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from radspec.bessel import SectorOrder
from radspec.errors import InvalidArgument, UnresolvedRegion
from radspec.radial import ExponentConfig, lq_norm, standard_profiles
from radspec.resolvent import SpectralPoint
from radspec.eigenvalues import (BSConfig, Eigenvalue, EigenvalueSet, FrankBoundParams,
                                 SearchBox, StepPotential, bs_matrix, find_eigenvalues,
                                 frank_functional, jost_function, ode_bound_states,
                                 scan_json, sharpness_scan, shooting_eigenvalue,
                                 square_well_ground_states, theorem1_lhs)


def well(g, panels=4, radius=1.0, d=3):
    return standard_profiles("square_well", {"depth": g, "panels": panels,
                                             "radius": radius, "d": d})


def cwell(g, alpha, panels=4, radius=1.0):
    return standard_profiles("complex_well", {"g": g, "alpha": alpha, "panels": panels,
                                              "radius": radius})


def local_cfg(z, half=0.05, k_max=0):
    """A single small box around ``z`` (sector search limited to ``k_max``)."""
    box = SearchBox(z.real - half, z.real + half, z.imag - half, z.imag + half)
    return BSConfig(3, k_max, (box,))


# -- configuration types -------------------------------------------------------

def test_box_touching_half_line_rejected():
    with pytest.raises(InvalidArgument):
        BSConfig(3, 4, (SearchBox(-1.0, 1.0, -1.0, 1.0),))
    with pytest.raises(InvalidArgument):
        BSConfig(3, 4, (SearchBox(0.0, 1.0, 1e-8, 1.0),))
    BSConfig(3, 4, (SearchBox(0.0, 1.0, 1e-6, 1.0),))


def test_margin_below_minimum_rejected():
    with pytest.raises(InvalidArgument):
        BSConfig(3, 4, (SearchBox(-2, -1, -1, 1),), margin=1e-8)


def test_default_boxes_cover_numerical_range():
    v = cwell(3.0, 2.0)
    cfg = BSConfig.for_profile(v)
    val = complex(v.values[0])
    assert any(b.contains(val) for b in cfg.search_box)
    assert all(b.distance_to_half_line() >= cfg.margin * (1 - 1e-12) for b in cfg.search_box)


def test_eigenvalue_set_rejects_half_line_and_sorts():
    with pytest.raises(InvalidArgument):
        EigenvalueSet.from_values([1.0])
    s = EigenvalueSet(3, (Eigenvalue(-1 + 1j, 1, 0.0), Eigenvalue(-2 + 0j, 0, 0.0),
                          Eigenvalue(-3 + 0j, 0, 0.0)))
    assert [(e.k, e.z.real) for e in s.entries] == [(0, -3.0), (0, -2.0), (1, -1.0)]
    lines = s.to_csv().strip().splitlines()
    assert lines[0] == "k,re_z,im_z,residual,winding"
    assert len(lines) == 4


def test_multiplicity_counts_harmonic_dimension():
    e = Eigenvalue(-1 + 0j, 2, 0.0, 1)
    assert e.multiplicity(3) == 5


# -- Birman-Schwinger matrix ---------------------------------------------------

def test_bs_matrix_zero_profile():
    v = well(1.0).scaled(0.0)
    m = bs_matrix(v, SectorOrder(3, 0), SpectralPoint(-1.0)).matrix
    assert not np.any(m)


def test_bs_matrix_real_well_has_real_spectrum():
    v = well(5.0)
    m = bs_matrix(v, SectorOrder(3, 0), SpectralPoint(-1.0)).matrix
    ev = np.linalg.eigvals(m)
    assert np.max(np.abs(ev.imag)) <= 1e-8 * np.max(np.abs(ev))
    assert np.all(ev.real <= 1e-12)


def test_bs_smallest_eigenvalue_refinement_stable():
    zp = SpectralPoint(-0.5 + 0.7j)
    vals = []
    for panels in (4, 8):
        v = cwell(4.0, 2.5, panels=panels)
        m = np.eye(v.rule.size) + bs_matrix(v, SectorOrder(3, 1), zp).matrix
        ev = np.linalg.eigvals(m)
        vals.append(ev[np.argmin(np.abs(ev))])
    assert abs(vals[0] - vals[1]) < 1e-7


# -- oracles -------------------------------------------------------------------

def test_transcendental_roots_satisfy_equation():
    for g in (3.0, 30.0):
        for z in square_well_ground_states(g):
            s = math.sqrt(-z.real)
            q = math.sqrt(g - s * s)
            assert abs(q / math.tan(q) + s) < 1e-9


def test_transcendental_root_count():
    # thresholds (pi/2)^2 and (3 pi/2)^2
    assert len(square_well_ground_states(2.0)) == 0
    assert len(square_well_ground_states(3.0)) == 1
    assert len(square_well_ground_states(30.0)) == 2


def test_ode_oracle_matches_transcendental():
    pot = StepPotential.well(-12.0)
    ode = [z for k, z in ode_bound_states(pot, 3) if k == 0]
    ref = square_well_ground_states(12.0)
    assert len(ode) == len(ref)
    for a, b in zip(ode, ref):
        assert abs(a - b) < 1e-8


def test_jost_function_vanishes_at_root():
    z = square_well_ground_states(6.0)[0]
    pot = StepPotential.well(-6.0)
    assert abs(jost_function(pot, 3, 0, z)) < 1e-8
    assert abs(jost_function(pot, 3, 0, z - 0.1)) > 1e-3


def test_step_potential_validation():
    with pytest.raises(InvalidArgument):
        StepPotential((0.0, 1.0), (1.0, 2.0))
    with pytest.raises(InvalidArgument):
        StepPotential((0.5, 1.0), (1.0,))


# -- eigenvalue search ---------------------------------------------------------

def test_zero_potential_has_no_eigenvalues():
    v = well(1.0).scaled(0.0)
    assert len(find_eigenvalues(v, BSConfig.for_profile(well(1.0)))) == 0


def test_square_well_matches_transcendental_oracle():
    g = 6.0
    es = find_eigenvalues(well(g))
    ref = square_well_ground_states(g)
    got = es.in_sector(0)
    assert len(got) == len(ref) == 1
    assert abs(got[0] - ref[0]) < 1e-8
    assert len(es) == 1 and not es.unresolved and es.cap_certified
    assert all(e.residual <= 1e-8 for e in es.entries)


def test_square_well_set_equals_ode_oracle():
    g = 12.0
    es = find_eigenvalues(well(g))
    ode = ode_bound_states(StepPotential.well(-g), 3)
    got = [(e.k, e.z) for e in es.entries]
    assert len(got) == len(ode)
    for (k1, z1), (k2, z2) in zip(got, ode):
        assert k1 == k2 and abs(z1 - z2) < 1e-6


def test_complex_well_matches_shooting_oracle():
    g, alpha = 4.0, 2.5
    es = find_eigenvalues(cwell(g, alpha))
    assert len(es) >= 1 and not es.unresolved
    pot = StepPotential.well(g * cmath.exp(1j * alpha))
    for e in es.entries:
        z = shooting_eigenvalue(pot, 3, e.k, e.z * (1 + 1e-3))
        assert abs(z - e.z) < 1e-5


def test_conjugation_symmetry():
    v = cwell(4.0, 2.5)
    a = find_eigenvalues(v)
    b = find_eigenvalues(v.conj())
    assert len(a) == len(b) >= 1
    for x, y in zip(sorted(a.values, key=lambda z: (z.real, z.imag)),
                    sorted(np.conj(b.values), key=lambda z: (z.real, z.imag))):
        assert abs(x - y) < 1e-8


def test_perturbation_continuity():
    alpha = 2.5
    z0 = find_eigenvalues(cwell(4.0, alpha)).in_sector(0)[0]
    dg = 0.01
    prev = z0
    for step in range(1, 4):
        g = 4.0 + step * dg
        es = find_eigenvalues(cwell(g, alpha), local_cfg(prev, half=0.1))
        assert len(es) == 1
        z = es.values[0]
        assert abs(z - prev) <= 10 * dg
        prev = z


def test_unresolved_region_is_reported():
    # two sector-0 roots in one box and no subdivision allowed
    v = well(30.0)
    box = SearchBox(-30.0, -0.5, -1.0, 1.0)
    cfg = BSConfig(3, 0, (box,), max_depth=0)
    es = find_eigenvalues(v, cfg)
    assert es.unresolved and es.unresolved[0]["winding"] == 2
    with pytest.raises(UnresolvedRegion):
        find_eigenvalues(v, cfg, strict=True)


def test_sector_cap_reported_when_k_max_too_small():
    es = find_eigenvalues(well(12.0), BSConfig.for_profile(well(12.0), k_max=0))
    assert not es.cap_certified and es.k_searched == 0


def test_dilated_well_eigenvalues_scale():
    # v -> lam^2 v(lam .) maps z -> lam^2 z
    lam = 2.0
    z1 = find_eigenvalues(well(6.0), local_cfg(square_well_ground_states(6.0)[0])).values
    z2 = find_eigenvalues(well(6.0 * lam ** 2, radius=1 / lam),
                          local_cfg(lam ** 2 * square_well_ground_states(6.0)[0], half=0.2)).values
    assert abs(z2[0] - lam ** 2 * z1[0]) < 1e-8 * abs(z2[0])


# -- functionals ---------------------------------------------------------------

CFG = ExponentConfig(2.5, 11.0, 3)


def test_theorem1_lhs_trivial_cases():
    assert theorem1_lhs(EigenvalueSet(3), CFG) == 0.0
    assert theorem1_lhs(EigenvalueSet.from_values([-1.0]), CFG) == 1.0


def test_theorem1_lhs_conjugation_invariant():
    s = EigenvalueSet.from_values([0.3 + 0.2j, -1 + 0.5j])
    assert theorem1_lhs(s, CFG) == pytest.approx(theorem1_lhs(s.conj(), CFG), rel=1e-15)


def test_theorem1_lhs_homogeneity():
    s = EigenvalueSet.from_values([0.3 + 0.2j, -1 + 0.5j, 2 - 0.1j])
    for lam in (0.5, 2.0, 3.0):
        ratio = theorem1_lhs(s.scaled(lam ** 2), CFG) / theorem1_lhs(s, CFG)
        expect = lam ** (2 * CFG.p * (1 - CFG.d / (2 * CFG.q)) * CFG.q / CFG.p)
        assert ratio == pytest.approx(expect, rel=1e-12)


def test_theorem1_lhs_counts_harmonic_multiplicity():
    one = EigenvalueSet(3, (Eigenvalue(-1 + 0j, 1, 0.0),))
    assert theorem1_lhs(one, CFG) == pytest.approx(3.0 ** (CFG.q / CFG.p))


def test_theorem1_lhs_beta_one_is_default():
    s = EigenvalueSet.from_values([0.3 + 0.2j, -1 + 0.5j])
    assert theorem1_lhs(s, CFG, beta=1.0) == theorem1_lhs(s, CFG)
    with pytest.raises(InvalidArgument):
        theorem1_lhs(s, CFG, beta=0.0)


def test_frank_functional_single_point():
    fp = FrankBoundParams(3.0, 0.4, 0.2, 2.0)
    lhs, rhs = frank_functional(EigenvalueSet.from_values([-1.0]), fp)
    assert lhs == 1.0
    assert rhs == pytest.approx(2.0 ** ((1 + (2 * 3 * 0.4 - 1 + 0.2)) / 0.8))


def test_frank_exponent_wiring():
    fp = FrankBoundParams.from_exponents(CFG, M=1.0, eps=1e-3)
    assert fp.sigma == pytest.approx(1 - 3 / 5)
    assert 2 * fp.p * fp.sigma - 1 > 0
    assert fp.lhs_exponent - fp.eps / 2 == pytest.approx(CFG.p * (1 - CFG.d / (2 * CFG.q)) - 1,
                                                         rel=1e-14)


def test_frank_exponent_positive_part():
    fp = FrankBoundParams(1.0, 0.1, 0.1, 1.0)
    assert fp.lhs_exponent == -0.5
    s = EigenvalueSet.from_values([-4.0])
    assert frank_functional(s, fp)[0] == pytest.approx(4.0 * 4.0 ** -0.5)


def test_frank_params_validation():
    with pytest.raises(InvalidArgument):
        FrankBoundParams(0.5, 0.1, 0.1, 1.0)
    with pytest.raises(InvalidArgument):
        FrankBoundParams(2.0, 0.1, 0.0, 1.0)


# -- family scans --------------------------------------------------------------

def test_sharpness_single_member_equals_direct_evaluation():
    v = well(6.0)
    rep = sharpness_scan(lambda g: well(g), CFG, beta=1.0, grid=[(6.0,)])
    direct = theorem1_lhs(find_eigenvalues(v), CFG) / lq_norm(v, CFG.q) ** CFG.q
    assert rep["rows"][0]["ratio"] == pytest.approx(direct, rel=1e-12)
    assert rep["summary"]["max_over_min"] == pytest.approx(1.0)
    assert scan_json(rep) == scan_json(sharpness_scan(lambda g: well(g), CFG, grid=[(6.0,)]))


def test_sharpness_flags_failing_members():
    def family(g):
        if g > 5:
            raise InvalidArgument("outside family")
        return well(g)
    rep = sharpness_scan(family, CFG, grid=[(3.0,), (6.0,)])
    assert rep["rows"][0]["ok"] and not rep["rows"][1]["ok"]
    assert rep["summary"]["flagged_rows"] == 1


@pytest.mark.slow
def test_sharpness_ascent_does_not_lower_maximum():
    rep = sharpness_scan(lambda g: well(g), CFG, beta=0.5, grid=[(3.0,), (6.0,)],
                         bounds=[(2.6, 8.0)], budget=4)
    assert rep["ascent"]["evaluations"] <= 5
    assert rep["summary"]["max_ratio_with_ascent"] >= rep["summary"]["max_ratio"]
    assert math.isfinite(rep["summary"]["trend_slope"])

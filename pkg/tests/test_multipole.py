import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trenchfield.bem import solve_basis
from trenchfield.errors import FitCircleIntersectsElectrode, ZeroQuadrupole
from trenchfield.geometry import TrapFamily
from trenchfield.multipole import derived_ratios, fit_multipoles, radius_sensitivity
from trenchfield.pseudopotential import DriveConfig, IonProperties, find_minimum
from trenchfield.reference import TABLE

from conftest import solved

R0 = 75.0
UNIT = DriveConfig(40.0, 1.0)
ION = IonProperties()


def synthetic(terms, offset=0.0, v0=1.0, centre=(0.0, 0.0)):
    """Potential sum_n v0 C_n (r / R0)^n cos(n theta + phi_n) about ``centre``."""

    def fn(pts):
        p = np.asarray(pts, dtype=float) - centre
        r, th = np.hypot(p[:, 0], p[:, 1]), np.arctan2(p[:, 1], p[:, 0])
        v = np.full(len(p), offset)
        for n, (c, phi) in terms.items():
            v += v0 * c * (r / R0) ** n * np.cos(n * th + phi)
        return v

    return fn


def test_pure_quadrupole():
    fit = fit_multipoles(synthetic({2: (1.0, 0.0)}), (0, 0), R0)
    assert fit[2] == pytest.approx(1.0, rel=1e-12)
    assert all(fit[n] < 1e-12 for n in (1, 3, 4, 5, 6))
    assert fit.residual < 1e-12 and fit.flags == ()


def test_hexapole_ratio():
    fit = fit_multipoles(synthetic({2: (0.5, 0.3), 3: (0.1, 1.1)}), (0, 0), R0)
    c2, c3p, c4p = derived_ratios(fit)
    assert (c2, c3p) == pytest.approx((0.5, 0.2), rel=1e-10)
    assert abs(c4p) < 1e-10


def test_derived_ratio_arithmetic():
    fit = fit_multipoles(synthetic({2: (0.25, 0.0), 3: (0.05, 0.0), 4: (0.1, 0.0)}), (0, 0), R0)
    assert derived_ratios(fit) == pytest.approx((0.25, 0.2, 0.4), rel=1e-10)


def test_zero_quadrupole():
    with pytest.raises(ZeroQuadrupole):
        derived_ratios(fit_multipoles(synthetic({3: (1.0, 0.0)}), (0, 0), R0))


def test_gauge_and_amplitude_normalisation():
    terms = {2: (0.3, 0.2), 3: (0.05, 2.0), 4: (0.02, 4.0)}
    a = fit_multipoles(synthetic(terms), (0, 0), R0)
    b = fit_multipoles(synthetic(terms, offset=12.0, v0=250.0), (0, 0), R0, v0=250.0)
    assert b.v_off == pytest.approx(12.0, rel=1e-10)
    for n in range(1, 7):
        assert b[n] == pytest.approx(a[n], rel=1e-9, abs=1e-12)


def test_reconstruction():
    terms = {1: (1e-4, 0.4), 2: (0.3, 0.2), 5: (0.01, 5.0)}
    fn = synthetic(terms)
    fit = fit_multipoles(fn, (0, 0), R0)
    th = np.linspace(0, 2 * np.pi, 7)
    pts = 10.0 * np.column_stack([np.cos(th), np.sin(th)])
    np.testing.assert_allclose(fit.evaluate(10.0, th), fn(pts), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(-math.pi, math.pi), phi2=st.floats(0, 2 * math.pi), phi3=st.floats(0, 2 * math.pi))
def test_rotation_covariance(delta, phi2, phi3):
    terms = {2: (0.4, phi2), 3: (0.1, phi3)}
    base = synthetic(terms)
    c, s = math.cos(delta), math.sin(delta)
    rot = np.array([[c, -s], [s, c]])

    def rotated(pts):
        return base(np.asarray(pts) @ rot)  # V'(p) = V(R^-1 p)

    a = fit_multipoles(base, (0, 0), R0)
    b = fit_multipoles(rotated, (0, 0), R0)
    for n in (2, 3):
        assert b[n] == pytest.approx(a[n], rel=1e-9)
        shift = (a.phases[n] - n * delta - b.phases[n]) % (2 * math.pi)
        assert min(shift, 2 * math.pi - shift) < 1e-8


def test_dipole_flag():
    fit = fit_multipoles(synthetic({1: (0.01, 0.0), 2: (1.0, 0.0)}), (0, 0), R0)
    assert "dipole" in fit.flags


def test_fit_circle_hits_electrode(set_sym_fields):
    z = find_minimum(set_sym_fields, UNIT, ION)
    with pytest.raises(FitCircleIntersectsElectrode):
        fit_multipoles(set_sym_fields, z, 5 * z[1])


def test_centred_on_null(set_sym_fields):
    z = find_minimum(set_sym_fields, UNIT, ION)
    fit = fit_multipoles(set_sym_fields, z, z[1])
    assert fit[1] < 1e-3 * fit[2]
    assert "dipole" not in fit.flags and fit.residual < 1e-4


def test_radius_robust(set_sym_fields):
    z = find_minimum(set_sym_fields, UNIT, ION)
    dc2, dratios, robust = radius_sensitivity(set_sym_fields, z, z[1])
    assert robust and dc2 < 5e-3 and dratios < 2e-2


@pytest.mark.parametrize("family", ["set_antisymmetric", "simple_trench_antisymmetric"])
def test_scale_invariance(family):
    base = solved(family)
    s = 2.5
    fa = base.rf_field()
    fb = solve_basis(base.mesh.scaled(s), cache_dir=False).rf_field()
    za = find_minimum(fa, UNIT, ION)
    zb = find_minimum(fb, UNIT, ION, seed_region=tuple(s * np.array(fa.cross_section.seed_region)))
    assert zb == pytest.approx(s * za, rel=1e-4, abs=1e-6)
    a = fit_multipoles(fa, za, za[1])
    b = fit_multipoles(fb, zb, zb[1])
    for n in (2, 3, 4):
        assert b[n] == pytest.approx(a[n], rel=1e-3, abs=1e-6)


@pytest.mark.parametrize("family", ["wafer_symmetric", "wafer_antisymmetric"])
def test_wafer_hexapole_vanishes(family):
    fields = solved(family).rf_field()
    z = find_minimum(fields, UNIT, ION)
    _, c3p, _ = derived_ratios(fit_multipoles(fields, z, fields.distance_to_electrodes(z)))
    assert abs(c3p) <= 0.005


def test_stacked_antisymmetric_octupole():
    fields = solved("stacked_trench_antisymmetric").rf_field()
    z = find_minimum(fields, UNIT, ION)
    _, c3p, c4p = derived_ratios(fit_multipoles(fields, z, fields.distance_to_electrodes(z)))
    ref = TABLE[TrapFamily.STACKED_TRENCH_ANTISYMMETRIC].values
    assert c4p == pytest.approx(ref["C4_prime"], rel=0.15)
    assert abs(c3p - ref["C3_prime"]) <= 0.05


def test_bad_arguments():
    with pytest.raises(ValueError):
        fit_multipoles(synthetic({2: (1, 0)}), (0, 0), 0.0)
    with pytest.raises(ValueError):
        fit_multipoles(synthetic({2: (1, 0)}), (0, 0), R0, n_max=1)

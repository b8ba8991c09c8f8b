import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trenchfield.errors import IonInsideConductor
from trenchfield.geometry import CrossSection, ElectrodeSegment, Role, build_cross_section
from trenchfield.optics import UNOBSTRUCTED, numerical_aperture
from trenchfield.reference import TABLE


def walls(half_width, height, overhang=0.0, right=None, substrate=True):
    """Two vertical walls on a substrate, optionally with inward overhangs."""
    rw, rh, ro = right or (half_width, height, overhang)

    def one(x, h, o, side, name):
        pts = [(side * x, 0.0), (side * x, h)]
        if o:
            pts.append((side * (x - o), h))
        return ElectrodeSegment(pts, Role.DC, name)

    return CrossSection((one(half_width, height, overhang, -1, "left"), one(rw, rh, ro, 1, "right")),
                        substrate=substrate)


def _hits(origin, direction, p, q):
    d = np.asarray(direction)
    e = np.subtract(q, p)
    den = d[0] * e[1] - d[1] * e[0]
    if abs(den) < 1e-15:
        return False
    w = np.subtract(p, origin)
    t = (w[0] * e[1] - w[1] * e[0]) / den
    u = (w[0] * d[1] - w[1] * d[0]) / den
    return t > 1e-12 and -1e-12 <= u <= 1 + 1e-12


def ray_cast_na(cs, ion, sign=1):
    """Brute-force NA: widest symmetric cone of rays that miss every edge."""
    edges = [(p, q) for s in cs.segments for p, q in zip(s.polyline[:-1], s.polyline[1:])]

    def clear(a):
        for side in (-1, 1):
            d = (side * math.sin(a), sign * math.cos(a))
            if any(_hits(ion, d, p, q) for p, q in edges):
                return False
        return True

    grid = np.linspace(0, math.pi / 2, 4001)
    lo = 0.0
    for a in grid[1:]:
        if not clear(a):
            hi = a
            break
        lo = a
    else:
        return 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if clear(mid) else (lo, mid)
    return math.sin(lo)


def test_set_unobstructed():
    cs = build_cross_section("set_symmetric", TABLE["set_symmetric"].params)
    na, lim = numerical_aperture(cs, (0.0, 75.0))
    assert na == 1.0 and lim == UNOBSTRUCTED


def test_trench_walls_oracle():
    cs = walls(87.5, 600.0)
    na, lim = numerical_aperture(cs, (0.0, 75.0), "above")
    assert na == pytest.approx(math.sin(math.atan(87.5 / 525.0)), abs=1e-12)
    assert na == pytest.approx(0.164399, abs=1e-6)
    assert lim.startswith(("left@", "right@"))
    assert na == pytest.approx(ray_cast_na(cs, (0.0, 75.0)), abs=1e-6)


def test_walls_at_ion_height():
    na, _ = numerical_aperture(walls(87.5, 75.0), (0.0, 75.0))
    assert na == 1.0


def test_aliases_and_bad_direction():
    cs = walls(87.5, 600.0)
    assert numerical_aperture(cs, (0, 75), "up") == numerical_aperture(cs, (0, 75), "above")
    with pytest.raises(ValueError):
        numerical_aperture(cs, (0, 75), "sideways")


@settings(max_examples=40, deadline=None)
@given(h=st.floats(80, 1000), dh=st.floats(1, 500))
def test_monotone_in_wall_height(h, dh):
    a, _ = numerical_aperture(walls(87.5, h), (0, 75))
    b, _ = numerical_aperture(walls(87.5, h + dh), (0, 75))
    assert b <= a


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-60, 60), y=st.floats(5, 400), hl=st.floats(10, 800), hr=st.floats(10, 800))
def test_mirror_pair(x, y, hl, hr):
    cs = walls(87.5, hl, right=(100.0, hr, 0.0))
    mirrored = CrossSection(tuple(s.mirrored() for s in cs.segments), substrate=True)
    assert numerical_aperture(cs, (x, y))[0] == pytest.approx(numerical_aperture(mirrored, (-x, y))[0], abs=1e-12)


def _random_geometry(rng):
    wl, wr = rng.uniform(30, 200, 2)
    hl, hr = rng.uniform(20, 800, 2)
    ol, orr = rng.uniform(0, 0.8, 2) * (wl, wr) * rng.integers(0, 2, 2)
    cs = walls(wl, hl, ol, right=(wr, hr, orr))
    ion = (rng.uniform(-0.15, 0.15) * min(wl, wr), rng.uniform(5, 400))
    return cs, ion


def test_ray_cast_oracle_random():
    rng = np.random.default_rng(20261016)
    for _ in range(100):
        cs, ion = _random_geometry(rng)
        na, _ = numerical_aperture(cs, ion)
        assert na == pytest.approx(ray_cast_na(cs, ion), abs=1e-6)


def test_below_blocked_by_walls_not_substrate():
    cs = walls(87.5, 600.0)
    na, _ = numerical_aperture(cs, (0.0, 75.0), "below")
    assert na == pytest.approx(87.5 / math.hypot(87.5, 75.0), abs=1e-12)
    flat = build_cross_section("set_symmetric", TABLE["set_symmetric"].params)
    assert numerical_aperture(flat, (0.0, 75.0), "below")[0] == 1.0


@pytest.mark.parametrize("family", ["wafer_symmetric", "wafer_antisymmetric"])
def test_wafer_up_down_symmetry(family):
    cs = build_cross_section(family, TABLE[family].params)
    up, _ = numerical_aperture(cs, (0.0, 0.0), "above")
    down, _ = numerical_aperture(cs, (0.0, 0.0), "below")
    assert 0 < up < 1
    assert up == pytest.approx(down, abs=1e-9)


def test_ion_inside_conductor():
    with pytest.raises(IonInsideConductor):
        numerical_aperture(walls(87.5, 600.0), (0.0, -5.0))
    cs = build_cross_section("wafer_symmetric", TABLE["wafer_symmetric"].params)
    with pytest.raises(IonInsideConductor):
        numerical_aperture(cs, (500.0, 0.0))

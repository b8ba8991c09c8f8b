"""Closed-form potential of gapless coplanar strip electrodes.

For a strip ``xl < x < xr`` on the plane ``y = 0`` held at ``V`` with the rest of
the plane grounded, the potential above the plane is

    phi = V / pi * [arg(z - xr) - arg(z - xl)],   z = x + i y,

which is the imaginary part of ``F = V / pi * [log(z - xr) - log(z - xl)]``.
Field and field derivatives follow from ``F'`` and ``F''``.  Strips may run to
infinity on either side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveHeight
from .geometry import TrapFamily, validate_params


@dataclass(frozen=True)
class Strip:
    left: float
    right: float
    voltage: float = 1.0

    def __post_init__(self):
        if not self.left < self.right:
            raise ValueError("strip left edge must be below its right edge")


def _z(points):
    p = np.asarray(points, dtype=float)
    return p[..., 0] + 1j * p[..., 1]


class StripSet:
    """Gapless planar electrode set evaluated in closed form.

    Offers the same evaluator interface as the boundary-element fields:
    ``potential``, ``field``, ``field_jacobian``, ``blocked``, ``window``,
    ``distance_to_electrodes`` and ``seed_region``.
    """

    cross_section = None

    def __init__(self, strips, seed_region=None):
        self.strips = tuple(strips)
        if not self.strips:
            raise ValueError("at least one strip is required")
        finite = [abs(e) for s in self.strips for e in (s.left, s.right) if math.isfinite(e)]
        self.scale = max(finite) if finite else 1.0
        self.seed_region = seed_region or (-2 * self.scale, 2 * self.scale, 1e-3 * self.scale, 3 * self.scale)

    def _terms(self, z, order):
        out = np.zeros(z.shape, dtype=complex)
        for s in self.strips:
            c = s.voltage / math.pi
            for edge, sign in ((s.right, 1.0), (s.left, -1.0)):
                if not math.isfinite(edge):
                    continue
                w = z - edge
                if order == 0:
                    out += sign * c * np.angle(w)
                elif order == 1:
                    out += sign * c / w
                else:
                    out -= sign * c / (w * w)
        return out

    def potential(self, points):
        z = _z(points)
        v = self._terms(z, 0).real
        # a strip running to +infinity contributes V * (1 - arg(z - xl) / pi)
        for s in self.strips:
            if not math.isfinite(s.right):
                v = v + s.voltage
        return v

    def conj_field(self, points):
        """``Ex - i Ey`` = i F'."""
        return 1j * self._terms(_z(points), 1)

    def field(self, points):
        f = self.conj_field(points)
        return np.stack([f.real, -f.imag], axis=-1)

    def field_jacobian(self, points):
        d = 1j * self._terms(_z(points), 2)
        jac = np.empty(d.shape + (2, 2))
        jac[..., 0, 0] = d.real
        jac[..., 0, 1] = -d.imag
        jac[..., 1, 0] = -d.imag
        jac[..., 1, 1] = -d.real
        return jac

    def blocked(self, points):
        return np.asarray(points, dtype=float).reshape(-1, 2)[:, 1] < 0

    def window(self):
        L = self.scale
        return (-4 * L, 4 * L, -L, 6 * L)

    def distance_to_electrodes(self, point):
        return float(np.asarray(point, dtype=float)[1])


def set_strips(family, params, voltage=1.0):
    """RF strips of a gapless SET; DC and the outer plane are grounded."""
    family = TrapFamily(family)
    p = validate_params(family, params)
    if family is TrapFamily.SET_SYMMETRIC:
        A = p["b"] / 2
        B = A + p["a"]
        strips = [Strip(-B, -A, voltage), Strip(A, B, voltage)]
        seed = (-B, B, 1e-3 * A, 2 * B)
    elif family is TrapFamily.SET_ANTISYMMETRIC:
        w = p["phi"]
        strips = [Strip(-w, 0.0, voltage), Strip(w, math.inf, voltage)]
        seed = (-2 * w, 2 * w, 1e-3 * w, 3 * w)
    else:
        raise ValueError(f"{family.value} has no closed-form potential")
    return StripSet(strips, seed)


def symmetric_set_height(a, b):
    """RF-null height of the gapless symmetric SET: sqrt(A B) for strips A..B."""
    A = b / 2
    return math.sqrt(A * (A + a))


def _above_plane(point):
    p = np.asarray(point, dtype=float)
    if np.any(p[..., 1] <= 0):
        raise NonPositiveHeight("closed-form strip potentials are defined only for y > 0")
    return p


def strip_potential(s: StripSet, point):
    """Potential (V) of a strip set at ``point`` (or an ``(N, 2)`` array), y > 0."""
    p = _above_plane(point)
    v = s.potential(np.atleast_2d(p))
    return float(v[0]) if p.ndim == 1 else v


def set_field(s: StripSet, point):
    """Electric field (V/um) of a strip set at ``point`` (or an ``(N, 2)`` array), y > 0."""
    p = _above_plane(point)
    e = s.field(np.atleast_2d(p))
    return e[0] if p.ndim == 1 else e

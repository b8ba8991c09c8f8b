"""Numerical aperture of the optical access cone above and below the ion.

The cone axis is vertical.  Its half-angle is limited by the electrode corner
that comes closest to the axis as seen from the ion; the NA is the sine of
that half-angle (vacuum, n = 1).  Looking down, the substrate surface is the
detector plane, so only metal standing above it can block.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import IonInsideConductor

UNOBSTRUCTED = "unobstructed"
_PLANE_TOL = 1e-9
_DIRECTIONS = {"above": "above", "up": "above", "below": "below", "down": "below"}


def _edges(cs):
    for seg in cs.segments:
        for p, q in seg.edges:
            yield seg.electrode_id, np.asarray(p, float), np.asarray(q, float)


def _crosses_axis(ion, p, q, sign, floor):
    """Does edge p-q cut the vertical ray from the ion (excluding the floor plane)?"""
    x0, y0 = ion
    if (p[0] - x0) * (q[0] - x0) > 0:
        return False
    if p[0] == q[0]:
        ys = [p[1], q[1]]
        if p[0] != x0:
            return False
        lo, hi = min(ys), max(ys)
    else:
        t = (x0 - p[0]) / (q[0] - p[0])
        lo = hi = p[1] + t * (q[1] - p[1])
    if sign > 0:
        return hi > y0
    return lo < y0 and hi > floor + _PLANE_TOL


def numerical_aperture(cs, ion, direction="above"):
    """NA of the vertical cone from the ion towards ``direction``.

    Parameters
    ----------
    cs : CrossSection
    ion : array_like
        Ion position (um).
    direction : {"above", "below"}
        ``"up"`` and ``"down"`` are accepted as aliases.

    Returns
    -------
    na : float
        Sine of the clear half-angle, in ``[0, 1]``.
    limiting : str
        ``"<electrode_id>@(x, y)"`` of the limiting corner, or
        ``"unobstructed"``.
    """
    direction = _DIRECTIONS.get(direction)
    if direction is None:
        raise ValueError("direction must be 'above'/'up' or 'below'/'down'")
    ion = np.asarray(ion, dtype=float)
    if cs.inside_conductor(ion[None, :])[0] or (cs.substrate and ion[1] <= 0):
        raise IonInsideConductor(f"ion at ({ion[0]:.4g}, {ion[1]:.4g}) is inside a conductor")
    sign = 1 if direction == "above" else -1
    floor = 0.0 if (cs.substrate and sign < 0) else -math.inf

    best = math.pi / 2
    limiting = UNOBSTRUCTED
    for eid, p, q in _edges(cs):
        if _crosses_axis(ion, p, q, sign, floor):
            return 0.0, f"{eid}@({ion[0]:.6g}, axis)"
        if sign < 0 and max(p[1], q[1]) <= floor + _PLANE_TOL:
            continue  # metal lying on the detector plane
        for c in (p, q):
            dy = sign * (c[1] - ion[1])
            if dy < 0:
                continue
            angle = math.atan2(abs(c[0] - ion[0]), dy)
            if angle < best:
                best = angle
                limiting = f"{eid}@({c[0]:.6g}, {c[1]:.6g})"
    return math.sin(best), limiting

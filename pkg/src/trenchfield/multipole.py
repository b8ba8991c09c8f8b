"""Cylindrical-harmonic fit of the RF potential around the ion.

The potential near the ion is written

    V(r, theta) = V0 * sum_n C_n (r / r0)^n cos(n theta + phi_n) + V_off

with ``r0`` the ion-electrode separation.  ``C_n >= 0``; the orientation lives
in ``phi_n`` (radians, in ``[0, 2 pi)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FitCircleIntersectsElectrode, IllConditionedFit, ZeroQuadrupole

DEFAULT_N_MAX = 6
DEFAULT_SAMPLES = 64
RADIUS_FRACTION = 0.2
RADII = (0.5, 1.0)
RESIDUAL_THRESHOLD = 1e-4
DIPOLE_THRESHOLD = 1e-3
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class MultipoleFit:
    r0: float
    v0: float
    coefficients: dict  # n -> C_n
    phases: dict  # n -> phi_n
    v_off: float
    residual: float  # RMS, in units of V0
    fit_radius: float
    flags: tuple = field(default=())

    @property
    def n_max(self):
        return max(self.coefficients)

    def __getitem__(self, n):
        return self.coefficients[n]

    def evaluate(self, r, theta):
        """Reconstructed potential at polar offsets from the fit centre."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        v = np.full(np.broadcast(r, theta).shape, self.v_off)
        for n, c in self.coefficients.items():
            v = v + self.v0 * c * (r / self.r0) ** n * np.cos(n * theta + self.phases[n])
        return v


def _sample(potential, points):
    fn = potential.potential if hasattr(potential, "potential") else potential
    return np.asarray(fn(points), dtype=float).reshape(-1)


def fit_multipoles(potential, centre, r0, *, v0=1.0, n_max=DEFAULT_N_MAX,
                   fit_radius=None, n_samples=DEFAULT_SAMPLES, radii=RADII,
                   residual_threshold=RESIDUAL_THRESHOLD):
    """Least-squares multipole fit on concentric sample circles.

    Parameters
    ----------
    potential : callable or evaluator
        Maps an ``(N, 2)`` array of points (um) to potentials (V); objects with
        a ``potential`` method are accepted too.  When the object also offers
        ``distance_to_electrodes`` the sample circle is checked against it.
    centre : array_like
        Fit centre, normally the ion position.
    r0 : float
        Normalisation radius (ion-electrode separation).
    v0 : float
        Normalisation voltage (RF amplitude of the basis solution).
    fit_radius : float, optional
        Outer sample radius; ``0.2 * r0`` by default.  Samples lie on circles
        of ``radii * fit_radius``.
    """
    if not (r0 > 0 and v0 > 0):
        raise ValueError("r0 and v0 must be positive")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    centre = np.asarray(centre, dtype=float)
    R = RADIUS_FRACTION * r0 if fit_radius is None else float(fit_radius)
    dist = getattr(potential, "distance_to_electrodes", None)
    if dist is not None:
        d = dist(centre)
        if d <= R:
            raise FitCircleIntersectsElectrode(
                f"fit radius {R:.4g} um reaches an electrode {d:.4g} um from the centre"
            )

    theta = np.linspace(0.0, 2 * math.pi, n_samples, endpoint=False)
    rows, values = [], []
    for frac in radii:
        r = frac * R
        pts = centre + r * np.column_stack([np.cos(theta), np.sin(theta)])
        values.append(_sample(potential, pts))
        cols = [np.ones_like(theta)]
        for n in range(1, n_max + 1):
            rn = (r / r0) ** n
            cols += [rn * np.cos(n * theta), rn * np.sin(n * theta)]
        rows.append(np.column_stack(cols))
    A = np.vstack(rows)
    b = np.concatenate(values)
    if not np.all(np.isfinite(b)):
        raise FitCircleIntersectsElectrode("non-finite potential on the sample circle")
    cond = np.linalg.cond(A)
    if cond > CONDITION_LIMIT:
        raise IllConditionedFit(f"design matrix condition number {cond:.3g}")
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.sqrt(np.mean((A @ sol - b) ** 2)) / v0)

    coeffs, phases = {}, {}
    for n in range(1, n_max + 1):
        a, s = sol[2 * n - 1], sol[2 * n]
        # a cos + s sin = C cos(n theta + phi) with C cos phi = a, C sin phi = -s
        coeffs[n] = float(math.hypot(a, s) / v0)
        phases[n] = float(math.atan2(-s, a) % (2 * math.pi))

    flags = []
    if coeffs[1] > DIPOLE_THRESHOLD * max(coeffs[2], 1e-300):
        flags.append("dipole")
    if residual > residual_threshold:
        flags.append("residual")
    return MultipoleFit(r0, v0, coeffs, phases, float(sol[0]), residual, R, tuple(flags))


def derived_ratios(fit: MultipoleFit):
    """``(C2, C3', C4')`` with the primes normalised to the quadrupole."""
    c2 = fit.coefficients[2]
    if not c2 > 1e-12:
        raise ZeroQuadrupole(f"quadrupole coefficient {c2:.3g} is zero")
    return c2, fit.coefficients[3] / c2, fit.coefficients[4] / c2


RADIUS_FACTORS = (0.75, 1.25)
RADIUS_TOL_C2 = 5e-3
RADIUS_TOL_RATIOS = 2e-2


def radius_sensitivity(potential, centre, r0, *, v0=1.0, factors=RADIUS_FACTORS, fit_radius=None, **kw):
    """Refit at scaled radii and report the largest relative changes.

    Returns ``(dc2, dratios, robust)``: the largest relative change of C2, of
    C3' and C4' (relative to the larger of the value and 1e-3), and whether
    both stay under 0.5 % and 2 %.  A fit that is not robust is contaminated by
    terms beyond ``n_max``.
    """
    base = RADIUS_FRACTION * r0 if fit_radius is None else float(fit_radius)
    ref = np.array(derived_ratios(fit_multipoles(potential, centre, r0, v0=v0, fit_radius=base, **kw)))
    dc2 = dratios = 0.0
    for f in factors:
        r = np.array(derived_ratios(fit_multipoles(potential, centre, r0, v0=v0, fit_radius=f * base, **kw)))
        dc2 = max(dc2, abs(r[0] - ref[0]) / ref[0])
        dratios = max(dratios, float(np.max(np.abs(r[1:] - ref[1:]) / np.maximum(np.abs(ref[1:]), 1e-3))))
    return dc2, dratios, bool(dc2 < RADIUS_TOL_C2 and dratios < RADIUS_TOL_RATIOS)

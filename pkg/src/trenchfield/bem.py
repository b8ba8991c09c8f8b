"""2D exterior Laplace solver for ideal conductors.

Single-layer potential with piecewise-constant line charge on straight panels,
collocated at panel midpoints.  With a point ``z`` written in the local frame of
a panel running from ``z1`` to ``z2`` (``w = (z - z1) * conj(t)``, ``t`` the unit
tangent, ``L`` the length),

    int_panel ln|z - s| ds = Re[w log w - (w - L) log(w - L)] - L

and the conjugate field of a unit density is the holomorphic function

    Ex - i Ey = conj(t) * log(w / (w - L)) / (2 pi)

so potentials, fields and field gradients are all closed-form, including the
self term.  The potential is ``-1/(2 pi) sum sigma_j int ln|z - s| ds + C``; the
net charge is constrained to zero and ``C`` solved for alongside the charges,
which keeps the problem scale-invariant and leaves the far field bounded.

Coordinates are micrometres, potentials volts, fields V/um.  Charges are in
"volt" units (the 1/eps0 factor is absorbed).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .errors import MeshTooLarge, PointInsideConductor, PointTooCloseToBoundary, SingularMatrix
from .geometry import CrossSection, PanelMesh, Role

log = logging.getLogger(__name__)

CACHE_ENV = "TRENCHFIELD_CACHE_DIR"
CACHE_FORMAT = 1
DEFAULT_MAX_PANELS = 6000
_CHUNK = 1 << 21  # complex entries per evaluation block

TWO_PI = 2.0 * np.pi


def _as_complex(points):
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError("points must have shape (..., 2)")
    return (pts[..., 0] + 1j * pts[..., 1]).ravel(), pts.shape[:-1]


def _panel_frame(start, end):
    z1 = start[:, 0] + 1j * start[:, 1]
    z2 = end[:, 0] + 1j * end[:, 1]
    L = np.abs(z2 - z1)
    return z1, np.conj((z2 - z1) / L), L


def _split(z):
    return np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag)


def log_integrals(z, z1, tc, L):
    """Matrix of int ln|z_i - s| ds over each panel j, shape (len(z), len(z1))."""
    return _kernels.log_matrix(*_split(z), *_split(z1), *_split(tc), L)


def _chunks(n, width):
    size = max(1, _CHUNK // max(width, 1))
    for i in range(0, n, size):
        yield slice(i, min(n, i + size))


def _cache_dir(cache_dir):
    if cache_dir is False:
        return None
    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_ENV)
    return Path(cache_dir) if cache_dir else None


@dataclass(frozen=True)
class BemSolution:
    """Unit-voltage basis solutions, one column per electrode."""

    mesh: PanelMesh
    charges: np.ndarray  # (N, n_electrodes)
    constants: np.ndarray  # (n_electrodes,)
    conditioning: float
    _lu: tuple = field(default=None, repr=False, compare=False)

    @property
    def electrode_ids(self):
        return self.mesh.electrode_ids

    def _weights(self, voltages):
        ids = self.electrode_ids
        if isinstance(voltages, dict):
            unknown = set(voltages) - set(ids)
            if unknown:
                raise KeyError(f"unknown electrode(s) {sorted(unknown)}")
            v = np.array([float(voltages.get(e, 0.0)) for e in ids])
        else:
            v = np.asarray(voltages, dtype=float)
            if v.shape != (len(ids),):
                raise ValueError(f"expected {len(ids)} voltages")
        return self.charges @ v, float(self.constants @ v)

    def rf_voltages(self, amplitude=1.0):
        return {e: amplitude for e, r in self.mesh.roles.items() if r is Role.RF}

    def _frame(self):
        return _panel_frame(self.mesh.start, self.mesh.end)

    def potential(self, points, voltages):
        """Potential (V) at an array of points for the given electrode voltages."""
        z, shape = _as_complex(points)
        sigma, const = self._weights(voltages)
        z1, tc, L = self._frame()
        out = _kernels.potential_sum(*_split(z), *_split(z1), *_split(tc), L, sigma) + const
        return out.reshape(shape)

    def basis_potential(self, points):
        """Potential of every unit-voltage basis, shape (..., n_electrodes)."""
        z, shape = _as_complex(points)
        z1, tc, L = self._frame()
        out = np.empty((len(z), len(self.electrode_ids)))
        for sl in _chunks(len(z), len(z1)):
            out[sl] = -(log_integrals(z[sl], z1, tc, L) @ self.charges) / TWO_PI + self.constants
        return out.reshape(shape + (len(self.electrode_ids),))

    def conj_field(self, points, voltages):
        z, shape = _as_complex(points)
        sigma, _ = self._weights(voltages)
        z1, tc, L = self._frame()
        fr, fi = _kernels.conj_field_sum(*_split(z), *_split(z1), *_split(tc), L, sigma)
        return (fr + 1j * fi).reshape(shape)

    def field(self, points, voltages):
        """Electric field (V/um) at an array of points, shape (..., 2)."""
        f = self.conj_field(points, voltages)
        return np.stack([f.real, -f.imag], axis=-1)

    def field_jacobian(self, points, voltages):
        """d E_i / d x_j, shape (..., 2, 2)."""
        z, shape = _as_complex(points)
        sigma, _ = self._weights(voltages)
        z1, tc, L = self._frame()
        fr, fi = _kernels.conj_field_derivative_sum(*_split(z), *_split(z1), *_split(tc), L, sigma)
        d = fr + 1j * fi
        jac = np.empty((len(z), 2, 2))
        jac[:, 0, 0] = d.real
        jac[:, 0, 1] = -d.imag
        jac[:, 1, 0] = -d.imag
        jac[:, 1, 1] = -d.real
        return jac.reshape(shape + (2, 2))

    def boundary_residual(self):
        """Largest deviation of each basis from its boundary values at panel midpoints."""
        phi = self.basis_potential(self.mesh.midpoints)
        target = np.zeros_like(phi)
        target[np.arange(len(phi)), self.mesh.electrode_index] = 1.0
        return float(np.max(np.abs(phi - target)))

    def solve_for(self, potentials):
        """Charges and constant for arbitrary per-panel boundary potentials."""
        if self._lu is None:
            raise RuntimeError("factorisation not retained")
        rhs = np.append(np.asarray(potentials, dtype=float), 0.0)
        x = _refined_solve(assemble(self.mesh), self._lu, rhs)
        return x[:-1], x[-1]

    def rf_field(self, amplitude=1.0):
        return FieldEvaluator(self, self.rf_voltages(amplitude))


def assemble(mesh: PanelMesh):
    """Collocation matrix with the zero-net-charge row and free-constant column."""
    z1, tc, L = _panel_frame(mesh.start, mesh.end)
    mid = 0.5 * (z1 + (mesh.end[:, 0] + 1j * mesh.end[:, 1]))
    n = len(L)
    M = np.empty((n + 1, n + 1))
    for sl in _chunks(n, n):
        M[sl, :n] = -log_integrals(mid[sl], z1, tc, L) / TWO_PI
    M[:n, n] = 1.0
    M[n, :n] = L
    M[n, n] = 0.0
    return M


def solve_basis(mesh: PanelMesh, *, max_panels=DEFAULT_MAX_PANELS, cache_dir=None) -> BemSolution:
    """Solve for a unit-voltage basis on every electrode from one LU factorisation.

    ``cache_dir`` (or the ``TRENCHFIELD_CACHE_DIR`` environment variable) names a
    directory of ``<mesh sha256>.npz`` files holding the LU factors and basis;
    pass ``cache_dir=False`` to disable.  Stale or unreadable entries are
    recomputed silently.
    """
    n = mesh.n_panels
    if n == 0:
        raise ValueError("empty mesh")
    if n > max_panels:
        raise MeshTooLarge(f"{n} panels exceeds the cap of {max_panels}")
    if np.any(mesh.lengths <= 0):
        raise ValueError("mesh has zero-length panels")
    mids = np.round(mesh.midpoints, 12)
    if len(np.unique(mids, axis=0)) != n:
        raise ValueError("mesh has coincident panels")

    directory = _cache_dir(cache_dir)
    key = mesh.content_hash()
    if directory is not None:
        cached = _load_cached(directory / f"{key}.npz", n, len(mesh.electrode_ids))
        if cached is not None:
            lu, piv, charges, constants, cond = cached
            return BemSolution(mesh, charges, constants, cond, (lu, piv))

    M = assemble(mesh)
    anorm = np.linalg.norm(M, 1)
    lu, piv = sla.lu_factor(M, check_finite=False)
    rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularMatrix(f"collocation matrix is singular (condition ~ {cond:.3g})", cond)

    rhs = np.zeros((n + 1, len(mesh.electrode_ids)))
    rhs[np.arange(n), mesh.electrode_index] = 1.0
    x = _refined_solve(M, (lu, piv), rhs)
    charges, constants = x[:n], x[n]
    log.debug("solved %d panels, cond %.3g", n, cond)

    if directory is not None:
        _store_cached(directory / f"{key}.npz", lu, piv, charges, constants, cond)
    return BemSolution(mesh, charges, constants, float(cond), (lu, piv))


def _refined_solve(M, lu, rhs, steps=2):
    # partial-pivoting LU loses ~1e-6 on these near-rank-one log matrices; refinement recovers it
    x = sla.lu_solve(lu, rhs)
    for _ in range(steps):
        x = x + sla.lu_solve(lu, rhs - M @ x)
    return x


def _load_cached(path, n, n_electrodes):
    try:
        with np.load(path) as data:
            if int(data["format"]) != CACHE_FORMAT:
                return None
            charges = data["charges"]
            if charges.shape != (n, n_electrodes):
                return None
            return data["lu"], data["piv"], charges, data["constants"], float(data["conditioning"])
    except (OSError, KeyError, ValueError):
        return None


def _store_cached(path, lu, piv, charges, constants, cond):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, format=CACHE_FORMAT, lu=lu, piv=piv, charges=charges,
                 constants=constants, conditioning=cond)
        os.replace(tmp, path)
    except OSError as exc:  # cache is best effort
        log.warning("could not write cache %s: %s", path, exc)


def check_points(mesh: PanelMesh, points):
    """Raise unless every point is in vacuum and >= half a panel length from every panel."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cs = mesh.cross_section
    if cs is not None and np.any(cs.inside_conductor(pts)):
        raise PointInsideConductor(f"point(s) inside a conductor: {pts[cs.inside_conductor(pts)][:3]}")
    d = mesh.end - mesh.start
    dd = np.einsum("ij,ij->i", d, d)
    half = 0.5 * np.sqrt(dd)
    for p in pts:
        t = np.clip(np.einsum("ij,ij->i", p - mesh.start, d) / dd, 0.0, 1.0)
        c = mesh.start + t[:, None] * d
        dist = np.hypot(*(p - c).T)
        if np.any(dist < half):
            raise PointTooCloseToBoundary(
                f"point {tuple(p)} is {dist.min():.3g} um from a panel"
            )


def potential_at(sol: BemSolution, point, voltages):
    """Potential (V) at one point, with the boundary-proximity checks."""
    check_points(sol.mesh, point)
    return float(sol.potential(np.atleast_2d(point), voltages)[0])


def field_at(sol: BemSolution, point, voltages):
    """Electric field (V/um) at one point, with the boundary-proximity checks."""
    check_points(sol.mesh, point)
    return sol.field(np.atleast_2d(point), voltages)[0]


class FieldEvaluator:
    """A fixed voltage pattern on a solved cross-section.

    This is the interface the analysis modules consume: ``potential``,
    ``field`` and ``field_jacobian`` over point arrays, ``blocked`` for points
    inside conductors, and ``window`` for the search region.
    """

    def __init__(self, solution: BemSolution, voltages):
        self.solution = solution
        self.voltages = dict(voltages)
        self.cross_section: CrossSection | None = solution.mesh.cross_section

    def potential(self, points):
        return self.solution.potential(points, self.voltages)

    def field(self, points):
        return self.solution.field(points, self.voltages)

    def field_jacobian(self, points):
        return self.solution.field_jacobian(points, self.voltages)

    def blocked(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.cross_section is None:
            return np.zeros(len(pts), dtype=bool)
        return self.cross_section.inside_conductor(pts)

    def window(self):
        """Electrode bounding box inflated two-fold about its centre."""
        mesh = self.solution.mesh
        pts = np.concatenate([mesh.start, mesh.end])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        centre = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        half = np.maximum(half, half.max() * 0.5)
        return (centre[0] - 2 * half[0], centre[0] + 2 * half[0],
                centre[1] - 2 * half[1], centre[1] + 2 * half[1])

    def distance_to_electrodes(self, point):
        mesh = self.solution.mesh
        p = np.asarray(point, dtype=float)
        d = mesh.end - mesh.start
        t = np.clip(np.einsum("ij,ij->i", p - mesh.start, d) / np.einsum("ij,ij->i", d, d), 0, 1)
        return float(np.min(np.hypot(*(p - mesh.start - t[:, None] * d).T)))

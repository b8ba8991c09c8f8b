"""Ponderomotive pseudopotential: ion position, escape saddle, depth and
secular frequencies.

``fields`` arguments are evaluators for the RF electrodes at 1 V amplitude (DC
electrodes grounded).  They must provide ``field(points) -> (..., 2)`` in V/um;
``field_jacobian``, ``blocked``, ``window`` and ``cross_section`` are used when
present.  Positions are in micrometres, energies in eV, frequencies in MHz.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import (
    MultipleMinimaInRegion,
    NoMinimumFound,
    NonPositiveCurvature,
    NoSaddleFound,
)

AMU = constants.physical_constants["atomic mass constant"][0]
E_CHARGE = constants.e
UM = 1e-6

Q_WARN = 0.3
DEGENERACY_TOL = 1e-6  # relative splitting below which the axes are undefined


@dataclass(frozen=True)
class IonProperties:
    mass: float = 40.0  # amu
    charge: int = 1  # elementary charges

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("ion mass must be positive")
        if int(self.charge) != self.charge or self.charge < 1:
            raise ValueError("ion charge must be a positive integer")

    @property
    def mass_kg(self):
        return self.mass * AMU


@dataclass(frozen=True)
class DriveConfig:
    rf_frequency: float = 40.0  # MHz, Omega / 2 pi
    rf_voltage: float = 1.0  # V amplitude on the RF electrodes

    def __post_init__(self):
        if not (self.rf_frequency > 0 and self.rf_voltage > 0):
            raise ValueError("rf_frequency and rf_voltage must be positive")

    @property
    def omega(self):
        return 2 * math.pi * self.rf_frequency * 1e6


@dataclass(frozen=True)
class TrapEquilibrium:
    ion_position: tuple
    secular_frequencies: tuple  # ((MHz, axis angle rad), ...) ascending
    escape_point: tuple | None
    depth: float  # eV
    separation: float  # um


def psi_scale(drive: DriveConfig, ion: IonProperties):
    """eV per (V/um)^2 of RF field amplitude at the drive voltage."""
    q = ion.charge * E_CHARGE
    return q * q * (drive.rf_voltage / UM) ** 2 / (4 * ion.mass_kg * drive.omega**2) / E_CHARGE


def pseudopotential_at(fields, points, drive: DriveConfig, ion: IonProperties):
    """Pseudopotential q^2 |E|^2 / (4 m Omega^2) in eV."""
    pts = np.asarray(points, dtype=float)
    e = np.asarray(fields.field(pts.reshape(-1, 2)))
    psi = psi_scale(drive, ion) * np.einsum("ij,ij->i", e, e)
    return psi.reshape(pts.shape[:-1]) if pts.ndim > 1 else float(psi[0])


def _psi_and_grad(fields, pts, scale):
    e = np.asarray(fields.field(pts))
    psi = scale * np.einsum("ij,ij->i", e, e)
    if hasattr(fields, "field_jacobian"):
        jac = np.asarray(fields.field_jacobian(pts))
        grad = 2 * scale * np.einsum("nij,ni->nj", jac, e)
    else:
        grad = np.empty_like(pts)
        h = 1e-4
        for k in range(2):
            d = np.zeros(2)
            d[k] = h
            ep = np.asarray(fields.field(pts + d))
            em = np.asarray(fields.field(pts - d))
            grad[:, k] = scale * (np.einsum("ij,ij->i", ep, ep) - np.einsum("ij,ij->i", em, em)) / (2 * h)
    return psi, grad


def pseudopotential_gradient(fields, point, drive, ion):
    """Gradient of the pseudopotential (eV/um)."""
    _, g = _psi_and_grad(fields, np.atleast_2d(np.asarray(point, dtype=float)), psi_scale(drive, ion))
    return g[0]


def _blocked(fields, pts):
    mask = ~np.all(np.isfinite(pts), axis=1)
    blocked = getattr(fields, "blocked", None)
    if blocked is not None:
        mask |= np.asarray(blocked(pts), dtype=bool)
    return mask


def default_seed_region(fields):
    if getattr(fields, "seed_region", None) is not None:
        return fields.seed_region
    cs = getattr(fields, "cross_section", None)
    if cs is not None and getattr(cs, "seed_region", None) is not None:
        return cs.seed_region
    window = getattr(fields, "window", None)
    if window is None:
        raise NoMinimumFound("no seed region given and the field evaluator has no window")
    return window()


def _newton_null(fields, z0, tol=1e-12, max_iter=60):
    """Newton iteration on the holomorphic field Ex - i Ey = 0."""
    z = np.asarray(z0, dtype=float).copy()
    for _ in range(max_iter):
        e = np.asarray(fields.field(z[None, :]))[0]
        jac = np.asarray(fields.field_jacobian(z[None, :]))[0]
        try:
            dz = np.linalg.solve(jac, -e)
        except np.linalg.LinAlgError:
            return None
        n = float(np.hypot(*dz))
        if n > 50.0:
            dz *= 50.0 / n
        z = z + dz
        if not np.all(np.isfinite(z)):
            return None
        if n < tol * max(1.0, float(np.hypot(*z))):
            return z
    return z if n < 1e-8 else None


def _minimise(fields, z0, scale, tol_grad):
    """Descend Psi from z0 (used when no field Jacobian is available)."""
    from scipy.optimize import minimize

    def fun(p):
        psi, g = _psi_and_grad(fields, p[None, :], scale)
        return psi[0] / scale, g[0] / scale

    res = minimize(fun, np.asarray(z0, dtype=float), jac=True, method="BFGS",
                   options={"gtol": tol_grad / scale, "maxiter": 500})
    return res.x


def find_minimum(fields, drive: DriveConfig, ion: IonProperties, seed_region=None,
                 grid=48, tol_grad=1e-9):
    """Locate the single pseudopotential minimum inside ``seed_region``.

    ``seed_region`` is ``(xmin, xmax, ymin, ymax)``.  A coarse grid pre-scan
    finds candidate basins; each is refined (Newton on the RF null when a field
    Jacobian is available, otherwise BFGS), and exactly one distinct minimum
    must remain inside the region.
    """
    region = seed_region if seed_region is not None else default_seed_region(fields)
    x0, x1, y0, y1 = region
    xs = np.linspace(x0, x1, grid)
    ys = np.linspace(y0, y1, grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    scale = psi_scale(drive, ion)
    with np.errstate(all="ignore"):
        e = np.asarray(fields.field(pts))
        psi = scale * np.einsum("ij,ij->i", e, e)
    psi[_blocked(fields, pts) | ~np.isfinite(psi)] = np.inf
    P = psi.reshape(grid, grid)
    # interior grid points not exceeded by any of their 8 neighbours
    core = P[1:-1, 1:-1]
    is_min = np.isfinite(core)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= core <= P[1 + di:grid - 1 + di, 1 + dj:grid - 1 + dj]
    cand = np.argwhere(is_min) + 1
    order = np.argsort(P[cand[:, 0], cand[:, 1]])
    cand = cand[order][:12]

    found = []
    span = max(x1 - x0, y1 - y0)
    for i, j in cand:
        start = np.array([xs[i], ys[j]])
        with np.errstate(all="ignore"):
            if hasattr(fields, "field_jacobian"):
                z = _newton_null(fields, start)
            else:
                z = _minimise(fields, start, scale, tol_grad)
        if z is None:
            continue
        if not (x0 <= z[0] <= x1 and y0 <= z[1] <= y1):
            continue
        if _blocked(fields, z[None, :])[0]:
            continue
        psi_z, g = _psi_and_grad(fields, z[None, :], scale)
        if np.hypot(*g[0]) > max(tol_grad, 1e-9 * scale * span):
            continue
        if not any(np.hypot(*(z - f)) < 1e-3 for f in found):
            found.append(z)
    if not found:
        raise NoMinimumFound(f"no pseudopotential minimum inside {tuple(region)}")
    if len(found) > 1:
        raise MultipleMinimaInRegion(
            f"{len(found)} minima inside {tuple(region)}: "
            + ", ".join(f"({p[0]:.3f}, {p[1]:.3f})" for p in found)
        )
    return found[0]


def hessian(fn, point, step=0.1):
    """Central-difference Hessian of a scalar function, Richardson-extrapolated."""
    p = np.asarray(point, dtype=float)

    def raw(h):
        offs = []
        for a in range(2):
            for b in range(2):
                da = np.eye(2)[a] * h
                db = np.eye(2)[b] * h
                offs += [p + da + db, p + da - db, p - da + db, p - da - db]
        v = np.asarray(fn(np.array(offs))).reshape(2, 2, 4)
        return (v[..., 0] - v[..., 1] - v[..., 2] + v[..., 3]) / (4 * h * h)

    h1 = raw(step)
    h2 = raw(step / 2)
    return (4 * h2 - h1) / 3


def pseudopotential_hessian(fields, point, drive, ion, step=0.1):
    """Hessian of the pseudopotential (eV/um^2).

    With an analytic field Jacobian ``J`` the Hessian is
    ``2 s (J^T J + sum_k E_k grad grad E_k)``; the second term (zero at an RF
    null) is taken by central differences of ``J``.  Otherwise the whole
    Hessian is finite-differenced.
    """
    if not hasattr(fields, "field_jacobian"):
        return hessian(lambda pts: pseudopotential_at(fields, pts, drive, ion), point, step)
    p = np.asarray(point, dtype=float)
    scale = psi_scale(drive, ion)
    e = np.asarray(fields.field(p[None, :]))[0]
    jac = np.asarray(fields.field_jacobian(p[None, :]))[0]  # jac[k, i] = dE_k / dx_i
    H = jac.T @ jac
    h = 1e-3 * step
    offs = np.array([p + h * np.eye(2)[i] * sgn for i in range(2) for sgn in (1, -1)])
    jo = np.asarray(fields.field_jacobian(offs)).reshape(2, 2, 2, 2)
    for i in range(2):
        dj = (jo[i, 0] - jo[i, 1]) / (2 * h)  # dj[k, j] = d^2 E_k / dx_i dx_j
        H[i] += e @ dj
    H = 2 * scale * H
    return 0.5 * (H + H.T)


def secular_frequencies(fields, drive: DriveConfig, ion: IonProperties, minimum, step=0.1):
    """Transverse secular frequencies (MHz) and principal-axis angles (rad), ascending."""
    H = pseudopotential_hessian(fields, minimum, drive, ion, step)
    H = 0.5 * (H + H.T)
    vals, vecs = np.linalg.eigh(H)
    if np.any(vals <= 0):
        raise NonPositiveCurvature(f"pseudopotential Hessian eigenvalues {vals} eV/um^2")
    k = vals * E_CHARGE / UM**2  # J/m^2
    freqs = np.sqrt(k / ion.mass_kg) / (2 * math.pi) / 1e6
    angles = np.mod(np.arctan2(vecs[1], vecs[0]), math.pi)
    if freqs[1] - freqs[0] <= DEGENERACY_TOL * freqs[1]:
        # isotropic well: every direction is principal, report the x and y axes
        angles = np.array([0.0, 0.5 * math.pi])
    return tuple((float(f), float(a)) for f, a in zip(freqs, angles))


def calibrate_rf_voltage(fields, ion: IonProperties, rf_frequency=40.0, target_secular=4.0,
                         minimum=None, mode="lower", step=0.1):
    """RF amplitude (V) giving ``target_secular`` MHz for the chosen mode.

    ``mode`` is ``"lower"`` (default), ``"upper"`` or ``"mean"``.  Secular
    frequency is linear in the RF amplitude, so one unit-voltage evaluation
    fixes the answer.
    """
    if not target_secular > 0:
        raise ValueError("target secular frequency must be positive")
    unit = DriveConfig(rf_frequency, 1.0)
    if minimum is None:
        minimum = find_minimum(fields, unit, ion)
    (f1, _), (f2, _) = secular_frequencies(fields, unit, ion, minimum, step)
    ref = {"lower": f1, "upper": f2, "mean": 0.5 * (f1 + f2)}[mode]
    voltage = target_secular / ref
    q = stability_q(target_secular if mode == "lower" else f2 * voltage, rf_frequency)
    if q > Q_WARN:
        warnings.warn(f"Mathieu q = {q:.3f} > {Q_WARN}; pseudopotential approximation degrading",
                      RuntimeWarning, stacklevel=2)
    return voltage


def stability_q(secular, rf_frequency):
    """Mathieu q for a secular frequency in the lowest-order approximation."""
    return 2 * math.sqrt(2) * secular / rf_frequency


# --- escape saddle -------------------------------------------------------------

@dataclass(frozen=True)
class Saddle:
    point: np.ndarray
    value: float
    barrier_estimate: float
    refined: bool


def _segments_cross(p, q, a, b):
    """Vectorised proper-intersection test of segments p-q against a-b."""
    def orient(o, s, t):
        return (s[..., 0] - o[..., 0]) * (t[..., 1] - o[..., 1]) - (s[..., 1] - o[..., 1]) * (t[..., 0] - o[..., 0])

    d1 = orient(a, b, p)
    d2 = orient(a, b, q)
    d3 = orient(p, q, a)
    d4 = orient(p, q, b)
    return (d1 * d2 <= 0) & (d3 * d4 <= 0)


def _electrode_edges(fields):
    cs = getattr(fields, "cross_section", None)
    if cs is None:
        return None
    edges = [(p, q) for s in cs.segments for p, q in s.edges]
    return np.array([e[0] for e in edges]), np.array([e[1] for e in edges])


def polar_bottleneck(psi_fn, centre, window, n_angles=360, n_radii=64, r_min=None,
                     blocked=None, barriers=None):
    """Lowest-barrier escape on a polar grid around ``centre``.

    Every grid node carries the value of ``psi_fn``; a path from the centre to
    the window boundary costs the largest value along it, and the cheapest
    such path (a minimax / widest-path search) brackets the escape saddle.

    Returns ``(barrier, node_point, exits)`` where ``exits`` is True when the
    cheapest path peaks on the boundary itself (no saddle inside the window).
    """
    cx, cy = centre
    x0, x1, y0, y1 = window
    r_max = max(math.hypot(x - cx, y - cy) for x in (x0, x1) for y in (y0, y1))
    if r_min is None:
        r_min = 1e-3 * r_max
    radii = np.geomspace(r_min, r_max, n_radii)
    th = np.linspace(0, 2 * math.pi, n_angles, endpoint=False)
    R, T = np.meshgrid(radii, th, indexing="ij")
    pts = np.column_stack([cx + (R * np.cos(T)).ravel(), cy + (R * np.sin(T)).ravel()])
    inside = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    vals = np.full(len(pts), np.inf)
    ok = inside.copy()
    if blocked is not None:
        ok &= ~blocked(pts)
    with np.errstate(all="ignore"):
        vals[ok] = psi_fn(pts[ok])
    vals[~np.isfinite(vals)] = np.inf
    vals = vals.reshape(n_radii, n_angles)
    inside = inside.reshape(n_radii, n_angles)
    P = pts.reshape(n_radii, n_angles, 2)

    # edges blocked by electrode surfaces
    cut_r = np.zeros((n_radii - 1, n_angles), dtype=bool)
    cut_t = np.zeros((n_radii, n_angles), dtype=bool)
    if barriers is not None:
        a, b = barriers
        for k in range(len(a)):
            cut_r |= _segments_cross(P[:-1], P[1:], a[k], b[k])
            cut_t |= _segments_cross(P, np.roll(P, -1, axis=1), a[k], b[k])

    exit_node = np.zeros((n_radii, n_angles), dtype=bool)
    exit_node[-1] = inside[-1]
    exit_node[:-1] |= inside[:-1] & ~inside[1:]

    best = np.full((n_radii, n_angles), np.inf)
    heap = []
    for j in range(n_angles):
        if np.isfinite(vals[0, j]):
            best[0, j] = vals[0, j]
            heapq.heappush(heap, (vals[0, j], 0, j))
    parent = {}
    while heap:
        cost, i, j = heapq.heappop(heap)
        if cost > best[i, j]:
            continue
        if exit_node[i, j]:
            # walk back to find where the path peaks
            node = (i, j)
            peak = node
            while node in parent:
                node = parent[node]
                if vals[node] > vals[peak]:
                    peak = node
            exits = vals[peak] >= cost and exit_node[peak]
            return float(cost), P[peak], bool(exits)
        nbrs = []
        if i + 1 < n_radii and not cut_r[i, j]:
            nbrs.append((i + 1, j))
        if i > 0 and not cut_r[i - 1, j]:
            nbrs.append((i - 1, j))
        if not cut_t[i, j]:
            nbrs.append((i, (j + 1) % n_angles))
        if not cut_t[i, (j - 1) % n_angles]:
            nbrs.append((i, (j - 1) % n_angles))
        for a_, b_ in nbrs:
            if not inside[a_, b_]:
                continue
            c = max(cost, vals[a_, b_])
            if c < best[a_, b_]:
                best[a_, b_] = c
                parent[(a_, b_)] = (i, j)
                heapq.heappush(heap, (c, a_, b_))
    return np.inf, None, False


def refine_saddle(grad_fn, hess_fn, start, max_iter=80, tol=1e-10, max_step=None):
    """Newton iteration on grad = 0; returns the point or None if it fails."""
    z = np.asarray(start, dtype=float).copy()
    for _ in range(max_iter):
        g = grad_fn(z)
        H = hess_fn(z)
        try:
            dz = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return None
        n = float(np.hypot(*dz))
        if max_step is not None and n > max_step:
            dz *= max_step / n
        z = z + dz
        if not np.all(np.isfinite(z)):
            return None
        if n < tol * max(1.0, float(np.hypot(*z))):
            return z
    return None


def escape_saddle(psi_fn, minimum, window, grad_fn=None, blocked=None, barriers=None,
                  n_angles=360, n_radii=64, r_min=None):
    """Lowest saddle bounding the basin of ``minimum`` for a scalar ``psi_fn``.

    ``psi_fn`` maps an (N, 2) array to N values.  Raises :class:`NoSaddleFound`
    when the basin reaches the window boundary without a pass.
    """
    minimum = np.asarray(minimum, dtype=float)
    psi_min = float(psi_fn(minimum[None, :])[0])
    barrier, node, exits = polar_bottleneck(psi_fn, minimum, window, n_angles, n_radii,
                                            r_min, blocked, barriers)
    if node is None:
        raise NoSaddleFound("the basin is sealed inside the search window", None)
    if exits:
        raise NoSaddleFound(
            f"no saddle inside the window; depth exceeds {barrier - psi_min:.4g}",
            barrier - psi_min,
        )

    r_node = float(np.hypot(*(node - minimum)))
    h = max(1e-3, 1e-4 * r_node)
    if grad_fn is None:
        def grad_fn(p):
            d = np.eye(2) * h
            v = psi_fn(np.array([p + d[0], p - d[0], p + d[1], p - d[1]]))
            return np.array([v[0] - v[1], v[2] - v[3]]) / (2 * h)

    def hess_fn(p):
        d = np.eye(2) * h
        g = [grad_fn(p + d[k]) - grad_fn(p - d[k]) for k in range(2)]
        H = np.column_stack(g) / (2 * h)
        return 0.5 * (H + H.T)

    z = refine_saddle(grad_fn, hess_fn, node, max_step=0.25 * r_node)
    if z is not None:
        ev = np.linalg.eigvalsh(hess_fn(z))
        val = float(psi_fn(z[None, :])[0])
        is_saddle = ev[0] < 0 < ev[1]
        # the refined pass must sit close to the grid estimate
        span = barrier - psi_min
        plausible = abs(val - barrier) <= 0.1 * span
        if is_saddle and plausible and (blocked is None or not blocked(z[None, :])[0]):
            return Saddle(z, val, barrier, True)
    return Saddle(np.asarray(node), barrier, barrier, False)


def find_escape_point(fields, drive: DriveConfig, ion: IonProperties, minimum, window=None,
                      n_angles=360, n_radii=64):
    """Escape point and trap depth (eV) of the basin around ``minimum``.

    Raises :class:`NoSaddleFound` (with ``lower_bound``) when the basin stays
    closed out to the search window.
    """
    point, depth, _ = find_escape_saddle(fields, drive, ion, minimum, window, n_angles, n_radii)
    return point, depth


def find_escape_saddle(fields, drive: DriveConfig, ion: IonProperties, minimum, window=None,
                       n_angles=360, n_radii=64):
    """As :func:`find_escape_point`, also returning the :class:`Saddle` record."""
    scale = psi_scale(drive, ion)
    if window is None:
        window = fields.window()

    def psi_fn(pts):
        e = np.asarray(fields.field(pts))
        return scale * np.einsum("ij,ij->i", e, e)

    grad_fn = None
    if hasattr(fields, "field_jacobian"):
        def grad_fn(p):
            return _psi_and_grad(fields, np.asarray(p, dtype=float)[None, :], scale)[1][0]

    blocked = getattr(fields, "blocked", None)
    saddle = escape_saddle(psi_fn, minimum, window, grad_fn, blocked, _electrode_edges(fields),
                           n_angles, n_radii)
    depth = saddle.value - float(psi_fn(np.asarray(minimum, dtype=float)[None, :])[0])
    return saddle.point, depth, saddle


def trap_equilibrium(fields, drive: DriveConfig, ion: IonProperties, seed_region=None):
    """Minimum, secular frequencies, escape point and depth in one call."""
    z = find_minimum(fields, drive, ion, seed_region)
    secular = secular_frequencies(fields, drive, ion, z)
    try:
        esc, depth = find_escape_point(fields, drive, ion, z)
        esc = tuple(esc)
    except NoSaddleFound:
        esc, depth = None, math.inf
    sep = fields.distance_to_electrodes(z) if hasattr(fields, "distance_to_electrodes") else math.nan
    return TrapEquilibrium(tuple(z), secular, esc, depth, sep)

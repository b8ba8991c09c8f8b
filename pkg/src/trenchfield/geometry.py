"""Trap cross-sections and their discretisation into straight panels.

All lengths are in micrometres.  The substrate top surface is ``y = 0`` and the
ion sits at ``y > 0``; the trap axis runs out of the page.  Conductors are ideal
and infinitely long, so a cross-section is a set of open or closed polylines,
each tagged with an electrode id and a role.

Layouts (right half shown, ``W`` = inner half-width of the trench)::

    set_symmetric           DC centre (b) | RF (a) | DC to the extent
    set_antisymmetric       DC (0..phi) | RF (phi..extent); left half has roles swapped
    simple_trench_*         SET floor whose outermost electrode climbs a wall of
                            height beta/f and thickness alpha, then runs back down
                            and out along the substrate; the symmetric floor is
                            DC centre (d) | RF (c), the anti-symmetric one follows
                            set_antisymmetric with phi -> e
    stacked_trench_symmetric
                            floor and wall foot (0..h) ground, RF band (h..h+g),
                            DC band (h+g..epsilon) wrapping the wall top; the outer
                            wall face and outer floor are ground
    stacked_trench_antisymmetric
                            no floor conductor; each wall is split at height j,
                            right wall DC (0..j) and RF (j..xi), left wall with
                            RF and DC swapped
    wafer_symmetric         three stacked wafers (lambda thick, tau deep) with a
                            slot; RF middle wafer, DC wafers a gap k above and
                            below; slot half-width equal to the separation
    wafer_antisymmetric     two wafers whose faces are k from the mid-plane, RF
                            on one diagonal; the slot half-width puts the slab
                            corners at the target separation

Electrode gaps are cut symmetrically out of both electrodes meeting at a
junction, so the straight-line distance between the cut ends equals the gap
whatever the angle at the junction.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegeneratePolyline,
    NonPositiveLength,
    SelfIntersectingGeometry,
    UnknownParameter,
)

DEFAULT_GAP = 1.0
DEFAULT_SEPARATION = 75.0
EXTENT_FACTOR = 20.0


class TrapFamily(str, enum.Enum):
    SET_SYMMETRIC = "set_symmetric"
    SET_ANTISYMMETRIC = "set_antisymmetric"
    SIMPLE_TRENCH_SYMMETRIC = "simple_trench_symmetric"
    SIMPLE_TRENCH_ANTISYMMETRIC = "simple_trench_antisymmetric"
    STACKED_TRENCH_SYMMETRIC = "stacked_trench_symmetric"
    STACKED_TRENCH_ANTISYMMETRIC = "stacked_trench_antisymmetric"
    WAFER_SYMMETRIC = "wafer_symmetric"
    WAFER_ANTISYMMETRIC = "wafer_antisymmetric"

    @property
    def antisymmetric(self) -> bool:
        return self.value.endswith("antisymmetric")

    @property
    def has_substrate(self) -> bool:
        return not self.value.startswith("wafer")


class Role(str, enum.Enum):
    RF = "RF"
    DC = "DC"
    GROUND = "Ground"


# Required keys, then keys with defaults.
PARAMETERS = {
    TrapFamily.SET_SYMMETRIC: (("a", "b"), {}),
    TrapFamily.SET_ANTISYMMETRIC: (("phi",), {}),
    TrapFamily.SIMPLE_TRENCH_SYMMETRIC: (("c", "d", "beta"), {"alpha": 100.0}),
    TrapFamily.SIMPLE_TRENCH_ANTISYMMETRIC: (("e", "f"), {"alpha": 100.0}),
    TrapFamily.STACKED_TRENCH_SYMMETRIC: (("g", "h", "epsilon"), {"mu": 150.0, "alpha": 100.0}),
    TrapFamily.STACKED_TRENCH_ANTISYMMETRIC: (("i", "j"), {"xi": 270.0, "alpha": 100.0}),
    TrapFamily.WAFER_SYMMETRIC: (("k",), {"lambda": 50.0, "tau": 1000.0}),
    TrapFamily.WAFER_ANTISYMMETRIC: (("k",), {"lambda": 50.0, "tau": 1000.0}),
}


def parameter_names(family):
    required, defaults = PARAMETERS[TrapFamily(family)]
    return tuple(required) + tuple(defaults)


def validate_params(family, params) -> dict:
    """Return a complete parameter dict for ``family`` with defaults filled in."""
    family = TrapFamily(family)
    required, defaults = PARAMETERS[family]
    allowed = set(required) | set(defaults)
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise UnknownParameter(
            f"{family.value} does not take parameter(s) {', '.join(unknown)}; "
            f"expected {', '.join(sorted(allowed))}"
        )
    missing = [k for k in required if k not in params]
    if missing:
        raise UnknownParameter(f"{family.value} needs parameter(s) {', '.join(missing)}")
    out = dict(defaults)
    out.update({k: float(v) for k, v in params.items()})
    for key, value in out.items():
        if not math.isfinite(value) or value <= 0:
            raise NonPositiveLength(f"{key} must be a positive length, got {value}")
    return {k: out[k] for k in parameter_names(family)}


@dataclass(frozen=True)
class ElectrodeSegment:
    polyline: tuple  # ((x, y), ...)
    role: Role
    electrode_id: str
    # per-edge flag: shielded faces that may be meshed coarsely
    coarse: tuple = ()

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.polyline)
        if len(pts) < 2:
            raise DegeneratePolyline(f"{self.electrode_id}: polyline needs >= 2 points")
        for p, q in zip(pts[:-1], pts[1:]):
            if p == q:
                raise DegeneratePolyline(f"{self.electrode_id}: repeated point {p}")
        object.__setattr__(self, "polyline", pts)
        object.__setattr__(self, "role", Role(self.role))
        coarse = tuple(bool(c) for c in self.coarse) or (False,) * (len(pts) - 1)
        if len(coarse) != len(pts) - 1:
            raise ValueError("coarse flags must match the number of edges")
        object.__setattr__(self, "coarse", coarse)

    @property
    def edges(self):
        return list(zip(self.polyline[:-1], self.polyline[1:]))

    def mirrored(self):
        pts = tuple((-x, y) for x, y in reversed(self.polyline))
        return ElectrodeSegment(pts, self.role, self.electrode_id, tuple(reversed(self.coarse)))


@dataclass(frozen=True)
class CrossSection:
    segments: tuple
    gap: float = DEFAULT_GAP
    extent: float = EXTENT_FACTOR * DEFAULT_SEPARATION
    family: TrapFamily | None = None
    params: dict = field(default_factory=dict)
    # closed conductor interiors (polygons), used to mask the field region
    solids: tuple = ()
    substrate: bool = False
    # (xmin, xmax, ymin, ymax) expected to hold the single RF null
    seed_region: tuple | None = None

    def __post_init__(self):
        ids = [s.electrode_id for s in self.segments]
        if len(set(ids)) != len(ids):
            raise SelfIntersectingGeometry(f"duplicate electrode ids in {ids}")

    @property
    def electrode_ids(self):
        return tuple(s.electrode_id for s in self.segments)

    @property
    def roles(self):
        return {s.electrode_id: s.role for s in self.segments}

    def ids_with_role(self, role):
        role = Role(role)
        return tuple(s.electrode_id for s in self.segments if s.role is role)

    def bounding_box(self):
        pts = np.array([p for s in self.segments for p in s.polyline])
        return pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max()

    def corner_points(self):
        """Every polyline vertex, with the id of the electrode it belongs to."""
        return [(p, s.electrode_id) for s in self.segments for p in s.polyline]

    def inside_conductor(self, points, tol=0.0):
        """Boolean mask of points inside a solid conductor or the substrate."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(len(pts), dtype=bool)
        if self.substrate:
            mask |= pts[:, 1] < -tol
        for poly in self.solids:
            mask |= _points_in_polygon(pts, np.asarray(poly, dtype=float))
        return mask


def _points_in_polygon(pts, poly):
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    xs, ys = poly[:, 0], poly[:, 1]
    for k in range(len(poly)):
        x1, y1 = xs[k - 1], ys[k - 1]
        x2, y2 = xs[k], ys[k]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xc)
    return inside


# --- chains -----------------------------------------------------------------

@dataclass
class _Piece:
    points: list
    eid: str
    role: Role
    coarse: tuple = ()


def _trim_start(points, length):
    """Drop ``length`` of arc from the start of a polyline."""
    pts = [np.asarray(p, dtype=float) for p in points]
    while length > 0:
        if len(pts) < 2:
            return None
        seg = pts[1] - pts[0]
        L = float(np.hypot(*seg))
        if length < L - 1e-12:
            pts[0] = pts[0] + seg * (length / L)
            return pts
        length -= L
        pts.pop(0)
    return pts


def _cut_chain(pieces, gap):
    """Cut an electrode gap at every junction of a continuous chain of pieces."""
    trims = [[0.0, 0.0] for _ in pieces]
    for k in range(len(pieces) - 1):
        a, b = pieces[k], pieces[k + 1]
        j = np.asarray(a.points[-1], dtype=float)
        if not np.allclose(j, b.points[0]):
            raise SelfIntersectingGeometry(f"chain broken between {a.eid} and {b.eid}")
        u1 = np.asarray(a.points[-2], dtype=float) - j
        u2 = np.asarray(b.points[1], dtype=float) - j
        u1 /= np.hypot(*u1)
        u2 /= np.hypot(*u2)
        spread = float(np.hypot(*(u1 - u2)))
        if spread < 1e-9:
            raise SelfIntersectingGeometry(f"{a.eid} folds back onto {b.eid}")
        cut = gap / spread
        trims[k][1] = cut
        trims[k + 1][0] = cut
    out = []
    for piece, (head, tail) in zip(pieces, trims):
        coarse = list(piece.coarse) or [False] * (len(piece.points) - 1)
        pts = _trim_start(piece.points, head)
        n_before = len(piece.points)
        if pts is None:
            raise SelfIntersectingGeometry(f"{piece.eid} is shorter than its gaps")
        coarse = coarse[n_before - len(pts):]
        rev = _trim_start(pts[::-1], tail)
        if rev is None or len(rev) < 2:
            raise SelfIntersectingGeometry(f"{piece.eid} is shorter than its gaps")
        coarse = coarse[: len(rev) - 1]
        pts = rev[::-1]
        out.append(
            ElectrodeSegment(tuple(map(tuple, pts)), piece.role, piece.eid, tuple(coarse))
        )
    return out


def _rect(x0, x1, y0, y1):
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


# --- builders -----------------------------------------------------------------

def _set_symmetric(p, E):
    A = p["b"] / 2
    B = A + p["a"]
    if E <= B:
        raise SelfIntersectingGeometry("extent does not clear the RF electrodes")
    chain = [
        _Piece([(-E, 0), (-B, 0)], "dc_left", Role.DC),
        _Piece([(-B, 0), (-A, 0)], "rf_left", Role.RF),
        _Piece([(-A, 0), (A, 0)], "dc_center", Role.DC),
        _Piece([(A, 0), (B, 0)], "rf_right", Role.RF),
        _Piece([(B, 0), (E, 0)], "dc_right", Role.DC),
    ]
    return chain, []


def _set_antisymmetric(p, E):
    w = p["phi"]
    if E <= w:
        raise SelfIntersectingGeometry("extent does not clear the plane electrodes")
    chain = [
        _Piece([(-E, 0), (-w, 0)], "dc_outer", Role.DC),
        _Piece([(-w, 0), (0, 0)], "rf_inner", Role.RF),
        _Piece([(0, 0), (w, 0)], "dc_inner", Role.DC),
        _Piece([(w, 0), (E, 0)], "rf_outer", Role.RF),
    ]
    return chain, []


def _wall(x_in, x_out, height, E, side):
    """Wall polyline climbing the inner face, across the top, down and out."""
    s = 1 if side > 0 else -1
    pts = [(s * x_in, 0), (s * x_in, height), (s * x_out, height), (s * x_out, 0), (s * E, 0)]
    coarse = (False, False, True, True)
    if side < 0:
        pts = pts[::-1]
        coarse = coarse[::-1]
    return pts, coarse


def _simple_symmetric(p, E):
    # d is the centre DC width and c the RF width; the reference dimensions
    # give a 75 um separation only with this assignment
    A = p["d"] / 2
    W = A + p["c"]
    beta, alpha = p["beta"], p["alpha"]
    if E <= W + alpha:
        raise SelfIntersectingGeometry("extent does not clear the trench walls")
    lw, lc = _wall(W, W + alpha, beta, E, -1)
    rw, rc = _wall(W, W + alpha, beta, E, +1)
    chain = [
        _Piece(lw, "dc_wall_left", Role.DC, lc),
        _Piece([(-W, 0), (-A, 0)], "rf_left", Role.RF),
        _Piece([(-A, 0), (A, 0)], "dc_center", Role.DC),
        _Piece([(A, 0), (W, 0)], "rf_right", Role.RF),
        _Piece(rw, "dc_wall_right", Role.DC, rc),
    ]
    solids = [_rect(-W - alpha, -W, 0, beta), _rect(W, W + alpha, 0, beta)]
    return chain, solids


def _simple_antisymmetric(p, E):
    W, f, alpha = p["e"], p["f"], p["alpha"]
    if E <= W + alpha:
        raise SelfIntersectingGeometry("extent does not clear the trench walls")
    lw, lc = _wall(W, W + alpha, f, E, -1)
    rw, rc = _wall(W, W + alpha, f, E, +1)
    chain = [
        _Piece(lw, "dc_wall", Role.DC, lc),
        _Piece([(-W, 0), (0, 0)], "rf_floor", Role.RF),
        _Piece([(0, 0), (W, 0)], "dc_floor", Role.DC),
        _Piece(rw, "rf_wall", Role.RF, rc),
    ]
    solids = [_rect(-W - alpha, -W, 0, f), _rect(W, W + alpha, 0, f)]
    return chain, solids


def _stacked_symmetric(p, E):
    g, h, eps, alpha = p["g"], p["h"], p["epsilon"], p["alpha"]
    W = p["mu"] / 2
    if eps <= h + g:
        raise SelfIntersectingGeometry("wall height epsilon must exceed h + g")
    if E <= W + alpha:
        raise SelfIntersectingGeometry("extent does not clear the trench walls")
    X = W + alpha
    chain = [
        _Piece([(-E, 0), (-X, 0), (-X, eps)], "ground_left", Role.GROUND, (True, True)),
        _Piece([(-X, eps), (-W, eps), (-W, h + g)], "dc_top_left", Role.DC),
        _Piece([(-W, h + g), (-W, h)], "rf_left", Role.RF),
        _Piece([(-W, h), (-W, 0), (W, 0), (W, h)], "ground", Role.GROUND),
        _Piece([(W, h), (W, h + g)], "rf_right", Role.RF),
        _Piece([(W, h + g), (W, eps), (X, eps)], "dc_top_right", Role.DC),
        _Piece([(X, eps), (X, 0), (E, 0)], "ground_right", Role.GROUND, (True, True)),
    ]
    solids = [_rect(-X, -W, 0, eps), _rect(W, X, 0, eps)]
    return chain, solids


def _stacked_antisymmetric(p, gap):
    """Two free-standing walls on a bare substrate, each split at height j.

    The lower electrode wraps the inner face, the base and the outer face up to
    j; the upper one wraps the rest.  RF sits low on the left and high on the
    right.
    """
    j, xi, alpha = p["j"], p["xi"], p["alpha"]
    W = p["i"] / 2
    if xi <= j + gap:
        raise SelfIntersectingGeometry("wall height xi must exceed j")
    if j <= gap:
        raise SelfIntersectingGeometry("bottom electrode height j must exceed the gap")
    X = W + alpha
    g = gap / 2
    segments = []
    for s, low, high in ((-1, Role.RF, Role.DC), (1, Role.DC, Role.RF)):
        xin, xout = s * W, s * X
        lower = ((xin, j - g), (xin, 0.0), (xout, 0.0), (xout, j - g))
        upper = ((xout, j + g), (xout, xi), (xin, xi), (xin, j + g))
        side = "left" if s < 0 else "right"
        segments.append(ElectrodeSegment(lower, low, f"{low.value.lower()}_bottom_{side}",
                                         (False, False, True)))
        segments.append(ElectrodeSegment(upper, high, f"{high.value.lower()}_top_{side}",
                                         (True, False, False)))
    solids = [_rect(-X, -W, 0, xi), _rect(W, X, 0, xi)]
    return segments, solids


def wafer_slot_halfwidth(family, k, separation=DEFAULT_SEPARATION):
    """Slot half-width holding the nearest slab ``separation`` from the slot centre.

    In the three-layer symmetric stack the nearest metal is the end face of
    the middle layer, so the half-width equals the separation.  In the
    two-layer anti-symmetric stack each layer face is ``k`` from the mid-plane
    and the slab corners sit at the separation.
    """
    family = TrapFamily(family)
    if family is TrapFamily.WAFER_SYMMETRIC:
        return float(separation)
    if k >= separation:
        raise SelfIntersectingGeometry(
            f"wafer spacing k={k} leaves no slot at separation {separation}"
        )
    return math.sqrt(separation**2 - k**2)


def _slab(name, role, x0, x1, y0, y1, far_face):
    pts = _rect(x0, x1, y0, y1)
    # faces: bottom, right end, top, left end; the far end is shielded
    coarse = tuple(e == far_face for e in range(4))
    return ElectrodeSegment(pts + (pts[0],), role, f"{role.value.lower()}_{name}", coarse)


def _wafer(p, family, separation):
    k, lam, tau = p["k"], p["lambda"], p["tau"]
    s = wafer_slot_halfwidth(family, k, separation)
    if family is TrapFamily.WAFER_SYMMETRIC:
        # RF middle wafer, DC wafers k above and below it
        h = lam / 2
        layers = [
            ("top", h + k, h + k + lam, Role.DC, Role.DC),
            ("middle", -h, h, Role.RF, Role.RF),
            ("bottom", -h - k - lam, -h - k, Role.DC, Role.DC),
        ]
    else:
        # two wafers with faces k from the mid-plane, RF on one diagonal
        layers = [
            ("top", k, k + lam, Role.RF, Role.DC),
            ("bottom", -k - lam, -k, Role.DC, Role.RF),
        ]
    segments, solids = [], []
    for name, y0, y1, left, right in layers:
        segments.append(_slab(f"{name}_left", left, -s - tau, -s, y0, y1, 3))
        segments.append(_slab(f"{name}_right", right, s, s + tau, y0, y1, 1))
        solids += [_rect(-s - tau, -s, y0, y1), _rect(s, s + tau, y0, y1)]
    return segments, solids


def _seed_region(family, p, separation):
    F = TrapFamily
    if family is F.SET_SYMMETRIC:
        B = p["b"] / 2 + p["a"]
        return (-B, B, 0.5, 2 * B)
    if family is F.SET_ANTISYMMETRIC:
        w = p["phi"]
        return (-2 * w, 2 * w, 0.5, 3 * w)
    if family is F.SIMPLE_TRENCH_SYMMETRIC:
        W = p["d"] / 2 + p["c"]
        return (-W, W, 0.5, max(p["beta"], 2 * W))
    if family is F.SIMPLE_TRENCH_ANTISYMMETRIC:
        W = p["e"]
        return (-W, W, 0.5, max(p["f"], 2 * W))
    if family is F.STACKED_TRENCH_SYMMETRIC:
        W = p["mu"] / 2
        return (-W, W, 0.5, p["epsilon"])
    if family is F.STACKED_TRENCH_ANTISYMMETRIC:
        W = p["i"] / 2
        return (-W, W, 0.5, p["xi"])
    s = wafer_slot_halfwidth(family, p["k"], separation)
    if family is F.WAFER_SYMMETRIC:
        h = p["lambda"] / 2 + p["k"]
    else:
        h = p["k"]
    return (-s, s, -h, h)


_BUILDERS = {
    TrapFamily.SET_SYMMETRIC: _set_symmetric,
    TrapFamily.SET_ANTISYMMETRIC: _set_antisymmetric,
    TrapFamily.SIMPLE_TRENCH_SYMMETRIC: _simple_symmetric,
    TrapFamily.SIMPLE_TRENCH_ANTISYMMETRIC: _simple_antisymmetric,
    TrapFamily.STACKED_TRENCH_SYMMETRIC: _stacked_symmetric,
}


def build_cross_section(
    family,
    params,
    *,
    gap=DEFAULT_GAP,
    extent=None,
    separation=DEFAULT_SEPARATION,
    roles=None,
) -> CrossSection:
    """Build the transverse cross-section of one trap.

    Parameters
    ----------
    family : TrapFamily or str
    params : dict
        Lengths in micrometres, keyed as in :data:`PARAMETERS`.  Missing
        fixed parameters take their defaults.
    gap : float
        Inter-electrode gap.
    extent : float, optional
        Half-width at which nominally infinite planes are truncated.  Defaults
        to ``20 * separation``.
    separation : float
        Target ion-electrode distance.  Only the wafer families use it, to set
        the slot width.
    roles : dict, optional
        Electrode id to role overrides.
    """
    family = TrapFamily(family)
    p = validate_params(family, params)
    if gap <= 0:
        raise NonPositiveLength(f"gap must be positive, got {gap}")
    if extent is None:
        extent = EXTENT_FACTOR * separation
    if family in (TrapFamily.WAFER_SYMMETRIC, TrapFamily.WAFER_ANTISYMMETRIC):
        segments, solids = _wafer(p, family, separation)
    elif family is TrapFamily.STACKED_TRENCH_ANTISYMMETRIC:
        segments, solids = _stacked_antisymmetric(p, gap)
    else:
        chain, solids = _BUILDERS[family](p, extent)
        segments = _cut_chain(chain, gap)
    if roles:
        known = {s.electrode_id for s in segments}
        bad = sorted(set(roles) - known)
        if bad:
            raise UnknownParameter(f"no electrode(s) named {', '.join(bad)}")
        segments = [
            ElectrodeSegment(s.polyline, roles.get(s.electrode_id, s.role), s.electrode_id, s.coarse)
            for s in segments
        ]
    return CrossSection(
        segments=tuple(segments),
        gap=gap,
        extent=extent,
        family=family,
        params=p,
        solids=tuple(solids),
        substrate=family.has_substrate,
        seed_region=_seed_region(family, p, separation),
    )


# --- meshing ------------------------------------------------------------------

@dataclass(frozen=True)
class MeshPolicy:
    l_min: float = 0.25
    l_max: float = 5.0
    grading_fraction: float = 0.3
    # multiplier on l_max for shielded faces
    outer_factor: float = 4.0

    def __post_init__(self):
        if not (0 < self.l_min <= self.l_max):
            raise ValueError("need 0 < l_min <= l_max")
        if self.grading_fraction <= 0 or self.outer_factor < 1:
            raise ValueError("grading_fraction must be > 0 and outer_factor >= 1")


@dataclass(frozen=True)
class PanelMesh:
    start: np.ndarray  # (N, 2)
    end: np.ndarray  # (N, 2)
    electrode_index: np.ndarray  # (N,) index into electrode_ids
    electrode_ids: tuple
    roles: dict
    cross_section: CrossSection | None = None

    @property
    def n_panels(self):
        return len(self.start)

    @property
    def lengths(self):
        return np.hypot(*(self.end - self.start).T)

    @property
    def midpoints(self):
        return 0.5 * (self.start + self.end)

    def panels_of(self, electrode_id):
        return np.flatnonzero(self.electrode_index == self.electrode_ids.index(electrode_id))

    def content_hash(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.start, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.end, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.electrode_index, dtype="<i8").tobytes())
        h.update("|".join(self.electrode_ids).encode())
        return h.hexdigest()

    def scaled(self, factor):
        return PanelMesh(self.start * factor, self.end * factor, self.electrode_index,
                         self.electrode_ids, self.roles)


def _edge_stations(L, policy, coarse):
    """Arc-length stations along one edge, graded towards both ends."""
    l_max = policy.l_max * (policy.outer_factor if coarse else 1.0)

    def step(d):
        return min(l_max, max(policy.l_min, policy.grading_fraction * d))

    half = L / 2
    s = [0.0]
    while s[-1] + step(s[-1]) < half:
        s.append(s[-1] + step(s[-1]))
    left = np.array(s)
    # avoid a sliver in the middle
    if len(left) > 1 and L - 2 * left[-1] < 0.5 * (left[-1] - left[-2]):
        left = left[:-1]
    mid = L - 2 * left[-1]
    n = max(1, math.ceil(mid / step(left[-1]) - 1e-9))
    inner = left[-1] + mid * np.arange(1, n) / n
    return np.concatenate([left, inner, (L - left)[::-1]])


def mesh_panels(cs: CrossSection, policy: MeshPolicy | None = None) -> PanelMesh:
    """Split every electrode polyline into straight panels.

    Panel length grows geometrically away from each polyline vertex (gap ends
    and corners) from ``l_min`` up to ``l_max``; shielded faces flagged coarse
    use ``outer_factor * l_max``.  Each edge is graded symmetrically from its two
    ends, so mirror-symmetric geometry gives a mirror-symmetric mesh.
    """
    policy = policy or MeshPolicy()
    starts, ends, index = [], [], []
    ids = cs.electrode_ids
    for k, seg in enumerate(cs.segments):
        for (p, q), coarse in zip(seg.edges, seg.coarse):
            p = np.asarray(p)
            q = np.asarray(q)
            L = float(np.hypot(*(q - p)))
            if L <= 0:
                raise DegeneratePolyline(f"{seg.electrode_id} has a zero-length edge")
            t = _edge_stations(L, policy, coarse) / L
            pts = p[None, :] + t[:, None] * (q - p)[None, :]
            pts[0], pts[-1] = p, q
            starts.append(pts[:-1])
            ends.append(pts[1:])
            index.append(np.full(len(pts) - 1, k))
    return PanelMesh(
        start=np.concatenate(starts),
        end=np.concatenate(ends),
        electrode_index=np.concatenate(index),
        electrode_ids=ids,
        roles=cs.roles,
        cross_section=cs,
    )


def point_segment_distance(points, start, end):
    """Distance from each point to the nearest of a set of segments."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = end - start
    dd = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(pts))
    for n, p in enumerate(pts):
        t = np.clip(np.einsum("ij,ij->i", p - start, d) / dd, 0.0, 1.0)
        c = start + t[:, None] * d
        out[n] = np.sqrt(np.min(np.einsum("ij,ij->i", p - c, p - c)))
    return out


def min_electrode_distance(cs: CrossSection, point):
    """Closest approach from ``point`` to any electrode surface, with the electrode id."""
    best = (np.inf, None)
    p = np.asarray(point, dtype=float)
    for seg in cs.segments:
        pts = np.asarray(seg.polyline)
        d = float(point_segment_distance(p, pts[:-1], pts[1:])[0])
        if d < best[0]:
            best = (d, seg.electrode_id)
    return best


def scaled_params(params, factor):
    return {k: v * factor for k, v in params.items()}


def coaxial_mesh(inner_radius=50.0, outer_radius=200.0, n_panels=512) -> PanelMesh:
    """Two concentric circles, each split into ``n_panels`` chords.

    Electrode ``inner`` is the RF conductor and ``outer`` the grounded shield;
    the exact potential between them is ``ln(b / r) / ln(b / a)``.
    """
    if not 0 < inner_radius < outer_radius:
        raise NonPositiveLength("need 0 < inner_radius < outer_radius")
    t = 2 * np.pi * np.arange(n_panels + 1) / n_panels
    starts, ends, index = [], [], []
    for k, r in enumerate((inner_radius, outer_radius)):
        ring = r * np.column_stack([np.cos(t), np.sin(t)])
        starts.append(ring[:-1])
        ends.append(ring[1:])
        index.append(np.full(n_panels, k))
    return PanelMesh(np.concatenate(starts), np.concatenate(ends), np.concatenate(index),
                     ("inner", "outer"), {"inner": Role.RF, "outer": Role.DC})

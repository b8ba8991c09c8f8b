"""Single-trap analysis and constant-separation parameter sweeps.

Every trap is first scaled so that its closest electrode sits ``separation``
from the ion, then driven at the RF amplitude that gives the target secular
frequency.  Depth, multipole coefficients and numerical apertures are reported
at that operating point.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bem import solve_basis
from .config import TrapConfig, config_from_params
from .errors import AnalysisError, NoSaddleFound, RegimeMismatch, TrenchfieldError, UnknownParameter
from .geometry import DEFAULT_SEPARATION, TrapFamily, build_cross_section, mesh_panels, parameter_names, scaled_params
from .multipole import derived_ratios, fit_multipoles, radius_sensitivity
from .optics import numerical_aperture
from .pseudopotential import (
    DriveConfig,
    calibrate_rf_voltage,
    find_escape_saddle,
    find_minimum,
    secular_frequencies,
)

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "family", "w_name", "w_um", "depth_eV", "C2", "C3p", "C4p", "na_above", "na_below",
    "ion_x_um", "ion_y_um", "rf_voltage_V", "status",
)
SEPARATION_TOL = 0.1  # um, acceptance tolerance on the scaled separation
_FIXED_POINT_TOL = 1e-3  # um, iteration target
_MAX_ITER = 30


@dataclass
class ScaledTrap:
    """A trap scaled to its target separation, with the solved RF basis."""

    params: dict
    factor: float
    cross_section: object
    mesh: object
    fields: object
    ion: np.ndarray
    separation: float  # measured minimum ion-electrode distance (um)
    iterations: int


def _solve(cfg: TrapConfig, params):
    cs = build_cross_section(cfg.family, params, gap=cfg.gap, extent=cfg.extent,
                             separation=cfg.separation, roles=cfg.roles or None)
    mesh = mesh_panels(cs, cfg.mesh)
    fields = solve_basis(mesh, max_panels=cfg.max_panels).rf_field()
    z = find_minimum(fields, DriveConfig(cfg.rf_frequency, 1.0), cfg.ion)
    return cs, mesh, fields, z


def _mode(cfg: TrapConfig):
    if cfg.scale == "none":
        return "none"
    if cfg.regime == "ground_plane":
        return "ion_height"
    return cfg.scale


def scale_to_separation(family, params, separation=DEFAULT_SEPARATION, **settings) -> dict:
    """Trap lengths uniformly rescaled so the ion sits ``separation`` um from the metal.

    ``settings`` are further :class:`TrapConfig` fields (``gap``, ``scale``,
    ``regime``, ``mesh``...).  See :func:`scale_trap`.
    """
    cfg = config_from_params(family, params, separation=float(separation), **settings)
    return scale_trap(cfg).params


def scale_trap(cfg: TrapConfig) -> ScaledTrap:
    """Uniformly rescale the trap lengths until the ion sits at ``cfg.separation``.

    In ``separation`` mode the minimum ion-electrode distance is matched; in
    ``ion_height`` mode the height above the substrate plane.  The gap is a
    fabrication constant and is not scaled, so the factor is found by
    fixed-point iteration ``s <- s * target / measured``.
    """
    mode = _mode(cfg)
    target = cfg.separation
    factor = 1.0
    params = dict(cfg.params)
    for it in range(1, _MAX_ITER + 1):
        cs, mesh, fields, z = _solve(cfg, params)
        dist = fields.distance_to_electrodes(z)
        measured = z[1] if mode == "ion_height" else dist
        if mode == "none" or abs(measured - target) <= _FIXED_POINT_TOL:
            break
        if not measured > 0:
            raise AnalysisError("ion sits below the substrate plane; cannot scale to a height")
        step = target / measured
        factor *= step
        params = scaled_params(cfg.params, factor)
    else:
        raise AnalysisError(f"separation scaling did not converge in {_MAX_ITER} iterations")
    _check_regime(cfg, z, dist)
    return ScaledTrap(params, factor, cs, mesh, fields, np.asarray(z), dist, it)


def _check_regime(cfg, z, dist):
    if cfg.regime is None:
        return
    sep = cfg.separation
    if cfg.regime == "walls" and z[1] < sep - SEPARATION_TOL:
        raise RegimeMismatch(
            f"walls regime needs the ion at least {sep:g} um above the ground plane, found {z[1]:.4g}"
        )
    if cfg.regime == "ground_plane" and dist < sep - SEPARATION_TOL:
        raise RegimeMismatch(
            f"ground_plane regime needs the walls at least {sep:g} um away, found {dist:.4g}"
        )


@dataclass
class TrapResult:
    """Operating point of one trap.

    ``errors`` maps a field name to the reason it could not be computed; the
    field is then NaN (or, for ``depth``, a lower bound when the basin is open
    within the search window).
    """

    family: TrapFamily
    params: dict
    scale_factor: float = math.nan
    depth: float = math.nan  # eV
    C2: float = math.nan
    C3_prime: float = math.nan
    C4_prime: float = math.nan
    na_above: float = math.nan
    na_below: float = math.nan
    ion_position: tuple = (math.nan, math.nan)
    separation: float = math.nan
    rf_voltage: float = math.nan
    secular_frequencies: tuple = ()
    escape_point: tuple | None = None
    diagnostics: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.errors

    @property
    def status(self):
        if not self.errors:
            flags = self.diagnostics.get("flags", ())
            return "ok" if not flags else "ok:" + "+".join(flags)
        names = sorted({e.split(":", 1)[0] for e in self.errors.values()})
        return "error:" + "+".join(names)


def _reason(exc):
    return f"{type(exc).__name__}: {exc}"


def analyze_trap(cfg: TrapConfig) -> TrapResult:
    """Scale, calibrate and characterise one trap.

    Failures of the geometry, the solve or the minimum search raise; failures of
    the later per-quantity steps are recorded in ``TrapResult.errors``.
    """
    scaled = scale_trap(cfg)
    fields, z = scaled.fields, scaled.ion
    res = TrapResult(cfg.family, scaled.params, scale_factor=scaled.factor,
                     ion_position=(float(z[0]), float(z[1])), separation=scaled.separation)
    res.diagnostics.update(panels=scaled.mesh.n_panels, condition=float(fields.solution.conditioning),
                           scale_iterations=scaled.iterations)

    v = calibrate_rf_voltage(fields, cfg.ion, cfg.rf_frequency, cfg.target_secular,
                             minimum=z, mode=cfg.secular_mode)
    drive = DriveConfig(cfg.rf_frequency, v)
    res.rf_voltage = float(v)
    res.secular_frequencies = tuple((float(f), float(a)) for f, a in
                                    secular_frequencies(fields, drive, cfg.ion, z))

    try:
        esc, depth, saddle = find_escape_saddle(fields, drive, cfg.ion, z)
        res.depth = float(depth)
        res.escape_point = (float(esc[0]), float(esc[1]))
        res.diagnostics["saddle_refined"] = bool(saddle.refined)
    except NoSaddleFound as exc:
        res.errors["depth"] = _reason(exc)
        if exc.lower_bound is not None:
            res.depth = float(exc.lower_bound)
            res.diagnostics["depth_is_lower_bound"] = True
    except TrenchfieldError as exc:
        res.errors["depth"] = _reason(exc)

    try:
        fit = fit_multipoles(fields, z, scaled.separation, v0=1.0)
        res.C2, res.C3_prime, res.C4_prime = (float(c) for c in derived_ratios(fit))
        flags = list(fit.flags)
        _, _, robust = radius_sensitivity(fields, z, scaled.separation, v0=1.0)
        if not robust:
            flags.append("radius")
        res.diagnostics.update(fit_residual=fit.residual, flags=tuple(flags))
    except TrenchfieldError as exc:
        for key in ("C2", "C3_prime", "C4_prime"):
            res.errors[key] = _reason(exc)

    for direction in ("above", "below"):
        try:
            na, limiting = numerical_aperture(scaled.cross_section, z, direction)
            setattr(res, f"na_{direction}", float(na))
            res.diagnostics[f"na_{direction}_limit"] = limiting
        except TrenchfieldError as exc:
            res.errors[f"na_{direction}"] = _reason(exc)
    return res


# --- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """One-parameter sweep; ``swept`` is the length playing the role of ``w``."""

    base: TrapConfig
    swept: str
    values: tuple

    def __post_init__(self):
        if self.swept not in parameter_names(self.base.family):
            raise UnknownParameter(f"{self.base.family.value} has no parameter {self.swept!r}")
        vals = tuple(float(v) for v in self.values)
        if list(vals) != sorted(vals):
            raise ValueError("sweep values must be sorted ascending")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_params(cls, family, swept, values, fixed, **kw):
        fixed = dict(fixed)
        fixed.setdefault(swept, values[0])
        return cls(config_from_params(family, fixed, **kw), swept, tuple(values))

    def config_for(self, w):
        return self.base.with_params(**{self.swept: w})


@dataclass
class SweepRow:
    w_name: str
    w: float
    result: TrapResult | None
    error: str | None = None
    family: TrapFamily | None = None

    @property
    def status(self):
        return self.result.status if self.result is not None else self.error


def _row(spec: SweepSpec, w):
    try:
        cfg = spec.config_for(w)
        return SweepRow(spec.swept, w, analyze_trap(cfg), family=spec.base.family)
    except TrenchfieldError as exc:
        return SweepRow(spec.swept, w, None, "error:" + type(exc).__name__, spec.base.family)


def _row_task(args):
    return _row(*args)


def run_sweep(spec: SweepSpec, jobs=1):
    """Analyse every value of the sweep; rows come back in input order.

    A failing geometry produces a row with ``error`` set instead of aborting.
    With ``jobs > 1`` rows run on a process pool.
    """
    tasks = [(spec, w) for w in spec.values]
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [_row(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_row_task, tasks))


def _fmt(x):
    return "nan" if x is None or not math.isfinite(x) else f"{x:.9g}"


def rows_to_csv(rows, out=None):
    """Serialise sweep rows; returns the text when ``out`` is None."""
    buf = io.StringIO() if out is None else out
    buf.write(f"# trenchfield sweep csv schema {CSV_SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        r = row.result or TrapResult(row.family, {})
        writer.writerow([
            (row.family or r.family).value, row.w_name, _fmt(row.w), _fmt(r.depth),
            _fmt(r.C2), _fmt(r.C3_prime), _fmt(r.C4_prime), _fmt(r.na_above), _fmt(r.na_below),
            _fmt(r.ion_position[0]), _fmt(r.ion_position[1]), _fmt(r.rf_voltage), row.status,
        ])
    return buf.getvalue() if out is None else None


def read_csv(text):
    """Parse a sweep CSV back into a list of dicts (values as strings)."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def with_separation(cfg: TrapConfig, separation):
    return replace(cfg, separation=float(separation))

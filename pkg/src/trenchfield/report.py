"""Trap reports, the reference-table regression and solver validation.

Every machine-readable document carries ``schema_version``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .analytic import set_strips
from .bem import solve_basis
from .config import TrapConfig, config_from_params
from .errors import NoSaddleFound, TrenchfieldError
from .geometry import MeshPolicy, TrapFamily, build_cross_section, coaxial_mesh, mesh_panels
from .multipole import derived_ratios, fit_multipoles
from .pseudopotential import DriveConfig, IonProperties, calibrate_rf_voltage, find_escape_point, find_minimum
from .reference import ATTRIBUTION, DEFAULT_ATTRIBUTION, QUANTITIES, REFERENCE_VERSION, TABLE, TOLERANCES
from .sweep import TrapResult, analyze_trap

SCHEMA_VERSION = 1
REPORT_FIELDS = ("depth", "C2", "C3_prime", "C4_prime", "na_above", "na_below",
                 "ion_position", "rf_voltage")


def _clean(x):
    """JSON-safe copy: NaN/inf become None, tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if hasattr(x, "value"):
        return x.value
    return x


# --- single trap --------------------------------------------------------------

@dataclass
class TrapReport:
    """Every field of one analysed trap, or the reason it is missing."""

    family: TrapFamily
    params: dict
    depth: float
    C2: float
    C3_prime: float
    C4_prime: float
    na_above: float
    na_below: float
    ion_position: tuple
    rf_voltage: float
    diagnostics: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @classmethod
    def from_result(cls, res: TrapResult):
        diag = dict(res.diagnostics)
        diag.update(scale_factor=res.scale_factor, separation=res.separation,
                    secular_frequencies=res.secular_frequencies, escape_point=res.escape_point)
        failures = dict(res.errors)
        for name in REPORT_FIELDS:
            value = getattr(res, name)
            bad = (not all(math.isfinite(v) for v in value)) if isinstance(value, tuple) else not math.isfinite(value)
            if bad and name not in failures:
                failures[name] = "not computed"
        return cls(res.family, dict(res.params), res.depth, res.C2, res.C3_prime, res.C4_prime,
                   res.na_above, res.na_below, res.ion_position, res.rf_voltage, diag, failures)

    @property
    def ok(self):
        return not self.failures

    def to_dict(self):
        d = {"schema_version": SCHEMA_VERSION, "kind": "trap_report", "family": self.family.value,
             "params": self.params}
        for name in REPORT_FIELDS:
            d[name] = getattr(self, name)
        d["diagnostics"] = self.diagnostics
        d["failures"] = self.failures
        return _clean(d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self):
        lines = [f"trap          {self.family.value}",
                 "params        " + ", ".join(f"{k}={v:.6g}" for k, v in self.params.items())]
        for label, name, fmt in (("depth (eV)", "depth", ".4g"), ("C2", "C2", ".4f"),
                                 ("C3'", "C3_prime", ".4f"), ("C4'", "C4_prime", ".4f"),
                                 ("NA above", "na_above", ".4f"), ("NA below", "na_below", ".4f"),
                                 ("RF voltage", "rf_voltage", ".4g")):
            value = getattr(self, name)
            note = f"  [{self.failures[name]}]" if name in self.failures else ""
            lines.append(f"{label:<14}{value:{fmt}}{note}")
        x, y = self.ion_position
        lines.append(f"ion (um)      ({x:.3f}, {y:.3f})")
        return "\n".join(lines)


def analyze(cfg: TrapConfig) -> TrapReport:
    """Full pipeline for one configured trap."""
    return TrapReport.from_result(analyze_trap(cfg))


# --- reference table regression ------------------------------------------------

@dataclass(frozen=True)
class Cell:
    family: TrapFamily
    quantity: str
    published: float
    computed: float
    tolerance: str
    passed: bool
    attribution: str = ""


@dataclass
class RegressionReport:
    profile: str
    cells: list
    mesh_study: dict
    timings: dict
    errors: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.errors and all(c.passed for c in self.cells)

    def failing(self):
        return [c for c in self.cells if not c.passed]

    def to_dict(self):
        return _clean({
            "schema_version": SCHEMA_VERSION, "kind": "table1_regression",
            "reference_version": REFERENCE_VERSION, "profile": self.profile, "passed": self.passed,
            "cells": [c.__dict__ for c in self.cells], "mesh_study": self.mesh_study,
            "timings_s": self.timings, "errors": self.errors,
        })

    def to_text(self):
        lines = [f"{'trap':<30}{'quantity':<10}{'published':>10}{'computed':>11}  {'tol':<13}result"]
        for c in self.cells:
            lines.append(f"{c.family.value:<30}{c.quantity:<10}{c.published:>10.4g}{c.computed:>11.4g}  "
                         f"{c.tolerance:<13}{'pass' if c.passed else 'FAIL'}")
            if not c.passed:
                study = self.mesh_study.get(c.family.value, {}).get(c.quantity)
                if study is not None:
                    lines.append(f"{'':<40}mesh study: {study:+.2e} relative change at half panel length")
                lines.append(f"{'':<40}attribution: {c.attribution}")
        for fam, err in self.errors.items():
            lines.append(f"{fam:<30}error: {err}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} ({self.profile} tolerances)")
        return "\n".join(lines)


def _value(res, quantity):
    return getattr(res, quantity)


def regress_table1(profile="paper", families=None, overrides=None, mesh_study=True):
    """Run the representative traps and compare with the reference table.

    Parameters
    ----------
    profile : {"paper", "strict"}
    families : iterable, optional
        Subset of families to run; all eight by default.
    overrides : dict, optional
        Family -> parameter overrides (used to check that a perturbed
        geometry is caught).
    mesh_study : bool
        For each trap with a failing cell, rerun with half the panel length
        and record the relative change of every quantity.
    """
    policy = TOLERANCES[profile]
    fams = [TrapFamily(f) for f in (families or TABLE)]
    overrides = {TrapFamily(k): v for k, v in (overrides or {}).items()}
    cells, study, timings, errors = [], {}, {}, {}
    for fam in fams:
        ref = TABLE[fam]
        params = {**ref.params, **overrides.get(fam, {})}
        cfg = config_from_params(fam, params)
        t0 = time.perf_counter()
        try:
            res = analyze_trap(cfg)
        except TrenchfieldError as exc:
            errors[fam.value] = f"{type(exc).__name__}: {exc}"
            continue
        timings[fam.value] = time.perf_counter() - t0
        fam_cells = []
        for q in QUANTITIES:
            computed = _value(res, q)
            ok, _, desc = policy.check(fam, q, ref.values[q], computed)
            ok = bool(ok and math.isfinite(computed) and q not in res.errors)
            fam_cells.append(Cell(fam, q, ref.values[q], computed, desc, ok,
                                  "" if ok else ATTRIBUTION.get(fam, DEFAULT_ATTRIBUTION)))
        cells.extend(fam_cells)
        if mesh_study and not all(c.passed for c in fam_cells):
            fine = replace(cfg, mesh=MeshPolicy(l_min=cfg.mesh.l_min / 2, l_max=cfg.mesh.l_max / 2,
                                                grading_fraction=cfg.mesh.grading_fraction,
                                                outer_factor=cfg.mesh.outer_factor))
            try:
                res_fine = analyze_trap(fine)
                study[fam.value] = {q: (_value(res_fine, q) - _value(res, q)) / abs(_value(res, q))
                                    if _value(res, q) else math.nan for q in QUANTITIES}
            except TrenchfieldError as exc:
                study[fam.value] = {"error": f"{type(exc).__name__}: {exc}"}
    return RegressionReport(profile, cells, study, timings, errors)


# --- solver validation ---------------------------------------------------------

SET_RATIOS = (0.05, 0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 2.7, 3.0)
NEAR_EQUAL = (0.5, 3.0)  # a/b range of the "a ~ b" regime
NEAR_TOL, FAR_TOL = 0.02, 0.10
EXTENT_TOL = 0.005
REFINE_TOL = 0.01


def characterise(fields, ion=None, rf_frequency=40.0, target_secular=4.0, seed_region=None):
    """Height, depth, C2, C3', C4' of an RF basis field (r0 = ion height)."""
    ion = ion or IonProperties()
    z = find_minimum(fields, DriveConfig(rf_frequency, 1.0), ion, seed_region)
    v = calibrate_rf_voltage(fields, ion, rf_frequency, target_secular, minimum=z)
    try:
        _, depth = find_escape_point(fields, DriveConfig(rf_frequency, v), ion, z)
    except NoSaddleFound:
        depth = math.nan
    fit = fit_multipoles(fields, z, float(z[1]))
    c2, c3, c4 = derived_ratios(fit)
    return {"height": float(z[1]), "depth": float(depth), "C2": c2, "C3_prime": c3, "C4_prime": c4,
            "rf_voltage": float(v)}


def set_geometry_for_ratio(ratio, height=75.0):
    """Symmetric SET ``(a, b)`` with ``a / b = ratio`` and gapless null at ``height``."""
    A = height / math.sqrt(1 + 2 * ratio)
    return {"a": 2 * ratio * A, "b": 2 * A}


def compare_set(ratio, height=75.0, gap=1.0, mesh=None):
    """Relative deviations of the gapped BEM SET from the gapless closed form."""
    params = set_geometry_for_ratio(ratio, height)
    exact = characterise(set_strips("set_symmetric", params))
    cs = build_cross_section("set_symmetric", params, gap=gap)
    bem = characterise(solve_basis(mesh_panels(cs, mesh)).rf_field())
    dev = {k: abs(bem[k] - exact[k]) / abs(exact[k]) for k in ("height", "depth", "C2", "C3_prime", "C4_prime")}
    return {"ratio": ratio, "params": params, "analytic": exact, "bem": bem, "deviation": dev,
            "max_deviation": max(dev.values())}


@dataclass
class ValidationReport:
    checks: list  # (name, value, limit, passed, detail)
    details: dict

    @property
    def passed(self):
        return all(c[3] for c in self.checks)

    def to_dict(self):
        return _clean({"schema_version": SCHEMA_VERSION, "kind": "solver_validation",
                       "passed": self.passed,
                       "checks": [dict(zip(("name", "value", "limit", "passed", "detail"), c))
                                  for c in self.checks],
                       "details": self.details})

    def to_text(self):
        lines = [f"{name:<34}{value:>11.3e}  <= {limit:<8.3g}{'pass' if ok else 'FAIL'}  {detail}"
                 for name, value, limit, ok, detail in self.checks]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def validate_solver(ratios=SET_RATIOS):
    """Coax, BEM-vs-closed-form SET, mesh refinement and extent doubling."""
    checks, details = [], {}

    # (i) coaxial capacitor against ln(b/r)/ln(b/a)
    errs = []
    for n in (64, 128, 256, 512):
        sol = solve_basis(coaxial_mesh(50.0, 200.0, n))
        v = float(sol.potential(np.array([[100.0, 0.0]]), {"inner": 1.0})[0])
        errs.append(abs(v - 0.5) / 0.5)
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    details["coax_errors"] = errs
    checks.append(("coax potential, 512 panels", errs[-1], 0.005, errs[-1] <= 0.005 and monotone,
                   "monotone" if monotone else "not monotone"))

    # (ii) symmetric SET against the gapless closed form
    rows = [compare_set(r) for r in ratios]
    details["set_comparison"] = rows
    near = [r["max_deviation"] for r in rows if NEAR_EQUAL[0] <= r["ratio"] <= NEAR_EQUAL[1]]
    far = [r["max_deviation"] for r in rows if r["ratio"] < NEAR_EQUAL[0]]
    if near:
        checks.append(("SET vs closed form, a ~ b", max(near), NEAR_TOL, max(near) <= NEAR_TOL,
                       f"a/b in [{NEAR_EQUAL[0]:g}, {NEAR_EQUAL[1]:g}]"))
    if far:
        checks.append(("SET vs closed form, a << b", max(far), FAR_TOL, max(far) <= FAR_TOL,
                       f"a/b down to {min(r['ratio'] for r in rows):g}"))

    # (iii) mesh refinement on the representative symmetric SET
    ref = TABLE[TrapFamily.SET_SYMMETRIC].params
    cs = build_cross_section("set_symmetric", ref)
    coarse = characterise(solve_basis(mesh_panels(cs)).rf_field())
    fine = characterise(solve_basis(mesh_panels(cs, MeshPolicy(l_min=0.125, l_max=2.5))).rf_field())
    change = max(abs(fine[k] - coarse[k]) / abs(coarse[k]) for k in ("height", "depth", "C2", "C3_prime", "C4_prime"))
    details["refinement"] = {"default": coarse, "half": fine}
    checks.append(("mesh refinement (half panel size)", change, REFINE_TOL, change <= REFINE_TOL, "max over quantities"))

    # (iv) doubling the truncation extent of the ground plane
    wide = build_cross_section("set_symmetric", ref, extent=2 * cs.extent)
    far_c = characterise(solve_basis(mesh_panels(wide)).rf_field())
    dc2 = abs(far_c["C2"] - coarse["C2"]) / coarse["C2"]
    details["extent"] = {"default": coarse, "doubled": far_c}
    checks.append(("extent doubling, C2", dc2, EXTENT_TOL, dc2 <= EXTENT_TOL, f"extent {cs.extent:g} -> {wide.extent:g} um"))
    return ValidationReport(checks, details)

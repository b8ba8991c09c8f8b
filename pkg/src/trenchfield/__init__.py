"""2D boundary-element analysis of surface, trench and wafer ion-trap cross-sections."""

__version__ = "0.1.0"

from .analytic import StripSet, set_field, set_strips, strip_potential
from .bem import BemSolution, FieldEvaluator, field_at, potential_at, solve_basis
from .config import TrapConfig, config_from_params, load_config, parse_config, parse_geometry_config
from .geometry import CrossSection, MeshPolicy, PanelMesh, Role, TrapFamily, build_cross_section, mesh_panels
from .multipole import MultipoleFit, derived_ratios, fit_multipoles
from .optics import numerical_aperture
from .pseudopotential import (
    DriveConfig,
    IonProperties,
    TrapEquilibrium,
    calibrate_rf_voltage,
    find_escape_point,
    find_minimum,
    pseudopotential_at,
    secular_frequencies,
    trap_equilibrium,
)
from .report import TrapReport, analyze, regress_table1, validate_solver
from .sweep import SweepRow, SweepSpec, analyze_trap, rows_to_csv, run_sweep, scale_to_separation

__all__ = [
    "BemSolution", "CrossSection", "DriveConfig", "FieldEvaluator", "IonProperties", "MeshPolicy",
    "MultipoleFit", "PanelMesh", "Role", "StripSet", "SweepRow", "SweepSpec", "TrapConfig",
    "TrapEquilibrium", "TrapFamily", "TrapReport", "analyze", "analyze_trap", "build_cross_section",
    "calibrate_rf_voltage", "config_from_params", "derived_ratios", "field_at", "find_escape_point", "find_minimum",
    "fit_multipoles", "load_config", "mesh_panels", "numerical_aperture", "parse_config",
    "parse_geometry_config", "potential_at", "pseudopotential_at", "regress_table1", "rows_to_csv", "run_sweep",
    "scale_to_separation", "secular_frequencies", "set_field", "set_strips", "solve_basis",
    "strip_potential", "trap_equilibrium", "validate_solver",
]

"""Trap configuration documents.

A configuration is an INI-style document::

    [trap]
    family = wafer_antisymmetric
    k = 53
    # optional: gap, separation, extent, scale, regime, role.<electrode_id>

    [mesh]
    l_max = 5

    [drive]
    rf_frequency = 40
    target_secular = 4

    [ion]
    mass = 40

Only ``[trap] family`` and the family's required lengths are mandatory.  Every
other key has a default; unknown sections or keys are rejected.

Keys
----
[trap]
    family, the family's lengths (a b phi c d beta alpha e f g h epsilon mu i j
    xi k lambda tau), gap, separation, extent, scale (separation | ion_height |
    none), regime (walls | ground_plane), role.<electrode_id> (RF | DC | Ground)
[mesh]
    l_min, l_max, grading_fraction, outer_factor, max_panels
[drive]
    rf_frequency (MHz), target_secular (MHz), secular_mode (lower | upper | mean)
[ion]
    mass (amu), charge (elementary charges)
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace

from .bem import DEFAULT_MAX_PANELS
from .errors import MissingRequiredKey, NonPositiveLength, ParseError, UnknownFamily
from .geometry import (
    DEFAULT_GAP,
    DEFAULT_SEPARATION,
    MeshPolicy,
    Role,
    TrapFamily,
    parameter_names,
    validate_params,
)
from .pseudopotential import IonProperties

ALL_LENGTHS = sorted({n for f in TrapFamily for n in parameter_names(f)})
SCALE_MODES = ("separation", "ion_height", "none")
REGIMES = ("walls", "ground_plane")
SECULAR_MODES = ("lower", "upper", "mean")

_SECTIONS = {
    "trap": {"family", "gap", "separation", "extent", "scale", "regime", *ALL_LENGTHS},
    "mesh": {"l_min", "l_max", "grading_fraction", "outer_factor", "max_panels"},
    "drive": {"rf_frequency", "target_secular", "secular_mode"},
    "ion": {"mass", "charge"},
}


@dataclass(frozen=True)
class TrapConfig:
    family: TrapFamily
    params: dict
    roles: dict = field(default_factory=dict)
    gap: float = DEFAULT_GAP
    separation: float = DEFAULT_SEPARATION
    extent: float | None = None
    scale: str = "separation"
    regime: str | None = None
    mesh: MeshPolicy = field(default_factory=MeshPolicy)
    max_panels: int = DEFAULT_MAX_PANELS
    rf_frequency: float = 40.0
    target_secular: float = 4.0
    secular_mode: str = "lower"
    ion: IonProperties = field(default_factory=IonProperties)

    def with_params(self, **params):
        p = dict(self.params)
        p.update(params)
        return replace(self, params=validate_params(self.family, p))


def _locate(text, section, key):
    """1-based (line, column) of ``key``'s value inside ``section``."""
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        m = re.match(r"(\s*)([^=:#;\s][^=:]*?)\s*[=:]\s*", line)
        if m and current == section and m.group(2).strip() == key:
            return n, m.end() + 1
    return None, None


def _number(text, section, key, raw, kind=float):
    try:
        return kind(raw)
    except ValueError:
        line, col = _locate(text, section, key)
        raise ParseError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}", line, col) from None


def parse_config(text: str) -> TrapConfig:
    """Parse a configuration document; see the module docstring for keys."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   strict=True, empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside any section", exc.lineno, 1) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(str(exc).split(":")[0].strip(), exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(f"cannot parse {line.strip()!r}", lineno, 1) from None

    for section in cp.sections():
        if section not in _SECTIONS:
            raise ParseError(f"unknown section [{section}]", _section_line(text, section), 1)
        for key in cp[section]:
            if key in _SECTIONS[section] or (section == "trap" and key.startswith("role.")):
                continue
            line, _ = _locate(text, section, key)
            raise ParseError(f"unknown key {key!r} in [{section}]", line, 1)

    if not cp.has_section("trap") or "family" not in cp["trap"]:
        raise MissingRequiredKey("family")
    trap = cp["trap"]
    fam_raw = trap["family"].strip()
    try:
        family = TrapFamily(fam_raw)
    except ValueError:
        line, _ = _locate(text, "trap", "family")
        raise UnknownFamily(
            f"unknown family {fam_raw!r} (line {line}); expected one of "
            + ", ".join(f.value for f in TrapFamily)
        ) from None

    params = {}
    for key in ALL_LENGTHS:
        if key in trap:
            params[key] = _number(text, "trap", key, trap[key])
    params = validate_params(family, params)

    roles = {}
    for key in trap:
        if key.startswith("role."):
            raw = trap[key].strip()
            try:
                role = Role[raw.upper()]
            except KeyError:
                line, col = _locate(text, "trap", key)
                raise ParseError(f"unknown role {raw!r}", line, col) from None
            roles[key[5:]] = role

    kw = {}
    for key in ("gap", "separation", "extent"):
        if key in trap:
            kw[key] = _number(text, "trap", key, trap[key])
    for key, allowed in (("scale", SCALE_MODES), ("regime", REGIMES)):
        if key in trap:
            value = trap[key].strip()
            if value not in allowed:
                line, col = _locate(text, "trap", key)
                raise ParseError(f"{key} must be one of {', '.join(allowed)}", line, col)
            kw[key] = value

    if cp.has_section("mesh"):
        m = cp["mesh"]
        policy = {}
        for key in ("l_min", "l_max", "grading_fraction", "outer_factor"):
            if key in m:
                policy[key] = _number(text, "mesh", key, m[key])
        kw["mesh"] = MeshPolicy(**policy)
        if "max_panels" in m:
            kw["max_panels"] = _number(text, "mesh", "max_panels", m["max_panels"], int)
    if cp.has_section("drive"):
        d = cp["drive"]
        for key in ("rf_frequency", "target_secular"):
            if key in d:
                kw[key] = _number(text, "drive", key, d[key])
        if "secular_mode" in d:
            value = d["secular_mode"].strip()
            if value not in SECULAR_MODES:
                line, col = _locate(text, "drive", "secular_mode")
                raise ParseError(f"secular_mode must be one of {', '.join(SECULAR_MODES)}", line, col)
            kw["secular_mode"] = value
    if cp.has_section("ion"):
        i = cp["ion"]
        ion = {}
        if "mass" in i:
            ion["mass"] = _number(text, "ion", "mass", i["mass"])
        if "charge" in i:
            ion["charge"] = _number(text, "ion", "charge", i["charge"], int)
        kw["ion"] = IonProperties(**ion)

    cfg = TrapConfig(family=family, params=params, roles=roles, **kw)
    _check(cfg)
    return cfg


def _section_line(text, section):
    for n, line in enumerate(text.splitlines(), 1):
        if re.match(r"\s*\[\s*" + re.escape(section) + r"\s*\]", line):
            return n
    return None


def _check(cfg: TrapConfig):
    for name in ("gap", "separation"):
        if not getattr(cfg, name) > 0:
            raise NonPositiveLength(f"{name} must be positive")
    if cfg.extent is not None and not cfg.extent > 0:
        raise NonPositiveLength("extent must be positive")
    if not (cfg.rf_frequency > 0 and cfg.target_secular > 0):
        raise ParseError("rf_frequency and target_secular must be positive")
    if cfg.regime is not None and not cfg.family.value.startswith("stacked"):
        raise ParseError("regime applies to stacked trench families only")
    if cfg.regime == "ground_plane" and cfg.family is TrapFamily.STACKED_TRENCH_SYMMETRIC:
        raise ParseError("the symmetric stacked trench supports only the walls regime")


def load_config(path) -> TrapConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def parse_geometry_config(text):
    """``(family, params, mesh policy, drive/ion settings)`` from a document."""
    cfg = parse_config(text)
    drive = {"rf_frequency": cfg.rf_frequency, "target_secular": cfg.target_secular,
             "secular_mode": cfg.secular_mode, "ion": cfg.ion}
    return cfg.family, cfg.params, cfg.mesh, drive


def config_from_params(family, params, **kw) -> TrapConfig:
    family = TrapFamily(family)
    return TrapConfig(family=family, params=validate_params(family, params), **kw)

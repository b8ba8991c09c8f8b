"""Command-line front end.

Subcommands: analyze, sweep, regress-table1, validate, mesh-dump.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 regression or validation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import load_config
from .errors import AnalysisError, ConfigError, GeometryError, SolverError, TrenchfieldError
from .geometry import build_cross_section, mesh_panels
from .report import SCHEMA_VERSION, TrapReport, regress_table1, validate_solver
from .sweep import SweepRow, SweepSpec, analyze_trap, rows_to_csv, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_REGRESSION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="trenchfield", description="2D ion-trap cross-section analysis")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, metavar="PATH", help="trap configuration file")
        sp.add_argument("--out", metavar="DIR", help="directory for output files")

    a = sub.add_parser("analyze", help="analyse one trap")
    common(a)
    a.add_argument("--format", choices=("csv", "report-doc"), default="report-doc")

    s = sub.add_parser("sweep", help="sweep one length of a trap")
    common(s)
    s.add_argument("--param", required=True, help="length to sweep (the variable w)")
    s.add_argument("--values", required=True, help="comma list, or start:stop:step")
    s.add_argument("--jobs", type=int, default=1, metavar="N")
    s.add_argument("--format", choices=("csv", "report-doc"), default="csv")
    s.add_argument("--plot", action="store_true", help="also write sweep.png")

    r = sub.add_parser("regress-table1", help="compare the representative traps with the reference table")
    common(r, config=False)
    r.add_argument("--tolerance-profile", choices=("paper", "strict"), default="paper")
    r.add_argument("--format", choices=("csv", "report-doc"), default="report-doc")

    v = sub.add_parser("validate", help="solver validation against closed-form references")
    common(v, config=False)

    m = sub.add_parser("mesh-dump", help="write the panel mesh of a configured trap")
    common(m)
    return p


def _values(text):
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError("--values range must be start:stop:step with step > 0")
        start, stop, step = parts
        n = int(round((stop - start) / step))
        return [round(start + k * step, 10) for k in range(n + 1)]
    try:
        return sorted(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"cannot parse --values {text!r}") from None


def _write(out, name, text):
    if out is None:
        return None
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _error_doc(exc):
    doc = {"schema_version": SCHEMA_VERSION, "kind": "error", "error": type(exc).__name__,
           "stage": getattr(exc, "stage", "trenchfield"), "message": str(exc)}
    for attr in ("line", "column", "lower_bound", "condition"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    return doc


def _exit_code(exc):
    if isinstance(exc, (ConfigError, GeometryError, OSError, ValueError)) and not isinstance(
        exc, (SolverError, AnalysisError)
    ):
        return EXIT_USAGE
    return EXIT_NUMERICAL


def _cmd_analyze(args):
    cfg = load_config(args.config)
    res = analyze_trap(cfg)
    report = TrapReport.from_result(res)
    print(report.to_text())
    if args.format == "csv":
        row = SweepRow("", float("nan"), res, family=cfg.family)
        _write(args.out, "analyze.csv", rows_to_csv([row]))
    else:
        _write(args.out, "report.json", report.to_json() + "\n")
    return EXIT_OK


def _plot(rows, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = [r for r in rows if r.result is not None]
    w = [r.w for r in ok]
    fig, axes = plt.subplots(2, 3, figsize=(11, 6), sharex=True)
    for ax, (label, name) in zip(axes.flat, (("depth (eV)", "depth"), ("C2", "C2"), ("C3'", "C3_prime"),
                                              ("C4'", "C4_prime"), ("NA above", "na_above"),
                                              ("NA below", "na_below"))):
        ax.plot(w, [getattr(r.result, name) for r in ok], "o--")
        ax.set_ylabel(label)
    for ax in axes[-1]:
        ax.set_xlabel(f"{rows[0].w_name} (um)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _cmd_sweep(args):
    cfg = load_config(args.config)
    spec = SweepSpec(cfg, args.param, tuple(_values(args.values)))
    rows = run_sweep(spec, jobs=args.jobs)
    text = rows_to_csv(rows)
    if args.format == "csv":
        sys.stdout.write(text)
        _write(args.out, "sweep.csv", text)
    else:
        docs = [TrapReport.from_result(r.result).to_dict() if r.result else
                {"schema_version": SCHEMA_VERSION, "w": r.w, "status": r.status} for r in rows]
        doc = json.dumps({"schema_version": SCHEMA_VERSION, "kind": "sweep", "w_name": spec.swept,
                          "rows": docs}, indent=2, sort_keys=True)
        print(doc)
        _write(args.out, "sweep.json", doc + "\n")
    if args.plot:
        if args.out is None:
            raise ConfigError("--plot needs --out")
        _plot(rows, os.path.join(args.out, "sweep.png"))
    return EXIT_OK


def _cmd_regress(args):
    rep = regress_table1(args.tolerance_profile)
    print(rep.to_text())
    if args.format == "csv":
        lines = [f"# trenchfield table1 regression schema {SCHEMA_VERSION}",
                 "family,quantity,published,computed,tolerance,passed"]
        lines += [f"{c.family.value},{c.quantity},{c.published:.9g},{c.computed:.9g},{c.tolerance},{c.passed}"
                  for c in rep.cells]
        _write(args.out, "table1.csv", "\n".join(lines) + "\n")
    else:
        _write(args.out, "table1.json", json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if rep.passed else EXIT_REGRESSION


def _cmd_validate(args):
    rep = validate_solver()
    print(rep.to_text())
    _write(args.out, "validation.json", json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if rep.passed else EXIT_REGRESSION


def _cmd_mesh_dump(args):
    cfg = load_config(args.config)
    cs = build_cross_section(cfg.family, cfg.params, gap=cfg.gap, extent=cfg.extent,
                             separation=cfg.separation, roles=cfg.roles or None)
    mesh = mesh_panels(cs, cfg.mesh)
    lines = [f"# trenchfield panel mesh schema {SCHEMA_VERSION}", "x0_um,y0_um,x1_um,y1_um,electrode_id,role"]
    for (x0, y0), (x1, y1), k in zip(mesh.start, mesh.end, mesh.electrode_index):
        eid = mesh.electrode_ids[k]
        lines.append(f"{x0:.9g},{y0:.9g},{x1:.9g},{y1:.9g},{eid},{mesh.roles[eid].value}")
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write(args.out, "mesh.csv", text)
        print(f"{mesh.n_panels} panels written")
    return EXIT_OK


_COMMANDS = {"analyze": _cmd_analyze, "sweep": _cmd_sweep, "regress-table1": _cmd_regress,
             "validate": _cmd_validate, "mesh-dump": _cmd_mesh_dump}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (TrenchfieldError, OSError, ValueError) as exc:
        print(json.dumps(_error_doc(exc)), file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())

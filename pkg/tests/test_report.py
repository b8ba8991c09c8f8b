import json
import math

import pytest

from trenchfield.config import config_from_params
from trenchfield.geometry import TrapFamily
from trenchfield.reference import TABLE, TOLERANCES
from trenchfield.report import SCHEMA_VERSION, TrapReport, analyze, compare_set, regress_table1
from trenchfield.sweep import TrapResult


def test_trap_report_document():
    rep = analyze(config_from_params("set_antisymmetric", TABLE["set_antisymmetric"].params))
    doc = json.loads(rep.to_json())
    assert doc["schema_version"] == SCHEMA_VERSION and doc["kind"] == "trap_report"
    assert doc["family"] == "set_antisymmetric"
    for key in ("depth", "C2", "C3_prime", "C4_prime", "na_above", "na_below", "ion_position", "rf_voltage"):
        assert key in doc
    assert doc["failures"] == {} and rep.ok
    assert doc["na_above"] == 1.0
    assert "C2" in rep.to_text()


def test_missing_fields_are_reported():
    res = TrapResult(TrapFamily.SET_SYMMETRIC, {"a": 1.0, "b": 1.0}, C2=0.2, C3_prime=1.0, C4_prime=0.7,
                     na_above=1.0, na_below=1.0, ion_position=(0.0, 75.0), rf_voltage=100.0,
                     errors={"depth": "NoSaddleFound: open basin"})
    rep = TrapReport.from_result(res)
    assert rep.failures == {"depth": "NoSaddleFound: open basin"}
    doc = rep.to_dict()
    assert doc["depth"] is None and json.dumps(doc)


def test_tolerance_policy():
    paper = TOLERANCES["paper"]
    fam = TrapFamily.SET_SYMMETRIC
    assert paper.check(fam, "C2", 0.17, 0.186)[0] and not paper.check(fam, "C2", 0.17, 0.19)[0]
    assert paper.check(fam, "depth", 0.06, 0.068)[0] and not paper.check(fam, "depth", 0.06, 0.07)[0]
    assert paper.check(fam, "C3_prime", 0.02, 0.069)[0] and not paper.check(fam, "C3_prime", 0.02, 0.071)[0]
    assert paper.check(fam, "C4_prime", 0.75, 0.86)[0] and not paper.check(fam, "C4_prime", 0.75, 0.87)[0]
    wafer = TrapFamily.WAFER_ANTISYMMETRIC
    assert paper.check(wafer, "C3_prime", 0.001, 0.0049)[0] and not paper.check(wafer, "C3_prime", 0.001, 0.006)[0]
    strict = TOLERANCES["strict"]
    assert not strict.check(fam, "C2", 0.17, 0.18)[0]


def test_regression_subset_passes():
    rep = regress_table1(families=["set_symmetric", "simple_trench_antisymmetric"], mesh_study=False)
    assert rep.passed, rep.to_text()
    assert len(rep.cells) == 8
    doc = rep.to_dict()
    assert doc["schema_version"] == SCHEMA_VERSION and doc["passed"]


def test_corrupted_geometry_is_flagged():
    fam = "stacked_trench_antisymmetric"
    j = TABLE[fam].params["j"]
    rep = regress_table1(families=[fam], overrides={fam: {"j": 1.2 * j}})
    assert not rep.passed
    bad = rep.failing()
    assert bad and all(c.attribution for c in bad)
    assert fam in rep.mesh_study
    assert "attribution" in rep.to_text() and "mesh study" in rep.to_text()


def test_wafer_hexapole_cells():
    rep = regress_table1(families=["wafer_symmetric", "wafer_antisymmetric"], mesh_study=False)
    c3 = [c for c in rep.cells if c.quantity == "C3_prime"]
    assert len(c3) == 2 and all(c.passed and abs(c.computed) <= 0.005 for c in c3)


def test_compare_set_near_equal():
    row = compare_set(1.0)
    assert row["max_deviation"] <= 0.02
    assert set(row["deviation"]) == {"height", "depth", "C2", "C3_prime", "C4_prime"}
    assert all(math.isfinite(v) for v in row["deviation"].values())

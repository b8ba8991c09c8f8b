"""Geometry sweeps of the trench traps.

Two series:

* the anti-symmetric simple trench with its wall height f varied and no
  rescaling, showing that the ion height stops depending on f once the wall
  is a few ion heights tall;
* the anti-symmetric stacked trench with the RF electrode height j varied,
  rescaled to a 75 um ion-electrode distance at every point.

Rows come back in input order and are written in the sweep CSV format.  Pass
``--plot`` to also save sweep.png (needs matplotlib).

Run:  python demos/03_trench_sweeps.py [--plot]
"""

import sys

import numpy as np

from trenchfield import SweepSpec, config_from_params, rows_to_csv, run_sweep
from trenchfield.reference import TABLE

simple = config_from_params("simple_trench_antisymmetric", TABLE["simple_trench_antisymmetric"].params,
                            scale="none")
rows = run_sweep(SweepSpec(simple, "f", tuple(np.linspace(100.0, 600.0, 6))), jobs=2)
print("simple trench, unscaled:  f (um) -> ion height (um)")
for r in rows:
    print(f"  {r.w:6.0f} -> {r.result.ion_position[1]:7.2f}")

stacked = config_from_params("stacked_trench_antisymmetric", TABLE["stacked_trench_antisymmetric"].params)
rows = run_sweep(SweepSpec(stacked, "j", (100.0, 130.0, 160.0, 190.0, 220.0)), jobs=2)
print()
print(rows_to_csv(rows))

if "--plot" in sys.argv:
    from trenchfield.cli import _plot

    _plot(rows, "sweep.png")
    print("wrote sweep.png")

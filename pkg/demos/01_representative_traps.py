"""Characterise the eight representative traps.

Each trap is built at its reference dimensions, scaled so the ion sits 75 um
from the nearest electrode, calibrated to a 4 MHz secular frequency at a
40 MHz drive, and then reduced to depth, multipole ratios and optical access.
The published values are printed next to ours.

Run:  python demos/01_representative_traps.py
"""

import time

from trenchfield import analyze_trap, config_from_params
from trenchfield.reference import TABLE

print(f"{'trap':<30}{'depth eV':>14}{'C2':>14}{'C3p':>16}{'C4p':>16}{'NA up':>7}{'NA down':>8}{'t (s)':>7}")
for family, ref in TABLE.items():
    t0 = time.perf_counter()
    res = analyze_trap(config_from_params(family, ref.params))
    pub = ref.values
    cells = [f"{res.depth:.3f} ({pub['depth']:.2f})", f"{res.C2:.3f} ({pub['C2']:.2f})",
             f"{res.C3_prime:.4f} ({pub['C3_prime']:.3f})", f"{res.C4_prime:.4f} ({pub['C4_prime']:.3f})"]
    print(f"{family.value:<30}{cells[0]:>14}{cells[1]:>14}{cells[2]:>16}{cells[3]:>16}"
          f"{res.na_above:>7.3f}{res.na_below:>8.3f}{time.perf_counter() - t0:>7.1f}")

# The published value is in brackets.  The wafer depths land about 16 % high;
# `trenchfield regress-table1` prints the mesh study and the attribution.

import functools
import os

import numpy as np
import pytest
from hypothesis import settings

from trenchfield.bem import solve_basis
from trenchfield.geometry import TrapFamily, build_cross_section, mesh_panels
from trenchfield.reference import TABLE

# reproducible property tests; HYPOTHESIS_PROFILE=explore for fresh examples
settings.register_profile("repro", derandomize=True)
settings.register_profile("explore")
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repro"))

# lines reported by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def solved(family, gap=1.0):
    """Solved basis of a representative trap, shared across tests."""
    ref = TABLE[TrapFamily(family)]
    cs = build_cross_section(ref.family, ref.params, gap=gap)
    return solve_basis(mesh_panels(cs))


@pytest.fixture(scope="session")
def set_sym():
    return solved("set_symmetric")


@pytest.fixture(scope="session")
def set_sym_fields(set_sym):
    return set_sym.rf_field()


class Quadrupole:
    """Pure 2D quadrupole phi = (E0 / 2 r0) (x^2 - y^2) about ``centre``."""

    def __init__(self, e0=1.0, r0=75.0, centre=(0.0, 0.0)):
        self.e0, self.r0, self.centre = e0, r0, np.asarray(centre, dtype=float)

    def potential(self, pts):
        p = np.asarray(pts, dtype=float) - self.centre
        return self.e0 / (2 * self.r0) * (p[..., 0] ** 2 - p[..., 1] ** 2)

    def field(self, pts):
        p = np.asarray(pts, dtype=float) - self.centre
        return -self.e0 / self.r0 * np.stack([p[..., 0], -p[..., 1]], axis=-1)

    def field_jacobian(self, pts):
        p = np.asarray(pts, dtype=float)
        jac = np.zeros(p.shape[:-1] + (2, 2))
        jac[..., 0, 0] = -self.e0 / self.r0
        jac[..., 1, 1] = self.e0 / self.r0
        return jac

    def window(self):
        return (-300.0, 300.0, -300.0, 300.0)

    seed_region = (-50.0, 50.0, -50.0, 50.0)


@pytest.fixture
def quadrupole():
    return Quadrupole()

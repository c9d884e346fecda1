"""Shared fixtures; the expensive solves are session-scoped and reused."""

from __future__ import annotations

import pytest

from beltrami_lab import (GridSpec, MollifierSpec, make_log_example_coefficient,
                          make_radial_stretch_coefficient, mollify, neumann_solve)


@pytest.fixture(scope="session")
def grid256():
    return GridSpec(256, 2.0)


@pytest.fixture(scope="session")
def grid512():
    return GridSpec(512, 2.0)


@pytest.fixture(scope="session")
def radial_mu_512(grid512):
    return make_radial_stretch_coefficient(2.0, 0.8, grid512)


@pytest.fixture(scope="session")
def radial_sol_512(radial_mu_512):
    return neumann_solve(radial_mu_512, tol=1e-12, max_iter=300)


@pytest.fixture(scope="session")
def logmoll_mu_512(grid512):
    # the CLI-default mollification for N=512 (1/n = 4 * spacing)
    raw = make_log_example_coefficient(0.3, grid512)
    return mollify(raw, MollifierSpec(32))


@pytest.fixture(scope="session")
def logmoll_sol_512(logmoll_mu_512):
    return neumann_solve(logmoll_mu_512, tol=1e-12, max_iter=300)

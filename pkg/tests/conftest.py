"""Shared fixtures: bundled device parameters and scaled variants."""
from __future__ import annotations

from dataclasses import replace

import pytest

import photocool as pc


@pytest.fixture(scope="session")
def benchmark():
    return pc.bundled_device("benchmark")[0]


@pytest.fixture(scope="session")
def metzger():
    return pc.bundled_device("metzger_like")[0]


@pytest.fixture(scope="session")
def p_unit(benchmark):
    """Power at which the static force gradient equals m*omega_m^2 (u = 1)."""
    d = pc.occupation_budget(benchmark)
    u0 = d.grad_f / (benchmark.cantilever.m * benchmark.cantilever.omega_m**2)
    return benchmark.cavity.P / u0


def at_drive(p, u, p_unit):
    """Device variant driven at a given dimensionless gradient u (linear in P)."""
    return replace(p, cavity=replace(p.cavity, P=float(u * p_unit)))

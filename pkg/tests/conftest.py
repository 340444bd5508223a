"""Shared fixtures: session-cached kernel tables and pulse contexts.

Building a kernel table or pulse context runs many adaptive quadratures
(0.2-0.5 s each), so both are memoized for the whole session, keyed by
coupling parameters, temperature, and dissipator mode.
"""

from __future__ import annotations

import pytest

from polaronlab.dynamics import build_pulse_context
from polaronlab.kernels import build_kernel_table
from polaronlab.model import PhononCoupling

REFERENCE_COUPLING = PhononCoupling(alpha=0.13, omega_c=1.8, mu=1.1e-3)
REFERENCE_TEMPERATURES = (5.6, 10.0, 15.0, 17.5, 20.0)


@pytest.fixture(scope="session")
def reference_coupling() -> PhononCoupling:
    return REFERENCE_COUPLING


@pytest.fixture(scope="session")
def table_cache():
    cache: dict = {}

    def get(coupling: PhononCoupling = REFERENCE_COUPLING, temperature: float = 10.0):
        key = (coupling, temperature)
        if key not in cache:
            cache[key] = build_kernel_table(coupling, temperature)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def context_cache():
    cache: dict = {}

    def get(
        coupling: PhononCoupling = REFERENCE_COUPLING,
        temperature: float = 10.0,
        virtual_mode: str = "static",
    ):
        key = (coupling, temperature, virtual_mode)
        if key not in cache:
            cache[key] = build_pulse_context(
                coupling, temperature, virtual_mode=virtual_mode
            )
        return cache[key]

    return get

import functools
import sys

import numpy as np
import pytest
from hypothesis import settings

from ssh_coherence.model import ModelParams
from ssh_coherence.phonons import analyze
from ssh_coherence.relax import excited_occupation, ground_state_occupation, optimize_geometry

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def relaxed_chain(n, level=None, **overrides):
    params = ModelParams(nSites=n, **overrides)
    f = ground_state_occupation(params) if level is None else excited_occupation(level, params)
    return params, optimize_geometry(f, params)


@functools.lru_cache(maxsize=None)
def chain_modes(n, level=None):
    params, relaxed = relaxed_chain(n, level)
    return params, relaxed, analyze(relaxed, params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])

"""Shared fixtures and the acceptance-summary reporting hook."""
from __future__ import annotations

import numpy as np
import pytest

from pointprox.geometry import Cube, DiscreteMeasure
from pointprox.kernels import (
    ConvolvedSensorKernel,
    CutGaussian1D,
    FastSpread1D,
    TriangularGaussian1D,
    unit_mass_scale,
)

# Registry filled by tests/test_acceptance.py; one entry per numbered
# criterion, printed as a one-line verdict at the end of the run.
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d}: {verdict}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cut_gaussian_pair():
    """Forward/smoothing kernel pair used by the benchmark experiments."""
    sigma = 0.05
    scale = unit_mass_scale(sigma)
    spread = CutGaussian1D(sigma, 0.15, scale)
    smoothing = TriangularGaussian1D(sigma, 0.15, scale)
    return spread, smoothing


@pytest.fixture(scope="session")
def fast_pair():
    spread = FastSpread1D(0.16)
    return spread, spread


def random_measure(rng, dim: int, n: int, lo: float = 0.0, hi: float = 1.0) -> DiscreteMeasure:
    locs = rng.uniform(lo, hi, size=(n, dim))
    weights = rng.normal(scale=2.0, size=n)
    return DiscreteMeasure(locs, weights)

from __future__ import annotations

import math

import numpy as np
import pytest

from sturmwave.coefficients import CoefficientSet, Grid, PiecewiseSmoothFn
from sturmwave.eigensolver import build_basis

# frozen oracle values (recomputed in test_oracles.py)
DELTA_S = (
    3.43101430538415094643086616102,
    9.52961782950268,
    15.7713481583116,
    22.0365200061261,
)
DELTA_LAMBDA = (
    11.7718591637506878101147529336,
    90.8136159763753853941836652758,
    248.735422730678275623436333357,
    485.608213980397384842879408518,
)
BUMP_PEAK = 0.828568839869105151664159062986
SQUARED_BUMP_PEAK = 1.01690005221685005938110283965
DELTA_THETA_100 = 9.92807113516009
DELTA_LOGR_100 = -0.06476162950012575
FORCED_SPOT = 0.012665147955292222  # u(0.5, 0.25) for f = t sin(2 pi x)
X1MX_TAIL_32 = 9.935604024799555e-06


def free() -> CoefficientSet:
    return CoefficientSet(PiecewiseSmoothFn.constant(0.0), PiecewiseSmoothFn.constant(0.0), "free")


def delta() -> CoefficientSet:
    return CoefficientSet(PiecewiseSmoothFn.constant(0.0), PiecewiseSmoothFn.step(0.5, 1.0), "delta")


def constant_p(c: float = 2.0) -> CoefficientSet:
    return CoefficientSet(PiecewiseSmoothFn.constant(c), PiecewiseSmoothFn.constant(0.0), f"p={c}")


def smooth_p() -> PiecewiseSmoothFn:
    return PiecewiseSmoothFn.smooth(lambda x: 0.5 * np.sin(2 * np.pi * x),
                                    lambda x: np.pi * np.cos(2 * np.pi * x))


def smooth_nu() -> PiecewiseSmoothFn:
    return PiecewiseSmoothFn.smooth(lambda x: 0.3 * np.cos(2 * np.pi * x),
                                    lambda x: -0.6 * np.pi * np.sin(2 * np.pi * x))


def smooth() -> CoefficientSet:
    return CoefficientSet(smooth_p(), smooth_nu(), "smooth")


def sine(k: float) -> PiecewiseSmoothFn:
    return PiecewiseSmoothFn.smooth(lambda x: np.sin(k * math.pi * x), lambda x: k * math.pi * np.cos(k * math.pi * x))


@pytest.fixture(scope="session")
def grid4096() -> Grid:
    return Grid(4096)


@pytest.fixture(scope="session")
def free_basis(grid4096):
    return build_basis(free(), 32, grid4096)


@pytest.fixture(scope="session")
def free16(grid4096):
    return build_basis(free(), 16, grid4096)


@pytest.fixture(scope="session")
def delta16(grid4096):
    return build_basis(delta(), 16, grid4096)


@pytest.fixture(scope="session")
def p2_basis(grid4096):
    return build_basis(constant_p(2.0), 16, grid4096)


@pytest.fixture(scope="session")
def smooth32(grid4096):
    return build_basis(smooth(), 32, grid4096)


@pytest.fixture(scope="session")
def smooth64(grid4096):
    return build_basis(smooth(), 64, grid4096)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import DELTA_LAMBDA, constant_p, delta, free, smooth
from sturmwave.coefficients import CoefficientSet, PiecewiseSmoothFn
from sturmwave.errors import CapabilityError, OracleError, ParameterError
from sturmwave.oracle import fd_eigen, fd_self_convergence, fd_wave, l2_distance, operator_matrix

PI = math.pi


def test_fd_eigen_free():
    assert abs(fd_eigen(free(), 1, m=2000)[0] - PI**2) <= 5e-3


def test_fd_eigen_delta_well():
    assert fd_eigen(delta(), 1, m=2000)[0] == pytest.approx(DELTA_LAMBDA[0], abs=1e-2)


def test_fd_eigen_constant_p():
    assert abs(fd_eigen(constant_p(2.0), 1, m=2000)[0] - (PI**2 + 1)) <= 5e-3


@pytest.mark.parametrize("cs_factory,basis_name", [(free, "free16"), (delta, "delta16"), (smooth, "smooth32"),
                                                   (lambda: constant_p(2.0), "p2_basis")])
def test_fd_eigen_agrees_with_eigensolver(cs_factory, basis_name, request):
    basis = request.getfixturevalue(basis_name)
    m = 2000
    h = 1.0 / m
    fd = fd_eigen(cs_factory(), 8, m=m)
    for n in range(1, 9):
        lam = basis.lambdas[n - 1]
        assert abs(fd[n - 1] - lam) <= max(1e-2, 10 * h * h * lam)


def test_operator_matrix_refuses_singular_p():
    cs = CoefficientSet(PiecewiseSmoothFn.step(0.5, 1.0), PiecewiseSmoothFn.constant(0.0))
    with pytest.raises(CapabilityError):
        operator_matrix(cs, 100)


def test_fd_wave_dalembert():
    sol = fd_wave(free(), lambda x: np.sin(PI * x), lambda x: 0 * x, None, 1.0, 1e-3, 5e-4)
    u = sol.at(1.0)
    assert l2_distance(sol.x, u, -np.sin(PI * sol.x)) <= 1e-3
    assert u[0] == 0.0 and u[-1] == 0.0
    assert sol.k <= 0.9 * sol.h


def test_fd_wave_forced_closed_form():
    sol = fd_wave(free(), lambda x: 0 * x, lambda x: 0 * x, lambda t, x: np.sin(PI * x), 1.0, 1e-3, 5e-4)
    assert np.max(np.abs(sol.at(1.0) - 2 / PI**2 * np.sin(PI * sol.x))) <= 1e-3


def test_fd_wave_smooth_self_convergence_distance():
    cs = smooth()
    u0 = lambda x: 4 * x * (1 - x)  # noqa: E731
    z = lambda x: 0 * x  # noqa: E731
    fine = fd_wave(cs, u0, z, None, 0.5, 1e-3, 5e-4)
    coarse = fd_wave(cs, u0, z, None, 0.5, 2e-3, 1e-3)
    assert l2_distance(coarse.x, fine.at(0.5)[::2], coarse.at(0.5)) <= 4e-4


def test_fd_wave_second_order_on_smooth_problem():
    ratio, (d_coarse, d_fine) = fd_self_convergence(smooth(), lambda x: np.sin(PI * x), lambda x: 0 * x, None, 1.0,
                                                    1e-3, [0.2, 0.4, 0.6, 0.8, 1.0])
    assert 3.5 <= ratio <= 4.5
    assert d_fine < d_coarse


def test_fd_wave_cfl_violation():
    with pytest.raises(ParameterError):
        fd_wave(free(), np.sin, np.sin, None, 1.0, 1e-2, 0.95e-2)


def test_fd_wave_refuses_dirac_q():
    with pytest.raises(CapabilityError):
        fd_wave(delta(), np.sin, np.sin, None, 1.0, 1e-2, 5e-3)


def test_fd_wave_instability_detected():
    cs = CoefficientSet(PiecewiseSmoothFn.constant(0.0), PiecewiseSmoothFn.smooth(lambda x: -2000 * x, lambda x: -2000 + 0 * x))
    with pytest.raises(OracleError):
        fd_wave(cs, lambda x: np.sin(PI * x), lambda x: 0 * x, None, 1.0, 1e-2, 5e-3)


def test_fd_solution_snapshot_lookup():
    sol = fd_wave(free(), lambda x: np.sin(PI * x), lambda x: 0 * x, None, 1.0, 1e-2, 5e-3, snapshots=[0.0, 0.5])
    assert np.array_equal(sol.at(0.0), np.sin(PI * sol.x) * (sol.x > 0) * (sol.x < 1))
    with pytest.raises(ParameterError):
        sol.at(0.25)

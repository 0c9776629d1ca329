from __future__ import annotations

import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import DELTA_S, FORCED_SPOT, smooth
from sturmwave.coefficients import Grid
from sturmwave.eigensolver import build_basis
from sturmwave.errors import CapabilityError, ParameterError, ResolutionError, UsageError
from sturmwave.evolution import ForcingTerm, InitialData, solve_forced, solve_homogeneous
from sturmwave.spectral import forward, inverse

PI = math.pi


def l2(grid, v):
    return math.sqrt(grid.integrate(v * v))


def data(grid, u0=None, u1=None):
    z = np.zeros(grid.m + 1)
    return InitialData(z if u0 is None else u0, z if u1 is None else u1)


# -- homogeneous ----------------------------------------------------------------


def test_dalembert_single_mode(free16, grid4096):
    x = grid4096.nodes
    sol = solve_homogeneous(free16, data(grid4096, np.sin(PI * x)), 2.0)
    for t in (0.0, 0.3, 1.0, 1.7):
        assert l2(grid4096, sol.evaluate(t)["u"] - math.cos(PI * t) * np.sin(PI * x)) < 1e-10
    assert np.max(np.abs(sol.evaluate(1.0)["u"] + np.sin(PI * x))) < 1e-10


def test_velocity_data_single_mode(free16, grid4096):
    x = grid4096.nodes
    sol = solve_homogeneous(free16, data(grid4096, None, np.sin(PI * x)), 1.0)
    for t in (0.25, 0.8):
        want = math.sin(PI * t) * np.sin(PI * x) / PI
        assert np.max(np.abs(sol.evaluate(t)["u"] - want)) < 1e-10


def test_delta_ground_mode_evolution(delta16, grid4096):
    s = DELTA_S[0]
    x = grid4096.nodes
    u0 = np.array([oracles.delta_well_mode(s, xx) for xx in x])
    u0 /= l2(grid4096, u0)
    sol = solve_homogeneous(delta16, data(grid4096, u0), 1.0)
    for t in (0.2, 0.7, 1.0):
        assert np.max(np.abs(sol.evaluate(t)["u"] - math.cos(s * t) * u0)) < 1e-6


def test_channels_at_special_times(free16, grid4096):
    x = grid4096.nodes
    sol = solve_homogeneous(free16, data(grid4096, np.sin(PI * x)), 1.0)
    assert np.max(np.abs(sol.evaluate(0.0, ("du_dt",))["du_dt"])) < 1e-12
    assert np.max(np.abs(sol.evaluate(0.5)["u"])) < 1e-9
    assert np.max(np.abs(sol.evaluate(0.0, ("du_dx",))["du_dx"] - PI * np.cos(PI * x))) < 1e-7


def test_second_derivative_channel(smooth32, grid4096):
    x = grid4096.nodes
    sol = solve_homogeneous(smooth32, data(grid4096, np.sin(PI * x) ** 3), 1.0)
    out = sol.evaluate(0.4, ("du_dx", "d2u_dx2"))
    h = grid4096.h
    fd = (out["du_dx"][2:] - out["du_dx"][:-2]) / (2 * h)
    assert np.max(np.abs(fd - out["d2u_dx2"][1:-1])) < 1e-4 * np.max(np.abs(out["d2u_dx2"]))


def test_second_derivative_refused_for_jump_nu(delta16, grid4096):
    sol = solve_homogeneous(delta16, data(grid4096, np.sin(PI * grid4096.nodes)), 1.0)
    with pytest.raises(CapabilityError):
        sol.evaluate(0.1, ("d2u_dx2",))


def test_energy_examples(free16, grid4096):
    x = grid4096.nodes
    s1, s2 = np.sin(PI * x), np.sin(2 * PI * x)
    cases = [((s1, None), PI**2 / 2), ((None, s1), 0.5), ((s1, s2), PI**2 / 2 + 0.5)]
    for (u0, u1), E in cases:
        sol = solve_homogeneous(free16, data(grid4096, u0, u1), 2.0)
        vals = [sol.spectral_energy(t) for t in (0.0, 0.3, 1.7)]
        assert vals[0] == pytest.approx(E, rel=1e-10)
        assert max(abs(v - vals[0]) for v in vals) <= 1e-12 * vals[0]


@pytest.mark.parametrize("name", ["free16", "delta16", "smooth32"])
def test_invariants_generic_data(name, request, grid4096):
    basis = request.getfixturevalue(name)
    x = grid4096.nodes
    u0 = x * (1 - x) * np.exp(x)
    u1 = np.sin(3 * PI * x) * x
    sol = solve_homogeneous(basis, data(grid4096, u0, u1), 2.0)
    E0 = sol.spectral_energy(0.0)
    for t in np.linspace(0, 2, 9):
        u = sol.evaluate(t)["u"]
        nrm = l2(grid4096, u)
        assert abs(u[0]) <= 1e-8 * nrm and abs(u[-1]) <= 1e-8 * nrm
        assert abs(sol.spectral_energy(t) - E0) <= 1e-12 * E0
    proj = inverse(basis, forward(basis, u0))
    assert l2(grid4096, sol.evaluate(0.0)["u"] - proj) <= 1e-10


def test_time_reversal_cosine_form(smooth32, grid4096):
    x = grid4096.nodes
    sol = solve_homogeneous(smooth32, data(grid4096, x * (1 - x)), 1.0)
    for t in (0.2, 0.9):
        T, _ = sol.mode_amplitudes(t)
        assert np.max(np.abs(T - sol.A.values * np.cos(np.sqrt(smooth32.lambdas) * t))) < 1e-15


def test_tail_fraction(free16, grid4096):
    x = grid4096.nodes
    assert solve_homogeneous(free16, data(grid4096, np.sin(PI * x)), 1.0).tail_fraction() < 1e-20
    assert solve_homogeneous(free16, data(grid4096, np.sin(16 * PI * x)), 1.0).tail_fraction() == pytest.approx(1.0)
    assert solve_homogeneous(free16, data(grid4096), 1.0).tail_fraction() == 0.0


def test_homogeneous_argument_errors(free16, grid4096):
    sol = solve_homogeneous(free16, data(grid4096, np.sin(PI * grid4096.nodes)), 1.0)
    with pytest.raises(ParameterError):
        sol.evaluate(1.5)
    with pytest.raises(UsageError):
        sol.evaluate(0.5, ("v",))
    with pytest.raises(ParameterError):
        solve_homogeneous(free16, data(grid4096), 0.0)


# -- forced ---------------------------------------------------------------------


def test_forced_closed_form(free16, grid4096):
    x = grid4096.nodes
    f = ForcingTerm(lambda t, xx: np.sin(PI * xx))
    sol = solve_forced(free16, data(grid4096), f, 1.0)
    for t in (0.25, 0.5, 1.0):
        want = (1 - math.cos(PI * t)) / PI**2 * np.sin(PI * x)
        assert np.max(np.abs(sol.evaluate(t)["u"] - want)) < 1e-6
        wdt = math.sin(PI * t) / PI * np.sin(PI * x)
        assert np.max(np.abs(sol.evaluate(t, ("du_dt",))["du_dt"] - wdt)) < 1e-6
    assert np.max(np.abs(sol.evaluate(1.0)["u"] - 2 / PI**2 * np.sin(PI * x))) < 1e-6


def test_zero_forcing_matches_homogeneous(smooth32, grid4096):
    x = grid4096.nodes
    d = data(grid4096, x * (1 - x), np.sin(PI * x))
    hom = solve_homogeneous(smooth32, d, 1.0)
    frc = solve_forced(smooth32, d, ForcingTerm(lambda t, xx: np.zeros_like(xx)), 1.0)
    assert np.array_equal(hom.A.values, frc.A.values) and np.array_equal(hom.B.values, frc.B.values)
    for t in (0.3, 1.0):
        T1, dT1 = hom.mode_amplitudes(t)
        T2, dT2 = frc.mode_amplitudes(t)
        assert np.array_equal(T1, T2) and np.array_equal(dT1, dT2)


def test_forced_symbolic_spot_check(free16, grid4096):
    f = ForcingTerm(lambda t, xx: t * np.sin(2 * PI * xx))
    sol = solve_forced(free16, data(grid4096), f, 0.5)
    i = grid4096.m // 4
    assert sol.evaluate(0.5)["u"][i] == pytest.approx(FORCED_SPOT, abs=1e-9)


def test_forced_energy_refused(free16, grid4096):
    sol = solve_forced(free16, data(grid4096), ForcingTerm(lambda t, xx: np.sin(PI * xx)), 1.0)
    with pytest.raises(CapabilityError):
        sol.spectral_energy(0.5)


def test_duhamel_step_rule(free16):
    f = ForcingTerm(lambda t, xx: np.sin(PI * xx), dt_base=1e-3)
    grid_t = f.time_grid(free16, 1.0)
    dt = grid_t[1] - grid_t[0]
    assert dt <= min(1e-3, 2 * PI / (20 * math.sqrt(free16.lambdas[-1]))) + 1e-15
    assert (len(grid_t) - 1) % 2 == 0


def test_resolution_error_names_mode(free16):
    f = ForcingTerm(lambda t, xx: np.sin(PI * xx), dt_base=0.1, max_nodes=60)
    with pytest.raises(ResolutionError) as exc:
        f.time_grid(free16, 1.0)
    assert exc.value.n is not None and 1 <= exc.value.n <= free16.N
    assert f"n={exc.value.n}" in str(exc.value)


def test_non_finite_forcing(free16, grid4096):
    f = ForcingTerm(lambda t, xx: np.full_like(xx, np.inf))
    with pytest.raises(ParameterError):
        solve_forced(free16, data(grid4096), f, 1.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(-1e3, 1e3).filter(lambda v: abs(v) > 1e-6))
def test_solution_map_linear(a):
    basis, grid = _basis()
    x = grid.nodes
    d = InitialData(x * (1 - x), np.sin(2 * PI * x))
    f = ForcingTerm(lambda t, xx: np.cos(t) * np.sin(PI * xx))
    base = solve_forced(basis, d, f, 1.0)
    scaled = solve_forced(basis, d.scaled(a), f.scaled(a), 1.0)
    u, ua = base.evaluate(0.7)["u"], scaled.evaluate(0.7)["u"]
    assert np.max(np.abs(ua - a * u)) <= 1e-12 * abs(a) * np.max(np.abs(u))


@functools.lru_cache(maxsize=None)
def _basis():
    g = Grid(512)
    return build_basis(smooth(), 8, g), g

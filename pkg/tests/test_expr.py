from __future__ import annotations

import math

import numpy as np
import pytest

from sturmwave.errors import ConfigError
from sturmwave.expr import (
    CompiledExpr, as_function_of_tx, as_function_of_x, compile_spec, is_zero_spec, preset_expression,
    sample_with_derivatives,
)

PI = math.pi
X = np.linspace(0.0, 1.0, 101)


def test_arithmetic_and_functions():
    f = as_function_of_x("2*x^2 - exp(x)/3 + sqrt(1 + x)*cos(pi*x)")
    ref = 2 * X**2 - np.exp(X) / 3 + np.sqrt(1 + X) * np.cos(PI * X)
    assert np.allclose(f(X), ref, atol=1e-14)
    dref = 4 * X - np.exp(X) / 3 + 0.5 / np.sqrt(1 + X) * np.cos(PI * X) - PI * np.sqrt(1 + X) * np.sin(PI * X)
    assert np.allclose(f.derivative(X), dref, atol=1e-13)


def test_heaviside_breakpoint_and_right_continuity():
    f = as_function_of_x("1 + 2*H(x - 0.25)")
    assert f.breakpoints == (0.25,)
    assert f(np.array([0.2499999, 0.25, 0.3])).tolist() == [1.0, 3.0, 3.0]
    assert f.jumps() == [(0.25, 2.0)]
    assert np.all(f.derivative(X) == 0.0)


def test_heaviside_reversed_argument():
    f = as_function_of_x("H(0.5 - x)")
    assert f(np.array([0.1, 0.9])).tolist() == [1.0, 0.0]


def test_presets():
    assert preset_expression("zero") == "0"
    assert preset_expression("const:2.5") == "2.5"
    assert preset_expression("x + 1") is None
    assert np.allclose(as_function_of_x("sin:3")(X), np.sin(3 * PI * X))
    assert np.allclose(as_function_of_x("kink")(X), np.minimum(X, 1 - X), atol=1e-15)
    h = as_function_of_x("heaviside:0.4:-2")
    assert h(np.array([0.3, 0.5])).tolist() == [0.0, -2.0]
    bump = as_function_of_x("bump")
    assert bump(np.array([0.5]))[0] == pytest.approx(1.0)
    assert bump(np.array([0.2, 0.8])).tolist() == [0.0, 0.0]


@pytest.mark.parametrize("bad", ["const", "const:a", "sin", "heaviside:0.5", "heaviside:1.2:1", "zero:1", "kink:2"])
def test_malformed_presets(bad):
    with pytest.raises(ConfigError):
        compile_spec(bad)


@pytest.mark.parametrize("bad", ["y + 1", "x +", "__import__('os')", "log(x)", "H(x*x - 0.25)", "H(x - t)",
                                 "sin(x, x)", "[x]", "x if x else 1"])
def test_rejected_expressions(bad):
    with pytest.raises(ConfigError):
        compile_spec(bad)


def test_time_dependence():
    f = as_function_of_tx("t*sin(2*pi*x)")
    assert np.allclose(f(0.5, X), 0.5 * np.sin(2 * PI * X))
    with pytest.raises(ConfigError, match="depends on t"):
        as_function_of_x("t*x")
    assert isinstance(compile_spec("t + x"), CompiledExpr) and compile_spec("t + x").depends_on_t
    g = as_function_of_tx("x*(1 - x)")
    assert np.allclose(g(3.0, X), X * (1 - X))


def test_is_zero():
    assert is_zero_spec("zero") and is_zero_spec("0") and is_zero_spec("x - x")
    assert not is_zero_spec("sin:1")


def test_second_derivative_samples():
    v, d1, d2 = sample_with_derivatives("sin(pi*x)", X)
    assert np.allclose(d2, -PI**2 * np.sin(PI * X), atol=1e-12)
    v, d1, d2 = sample_with_derivatives("kink", X)
    assert np.all(d2 == 0.0)
    v, d1, d2 = sample_with_derivatives("bump", np.array([0.5, 0.6]))
    # bump = exp(1 - 1/(1 - s^2)), s = 4(x - 1/2): f''(1/2) = -32
    assert d2[0] == pytest.approx(-32.0, rel=1e-6)

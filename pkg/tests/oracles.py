"""Independent reference computations, deliberately free of package imports.

Each function recomputes a value frozen in the tests from first principles
(bisection, brute-force fixed-step integration, symbolic integration,
high-precision quadrature).
"""

from __future__ import annotations

import math

import mpmath as mp
import sympy as sp


def delta_well_root(j: int, dps: int = 40) -> mp.mpf:
    """j-th positive root of ``tan(s/2) + 2 s = 0`` by bisection on ((2j-1) pi, 2 j pi).

    These are the square roots of the odd-mode Dirichlet eigenvalues of
    ``-y'' + delta(x - 1/2) y`` on (0, 1).
    """
    with mp.workdps(dps):
        lo = (2 * j - 1) * mp.pi + mp.mpf(10) ** (-dps // 2)
        hi = 2 * j * mp.pi
        f = lambda s: mp.tan(s / 2) + 2 * s  # noqa: E731
        assert f(lo) < 0 < f(hi)
        for _ in range(4 * dps):
            mid = (lo + hi) / 2
            if f(mid) < 0:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2


def delta_well_mode(s: float, x: float) -> float:
    """Unnormalized odd-index delta-well mode: symmetric two-piece sine."""
    return math.sin(s * x) if x <= 0.5 else math.sin(s * (1.0 - x))


def rk4_prufer_delta(lam: float, h: float = 1e-6) -> tuple[float, float]:
    """(theta(1), log r(1)) for p = 0, nu = H(x - 1/2) by fixed-step RK4 on each half.

    On [0, 1/2] the phase is exactly ``sqrt(lam) x``; on [1/2, 1] nu = V = 1.
    """
    s = math.sqrt(lam)
    theta, logr = 0.5 * s, 0.0
    steps = int(round(0.5 / h))

    def rhs(th):
        s2, c2, sn = math.sin(2 * th), math.cos(2 * th), math.sin(th)
        return s + s2 + sn * sn / s, -(c2 + s2 / (2 * s))

    for _ in range(steps):
        k1t, k1r = rhs(theta)
        k2t, k2r = rhs(theta + 0.5 * h * k1t)
        k3t, k3r = rhs(theta + 0.5 * h * k2t)
        k4t, k4r = rhs(theta + h * k3t)
        theta += h * (k1t + 2 * k2t + 2 * k3t + k4t) / 6
        logr += h * (k1r + 2 * k2r + 2 * k3r + k4r) / 6
    return theta, logr


def bump_peak(a: int = 1, dps: int = 40) -> mp.mpf:
    """psi(0) for the normalized kernel ``c exp(-a / (1 - s^2))`` on (-1, 1)."""
    with mp.workdps(dps):
        total = mp.quad(lambda s: mp.exp(-a / (1 - s * s)), [-1, 0, 1])
        return mp.exp(-a) / total


def forced_mode_closed_form(t: float, x: float) -> float:
    """u(t, x) for p = nu = 0, zero data, f = t sin(2 pi x), by symbolic Duhamel integration."""
    T, tau, X = sp.symbols("t tau x", positive=True)
    s = 2 * sp.pi
    fn = tau * sp.integrate(sp.sin(2 * sp.pi * X) * sp.sqrt(2) * sp.sin(2 * sp.pi * X), (X, 0, 1))
    v = sp.integrate(sp.sin(s * (T - tau)) / s * fn, (tau, 0, T))
    u = v * sp.sqrt(2) * sp.sin(2 * sp.pi * X)
    return float(sp.N(u.subs({T: t, X: x}), 30))


def x1mx_sine_tail(N: int, terms: int = 200000) -> float:
    """L2 norm of the sine-series tail of x(1 - x) beyond mode N."""
    total = 0.0
    for n in range(N + 1, terms, 1):
        if n % 2:
            b = 8.0 / (math.pi * n) ** 3
            total += 0.5 * b * b
    return math.sqrt(total)

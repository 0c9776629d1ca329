"""Finite-difference reference solvers used to validate the spectral pipeline.

Both discretise the original operator ``-y'' + p y' + q y`` with centred
differences, without the exponential substitution, so agreement with the
spectral results checks that substitution end to end.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.integrate import trapezoid
from scipy.sparse.linalg import splu

from .coefficients import CoefficientSet
from .errors import CapabilityError, OracleError, ParameterError

GROWTH_LIMIT = 1e6


@dataclass(frozen=True)
class FDSolution:
    h: float
    k: float
    x: np.ndarray
    times: np.ndarray
    fields: np.ndarray  # (len(times), len(x))
    scheme: str = "leapfrog-centred"

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise ParameterError(f"no snapshot stored at t={t}")
        return self.fields[i]


def _mesh(m: int) -> np.ndarray:
    if m < 4:
        raise ParameterError(f"mesh needs at least 4 intervals, got {m}")
    return np.linspace(0.0, 1.0, m + 1)


def _q_samples(cs: CoefficientSet, x: np.ndarray, allow_delta: bool) -> np.ndarray:
    h = x[1] - x[0]
    q = cs.nu.derivative(x)
    for loc, height in cs.nu.jumps():
        if not allow_delta:
            raise CapabilityError("q = nu' has a Dirac term; the wave oracle needs function-valued q")
        j = int(round(loc / h))
        q[j] += height / h
    return q


def operator_matrix(cs: CoefficientSet, m: int, allow_delta: bool = True) -> sparse.csc_matrix:
    """Centred-difference matrix of ``-y'' + p y' + q y`` on the interior nodes."""
    if cs.regularity_class != "classical":
        raise CapabilityError("the oracle needs a classical coefficient set")
    x = _mesh(m)
    h = 1.0 / m
    xi = x[1:-1]
    p = cs.p(xi)
    q = _q_samples(cs, x, allow_delta)[1:-1]
    main = 2.0 / h**2 + q
    lower = -1.0 / h**2 - p[1:] / (2 * h)
    upper = -1.0 / h**2 + p[:-1] / (2 * h)
    return sparse.diags([lower, main, upper], [-1, 0, 1], format="csc")


def fd_eigen(cs: CoefficientSet, count: int, m: int = 2000, max_iter: int = 500, rtol: float = 1e-12) -> list[float]:
    """First ``count`` eigenvalues by shifted inverse iteration seeded at ``(pi n)^2``."""
    A = operator_matrix(cs, m, allow_delta=True)
    size = A.shape[0]
    eye = sparse.identity(size, format="csc")
    x = _mesh(m)[1:-1]
    out = []
    for n in range(1, count + 1):
        shift = (math.pi * n) ** 2
        lu = splu((A - shift * eye).tocsc())
        v = np.sin(math.pi * n * x)
        v /= np.linalg.norm(v)
        mu_old = math.inf
        for _ in range(max_iter):
            w = lu.solve(v)
            mu = float(v @ w)
            v = w / np.linalg.norm(w)
            if abs(mu - mu_old) <= rtol * abs(mu):
                break
            mu_old = mu
        else:
            raise OracleError(f"inverse iteration for mode {n} did not converge")
        out.append(shift + 1.0 / mu)
    return out


def fd_wave(cs: CoefficientSet, u0: Callable | np.ndarray, u1: Callable | np.ndarray,
            f: Callable[[float, np.ndarray], np.ndarray] | None, T_end: float, h: float, k: float,
            snapshots: Sequence[float] | None = None) -> FDSolution:
    """Leapfrog for ``u_tt = u_xx - p u_x - q u + f`` with a Taylor first step.

    ``u0``/``u1`` are callables of x or samples on the mesh ``i h``.  ``k``
    is reduced so that ``T_end`` is a whole number of steps; snapshots are
    taken at the nearest step.
    """
    m = int(round(1.0 / h))
    if abs(m * h - 1.0) > 1e-12:
        raise ParameterError(f"1/h must be an integer, got h={h}")
    if k > 0.9 * h:
        raise ParameterError(f"CFL violated: k={k} > 0.9 h={0.9 * h}")
    if cs.regularity_class != "classical":
        raise CapabilityError("the oracle needs a classical coefficient set")
    x = _mesh(m)
    steps = int(math.ceil(T_end / k - 1e-9))
    k = T_end / steps
    p = cs.p(x)
    q = _q_samples(cs, x, allow_delta=False)

    def samples(v):
        arr = np.asarray(v(x) if callable(v) else v, dtype=float)
        return np.broadcast_to(arr, x.shape).copy()

    def force(t):
        if f is None:
            return 0.0
        return np.broadcast_to(np.asarray(f(t, x), dtype=float), x.shape)

    def rhs(u, t):
        out = np.zeros_like(u)
        out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2 - p[1:-1] * (u[2:] - u[:-2]) / (2 * h) - q[1:-1] * u[1:-1]
        out[1:-1] += np.asarray(force(t))[1:-1] if f is not None else 0.0
        return out

    want = sorted(set(int(round(t / k)) for t in (snapshots if snapshots is not None else [T_end])))
    if want and (want[0] < 0 or want[-1] > steps):
        raise ParameterError("snapshot outside [0, T_end]")
    prev = samples(u0)
    v1 = samples(u1)
    prev[0] = prev[-1] = 0.0
    scale = max(np.max(np.abs(prev)), T_end * np.max(np.abs(v1)), 1e-300)
    if f is not None:
        scale = max(scale, T_end**2 * float(np.max(np.abs(force(0.0)))))
    cur = prev + k * v1 + 0.5 * k * k * rhs(prev, 0.0)
    cur[0] = cur[-1] = 0.0
    stored = {}
    if 0 in want:
        stored[0] = prev.copy()
    if 1 in want:
        stored[1] = cur.copy()
    for n in range(1, steps):
        nxt = 2 * cur - prev + k * k * rhs(cur, n * k)
        nxt[0] = nxt[-1] = 0.0
        prev, cur = cur, nxt
        if n + 1 in want:
            stored[n + 1] = cur.copy()
        if n % 64 == 0 and not np.max(np.abs(cur)) <= GROWTH_LIMIT * scale:
            raise OracleError(f"instability: field grew beyond {GROWTH_LIMIT:g} x its initial scale at t={(n + 1) * k:.4g}")
    if not np.max(np.abs(cur)) <= GROWTH_LIMIT * scale:
        raise OracleError("instability: field grew beyond the growth limit")
    times = np.array([i * k for i in want])
    return FDSolution(h=h, k=k, x=x, times=times, fields=np.vstack([stored[i] for i in want]))


def l2_distance(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Trapezoidal L2 norm of ``a - b`` on the mesh ``x``."""
    d = np.asarray(a) - np.asarray(b)
    return float(np.sqrt(trapezoid(d * d, x)))


def fd_self_convergence(cs: CoefficientSet, u0, u1, f, T_end: float, h: float,
                        snapshots: Sequence[float], courant: float = 0.5) -> tuple[float, tuple[float, float]]:
    """Ratio ``d(2h, 4h) / d(h, 2h)`` of sup-over-snapshot L2 distances on the coarsest mesh (4 for 2nd order)."""
    sols = [fd_wave(cs, u0, u1, f, T_end, hh, courant * hh, snapshots) for hh in (h, 2 * h, 4 * h)]

    def dist(fine: FDSolution, coarse: FDSolution) -> float:
        step = int(round(coarse.h / fine.h))
        return max(l2_distance(coarse.x, a[::step], b) for a, b in zip(fine.fields, coarse.fields))

    d_fine = dist(sols[0], sols[1])
    d_coarse = dist(sols[1], sols[2])
    ratio = d_coarse / d_fine if d_fine > 0 else float("inf")
    return ratio, (d_coarse, d_fine)

"""Eigenfunction-series solution of the wave problem

    u_tt + L u = f,   u(0) = u0,  u_t(0) = u1,  u(t, 0) = u(t, 1) = 0.

Each mode evolves exactly as a harmonic oscillator; the forced part uses
the variation-of-constants integrals evaluated by composite Simpson
quadrature in time.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from .coefficients import simpson_weights
from .eigensolver import SpectralBasis
from .errors import CapabilityError, ParameterError, ResolutionError, UsageError
from .spectral import SpectralCoefficients, forward, forward_many

CHANNELS = ("u", "du_dt", "du_dx", "d2u_dx2")


@dataclass(frozen=True)
class InitialData:
    """Grid samples of ``u0``, ``u1`` and, when known, their x-derivatives."""

    u0: np.ndarray
    u1: np.ndarray
    du0: np.ndarray | None = None
    d2u0: np.ndarray | None = None
    du1: np.ndarray | None = None
    d2u1: np.ndarray | None = None

    def scaled(self, a: float) -> InitialData:
        def sc(v):
            return None if v is None else a * np.asarray(v)

        return InitialData(a * np.asarray(self.u0), a * np.asarray(self.u1), sc(self.du0), sc(self.d2u0),
                           sc(self.du1), sc(self.d2u1))

    @classmethod
    def zero(cls, m: int) -> InitialData:
        z = np.zeros(m + 1)
        return cls(z, z, z, z, z, z)


@dataclass
class ForcingTerm:
    """Source ``f(t, x)`` (vectorised in x) with a per-t cache of ``(g f)_n`` tables.

    The Duhamel step is ``min(dt_base, 2 pi / (20 sqrt(lambda_N)))`` on a
    uniform grid with an even number of intervals over ``[0, t]``.
    """

    f: Callable[[float, np.ndarray], np.ndarray]
    dt_base: float = 1e-3
    max_nodes: int = 200_000
    _cache: dict = field(default_factory=dict, repr=False)

    def scaled(self, a: float) -> ForcingTerm:
        f = self.f
        return ForcingTerm(lambda t, x: a * np.asarray(f(t, x)), self.dt_base, self.max_nodes)

    def time_grid(self, basis: SpectralBasis, t: float) -> np.ndarray:
        if t <= 0.0:
            return np.array([0.0])
        steps = self.dt_base, *(2.0 * math.pi / (20.0 * np.sqrt(basis.lambdas)))
        dt = min(steps)
        count = int(math.ceil(t / dt))
        count += count % 2
        if count + 1 > self.max_nodes:
            per_mode = 2.0 * math.pi / (20.0 * np.sqrt(basis.lambdas))
            need = np.ceil(t / np.minimum(self.dt_base, per_mode))
            n = int(np.flatnonzero(need + 1 > self.max_nodes)[0]) + 1
            raise ResolutionError(f"Duhamel quadrature needs {count + 1} time nodes (budget {self.max_nodes})", n=n)
        return np.linspace(0.0, t, count + 1)

    def samples(self, t: float, x: np.ndarray) -> np.ndarray:
        v = np.broadcast_to(np.asarray(self.f(t, x), dtype=float), np.shape(x))
        if not np.all(np.isfinite(v)):
            raise ParameterError(f"forcing is not finite at t={t}")
        return v

    def mode_table(self, basis: SpectralBasis, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Time nodes on [0, t] and ``(g f)_n`` at each of them (shape ``(N, nodes)``)."""
        key = (id(basis), float(t))
        if key not in self._cache:
            times = self.time_grid(basis, t)
            x = basis.grid.nodes
            F = np.vstack([self.samples(tj, x) for tj in times])
            self._cache[key] = (times, forward_many(basis, F).T)
        return self._cache[key]

    def sup_l2(self, basis: SpectralBasis, T: float, weight: np.ndarray | None = None) -> float:
        """``max_t ||w f(t)||_{L2}`` over the Duhamel grid of [0, T]."""
        w = 1.0 if weight is None else weight
        best = 0.0
        for tj in self.time_grid(basis, T):
            v = w * self.samples(tj, basis.grid.nodes)
            best = max(best, float(np.sqrt(basis.grid.integrate(v * v))))
        return best


@dataclass(frozen=True)
class SeriesSolution:
    basis: SpectralBasis
    A: SpectralCoefficients
    B: SpectralCoefficients
    T_end: float
    forced: ForcingTerm | None = None

    @property
    def sqrt_lambdas(self) -> np.ndarray:
        return np.sqrt(self.basis.lambdas)

    def _check_t(self, t: float) -> None:
        if not (-1e-12 <= t <= self.T_end * (1 + 1e-12) + 1e-12):
            raise ParameterError(f"t={t} outside [0, {self.T_end}]")

    def duhamel(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """``int_0^t sin(s tau) F_n`` and ``int_0^t cos(s tau) F_n`` per mode."""
        N = self.basis.N
        if self.forced is None or t <= 0.0:
            return np.zeros(N), np.zeros(N)
        times, table = self.forced.mode_table(self.basis, t)
        w = simpson_weights(len(times) - 1) * (times[1] - times[0])
        phase = np.outer(self.sqrt_lambdas, times)
        return (np.sin(phase) * table) @ w, (np.cos(phase) * table) @ w

    def mode_amplitudes(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """``T_n(t)`` and ``T_n'(t)``."""
        self._check_t(t)
        s = self.sqrt_lambdas
        c, sn = np.cos(s * t), np.sin(s * t)
        A, B = self.A.values, self.B.values
        T = A * c + B * sn / s
        dT = -A * s * sn + B * c
        if self.forced is not None and t > 0.0:
            I_sin, I_cos = self.duhamel(t)
            T = T + (sn * I_cos - c * I_sin) / s
            dT = dT + c * I_cos + sn * I_sin
        return T, dT

    def evaluate(self, t: float, channels: Iterable[str] = ("u",)) -> dict[str, np.ndarray]:
        channels = tuple(channels)
        unknown = [c for c in channels if c not in CHANNELS]
        if unknown:
            raise UsageError(f"unknown channel(s) {unknown}; choose from {CHANNELS}")
        b = self.basis
        cs = b.coefficient_set
        if "d2u_dx2" in channels and not cs.q_is_function:
            raise CapabilityError("d2u_dx2 needs a function-valued q = nu'; nu has jumps here")
        T, dT = self.mode_amplitudes(t)
        out = {}
        if "u" in channels:
            out["u"] = T @ b.phi_matrix
        if "du_dt" in channels:
            out["du_dt"] = dT @ b.phi_matrix
        if "du_dx" in channels or "d2u_dx2" in channels:
            ux = T @ b.dphi_matrix
            if "du_dx" in channels:
                out["du_dx"] = ux
        if "d2u_dx2" in channels:
            x = b.grid.nodes
            u = T @ b.phi_matrix
            lam_u = (T * b.lambdas) @ b.phi_matrix
            # termwise phi_n'' = p phi_n' + (q - lambda_n) phi_n
            out["d2u_dx2"] = cs.p(x) * ux + cs.q(x) * u - lam_u
        return out

    def spectral_energy(self, t: float) -> float:
        if self.forced is not None:
            raise CapabilityError("spectral energy is only defined for homogeneous solutions")
        T, dT = self.mode_amplitudes(t)
        return float(np.sum(dT * dT + self.basis.lambdas * T * T))

    def tail_fraction(self) -> float:
        """Share of ``sum (B_n^2 + lambda_n A_n^2)`` carried by the last four modes."""
        e = self.B.values**2 + self.basis.lambdas * self.A.values**2
        total = float(e.sum())
        return 0.0 if total == 0.0 else float(e[-4:].sum() / total)

    def l2_norm(self, t: float, channel: str = "u") -> float:
        v = self.evaluate(t, (channel,))[channel]
        return float(np.sqrt(self.basis.grid.integrate(v * v)))

    def sup_l2(self, times: Iterable[float], channel: str = "u") -> float:
        return max(self.l2_norm(t, channel) for t in times)


def solve_homogeneous(basis: SpectralBasis, data: InitialData, T_end: float) -> SeriesSolution:
    if not T_end > 0:
        raise ParameterError(f"T_end must be positive, got {T_end}")
    return SeriesSolution(basis, forward(basis, data.u0), forward(basis, data.u1), float(T_end))


def solve_forced(basis: SpectralBasis, data: InitialData, f: ForcingTerm, T_end: float) -> SeriesSolution:
    if not T_end > 0:
        raise ParameterError(f"T_end must be positive, got {T_end}")
    f.samples(0.0, basis.grid.nodes)
    f.samples(float(T_end), basis.grid.nodes)
    return SeriesSolution(basis, forward(basis, data.u0), forward(basis, data.u1), float(T_end), f)

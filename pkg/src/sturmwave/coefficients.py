"""Coefficients of the operator, the weight g and their mollified regularisations.

The operator is ``L y = -y'' + p y' + q y`` on (0, 1) with ``q = nu'``.
Coefficients are stored as piecewise smooth functions with explicit
breakpoints so that quadrature and ODE integration can split there.
A jump in ``nu`` is a Dirac term in ``q``; a jump in ``p`` is a Dirac term
in ``p'`` and only exists at the descriptor level (it has to be mollified
before the eigensolver can use it).
"""

from __future__ import annotations

import functools
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import CapabilityError, EvaluationError, ParameterError

BREAK_TOL = 1e-14

_GL5 = np.polynomial.legendre.leggauss(5)
_CONV_PANELS = 4
_GL48 = np.polynomial.legendre.leggauss(48)

Fn = Callable[[np.ndarray], np.ndarray]


def _ev(f: Fn, x: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` and broadcast constant results to the shape of ``x``."""
    return np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x))


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_i = i/m`` on [0, 1] with composite Simpson weights."""

    m: int

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ParameterError(f"grid node count must be a positive integer, got {self.m!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.m + 1, dtype=float) / self.m
        x[-1] = 1.0
        x.setflags(write=False)
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        w = simpson_weights(self.m) * self.h
        w.setflags(write=False)
        return w

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature over [0, 1] along the last axis."""
        return np.asarray(values) @ self.weights


def simpson_weights(m: int) -> np.ndarray:
    """Unit-spacing composite Simpson weights for ``m`` intervals.

    Odd ``m`` closes with the 3/8 rule on the last three intervals.
    """
    w = np.zeros(m + 1)
    if m == 1:
        w[:] = 0.5
        return w
    if m == 2 or m % 2 == 0:
        even = m
        tail = 0
    else:
        even = m - 3
        tail = 3
    if even:
        w[0:even + 1:2] += 2.0 / 3.0
        w[1:even:2] += 4.0 / 3.0
        w[0] -= 1.0 / 3.0
        w[even] -= 1.0 / 3.0
    if tail:
        w[even:] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w


# ---------------------------------------------------------------------------
# piecewise smooth functions
# ---------------------------------------------------------------------------


class PiecewiseSmoothFn:
    """A function on (0, 1) given by smooth pieces between ordered breakpoints.

    ``pieces[k] = (f, df)`` is used on ``[b_{k-1}, b_k)``; ``df`` may be
    ``None`` when no derivative is available.  Evaluation is right-continuous
    at breakpoints; one-sided limits come from :meth:`one_sided`.
    """

    def __init__(self, breakpoints: Sequence[float] = (), pieces=None, *, zero: bool = False):
        bps = tuple(float(b) for b in breakpoints)
        if any(not (0.0 < b < 1.0) for b in bps):
            raise ParameterError(f"breakpoints must lie in (0, 1): {bps}")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ParameterError(f"breakpoints must be strictly increasing: {bps}")
        pieces = tuple(pieces) if pieces is not None else ()
        if len(pieces) != len(bps) + 1:
            raise ParameterError(f"need {len(bps) + 1} pieces for {len(bps)} breakpoints, got {len(pieces)}")
        self.breakpoints = bps
        self.pieces = tuple((p[0], p[1] if len(p) > 1 else None) for p in pieces)
        self.is_zero = zero

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> PiecewiseSmoothFn:
        c = float(c)
        return cls((), [(lambda x, c=c: np.full(np.shape(x), c), lambda x: np.zeros(np.shape(x)))], zero=(c == 0.0))

    @classmethod
    def smooth(cls, f: Fn, df: Fn | None = None) -> PiecewiseSmoothFn:
        return cls((), [(f, df)])

    @classmethod
    def step(cls, location: float, height: float = 1.0) -> PiecewiseSmoothFn:
        """``height * H(x - location)``."""
        zero = (lambda x: np.zeros(np.shape(x)))
        h = float(height)
        return cls((location,), [(zero, zero), (lambda x, h=h: np.full(np.shape(x), h), zero)])

    # -- structure ----------------------------------------------------------

    @property
    def edges(self) -> tuple[float, ...]:
        return (0.0, *self.breakpoints, 1.0)

    @property
    def intervals(self) -> list[tuple[float, float]]:
        e = self.edges
        return list(zip(e[:-1], e[1:]))

    def piece_index(self, x) -> np.ndarray:
        return np.searchsorted(np.asarray(self.breakpoints), x, side="right")

    def piece_on(self, a: float, b: float) -> tuple[Fn, Fn | None]:
        """Piece functions valid on the closed interval [a, b] (no breakpoint inside)."""
        return self.pieces[int(self.piece_index(0.5 * (a + b)))]

    def _apply(self, x, which: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if len(self.pieces) == 1:
            fn = self.pieces[0][which]
            if fn is None:
                raise CapabilityError("derivative not available for this function")
            return np.array(_ev(fn, x), dtype=float)
        out = np.empty(x.shape)
        idx = self.piece_index(x)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                fn = piece[which]
                if fn is None:
                    raise CapabilityError("derivative not available for this function")
                out[mask] = _ev(fn, x[mask])
        return out

    def __call__(self, x) -> np.ndarray:
        return self._apply(x, 0)

    def derivative(self, x) -> np.ndarray:
        return self._apply(x, 1)

    @property
    def has_derivative(self) -> bool:
        return all(p[1] is not None for p in self.pieces)

    def derivative_fn(self) -> PiecewiseSmoothFn:
        """The piecewise derivative as a function (its own derivative unknown)."""
        if not self.has_derivative:
            raise CapabilityError("derivative not available for this function")
        return PiecewiseSmoothFn(self.breakpoints, [(p[1], None) for p in self.pieces], zero=self.is_zero)

    def one_sided(self, a: float) -> tuple[float, float]:
        """Left and right limits at ``a`` (evaluating the adjacent pieces at ``a``)."""
        k = int(np.searchsorted(np.asarray(self.breakpoints), a, side="left"))
        left = float(_ev(self.pieces[k][0], np.array(a)))
        kr = int(self.piece_index(a))
        right = float(_ev(self.pieces[kr][0], np.array(a)))
        return left, right

    def jumps(self, tol: float = 1e-13) -> list[tuple[float, float]]:
        out = []
        for b in self.breakpoints:
            left, right = self.one_sided(b)
            if abs(right - left) > tol * max(1.0, abs(left), abs(right)):
                out.append((b, right - left))
        return out

    def has_jumps(self) -> bool:
        return bool(self.jumps())

    # -- linear algebra -----------------------------------------------------

    def _combine(self, other: PiecewiseSmoothFn, a: float, b: float) -> PiecewiseSmoothFn:
        if self.is_zero and other.is_zero:
            return PiecewiseSmoothFn.constant(0.0)
        bps = merge_points(self.breakpoints + other.breakpoints)
        pieces = []
        for lo, hi in zip((0.0, *bps), (*bps, 1.0)):
            f1, d1 = self.piece_on(lo, hi)
            f2, d2 = other.piece_on(lo, hi)

            def f(x, f1=f1, f2=f2):
                return a * _ev(f1, x) + b * _ev(f2, x)

            if d1 is not None and d2 is not None:
                def df(x, d1=d1, d2=d2):
                    return a * _ev(d1, x) + b * _ev(d2, x)
            else:
                df = None
            pieces.append((f, df))
        return PiecewiseSmoothFn(bps, pieces)

    def __add__(self, other: PiecewiseSmoothFn) -> PiecewiseSmoothFn:
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other: PiecewiseSmoothFn) -> PiecewiseSmoothFn:
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, c: float) -> PiecewiseSmoothFn:
        c = float(c)
        if c == 0.0 or self.is_zero:
            return PiecewiseSmoothFn.constant(0.0)
        pieces = [
            (lambda x, f=f: c * _ev(f, x), None if df is None else (lambda x, df=df: c * _ev(df, x)))
            for f, df in self.pieces
        ]
        return PiecewiseSmoothFn(self.breakpoints, pieces)

    __rmul__ = __mul__

    def __neg__(self) -> PiecewiseSmoothFn:
        return self * -1.0

    # -- quadrature ---------------------------------------------------------

    def cell_integrals(self, points: np.ndarray) -> np.ndarray:
        """Integrals over consecutive ``points`` (5-point Gauss per sub-cell, split at breakpoints)."""
        points = np.asarray(points, dtype=float)
        allpts = merge_points(np.concatenate([points, self.breakpoints]))
        allpts = np.asarray(allpts)
        lo, hi = allpts[:-1], allpts[1:]
        t, w = _GL5
        half = 0.5 * (hi - lo)
        y = lo[:, None] + half[:, None] * (t[None, :] + 1.0)
        vals = np.empty_like(y)
        idx = self.piece_index(0.5 * (lo + hi))
        for k, (f, _) in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                vals[mask] = _ev(f, y[mask])
        if not np.all(np.isfinite(vals)):
            bad = y[~np.isfinite(vals)].flat[0]
            raise EvaluationError("non-finite coefficient sample", x=float(bad))
        sub = (vals * w[None, :]).sum(axis=1) * half
        # fold sub-cells back onto the caller's cells
        owner = np.searchsorted(points, 0.5 * (lo + hi), side="right") - 1
        out = np.zeros(len(points) - 1)
        np.add.at(out, owner, sub)
        return out

    def cumulative_integral(self, points: np.ndarray) -> np.ndarray:
        """``int_0^{x_i} f`` at each of ``points`` (first point must be 0)."""
        c = self.cell_integrals(points)
        return np.concatenate([[0.0], np.cumsum(c)])


def merge_points(points, tol: float = BREAK_TOL) -> tuple[float, ...]:
    """Sorted union with entries closer than ``tol`` collapsed onto the first."""
    out: list[float] = []
    for x in sorted(float(p) for p in points):
        if not out or x - out[-1] > tol:
            out.append(x)
    return tuple(out)


# ---------------------------------------------------------------------------
# coefficient sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientSet:
    """The pair (p, nu) defining ``L``; ``q = nu'`` is never stored separately.

    ``regularity_class`` is ``"classical"`` when p is continuous (so p' is a
    function) and ``"singular"`` when p jumps; jumps in nu are admissible in
    the classical class because nu only needs to be bounded.
    """

    p: PiecewiseSmoothFn
    nu: PiecewiseSmoothFn
    label: str = ""

    @cached_property
    def regularity_class(self) -> str:
        if self.p.has_jumps() or not self.p.has_derivative:
            return "singular"
        return "classical"

    @cached_property
    def p_prime(self) -> PiecewiseSmoothFn:
        if self.regularity_class != "classical":
            raise CapabilityError("p' is a distribution for this coefficient set; mollify first")
        return self.p.derivative_fn()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return merged_breakpoints(self)

    @property
    def q_is_function(self) -> bool:
        """True when q = nu' is a bounded function (no jump in nu)."""
        return self.nu.has_derivative and not self.nu.has_jumps()

    def q(self, x) -> np.ndarray:
        if not self.q_is_function:
            raise CapabilityError("q = nu' contains Dirac terms; pointwise q unavailable")
        return self.nu.derivative(x)

    def intervals(self) -> list[tuple[float, float]]:
        e = (0.0, *self.breakpoints, 1.0)
        return list(zip(e[:-1], e[1:]))

    def interval_functions(self, a: float, b: float):
        """``(nu, p, p')`` piece functions valid on the closed interval [a, b]."""
        nu_f = self.nu.piece_on(a, b)[0]
        p_f, dp_f = self.p.piece_on(a, b)
        if dp_f is None:
            raise CapabilityError("p' not available")
        return nu_f, p_f, dp_f

    def check_derivative_consistency(self, tol: float = 1e-5, samples: int = 7) -> float:
        """Max mismatch between p' and a central difference of p inside each piece."""
        if self.regularity_class != "classical":
            raise CapabilityError("consistency check needs a classical coefficient set")
        worst = 0.0
        for fn in (self.p, self.nu):
            if not fn.has_derivative:
                continue
            for (a, b), (f, df) in zip(fn.intervals, fn.pieces):
                step = 1e-5 * (b - a)
                x = np.linspace(a, b, samples + 2)[1:-1]
                fd = (_ev(f, x + step) - _ev(f, x - step)) / (2 * step)
                scale = 1.0 + np.max(np.abs(_ev(df, x)))
                worst = max(worst, float(np.max(np.abs(fd - _ev(df, x)))) / scale)
        if worst > tol:
            raise ParameterError(f"derivative data inconsistent with function (mismatch {worst:.3g})")
        return worst


def merged_breakpoints(cs: CoefficientSet) -> tuple[float, ...]:
    return merge_points(cs.p.breakpoints + cs.nu.breakpoints)


@dataclass(frozen=True)
class WeightSamples:
    """``g(x) = exp(-1/2 int_0^x p)`` and ``g^2`` sampled on a grid."""

    g: np.ndarray
    g_sq: np.ndarray
    on: Grid


def compute_weight(cs: CoefficientSet, grid: Grid) -> WeightSamples:
    cum = cs.p.cumulative_integral(grid.nodes)
    g = np.exp(-0.5 * cum)
    g[0] = 1.0
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        i = int(np.flatnonzero(~np.isfinite(g) | (g <= 0))[0])
        raise EvaluationError("weight g is not positive and finite", x=float(grid.nodes[i]))
    g.setflags(write=False)
    g_sq = g * g
    g_sq.setflags(write=False)
    return WeightSamples(g=g, g_sq=g_sq, on=grid)


# ---------------------------------------------------------------------------
# singular descriptors
# ---------------------------------------------------------------------------

HEAVISIDE_JUMP = "heaviside-jump"
DELTA_IN_P_PRIME = "delta-in-p-prime"


@dataclass(frozen=True)
class Jump:
    """A jump of ``height`` at ``location``: in nu (heaviside-jump) or in p (delta-in-p-prime)."""

    kind: str
    location: float
    height: float

    def __post_init__(self):
        if self.kind not in (HEAVISIDE_JUMP, DELTA_IN_P_PRIME):
            raise ParameterError(f"unknown jump kind {self.kind!r}")
        if not (0.0 < self.location < 1.0):
            raise ParameterError(f"jump location must lie in (0, 1), got {self.location}")
        if not math.isfinite(self.height) or self.height == 0.0:
            raise ParameterError(f"jump height must be finite and nonzero, got {self.height}")


@dataclass(frozen=True)
class SingularDescriptor:
    """Distributional coefficients: finitely many jumps plus piecewise smooth parts.

    ``p_smooth`` and ``nu_smooth`` are continuous (kinks allowed); all jumps
    live in ``jumps``.
    """

    jumps: tuple[Jump, ...] = ()
    p_smooth: PiecewiseSmoothFn = field(default_factory=lambda: PiecewiseSmoothFn.constant(0.0))
    nu_smooth: PiecewiseSmoothFn = field(default_factory=lambda: PiecewiseSmoothFn.constant(0.0))

    @classmethod
    def from_functions(cls, p: PiecewiseSmoothFn, nu: PiecewiseSmoothFn) -> SingularDescriptor:
        jumps = []
        p_s, nu_s = p, nu
        for loc, h in p.jumps():
            jumps.append(Jump(DELTA_IN_P_PRIME, loc, h))
            p_s = p_s - PiecewiseSmoothFn.step(loc, h)
        for loc, h in nu.jumps():
            jumps.append(Jump(HEAVISIDE_JUMP, loc, h))
            nu_s = nu_s - PiecewiseSmoothFn.step(loc, h)
        return cls(tuple(jumps), p_s, nu_s)

    def jumps_of(self, kind: str) -> list[Jump]:
        return [j for j in self.jumps if j.kind == kind]

    def _assemble(self, smooth: PiecewiseSmoothFn, kind: str) -> PiecewiseSmoothFn:
        out = smooth
        for j in self.jumps_of(kind):
            out = out + PiecewiseSmoothFn.step(j.location, j.height)
        return out

    @property
    def p(self) -> PiecewiseSmoothFn:
        return self._assemble(self.p_smooth, DELTA_IN_P_PRIME)

    @property
    def nu(self) -> PiecewiseSmoothFn:
        return self._assemble(self.nu_smooth, HEAVISIDE_JUMP)

    def as_coefficients(self, label: str = "") -> CoefficientSet:
        return CoefficientSet(p=self.p, nu=self.nu, label=label)

    def __add__(self, other: SingularDescriptor) -> SingularDescriptor:
        return SingularDescriptor(self.jumps + other.jumps, self.p_smooth + other.p_smooth,
                                  self.nu_smooth + other.nu_smooth)

    def __mul__(self, c: float) -> SingularDescriptor:
        if c == 0:
            return SingularDescriptor()
        jumps = tuple(Jump(j.kind, j.location, c * j.height) for j in self.jumps)
        return SingularDescriptor(jumps, self.p_smooth * c, self.nu_smooth * c)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# mollifiers
# ---------------------------------------------------------------------------

KERNEL_EXPONENTS = {"bump": 1.0, "squared-bump": 2.0}


class _UniformHermite:
    """Cubic Hermite interpolant on a uniform table; constant extension outside."""

    def __init__(self, x0: float, h: float, y: np.ndarray, dy: np.ndarray):
        self.x0, self.h = float(x0), float(h)
        self.y, self.dy = np.asarray(y, float), np.asarray(dy, float)
        self.n = len(self.y) - 1

    def _locate(self, x):
        s = (np.asarray(x, dtype=float) - self.x0) / self.h
        s = np.clip(s, 0.0, self.n)
        i = np.minimum(s.astype(np.intp), self.n - 1)
        return i, s - i

    def __call__(self, x) -> np.ndarray:
        i, t = self._locate(x)
        t2 = t * t
        t3 = t2 * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return (h00 * self.y[i] + h10 * self.h * self.dy[i]
                + h01 * self.y[i + 1] + h11 * self.h * self.dy[i + 1])

    def derivative(self, x) -> np.ndarray:
        i, t = self._locate(x)
        t2 = t * t
        d00 = (6 * t2 - 6 * t) / self.h
        d10 = 3 * t2 - 4 * t + 1
        d01 = (-6 * t2 + 6 * t) / self.h
        d11 = 3 * t2 - 2 * t
        return d00 * self.y[i] + d10 * self.dy[i] + d01 * self.y[i + 1] + d11 * self.dy[i + 1]


@dataclass(frozen=True)
class MollifierSpec:
    """Friedrichs kernel ``psi(s) = c exp(-a/(1-s^2))`` on (-1, 1), unit mass.

    ``kernel_id`` selects ``a``: ``"bump"`` (a=1) or ``"squared-bump"`` (a=2,
    the square of the bump up to normalisation).
    """

    kernel_id: str = "bump"

    def __post_init__(self):
        if self.kernel_id not in KERNEL_EXPONENTS:
            raise ParameterError(f"unknown kernel {self.kernel_id!r}; choose from {sorted(KERNEL_EXPONENTS)}")

    @property
    def exponent(self) -> float:
        return KERNEL_EXPONENTS[self.kernel_id]

    @property
    def normalization(self) -> float:
        return _kernel_normalization(self.kernel_id)

    def psi(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        inside = np.abs(s) < 1.0
        si = s[inside]
        out[inside] = self.normalization * np.exp(-self.exponent / (1.0 - si * si))
        return out

    def dpsi(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        inside = np.abs(s) < 1.0
        si = s[inside]
        u = 1.0 - si * si
        out[inside] = self.normalization * np.exp(-self.exponent / u) * (-2.0 * self.exponent * si / (u * u))
        return out

    def d2psi(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        inside = np.abs(s) < 1.0
        si = s[inside]
        u = 1.0 - si * si
        a = self.exponent
        phi1 = -2.0 * a * si / (u * u)
        phi2 = -2.0 * a * (1.0 + 3.0 * si * si) / u**3
        out[inside] = self.normalization * np.exp(-a / u) * (phi1 * phi1 + phi2)
        return out

    def cdf(self, s) -> np.ndarray:
        """``K(s) = int_{-1}^s psi``; K(0) = 1/2 exactly by symmetry."""
        s = np.asarray(s, dtype=float)
        half = _kernel_half_mass_table(self.kernel_id)
        out = 0.5 + np.sign(s) * half(np.abs(s))
        return np.where(s >= 1.0, 1.0, np.where(s <= -1.0, 0.0, out))

    def psi_eps(self, x, eps: float) -> np.ndarray:
        return self.psi(np.asarray(x) / eps) / eps


@functools.lru_cache(maxsize=None)
def _kernel_normalization(kernel_id: str) -> float:
    a = KERNEL_EXPONENTS[kernel_id]
    f = (lambda s: math.exp(-a / (1.0 - s * s)))
    left, _ = integrate.quad(f, -1.0, 0.0, epsabs=0.0, epsrel=1e-13, limit=200)
    right, _ = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return 1.0 / (left + right)


@functools.lru_cache(maxsize=None)
def _kernel_half_mass_table(kernel_id: str, cells: int = 4096) -> _UniformHermite:
    spec = MollifierSpec(kernel_id)
    u = np.linspace(0.0, 1.0, cells + 1)
    t, w = np.polynomial.legendre.leggauss(12)
    lo, hi = u[:-1], u[1:]
    y = lo[:, None] + 0.5 * (hi - lo)[:, None] * (t[None, :] + 1.0)
    cell = (spec.psi(y) * w[None, :]).sum(axis=1) * 0.5 * (hi - lo)
    mass = np.concatenate([[0.0], np.cumsum(cell)])
    return _UniformHermite(0.0, 1.0 / cells, mass, spec.psi(u))


def convolve(fn: PiecewiseSmoothFn, eps: float, kernel: MollifierSpec, x, orders=(0, 1, 2)) -> dict:
    """Convolution of the zero extension of ``fn`` with ``psi_eps`` and its x-derivatives.

    Gauss-Legendre quadrature (4 panels of 48 nodes) on every sub-interval
    of ``[x - eps, x + eps] & [0, 1]`` cut at the breakpoints of ``fn`` and at
    ``x`` itself, so each sub-integrand is smooth.  The panels resolve the
    flat ends of the kernel; one panel leaves errors near 1e-8 in the
    second-derivative kernel.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = {o: np.zeros(x.shape) for o in orders}
    if fn.is_zero:
        return out
    kern = {0: kernel.psi, 1: kernel.dpsi, 2: kernel.d2psi}
    t, w = _GL48
    for (a, b), (f, _) in zip(fn.intervals, fn.pieces):
        lo_all = np.maximum(a, x - eps)
        hi_all = np.minimum(b, x + eps)
        for lo, hi in ((lo_all, np.minimum(hi_all, x)), (np.maximum(lo_all, x), hi_all)):
            mask = hi > lo
            if not np.any(mask):
                continue
            lo_m, hi_m, x_m = lo[mask], hi[mask], x[mask]
            width = (hi_m - lo_m) / _CONV_PANELS
            for j in range(_CONV_PANELS):
                a_j = lo_m + j * width
                y = a_j[:, None] + 0.5 * width[:, None] * (t[None, :] + 1.0)
                fy = _ev(f, y)
                if not np.all(np.isfinite(fy)):
                    raise EvaluationError("non-finite sample during mollification", x=float(y[~np.isfinite(fy)][0]))
                s = (x_m[:, None] - y) / eps
                wy = fy * w[None, :] * (0.5 * width)[:, None]
                for o in orders:
                    out[o][mask] += (wy * kern[o](s)).sum(axis=1) / eps ** (o + 1)
    return out


def _mollified_smooth(fn: PiecewiseSmoothFn, eps: float, kernel: MollifierSpec, grid: Grid) -> PiecewiseSmoothFn:
    if fn.is_zero:
        return PiecewiseSmoothFn.constant(0.0)
    cells = int(max(grid.m, math.ceil(64.0 / eps)))
    xs = np.linspace(0.0, 1.0, cells + 1)
    c = convolve(fn, eps, kernel, xs, orders=(0, 1, 2))
    val = _UniformHermite(0.0, 1.0 / cells, c[0], c[1])
    der = _UniformHermite(0.0, 1.0 / cells, c[1], c[2])
    return PiecewiseSmoothFn.smooth(val, der)


def _mollified_jumps(jumps: list[Jump], eps: float, kernel: MollifierSpec) -> PiecewiseSmoothFn:
    # zero extension turns h*H(x-a) on (0,1) into h*1_(a,1) on the line
    if not jumps:
        return PiecewiseSmoothFn.constant(0.0)
    locs = np.array([j.location for j in jumps])
    hs = np.array([j.height for j in jumps])

    def f(x):
        x = np.asarray(x, dtype=float)
        s = (x[..., None] - locs) / eps
        tail = kernel.cdf((x - 1.0) / eps)
        return (kernel.cdf(s) * hs).sum(axis=-1) - hs.sum() * tail

    def df(x):
        x = np.asarray(x, dtype=float)
        s = (x[..., None] - locs) / eps
        tail = kernel.psi((x - 1.0) / eps)
        return ((kernel.psi(s) * hs).sum(axis=-1) - hs.sum() * tail) / eps

    return PiecewiseSmoothFn.smooth(f, df)


def max_admissible_eps(sd: SingularDescriptor) -> float:
    """Largest eps keeping every mollified jump supported inside (0, 1)."""
    if not sd.jumps:
        return 0.5
    return min(min(j.location, 1.0 - j.location) for j in sd.jumps)


def mollify(sd: SingularDescriptor, eps: float, kernel: MollifierSpec | None = None,
            grid: Grid | None = None) -> CoefficientSet:
    """Classical coefficient set ``(p_eps, nu_eps)`` from a descriptor.

    Both coefficients are extended by zero outside (0, 1) before the
    convolution.  Jump parts are evaluated in closed form through the kernel
    CDF; smooth parts are tabulated by quadrature and Hermite-interpolated.
    """
    kernel = kernel or MollifierSpec()
    grid = grid or Grid(4096)
    if not (eps > 0.0 and math.isfinite(eps)):
        raise ParameterError(f"eps must be positive, got {eps}")
    eps_max = max_admissible_eps(sd)
    if eps >= eps_max:
        raise ParameterError(f"eps={eps} too large: mollified support leaves (0, 1) (need eps < {eps_max})")
    p = _mollified_smooth(sd.p_smooth, eps, kernel, grid) + _mollified_jumps(sd.jumps_of(DELTA_IN_P_PRIME), eps, kernel)
    nu = _mollified_smooth(sd.nu_smooth, eps, kernel, grid) + _mollified_jumps(sd.jumps_of(HEAVISIDE_JUMP), eps, kernel)
    return CoefficientSet(p=_flatten(p), nu=_flatten(nu), label=f"mollified eps={eps:g} kernel={kernel.kernel_id}")


def _flatten(fn: PiecewiseSmoothFn) -> PiecewiseSmoothFn:
    # mollified functions are smooth: one piece, no breakpoints
    if fn.breakpoints:
        raise AssertionError("mollified function unexpectedly has breakpoints")
    return fn

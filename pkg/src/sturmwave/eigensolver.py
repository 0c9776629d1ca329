"""Eigenpairs of ``L`` by shooting on the modified Prufer phase.

The n-th Dirichlet eigenvalue is the unique ``lambda = s^2`` with
``theta(1, lambda) = pi n``.  Roots are bracketed around ``s = pi n``
and refined with a vectorised Illinois (modified regula falsi) iteration,
all modes sharing one integration mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .coefficients import CoefficientSet, Grid, PiecewiseSmoothFn, WeightSamples, compute_weight
from .errors import CapabilityError, ParameterError, SpectralError
from .integrator import StageSamples, adaptive_mesh, integrate_fixed, refine_mesh, sample_stages

DEFAULT_TOL = 1e-10
SMALL_NORM_FLAG = 0.1


@dataclass(frozen=True)
class PruferTrace:
    lam: float
    grid: Grid
    theta: np.ndarray
    log_r: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        return self.theta - math.sqrt(self.lam) * self.grid.nodes

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.log_r)


@dataclass(frozen=True)
class EigenPair:
    n: int
    lambda_n: float
    trace: PruferTrace
    psi_tilde: np.ndarray
    psi: np.ndarray
    psi_quasi: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    norm_tilde: float
    flags: tuple[str, ...] = ()

    @property
    def sqrt_lambda(self) -> float:
        return math.sqrt(self.lambda_n)

    def psi_tilde_prime(self, nu_samples: np.ndarray) -> np.ndarray:
        """``psi_tilde' = quasi channel + nu * psi_tilde``."""
        return self.psi_quasi + nu_samples * self.psi_tilde


@dataclass(frozen=True)
class SpectralBasis:
    coefficient_set: CoefficientSet
    grid: Grid
    weight: WeightSamples
    pairs: tuple[EigenPair, ...]
    tol: float
    gram_deviation: float = field(default=float("nan"))

    @property
    def N(self) -> int:
        return len(self.pairs)

    @cached_property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lambda_n for p in self.pairs])

    @cached_property
    def psi_matrix(self) -> np.ndarray:
        return np.vstack([p.psi for p in self.pairs])

    @cached_property
    def phi_matrix(self) -> np.ndarray:
        return np.vstack([p.phi for p in self.pairs])

    @cached_property
    def dphi_matrix(self) -> np.ndarray:
        return np.vstack([p.dphi for p in self.pairs])

    @property
    def flags(self) -> list[tuple[int, str]]:
        return [(p.n, f) for p in self.pairs for f in p.flags]

    def gram(self) -> np.ndarray:
        P = self.psi_matrix
        return (P * self.grid.weights) @ P.T

    def table_rows(self) -> list[tuple[int, float, float, float]]:
        """Rows ``(n, lambda_n, sqrt(lambda_n) - pi n, gram_deviation)``."""
        return [(p.n, p.lambda_n, p.sqrt_lambda - math.pi * p.n, self.gram_deviation) for p in self.pairs]


def _require_classical(cs: CoefficientSet) -> None:
    if cs.regularity_class != "classical":
        raise CapabilityError("the Prufer system needs function-valued p'; mollify singular p first")


def _abs_l1(fn: PiecewiseSmoothFn, m: int = 2048) -> float:
    x = np.linspace(0.0, 1.0, m + 1)
    edges = np.union1d(x, fn.breakpoints)
    pieces = [(lambda y, f=f: np.abs(f(y)), None) for f, _ in fn.pieces]
    return float(np.sum(PiecewiseSmoothFn(fn.breakpoints, pieces).cell_integrals(edges)))


def perturbation_size(cs: CoefficientSet) -> float:
    """``||nu||_1 + ||V||_1``: bounds ``|theta(1, s^2) - s|`` for ``s >= 1``."""
    _require_classical(cs)
    pieces = []
    for a, b in cs.intervals():
        nu_f, p_f, dp_f = cs.interval_functions(a, b)
        pieces.append(
            (lambda y, nu_f=nu_f, p_f=p_f, dp_f=dp_f: np.asarray(nu_f(y)) ** 2 - 0.25 * np.asarray(p_f(y)) ** 2
             + 0.5 * np.asarray(dp_f(y)), None)
        )
    V = PiecewiseSmoothFn(cs.breakpoints, pieces)
    return _abs_l1(cs.nu) + _abs_l1(V)


class _PhaseShooter:
    """Evaluates ``theta(1, s^2)`` for batches of ``s`` on a shared mesh."""

    def __init__(self, cs: CoefficientSet, s_top: float, tol: float):
        self.cs = cs
        self.tol = tol
        self._build(np.array([s_top]))

    def _build(self, s: np.ndarray) -> None:
        mesh = adaptive_mesh(self.cs, s, self.tol)
        self.stages: StageSamples = sample_stages(self.cs, mesh)
        self.s_built = float(np.max(s))

    def theta_end(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        for _ in range(4):
            res = integrate_fixed(self.stages, s, self.tol, with_logr=False)
            if np.max(res.err_max, initial=0.0) <= 1.0:
                return res.theta_end
            self._build(np.concatenate([s[res.err_max > 1.0], [self.s_built]]))
        return res.theta_end


def _find_roots(cs: CoefficientSet, ns: np.ndarray, tol: float) -> tuple[np.ndarray, _PhaseShooter]:
    _require_classical(cs)
    ns = np.asarray(ns, dtype=np.int64)
    if np.any(ns < 1):
        raise ParameterError("mode index must be >= 1")
    target = math.pi * ns
    delta = perturbation_size(cs)
    lo = np.maximum(1.0, math.pi * (ns - 0.5))
    hi = math.pi * (ns + 0.5)
    lo_lim = np.maximum(1.0, 0.5 * target)
    hi_lim = np.maximum(2.0 * target, target + 2.0 * delta)
    shooter = _PhaseShooter(cs, float(hi_lim.max()) if delta > 1.0 else float(hi.max()), tol)

    theta_one = shooter.theta_end(np.array([1.0]))[0]
    low = ns[theta_one > target]
    if low.size:
        raise SpectralError(
            f"theta(1, 1) = {theta_one:.6g} exceeds pi n: eigenvalue below the lambda >= 1 regime", n=int(low[0])
        )

    f_lo = shooter.theta_end(lo) - target
    f_hi = shooter.theta_end(hi) - target
    width = np.full(ns.shape, math.pi / 2)
    for _ in range(64):
        bad_lo = f_lo > 0
        bad_hi = f_hi < 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        stuck = (bad_lo & (lo <= lo_lim)) | (bad_hi & (hi >= hi_lim))
        if stuck.any():
            n = int(ns[stuck][0])
            raise SpectralError("no sign change of theta(1, lambda) - pi n in the admissible bracket", n=n)
        if bad_lo.any():
            # a failing lower end is still a valid upper end
            hi[bad_lo], f_hi[bad_lo] = lo[bad_lo], f_lo[bad_lo]
            lo[bad_lo] = np.maximum(lo_lim[bad_lo], lo[bad_lo] - width[bad_lo])
            f_lo[bad_lo] = shooter.theta_end(lo[bad_lo]) - target[bad_lo]
        if bad_hi.any():
            lo[bad_hi], f_lo[bad_hi] = hi[bad_hi], f_hi[bad_hi]
            hi[bad_hi] = np.minimum(hi_lim[bad_hi], hi[bad_hi] + width[bad_hi])
            f_hi[bad_hi] = shooter.theta_end(hi[bad_hi]) - target[bad_hi]
        width[bad_lo | bad_hi] *= 2.0

    root = 0.5 * (lo + hi)
    done = np.zeros(ns.shape, dtype=bool)
    last_side = np.zeros(ns.shape, dtype=np.int8)
    for _ in range(200):
        act = ~done
        if not act.any():
            break
        a, b, fa, fb = lo[act], hi[act], f_lo[act], f_hi[act]
        s_new = (a * fb - b * fa) / (fb - fa)
        bad = ~((s_new > a) & (s_new < b))
        s_new[bad] = 0.5 * (a[bad] + b[bad])
        f_new = shooter.theta_end(s_new) - target[act]
        idx = np.flatnonzero(act)
        root[idx] = s_new
        right = f_new > 0
        # f_new > 0 replaces the upper end; Illinois halving on repeated sides
        hi[idx[right]], f_hi[idx[right]] = s_new[right], f_new[right]
        lo[idx[~right]], f_lo[idx[~right]] = s_new[~right], f_new[~right]
        rep_r = right & (last_side[idx] == 1)
        rep_l = ~right & (last_side[idx] == -1)
        f_lo[idx[rep_r]] *= 0.5
        f_hi[idx[rep_l]] *= 0.5
        last_side[idx] = np.where(right, 1, -1)
        converged = (np.abs(f_new) <= 0.5 * tol * s_new) | (hi[idx] - lo[idx] <= 0.5 * tol * s_new)
        done[idx[converged]] = True
    if not done.all():
        raise SpectralError("root refinement did not converge", n=int(ns[~done][0]))
    return root, shooter


def prufer_integrate(cs: CoefficientSet, lam: float, tol: float = DEFAULT_TOL, grid: Grid | None = None) -> PruferTrace:
    """Phase and log-amplitude at spectral parameter ``lam`` sampled on ``grid``."""
    _require_classical(cs)
    if not (lam >= 1.0):
        raise ParameterError(f"lambda must be >= 1 for the Prufer regime, got {lam}")
    grid = grid or Grid(4096)
    s = np.array([math.sqrt(lam)])
    mesh = refine_mesh(adaptive_mesh(cs, s, tol), grid.nodes)
    idx = np.searchsorted(mesh, grid.nodes)
    res = integrate_fixed(sample_stages(cs, mesh), s, tol, record_at=idx)
    return PruferTrace(lam=float(lam), grid=grid, theta=res.theta[0], log_r=res.logr[0])


def eigenvalue(cs: CoefficientSet, n: int, tol: float = DEFAULT_TOL) -> float:
    roots, _ = _find_roots(cs, np.array([n]), tol)
    return float(roots[0] ** 2)


def _assemble(cs: CoefficientSet, ns: np.ndarray, roots: np.ndarray, grid: Grid, tol: float,
              weight: WeightSamples) -> list[EigenPair]:
    mesh = refine_mesh(adaptive_mesh(cs, np.array([roots.max()]), tol), grid.nodes)
    idx = np.searchsorted(mesh, grid.nodes)
    res = integrate_fixed(sample_stages(cs, mesh), roots, tol, record_at=idx)
    x = grid.nodes
    nu = cs.nu(x)
    p = cs.p(x)
    pairs = []
    for k, n in enumerate(ns):
        theta, log_r = res.theta[k].copy(), res.logr[k].copy()
        s = roots[k]
        lam = float(s * s)
        r = np.exp(log_r)
        psi_tilde = r * np.sin(theta)
        quasi = s * r * np.cos(theta)
        norm = float(math.sqrt(grid.integrate(psi_tilde * psi_tilde)))
        psi = psi_tilde / norm
        phi = psi / weight.g
        dphi = (quasi / norm + (0.5 * p + nu) * psi) / weight.g
        flags = ("small-norm",) if norm < SMALL_NORM_FLAG else ()
        for arr in (theta, log_r, psi_tilde, psi, quasi, phi, dphi):
            arr.setflags(write=False)
        trace = PruferTrace(lam=lam, grid=grid, theta=theta, log_r=log_r)
        pairs.append(EigenPair(int(n), lam, trace, psi_tilde, psi, quasi, phi, dphi, norm, flags))
    return pairs


def eigenpair(cs: CoefficientSet, n: int, grid: Grid | None = None, tol: float = DEFAULT_TOL) -> EigenPair:
    grid = grid or Grid(4096)
    ns = np.array([n])
    roots, _ = _find_roots(cs, ns, tol)
    return _assemble(cs, ns, roots, grid, tol, compute_weight(cs, grid))[0]


def build_basis(cs: CoefficientSet, N: int, grid: Grid | None = None, tol: float = DEFAULT_TOL) -> SpectralBasis:
    """Eigenpairs ``n = 1..N`` on ``grid`` with the Gram deviation recorded."""
    if N < 1:
        raise ParameterError(f"truncation N must be >= 1, got {N}")
    grid = grid or Grid(4096)
    if grid.m < 64 * N:
        raise ParameterError(f"grid too coarse for N={N}: need m >= {64 * N}, got {grid.m}")
    ns = np.arange(1, N + 1)
    roots, _ = _find_roots(cs, ns, tol)
    if np.any(np.diff(roots) <= 0):
        k = int(np.flatnonzero(np.diff(roots) <= 0)[0])
        raise SpectralError("eigenvalues not strictly increasing", n=k + 2)
    weight = compute_weight(cs, grid)
    pairs = tuple(_assemble(cs, ns, roots, grid, tol, weight))
    basis = SpectralBasis(cs, grid, weight, pairs, tol)
    dev = float(np.max(np.abs(basis.gram() - np.eye(N))))
    object.__setattr__(basis, "gram_deviation", dev)
    return basis


def quasi_residual(basis: SpectralBasis, substeps: int = 16) -> np.ndarray:
    """Per-mode mismatch between node values and a fresh RK4 integration of the quasi-derivative system.

    Each grid cell is integrated from its left node with ``z' = nu z + w``,
    ``w' = -(V + lambda) z - nu w`` and compared with the right node; cells
    with a breakpoint strictly inside are skipped.  Residuals are relative to
    ``max r``.
    """
    cs, grid = basis.coefficient_set, basis.grid
    x = grid.nodes
    a, b = x[:-1], x[1:]
    bps = np.asarray(cs.breakpoints)
    inside = np.zeros(a.shape, dtype=bool)
    for bp in bps:
        inside |= (a < bp - 1e-14) & (b > bp + 1e-14)
    mids = 0.5 * (a + b)
    owner = np.searchsorted(bps, mids, side="right")
    h = (b - a) / substeps
    offsets = np.arange(2 * substeps + 1) * 0.5
    xs = a[:, None] + offsets[None, :] * h[:, None]
    nu = np.empty_like(xs)
    V = np.empty_like(xs)
    edges = (0.0, *cs.breakpoints, 1.0)
    for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        mask = owner == k
        if mask.any():
            nu_f, p_f, dp_f = cs.interval_functions(lo, hi)
            xx = xs[mask]
            nu[mask] = np.broadcast_to(nu_f(xx), xx.shape)
            pp = np.broadcast_to(p_f(xx), xx.shape)
            V[mask] = nu[mask] ** 2 - 0.25 * pp**2 + 0.5 * np.broadcast_to(dp_f(xx), xx.shape)
    out = []
    for pair in basis.pairs:
        lam = pair.lambda_n
        z = pair.psi_tilde[:-1].copy()
        w = pair.psi_quasi[:-1].copy()

        def f(j, z, w):
            return nu[:, j] * z + w, -(V[:, j] + lam) * z - nu[:, j] * w

        for i in range(substeps):
            j = 2 * i
            k1 = f(j, z, w)
            k2 = f(j + 1, z + 0.5 * h * k1[0], w + 0.5 * h * k1[1])
            k3 = f(j + 1, z + 0.5 * h * k2[0], w + 0.5 * h * k2[1])
            k4 = f(j + 2, z + h * k3[0], w + h * k3[1])
            z = z + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            w = w + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        scale = float(np.max(np.exp(pair.trace.log_r)))
        s = pair.sqrt_lambda
        dz = np.abs(z - pair.psi_tilde[1:])
        dw = np.abs(w - pair.psi_quasi[1:]) / s
        res = np.where(inside, 0.0, np.maximum(dz, dw)) / scale
        out.append(float(res.max()))
    return np.array(out)

"""Regularised nets of problems and the very-weak-solution experiments.

A singular problem is replaced by the family of classical problems obtained
by mollifying coefficients and data at ``eps = 2^-k``.  Growth of norms along
the family is summarised by a log-log regression (moderateness), decay of
differences between two families likewise (negligibility).
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .coefficients import (
    CoefficientSet, Grid, MollifierSpec, PiecewiseSmoothFn, SingularDescriptor, convolve, max_admissible_eps,
    mollify,
)
from .eigensolver import DEFAULT_TOL, SpectralBasis, build_basis
from .errors import FitError, ParameterError, SturmWaveError
from .estimates import lp_norm
from .evolution import ForcingTerm, InitialData, SeriesSolution, solve_forced, solve_homogeneous

DEFAULT_LADDER = tuple(range(2, 9))
RESOLUTION_LIMIT = 0.1

NORM_IDS = ("nu_prime_linf", "nu_linf", "p_linf", "p_prime_linf", "u_l2_sup", "ux_l2_sup")
LOG_MODERATE_IDS = ("p_linf",)


@dataclass(frozen=True)
class VWProblem:
    """Singular coefficients plus raw data; numerics held fixed along a ladder."""

    descriptor: SingularDescriptor
    u0: PiecewiseSmoothFn
    u1: PiecewiseSmoothFn
    f: Callable[[float, np.ndarray], np.ndarray] | None = None
    T_end: float = 1.0
    N_modes: int = 16
    m: int = 4096
    tol: float = DEFAULT_TOL
    t_samples: int = 33

    @property
    def grid(self) -> Grid:
        return Grid(self.m)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T_end, self.t_samples)


@dataclass(frozen=True)
class NetEntry:
    k: int
    eps: float
    coefficients: CoefficientSet
    data: InitialData
    basis: SpectralBasis
    solution: SeriesSolution

    @property
    def tail_fraction(self) -> float:
        return self.solution.tail_fraction()


@dataclass(frozen=True)
class RegularizationNet:
    problem: VWProblem
    kernel: MollifierSpec
    entries: tuple[NetEntry, ...]

    @property
    def eps(self) -> np.ndarray:
        return np.array([e.eps for e in self.entries])


@dataclass(frozen=True)
class ModerationReport:
    norm_id: str
    eps: np.ndarray
    values: np.ndarray
    C: float
    N: float
    residual: float
    regressor: str = "log(1/eps)"

    def to_json(self) -> dict:
        return {"norm_id": self.norm_id, "C": self.C, "N": self.N, "residual": self.residual,
                "regressor": self.regressor, "eps": self.eps.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class DecayFit:
    """``||difference|| ~ C eps^M_out`` over the ladder plus the input-side slopes."""

    eps: np.ndarray
    values: np.ndarray
    C: float
    M_out: float
    residual: float
    input_slopes: dict[str, float] = field(default_factory=dict)
    amplification: float = 0.0
    predicted: float = math.inf
    note: str = ""

    def to_json(self) -> dict:
        return {"eps": self.eps.tolist(), "values": self.values.tolist(), "C": self.C, "M_out": self.M_out,
                "residual": self.residual, "input_slopes": dict(sorted(self.input_slopes.items())),
                "amplification": self.amplification, "predicted": self.predicted, "note": self.note}


# ---------------------------------------------------------------------------
# net construction
# ---------------------------------------------------------------------------


def _sup(fn: PiecewiseSmoothFn, derivative: bool, extra: Sequence[float]) -> float:
    base = lp_norm(fn, math.inf, derivative=derivative)
    if fn.is_zero or not len(extra):
        return base
    x = np.asarray(extra, dtype=float)
    v = fn.derivative(x) if derivative else fn(x)
    return max(base, float(np.max(np.abs(v))))


def _peak_points(sd: SingularDescriptor) -> list[float]:
    return [j.location for j in sd.jumps] + [0.0, 1.0]


def mollify_data(fn: PiecewiseSmoothFn, eps: float, kernel: MollifierSpec, grid: Grid) -> tuple[np.ndarray, ...]:
    """Zero-extended convolution and its first two derivatives on the grid."""
    c = convolve(fn, eps, kernel, grid.nodes, orders=(0, 1, 2))
    return c[0], c[1], c[2]


def _data_samples(fn: PiecewiseSmoothFn, eps: float, kernel: MollifierSpec, grid: Grid,
                  regularize: bool | str) -> tuple[np.ndarray | None, ...]:
    """Mollified data, or exact samples when ``regularize`` is false ("auto": only piecewise data)."""
    if regularize == "auto":
        regularize = bool(fn.breakpoints)
    if regularize:
        return mollify_data(fn, eps, kernel, grid)
    x = grid.nodes
    return fn(x), (fn.derivative(x) if fn.has_derivative else None), None


def _ladder(ladder: Iterable[int] | None) -> list[int]:
    ks = list(DEFAULT_LADDER if ladder is None else ladder)
    if not ks:
        raise ParameterError("empty eps ladder")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ParameterError(f"ladder exponents must be strictly increasing: {ks}")
    return ks


def _solve_entry(problem: VWProblem, k: int, kernel: MollifierSpec, perturb: float = 0.0,
                 regularize_data: bool | str = True) -> NetEntry:
    eps = 2.0 ** (-k)
    grid = problem.grid
    try:
        cs = mollify(problem.descriptor, eps, kernel, grid)
        peak = _sup(cs.nu, True, _peak_points(problem.descriptor))
        if peak * grid.h > RESOLUTION_LIMIT:
            raise ParameterError(
                f"below the resolution budget: ||nu_eps'||_inf * h = {peak * grid.h:.3g} > {RESOLUTION_LIMIT}"
            )
        u0, du0, d2u0 = _data_samples(problem.u0, eps, kernel, grid, regularize_data)
        u1, du1, d2u1 = _data_samples(problem.u1, eps, kernel, grid, regularize_data)
        if perturb:
            # constructed negligible input difference eps^M sin(pi x)
            x = grid.nodes
            amp = perturb
            s, c = np.sin(np.pi * x), np.cos(np.pi * x)
            u0, du0, d2u0 = u0 + amp * s, du0 + amp * np.pi * c, d2u0 - amp * np.pi**2 * s
            u1, du1, d2u1 = u1 + amp * s, du1 + amp * np.pi * c, d2u1 - amp * np.pi**2 * s
        data = InitialData(u0, u1, du0, d2u0, du1, d2u1)
        basis = build_basis(cs, problem.N_modes, grid, problem.tol)
        if problem.f is None:
            sol = solve_homogeneous(basis, data, problem.T_end)
        else:
            sol = solve_forced(basis, data, ForcingTerm(problem.f), problem.T_end)
    except SturmWaveError as exc:
        raise type(exc)(f"eps={eps:g}: {exc}") from exc
    return NetEntry(k, eps, cs, data, basis, sol)


def build_net(problem: VWProblem, ladder: Iterable[int] | None = None,
              kernel: MollifierSpec | None = None, regularize_data: bool | str = True) -> RegularizationNet:
    """Mollify and solve at every ``eps = 2^-k`` of the ladder.

    ``regularize_data`` chooses whether u0 and u1 are mollified too; ``"auto"``
    mollifies only data with breakpoints (kinks or jumps).
    """
    kernel = kernel or MollifierSpec()
    ks = _ladder(ladder)
    eps_max = max_admissible_eps(problem.descriptor)
    if 2.0 ** (-ks[0]) >= eps_max:
        raise ParameterError(f"largest eps={2.0 ** (-ks[0]):g} violates the support condition eps < {eps_max:g}")
    entries = tuple(_solve_entry(problem, k, kernel, regularize_data=regularize_data) for k in ks)
    return RegularizationNet(problem, kernel, entries)


# ---------------------------------------------------------------------------
# norms and fits
# ---------------------------------------------------------------------------


def entry_norm(net: RegularizationNet, entry: NetEntry, norm_id: str) -> float:
    cs = entry.coefficients
    peaks = _peak_points(net.problem.descriptor)
    if norm_id == "nu_prime_linf":
        return _sup(cs.nu, True, peaks)
    if norm_id == "nu_linf":
        return _sup(cs.nu, False, peaks)
    if norm_id == "p_linf":
        return _sup(cs.p, False, peaks)
    if norm_id == "p_prime_linf":
        return _sup(cs.p, True, peaks)
    if norm_id == "u_l2_sup":
        return entry.solution.sup_l2(net.problem.times, "u")
    if norm_id == "ux_l2_sup":
        return entry.solution.sup_l2(net.problem.times, "du_dx")
    raise ParameterError(f"unknown norm id {norm_id!r}; choose from {NORM_IDS}")


def _regress(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least squares ``y = a + b x``; returns ``(a, b, rms residual)``."""
    A = np.vstack([np.ones_like(x), x]).T
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (a + b * x)
    return float(a), float(b), float(np.sqrt(np.mean(res**2)))


def fit_values(eps: np.ndarray, values: np.ndarray, norm_id: str = "", log_moderate: bool = False) -> ModerationReport:
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(eps) < 4:
        raise FitError(f"{norm_id}: need at least 4 ladder points, got {len(eps)}")
    if not np.all(np.isfinite(values)):
        raise FitError(f"{norm_id}: non-finite norm on the ladder")
    regressor = "log|log eps|" if log_moderate else "log(1/eps)"
    if np.all(values == 0.0):
        return ModerationReport(norm_id, eps, values, 0.0, 0.0, 0.0, regressor)
    if np.any(values <= 0.0):
        raise FitError(f"{norm_id}: norm vanishes on part of the ladder")
    x = np.log(np.abs(np.log(eps))) if log_moderate else np.log(1.0 / eps)
    a, b, res = _regress(x, np.log(values))
    return ModerationReport(norm_id, eps, values, math.exp(a), b, res, regressor)


def fit_moderateness(net: RegularizationNet, norm_id: str) -> ModerationReport:
    """Exponent ``N`` with ``||.|| ~ C eps^-N`` (or ``C |log eps|^N`` for log-moderate norms)."""
    if norm_id not in NORM_IDS:
        raise ParameterError(f"unknown norm id {norm_id!r}; choose from {NORM_IDS}")
    values = np.array([entry_norm(net, e, norm_id) for e in net.entries])
    return fit_values(net.eps, values, norm_id, log_moderate=norm_id in LOG_MODERATE_IDS)


def stability_factor(entry: NetEntry) -> float:
    """Prefactor of the L2 energy bound for the difference problem.

    ``sqrt(exp(||p||_1) * max(1, 2 T^2 ||g||_inf^2))``: the factor by which
    data and source differences can be amplified in ``C([0,T], L2)``.
    """
    cs = entry.coefficients
    T = entry.solution.T_end
    g_inf = float(np.max(entry.basis.weight.g))
    return math.sqrt(math.exp(lp_norm(cs.p, 1)) * max(1.0, 2 * T**2 * g_inf**2))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _difference_sup(a: NetEntry, b: NetEntry, times: np.ndarray) -> float:
    grid = a.basis.grid
    best = 0.0
    for t in times:
        d = a.solution.evaluate(t, ("u",))["u"] - b.solution.evaluate(t, ("u",))["u"]
        best = max(best, float(np.sqrt(grid.integrate(d * d))))
    return best


def _coefficient_difference(a: NetEntry, b: NetEntry, which: str, grid: Grid) -> float:
    x = np.linspace(0.0, 1.0, 4 * grid.m + 1)
    ca, cb = a.coefficients, b.coefficients
    if which == "p":
        d = ca.p(x) - cb.p(x)
    elif which == "nu":
        d = ca.nu(x) - cb.nu(x)
    else:
        d = ca.nu.derivative(x) - cb.nu.derivative(x)
    return float(np.max(np.abs(d)))


def _decay_slope(eps: np.ndarray, values: np.ndarray) -> float:
    if np.all(values == 0.0):
        return math.inf
    if np.any(values <= 0.0):
        return 0.0
    return -_regress(np.log(1.0 / eps), np.log(values))[1]


def uniqueness_experiment(problem: VWProblem, kernel_a: MollifierSpec, kernel_b: MollifierSpec,
                          M: float | None = 6.0, ladder: Iterable[int] | None = None) -> DecayFit:
    """Two nets differing in kernel and by ``eps^M sin(pi x)`` in the data; fit the decay of their distance.

    The bookkeeping prediction is ``min(M, slope(dp) - N_ux, slope(dq) - N_u) - N_amp`` where
    ``N_amp`` is the moderateness exponent of :func:`stability_factor` and the coefficient terms
    only enter when the kernels differ.
    """
    ks = _ladder(ladder)
    net_a = build_net(problem, ks, kernel_a)
    entries_b = tuple(_solve_entry(problem, k, kernel_b, perturb=0.0 if M is None else 2.0 ** (-k * M)) for k in ks)
    net_b = RegularizationNet(problem, kernel_b, entries_b)
    eps = net_a.eps
    grid = problem.grid
    diffs = np.array([_difference_sup(a, b, problem.times) for a, b in zip(net_a.entries, net_b.entries)])
    slopes: dict[str, float] = {}
    if M is not None:
        slopes["data"] = float(M)
    for which in ("p", "nu", "q"):
        vals = np.array([_coefficient_difference(a, b, which, grid) for a, b in zip(net_a.entries, net_b.entries)])
        slopes[which] = _decay_slope(eps, vals)
    amp = fit_values(eps, np.array([stability_factor(e) for e in net_a.entries]), "stability").N
    n_u = fit_moderateness(net_b, "u_l2_sup").N
    n_ux = fit_moderateness(net_b, "ux_l2_sup").N
    candidates = [slopes.get("data", math.inf), slopes["p"] - max(n_ux, 0.0), slopes["q"] - max(n_u, 0.0)]
    predicted = min(candidates) - max(amp, 0.0)
    note = ("negligibility is tested at one constructed order M only; "
            "the coefficient-difference terms are included in the prediction")
    if np.all(diffs == 0.0):
        return DecayFit(eps, diffs, 0.0, math.inf, 0.0, slopes, amp, predicted, note)
    if np.any(diffs <= 0.0):
        raise FitError("difference vanishes on part of the ladder")
    a, b, res = _regress(np.log(1.0 / eps), np.log(diffs))
    return DecayFit(eps, diffs, math.exp(a), -b, res, slopes, amp, predicted, note)


@dataclass(frozen=True)
class ConsistencyTable:
    eps: np.ndarray
    distances: np.ndarray
    tails: np.ndarray

    def rows(self) -> list[tuple[float, float, float]]:
        return [(float(e), float(d), float(t)) for e, d, t in zip(self.eps, self.distances, self.tails)]

    def to_json(self) -> dict:
        return {"eps": self.eps.tolist(), "distances": self.distances.tolist(), "tails": self.tails.tolist()}


def classical_solution(problem: VWProblem) -> SeriesSolution:
    """Solve the unregularised problem (coefficients must be classical)."""
    cs = problem.descriptor.as_coefficients("exact")
    if cs.regularity_class != "classical":
        raise ParameterError("consistency needs classical coefficients (continuous p)")
    grid = problem.grid
    x = grid.nodes

    def samples(fn):
        d1 = fn.derivative(x) if fn.has_derivative else None
        return fn(x), d1

    u0, du0 = samples(problem.u0)
    u1, du1 = samples(problem.u1)
    data = InitialData(u0, u1, du0, None, du1, None)
    basis = build_basis(cs, problem.N_modes, grid, problem.tol)
    if problem.f is None:
        return solve_homogeneous(basis, data, problem.T_end)
    return solve_forced(basis, data, ForcingTerm(problem.f), problem.T_end)


def consistency_experiment(problem: VWProblem, ladder: Iterable[int] | None = None,
                           kernel: MollifierSpec | None = None, regularize_data: bool | str = "auto") -> ConsistencyTable:
    """``sup_t ||u - u_eps||_L2`` between the classical solution and each regularised one.

    By default smooth data is used as is and only piecewise data is mollified.
    """
    exact = classical_solution(problem)
    net = build_net(problem, ladder, kernel, regularize_data)
    grid = problem.grid
    dist = []
    for e in net.entries:
        best = 0.0
        for t in problem.times:
            d = exact.evaluate(t, ("u",))["u"] - e.solution.evaluate(t, ("u",))["u"]
            best = max(best, float(np.sqrt(grid.integrate(d * d))))
        dist.append(best)
    return ConsistencyTable(net.eps, np.array(dist), np.array([e.tail_fraction for e in net.entries]))


def moderateness_report(net: RegularizationNet, norm_ids: Sequence[str] = NORM_IDS) -> dict:
    """JSON-ready ladder report: per-eps norms and the fitted exponents."""
    fits = {nid: fit_moderateness(net, nid) for nid in norm_ids}
    rows = []
    for i, e in enumerate(net.entries):
        rows.append({"k": e.k, "eps": e.eps, "lambda_1": float(e.basis.lambdas[0]), "tail_fraction": e.tail_fraction,
                     "norms": {nid: float(fits[nid].values[i]) for nid in norm_ids}})
    return {"kernel": net.kernel.kernel_id, "ladder": rows, "fits": {nid: r.to_json() for nid, r in fits.items()}}

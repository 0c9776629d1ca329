"""Dormand-Prince 5(4) integration of the modified Prufer system.

For ``s = sqrt(lambda)`` and ``V = nu^2 - p^2/4 + p'/2`` the phase and the
log-amplitude obey

    theta'  = s + nu sin(2 theta) + V sin(theta)^2 / s
    log r'  = -(nu cos(2 theta) + V sin(2 theta) / (2 s))

Integration is done in two stages.  An adaptive pass (plain numpy, one
coefficient evaluation per stage) selects a step sequence for the largest
spectral parameter of a batch, with mandatory step boundaries at the
coefficient breakpoints.  The coefficients are then sampled once at all
stage abscissae of that mesh and a compiled fixed-mesh kernel integrates
any number of spectral parameters, reporting the embedded error estimate
so the caller can tell whether the mesh is still adequate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .coefficients import CoefficientSet, merge_points
from .errors import EvaluationError, IntegrationError

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
# distinct abscissae: stages 5 and 6 share c = 1
_STAGE_C = _C[:6]


@dataclass(frozen=True)
class StageSamples:
    """Coefficients sampled at the six distinct stage abscissae of every mesh step."""

    mesh: np.ndarray
    nu: np.ndarray  # shape (K, 6)
    V: np.ndarray  # shape (K, 6)


def _coefficient_sampler(cs: CoefficientSet, a: float, b: float):
    nu_f, p_f, dp_f = cs.interval_functions(a, b)

    def sample(x):
        x = np.asarray(x, dtype=float)
        nu = np.broadcast_to(np.asarray(nu_f(x), dtype=float), x.shape)
        p = np.broadcast_to(np.asarray(p_f(x), dtype=float), x.shape)
        dp = np.broadcast_to(np.asarray(dp_f(x), dtype=float), x.shape)
        V = nu * nu - 0.25 * p * p + 0.5 * dp
        if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(V))):
            bad = x[~(np.isfinite(nu) & np.isfinite(V))]
            raise EvaluationError("non-finite coefficient sample", x=float(np.ravel(bad)[0]))
        return nu, V

    return sample


def _rhs(theta, s, nu, V):
    sin2 = np.sin(2.0 * theta)
    sn = np.sin(theta)
    dtheta = s + nu * sin2 + V * sn * sn / s
    dlogr = -(nu * np.cos(2.0 * theta) + 0.5 * V * sin2 / s)
    return dtheta, dlogr


def adaptive_mesh(cs: CoefficientSet, s: np.ndarray, tol: float, h_min: float = 1e-13) -> np.ndarray:
    """Step sequence on [0, 1] keeping the local error of every member of ``s`` within ``tol``.

    Error per component is measured against ``tol * (1 + |y|)``; the step
    is accepted when the worst scaled error over the batch is at most 1.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    edges = (0.0, *cs.breakpoints, 1.0)
    theta = np.zeros_like(s)
    logr = np.zeros_like(s)
    mesh = [0.0]
    h = min(0.05, 0.5 / float(s.max()))
    for a, b in zip(edges[:-1], edges[1:]):
        sample = _coefficient_sampler(cs, a, b)
        x = a
        nu0, V0 = sample(np.array([a]))
        k1 = _rhs(theta, s, nu0[0], V0[0])
        while b - x > 1e-15:
            last = x + h >= b - 1e-15
            step = b - x if last else h
            xs = x + _STAGE_C[1:] * step
            nus, Vs = sample(xs)
            kt = [k1[0]]
            kl = [k1[1]]
            for i in range(1, 7):
                row = _A[i]
                th = theta + step * sum(row[j] * kt[j] for j in range(i))
                ci = min(i - 1, 4)
                dth, dlr = _rhs(th, s, nus[ci], Vs[ci])
                kt.append(dth)
                kl.append(dlr)
            th_new = theta + step * sum(_B5[j] * kt[j] for j in range(6))
            lr_new = logr + step * sum(_B5[j] * kl[j] for j in range(6))
            err_t = step * sum(_E[j] * kt[j] for j in range(7))
            err_l = step * sum(_E[j] * kl[j] for j in range(7))
            scale_t = tol * (1.0 + np.maximum(np.abs(theta), np.abs(th_new)))
            scale_l = tol * (1.0 + np.maximum(np.abs(logr), np.abs(lr_new)))
            err = max(float(np.max(np.abs(err_t) / scale_t)), float(np.max(np.abs(err_l) / scale_l)))
            if not np.isfinite(err):
                raise IntegrationError("non-finite state in Prufer integration", x=x)
            if err <= 1.0:
                x = b if last else x + step
                theta, logr = th_new, lr_new
                mesh.append(x)
                k1 = (kt[6], kl[6])
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                if not last or fac < 1.0:
                    h = step * fac
            else:
                h = step * max(0.2, 0.9 * err ** -0.2)
                if h < h_min:
                    raise IntegrationError(f"step size underflow (h={h:.3g})", x=x)
    return np.asarray(merge_points(mesh, tol=0.0))


def refine_mesh(mesh: np.ndarray, required: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Union of ``mesh`` and ``required`` points; mesh points within ``tol`` of a required point are dropped."""
    required = np.unique(np.asarray(required, dtype=float))
    pos = np.searchsorted(required, mesh)
    near = np.zeros(mesh.shape, dtype=bool)
    for off in (0, -1):
        idx = np.clip(pos + off, 0, len(required) - 1)
        near |= np.abs(required[idx] - mesh) <= tol
    out = np.union1d(mesh[~near], required)
    return out


def sample_stages(cs: CoefficientSet, mesh: np.ndarray) -> StageSamples:
    mesh = np.asarray(mesh, dtype=float)
    h = np.diff(mesh)
    xs = mesh[:-1, None] + _STAGE_C[None, :] * h[:, None]
    mids = 0.5 * (mesh[:-1] + mesh[1:])
    nu = np.empty_like(xs)
    V = np.empty_like(xs)
    edges = (0.0, *cs.breakpoints, 1.0)
    owner = np.searchsorted(np.asarray(edges[1:-1]), mids, side="right")
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        mask = owner == k
        if np.any(mask):
            nu[mask], V[mask] = _coefficient_sampler(cs, a, b)(xs[mask])
    return StageSamples(mesh=mesh, nu=nu, V=V)


@numba.njit(cache=True, fastmath=False)
def _fixed_mesh_kernel(mesh, nu_st, V_st, s_vals, record_idx, tol, with_logr):
    K = mesh.shape[0] - 1
    B = s_vals.shape[0]
    R = record_idx.shape[0]
    theta_rec = np.empty((B, R))
    logr_rec = np.empty((B, R))
    theta_end = np.empty(B)
    logr_end = np.empty(B)
    err_max = np.zeros(B)
    a21 = 1 / 5
    a31, a32 = 3 / 40, 9 / 40
    a41, a42, a43 = 44 / 45, -56 / 15, 32 / 9
    a51, a52, a53, a54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
    a61, a62, a63, a64, a65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
    b1, b3, b4, b5, b6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
    e1 = 35 / 384 - 5179 / 57600
    e3 = 500 / 1113 - 7571 / 16695
    e4 = 125 / 192 - 393 / 640
    e5 = -2187 / 6784 + 92097 / 339200
    e6 = 11 / 84 - 187 / 2100
    e7 = -1 / 40
    for bi in range(B):
        s = s_vals[bi]
        inv_s = 1.0 / s
        th = 0.0
        lr = 0.0
        r = 0
        if R > 0 and record_idx[0] == 0:
            theta_rec[bi, 0] = 0.0
            logr_rec[bi, 0] = 0.0
            r = 1
        emax = 0.0
        for j in range(K):
            h = mesh[j + 1] - mesh[j]
            # stage derivatives of theta
            nu = nu_st[j, 0]
            V = V_st[j, 0]
            sn = np.sin(th)
            k1 = s + nu * np.sin(2 * th) + V * sn * sn * inv_s
            t2 = th + h * a21 * k1
            nu = nu_st[j, 1]
            V = V_st[j, 1]
            sn = np.sin(t2)
            k2 = s + nu * np.sin(2 * t2) + V * sn * sn * inv_s
            t3 = th + h * (a31 * k1 + a32 * k2)
            nu = nu_st[j, 2]
            V = V_st[j, 2]
            sn = np.sin(t3)
            k3 = s + nu * np.sin(2 * t3) + V * sn * sn * inv_s
            t4 = th + h * (a41 * k1 + a42 * k2 + a43 * k3)
            nu = nu_st[j, 3]
            V = V_st[j, 3]
            sn = np.sin(t4)
            k4 = s + nu * np.sin(2 * t4) + V * sn * sn * inv_s
            t5 = th + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)
            nu = nu_st[j, 4]
            V = V_st[j, 4]
            sn = np.sin(t5)
            k5 = s + nu * np.sin(2 * t5) + V * sn * sn * inv_s
            t6 = th + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)
            nu = nu_st[j, 5]
            V = V_st[j, 5]
            sn = np.sin(t6)
            k6 = s + nu * np.sin(2 * t6) + V * sn * sn * inv_s
            t_new = th + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6)
            sn = np.sin(t_new)
            k7 = s + nu * np.sin(2 * t_new) + V * sn * sn * inv_s
            err = abs(h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7))
            err /= tol * (1.0 + max(abs(th), abs(t_new)))
            if err > emax:
                emax = err
            if with_logr:
                # log r stages reuse the theta stage values
                l1 = -(nu_st[j, 0] * np.cos(2 * th) + 0.5 * V_st[j, 0] * np.sin(2 * th) * inv_s)
                l3 = -(nu_st[j, 2] * np.cos(2 * t3) + 0.5 * V_st[j, 2] * np.sin(2 * t3) * inv_s)
                l4 = -(nu_st[j, 3] * np.cos(2 * t4) + 0.5 * V_st[j, 3] * np.sin(2 * t4) * inv_s)
                l5 = -(nu_st[j, 4] * np.cos(2 * t5) + 0.5 * V_st[j, 4] * np.sin(2 * t5) * inv_s)
                l6 = -(nu_st[j, 5] * np.cos(2 * t6) + 0.5 * V_st[j, 5] * np.sin(2 * t6) * inv_s)
                l7 = -(nu_st[j, 5] * np.cos(2 * t_new) + 0.5 * V_st[j, 5] * np.sin(2 * t_new) * inv_s)
                lr_new = lr + h * (b1 * l1 + b3 * l3 + b4 * l4 + b5 * l5 + b6 * l6)
                err = abs(h * (e1 * l1 + e3 * l3 + e4 * l4 + e5 * l5 + e6 * l6 + e7 * l7))
                err /= tol * (1.0 + max(abs(lr), abs(lr_new)))
                if err > emax:
                    emax = err
                lr = lr_new
            th = t_new
            if r < R and record_idx[r] == j + 1:
                theta_rec[bi, r] = th
                logr_rec[bi, r] = lr
                r += 1
        theta_end[bi] = th
        logr_end[bi] = lr
        err_max[bi] = emax
    return theta_end, logr_end, err_max, theta_rec, logr_rec


@dataclass(frozen=True)
class FixedMeshResult:
    theta_end: np.ndarray
    logr_end: np.ndarray
    err_max: np.ndarray
    theta: np.ndarray | None = None
    logr: np.ndarray | None = None


def integrate_fixed(stages: StageSamples, s: np.ndarray, tol: float, record_at: np.ndarray | None = None,
                    with_logr: bool = True) -> FixedMeshResult:
    """Integrate every spectral parameter in ``s`` on the fixed mesh of ``stages``.

    ``record_at`` lists mesh indices (increasing) at which the state is kept.
    ``err_max`` is the largest scaled local error estimate per member; values
    above 1 mean the mesh is too coarse for that member.
    """
    s = np.ascontiguousarray(np.atleast_1d(np.asarray(s, dtype=float)))
    rec = np.zeros(0, dtype=np.int64) if record_at is None else np.ascontiguousarray(record_at, dtype=np.int64)
    th, lr, err, th_rec, lr_rec = _fixed_mesh_kernel(
        stages.mesh, np.ascontiguousarray(stages.nu), np.ascontiguousarray(stages.V), s, rec, float(tol), with_logr
    )
    if not np.all(np.isfinite(th)):
        raise IntegrationError("non-finite phase on fixed mesh")
    if record_at is None:
        return FixedMeshResult(th, lr, err)
    return FixedMeshResult(th, lr, err, th_rec, lr_rec if with_logr else None)

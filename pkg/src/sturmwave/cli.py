"""Command-line batch driver.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
numerical module fails (its message is printed verbatim on stderr).
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import estimates as est
from .coefficients import CoefficientSet, Grid, MollifierSpec, SingularDescriptor
from .config import RunConfig, load_config
from .eigensolver import SpectralBasis, build_basis, quasi_residual
from .errors import CapabilityError, ConfigError, SturmWaveError, UsageError
from .evolution import ForcingTerm, InitialData, SeriesSolution, solve_forced, solve_homogeneous
from .expr import as_function_of_tx, as_function_of_x, is_zero_spec, sample_with_derivatives
from .io import write_csv, write_json
from .oracle import fd_eigen, fd_self_convergence, fd_wave, l2_distance
from .veryweak import (
    NORM_IDS, VWProblem, build_net, consistency_experiment, moderateness_report, uniqueness_experiment,
)

COMMANDS = ("eigen", "solve", "solve-forced", "estimates", "oracle-compare", "vws-moderate", "vws-unique",
            "vws-consistent")
ORACLE_MODES = 8
ORACLE_SNAPSHOTS = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _ladder(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected KMIN:KMAX, got {text!r}") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sturmwave", description="Spectral wave solver with singular coefficients")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, metavar="PATH", help="run configuration file")
        cmd.add_argument("--out", metavar="DIR", help="output directory (overrides [output] directory)")
        cmd.add_argument("--snapshot", type=float, action="append", metavar="T", help="snapshot time (repeatable)")
        cmd.add_argument("--modes", type=int, metavar="N", help="number of modes (overrides N_modes)")
        cmd.add_argument("--ladder", type=_ladder, metavar="KMIN:KMAX", help="eps = 2^-k ladder range")
    return parser


# ---------------------------------------------------------------------------
# problem assembly
# ---------------------------------------------------------------------------


@dataclass
class Context:
    cfg: RunConfig
    out: Path
    snapshots: list[float] | None

    @property
    def formats(self) -> set[str]:
        return {s.strip() for s in self.cfg.output.formats.split(",") if s.strip()}

    def csv(self, name: str, header: Sequence[str], rows) -> None:
        if "csv" in self.formats:
            write_csv(self.out / name, header, rows)

    def json(self, name: str, payload: dict) -> None:
        if "json" in self.formats:
            write_json(self.out / name, {"config": self.cfg.to_dict(), **payload})

    @property
    def grid(self) -> Grid:
        return Grid(self.cfg.numerics.m)

    def descriptor(self) -> SingularDescriptor:
        pr = self.cfg.problem
        return SingularDescriptor.from_functions(as_function_of_x(pr.p), as_function_of_x(pr.nu))

    def coefficients(self) -> CoefficientSet:
        return self.descriptor().as_coefficients("config")

    def basis(self) -> SpectralBasis:
        n = self.cfg.numerics
        return build_basis(self.coefficients(), n.N_modes, self.grid, n.tol)

    def data(self) -> InitialData:
        x = self.grid.nodes
        u0, du0, d2u0 = _data_samples(self.cfg.problem.u0, x)
        u1, du1, d2u1 = _data_samples(self.cfg.problem.u1, x)
        return InitialData(u0, u1, du0, d2u0, du1, d2u1)

    def forcing(self) -> ForcingTerm | None:
        if is_zero_spec(self.cfg.problem.f):
            return None
        return ForcingTerm(as_function_of_tx(self.cfg.problem.f), dt_base=self.cfg.numerics.dt_base)

    def snapshot_times(self, default: Sequence[float]) -> list[float]:
        T = self.cfg.numerics.T_end
        times = list(default) if self.snapshots is None else list(self.snapshots)
        for t in times:
            if not 0.0 <= t <= T:
                raise UsageError(f"snapshot t={t!r} outside [0, T_end={T!r}]")
        return times

    def vw_problem(self) -> VWProblem:
        pr, n = self.cfg.problem, self.cfg.numerics
        f = None if is_zero_spec(pr.f) else as_function_of_tx(pr.f)
        return VWProblem(self.descriptor(), as_function_of_x(pr.u0), as_function_of_x(pr.u1), f, n.T_end,
                         n.N_modes, n.m, n.tol, n.time_samples)

    @property
    def ladder(self) -> list[int]:
        return list(range(self.cfg.vws.k_min, self.cfg.vws.k_max + 1))


def _data_samples(text: str, x: np.ndarray) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Values and the derivatives that exist as functions (jumps drop the higher ones)."""
    fn = as_function_of_x(text)
    v, d1, d2 = sample_with_derivatives(text, x)
    if fn.has_jumps():
        return v, None, None
    if fn.derivative_fn().has_jumps():
        return v, d1, None
    return v, d1, d2


def _solution(ctx: Context, basis: SpectralBasis, forced: bool) -> tuple[SeriesSolution, InitialData, ForcingTerm | None]:
    data = ctx.data()
    T = ctx.cfg.numerics.T_end
    if not forced:
        return solve_homogeneous(basis, data, T), data, None
    f = ctx.forcing() or ForcingTerm(lambda t, x: np.zeros_like(x), dt_base=ctx.cfg.numerics.dt_base)
    return solve_forced(basis, data, f, T), data, f


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_eigen(ctx: Context) -> None:
    basis = ctx.basis()
    rows = basis.table_rows()
    ctx.csv("eigenvalues.csv", ("n", "lambda_n", "sqrt_lambda_minus_pin", "gram_deviation"), rows)
    ctx.json("eigen.json", {
        "lambdas": basis.lambdas,
        "gram_deviation": basis.gram_deviation,
        "quasi_residual_max": float(np.max(quasi_residual(basis))),
        "flags": [[n, msg] for n, msg in basis.flags],
    })


def _field_rows(sol: SeriesSolution, times: Sequence[float]):
    x = sol.basis.grid.nodes
    for t in times:
        v = sol.evaluate(t, ("u", "du_dt", "du_dx"))
        for row in zip(x, v["u"], v["du_dt"], v["du_dx"]):
            yield (t, *row)


def _solve(ctx: Context, forced: bool) -> None:
    basis = ctx.basis()
    sol, _, _ = _solution(ctx, basis, forced)
    times = ctx.snapshot_times([ctx.cfg.numerics.T_end])
    ctx.csv("field.csv", ("t", "x", "u", "du_dt", "du_dx"), _field_rows(sol, times))
    snaps = []
    for t in times:
        u = sol.evaluate(t, ("u",))["u"]
        entry = {"t": t, "u_L2": sol.l2_norm(t), "boundary_max": float(max(abs(u[0]), abs(u[-1])))}
        if not forced:
            entry["spectral_energy"] = sol.spectral_energy(t)
        snaps.append(entry)
    ctx.json("forced.json" if forced else "solve.json", {
        "snapshots": snaps,
        "tail_fraction": sol.tail_fraction(),
        "gram_deviation": basis.gram_deviation,
        "A": sol.A.to_list(),
        "B": sol.B.to_list(),
    })


def cmd_solve(ctx: Context) -> None:
    _solve(ctx, forced=False)


def cmd_solve_forced(ctx: Context) -> None:
    _solve(ctx, forced=True)


def _estimate_jobs() -> list[tuple[str, str, float | None]]:
    jobs = []
    for eid in est.ALL_IDS:
        if eid in ("est5", "es-nh5"):
            jobs.extend((f"{eid}[k={k}]", eid, float(k)) for k in (0, 1))
        else:
            jobs.append((eid, eid, None))
    return jobs


def cmd_estimates(ctx: Context) -> None:
    basis = ctx.basis()
    homog, data, _ = _solution(ctx, basis, forced=False)
    forced, _, f = _solution(ctx, basis, forced=True)
    samples = ctx.cfg.numerics.time_samples
    reports, skipped = {}, {}
    for key, eid, k in _estimate_jobs():
        is_forced = eid in est.FORCED_IDS + est.FORCED_COROLLARY_IDS
        sol = forced if is_forced else homog
        try:
            rep = est.evaluate_estimate(eid, basis, sol, data, f if is_forced else None, k, samples)
        except CapabilityError as exc:
            skipped[key] = str(exc)
            continue
        reports[key] = rep.to_json()
    ctx.json("estimates.json", {"reports": reports, "skipped": skipped})
    ctx.csv("estimates.csv", ("estimate", "ratio_max", "rhs"),
            [(key, r["ratio_max"], r["rhs"]) for key, r in sorted(reports.items())])


def cmd_oracle_compare(ctx: Context) -> None:
    cs = ctx.coefficients()
    basis = ctx.basis()
    count = min(ORACLE_MODES, basis.N)
    fd_vals = fd_eigen(cs, count, m=int(round(1.0 / ctx.cfg.numerics.fd_h)))
    eig_rows = []
    for n in range(1, count + 1):
        lam = float(basis.lambdas[n - 1])
        eig_rows.append((n, lam, fd_vals[n - 1], abs(lam - fd_vals[n - 1]) / abs(lam)))
    ctx.csv("oracle_eigen.csv", ("n", "lambda_spectral", "lambda_fd", "rel_diff"), eig_rows)

    payload: dict = {"eigen": [dict(zip(("n", "lambda_spectral", "lambda_fd", "rel_diff"), r)) for r in eig_rows]}
    T = ctx.cfg.numerics.T_end
    times = ctx.snapshot_times([T * (i + 1) / ORACLE_SNAPSHOTS for i in range(ORACLE_SNAPSHOTS)])
    if not cs.q_is_function:
        payload["wave"] = None
        payload["wave_skipped"] = "q = nu' has a Dirac term; the wave oracle needs function-valued q"
    else:
        sol, _, f = _solution(ctx, basis, forced=ctx.forcing() is not None)
        u0 = as_function_of_x(ctx.cfg.problem.u0)
        u1 = as_function_of_x(ctx.cfg.problem.u1)
        fx = None if f is None else f.f
        h = ctx.cfg.numerics.fd_h
        fd = fd_wave(cs, u0, u1, fx, T, h, 0.5 * h, times)
        wave_rows = []
        for t, field_fd in zip(fd.times, fd.fields):
            u_sp = np.interp(fd.x, basis.grid.nodes, sol.evaluate(float(t), ("u",))["u"])
            wave_rows.append((float(t), l2_distance(fd.x, u_sp, field_fd)))
        ratio, dists = fd_self_convergence(cs, u0, u1, fx, T, h, times)
        ctx.csv("oracle_wave.csv", ("t", "l2_distance"), wave_rows)
        payload["wave"] = {
            "h": h, "k": fd.k, "scheme": fd.scheme,
            "distances": [{"t": t, "l2_distance": d} for t, d in wave_rows],
            "sup_distance": max(d for _, d in wave_rows),
            "self_convergence": {"ratio": ratio, "d_2h_4h": dists[0], "d_h_2h": dists[1]},
        }
    ctx.json("oracle.json", payload)


def cmd_vws_moderate(ctx: Context) -> None:
    net = build_net(ctx.vw_problem(), ctx.ladder, MollifierSpec(ctx.cfg.vws.kernel))
    report = moderateness_report(net)
    ctx.json("moderateness.json", report)
    ctx.csv("moderateness.csv", ("k", "eps", "lambda_1", "tail_fraction", *NORM_IDS),
            [(r["k"], r["eps"], r["lambda_1"], r["tail_fraction"], *(r["norms"][n] for n in NORM_IDS))
             for r in report["ladder"]])


def cmd_vws_unique(ctx: Context) -> None:
    v = ctx.cfg.vws
    fit = uniqueness_experiment(ctx.vw_problem(), MollifierSpec(v.kernel), MollifierSpec(v.kernel_b), v.M,
                                ctx.ladder)
    ctx.json("uniqueness.json", {"kernel_a": v.kernel, "kernel_b": v.kernel_b, "M": v.M, **fit.to_json()})
    ctx.csv("uniqueness.csv", ("eps", "difference"), zip(fit.eps, fit.values))


def cmd_vws_consistent(ctx: Context) -> None:
    table = consistency_experiment(ctx.vw_problem(), ctx.ladder, MollifierSpec(ctx.cfg.vws.kernel))
    ctx.csv("consistency.csv", ("eps", "distance", "tail_fraction"), table.rows())
    ctx.json("consistency.json", {"kernel": ctx.cfg.vws.kernel, **table.to_json()})


HANDLERS: dict[str, Callable[[Context], None]] = {
    "eigen": cmd_eigen,
    "solve": cmd_solve,
    "solve-forced": cmd_solve_forced,
    "estimates": cmd_estimates,
    "oracle-compare": cmd_oracle_compare,
    "vws-moderate": cmd_vws_moderate,
    "vws-unique": cmd_vws_unique,
    "vws-consistent": cmd_vws_consistent,
}


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config).with_overrides(N_modes=args.modes, ladder=args.ladder, directory=args.out)
        out = Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, out, args.snapshot)
        if "json" in ctx.formats:
            # plain resolved config, reloadable with load_config
            (out / "config.json").write_bytes((cfg.to_json() + "\n").encode("utf-8"))
        HANDLERS[args.command](ctx)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(f"sturmwave: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"sturmwave: error: {exc}", file=sys.stderr)
        return 1
    except SturmWaveError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

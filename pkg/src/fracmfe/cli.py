"""Command-line driver: ``fracmfe <command> problem.txt [options]``.

Commands: solve, spectrum, degree, flow, check, compare. Reports are JSON
written to ``<out>/report.json`` (or stdout); wall-clock timings go to a
separate ``timing.json`` so reports stay byte-identical across runs.

Exit codes: 0 success, 1 numerical failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .diagnostics import (
    check_apriori,
    check_elliptic,
    check_lower_bound,
    check_moser_trudinger,
    check_poincare,
    compute_constants,
)
from .errors import FracMFEError, InputError, NoPositivePart, SolverError
from .flows import FlowConfig, Trajectory, flow1_run, flow2_run, make_initial_on_M
from .fractional import FractionalOperator, build_fractional, dirichlet_energy
from .functionals import Regime, denom_tol, weighted_exp_integral
from .homotopy import HomotopyConfig, brouwer_degree, solve_homotopy
from .io import METHODS, ProblemFile, TrajectoryCSV, dumps_report, parse_problem
from .results import SolveReport, _jsonable
from .spectral import eigendecompose, spectral_errors
from .variational import SolverConfig, multistart_variational, solve_variational

log = logging.getLogger("fracmfe")

LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "trace": logging.DEBUG}
SPECTRAL_TOL = 1e-10


def _setup_logging() -> None:
    level = os.environ.get("FRACMFE_LOG", "quiet").lower()
    if level not in LOG_LEVELS:
        level = "quiet"
    logging.basicConfig(level=LOG_LEVELS[level], stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracmfe", description="Fractional mean field equations on weighted graphs.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("solve", "solve the mean field equation"),
        ("spectrum", "eigenpairs and graph constants"),
        ("degree", "Brouwer degree by multistart Newton"),
        ("flow", "run a heat flow and record its trajectory"),
        ("check", "evaluate every diagnostic inequality"),
        ("compare", "run all applicable methods and report distances"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("problem", type=Path)
        sp.add_argument("--method", choices=METHODS)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--t-max", dest="t_max", type=float)
        sp.add_argument("--multistart", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=Path, help="output directory for report.json/timing.json/trajectory.csv")
        sp.add_argument("--csv", action="store_true", help="stream flow samples to trajectory.csv")
    return ap


class Context:
    def __init__(self, pf: ProblemFile, args: argparse.Namespace):
        self.pf = pf
        self.g = pf.graph
        self.p = pf.problem
        opts = dict(pf.solver)
        for key in ("method", "tol", "t_max", "multistart", "seed"):
            val = getattr(args, key)
            if val is not None:
                opts[key] = val
        opts.setdefault("seed", 0)
        self.opts = opts
        self.out: Path | None = args.out
        self.csv = args.csv
        self.timing: dict[str, float] = {}
        self._op: FractionalOperator | None = None

    @property
    def op(self) -> FractionalOperator:
        if self._op is None:
            t0 = time.perf_counter()
            self._op = build_fractional(eigendecompose(self.g), self.pf.s)
            self.timing["operator"] = time.perf_counter() - t0
        return self._op

    def echo(self) -> dict:
        return {
            "n": self.g.n,
            "mu": [float(x) for x in self.g.mu],
            "edges": [[i, j, w] for i, j, w in self.g.edge_list()],
            "s": self.pf.s,
            "boundary_exponent": self.pf.s == 1.0,
            "rho": self.p.rho,
            "h": [float(x) for x in self.p.h],
            "regime": self.p.regime.value,
            "options": {k: _jsonable(v) for k, v in sorted(self.opts.items())},
        }

    def default_method(self) -> str:
        if self.p.regime is Regime.POSITIVE:
            return "variational"
        if self.p.regime is Regime.NONNEG_NONTRIVIAL:
            return "homotopy"
        return "flow1"

    def variational_cfg(self) -> SolverConfig:
        kw = {k: self.opts[k] for k in ("tol", "max_iter") if k in self.opts}
        return SolverConfig(**kw)

    def homotopy_cfg(self) -> HomotopyConfig:
        kw = {k: self.opts[k] for k in ("steps", "epsilon") if k in self.opts}
        if "tol" in self.opts:
            kw["newton_tol"] = self.opts["tol"]
        return HomotopyConfig(**kw)

    def flow_cfg(self) -> FlowConfig:
        kw = {k: self.opts[k] for k in ("t_max", "stop_residual", "rtol", "atol") if k in self.opts}
        if "tol" in self.opts:
            kw.setdefault("stop_residual", self.opts["tol"])
        return FlowConfig(**kw)

    @contextlib.contextmanager
    def timed(self, label: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timing[label] = time.perf_counter() - t0


def _flow_start(ctx: Context, method: str) -> np.ndarray:
    g, p = ctx.g, ctx.p
    if method == "flow2":
        return make_initial_on_M(g, p.h)
    u0 = np.zeros(g.n)
    if abs(weighted_exp_integral(g, p.h, u0)) <= denom_tol(g, p, u0):
        return make_initial_on_M(g, p.h)
    return u0


def run_flow(ctx: Context, method: str) -> Trajectory:
    run = flow1_run if method == "flow1" else flow2_run
    u0 = _flow_start(ctx, method)
    cfg = ctx.flow_cfg()
    if ctx.csv:
        base = ctx.out if ctx.out is not None else Path(".")
        base.mkdir(parents=True, exist_ok=True)
        with open(base / "trajectory.csv", "w", newline="") as fh:
            sink = TrajectoryCSV(fh, ctx.g.n, with_alpha=(method == "flow2"))
            return run(ctx.op, ctx.p, u0, cfg, on_sample=sink)
    return run(ctx.op, ctx.p, u0, cfg)


def solve_with(ctx: Context, method: str) -> dict:
    """Run one method; returns the report fragment for it."""
    op, p = ctx.op, ctx.p
    with ctx.timed(method):
        if method == "variational":
            k = int(ctx.opts.get("multistart", 0))
            if k > 0:
                found = multistart_variational(op, p, k, seed=ctx.opts["seed"], cfg=ctx.variational_cfg())
                if not found:
                    raise SolverError("no multistart run converged")
                return {"solution": found[0].to_dict(), "distinct_solutions": [r.to_dict() for r in found]}
            return {"solution": solve_variational(op, p, ctx.variational_cfg()).to_dict()}
        if method == "homotopy":
            return {"solution": solve_homotopy(op, p, ctx.homotopy_cfg()).to_dict()}
        traj = run_flow(ctx, method)
        out = {"solution": traj.final_report.to_dict(), "trajectory": _trajectory_dict(traj)}
        if not traj.stationary:
            raise SolverError(f"{method} stopped with status {traj.status!r}", best=out)
        return out


def _trajectory_dict(traj: Trajectory) -> dict:
    d = {k: _jsonable(v) for k, v in sorted(traj.summary().items())}
    d["times"] = [float(t) for t in traj.times]
    d["energy"] = [float(x) for x in traj.energy]
    d["conserved"] = [float(x) for x in traj.conserved]
    if traj.alpha is not None:
        d["alpha"] = [float(x) for x in traj.alpha]
    return d


def cmd_solve(ctx: Context) -> tuple[dict, int]:
    method = ctx.opts.get("method") or ctx.default_method()
    return {"method": method, **solve_with(ctx, method)}, 0


def cmd_flow(ctx: Context) -> tuple[dict, int]:
    method = ctx.opts.get("method") or "flow1"
    if method not in ("flow1", "flow2"):
        raise InputError(f"flow command needs --method flow1|flow2, got {method}")
    return {"method": method, **solve_with(ctx, method)}, 0


def cmd_spectrum(ctx: Context) -> tuple[dict, int]:
    op = ctx.op
    spec = op.spectral
    return {
        "eigenvalues": [float(x) for x in spec.eigenvalues],
        "powered_eigenvalues": [float(x) for x in op.powered_eigenvalues],
        "spectral_errors": spectral_errors(spec),
        "constants": compute_constants(op).to_dict(),
    }, 0


def cmd_degree(ctx: Context) -> tuple[dict, int]:
    k = int(ctx.opts.get("multistart", 50))
    with ctx.timed("degree"):
        res = brouwer_degree(ctx.op, ctx.p, k, seed=ctx.opts["seed"], cfg=ctx.homotopy_cfg())
    return {"degree": res.to_dict()}, 0


def _triple(lhs, rhs, ok) -> dict:
    return {"lhs": _jsonable(lhs), "rhs": _jsonable(rhs), "ok": bool(ok)}


def cmd_check(ctx: Context) -> tuple[dict, int]:
    op, p = ctx.op, ctx.p
    n = ctx.g.n
    checks: dict[str, dict] = {}
    for key, val in spectral_errors(op.spectral).items():
        checks[f"spectral.{key}"] = _triple(val, SPECTRAL_TOL, val <= SPECTRAL_TOL)
    phi1 = op.spectral.mode(1)
    phil = op.spectral.mode(n - 1)
    checks["poincare.phi_1"] = _triple(*check_poincare(op, phi1))
    checks["poincare.phi_last"] = _triple(*check_poincare(op, phil))
    checks["elliptic.phi_1"] = _triple(*check_elliptic(op, phi1))
    checks["moser_trudinger.phi_1"] = _triple(*check_moser_trudinger(op, 1.0, phi1 / math.sqrt(dirichlet_energy(op, phi1))))
    if p.regime is Regime.POSITIVE:
        checks["lower_bound.phi_1"] = _triple(*check_lower_bound(op, p, phi1))
    if p.regime in (Regime.POSITIVE, Regime.NONNEG_NONTRIVIAL):
        try:
            v = solve_homotopy(op, p, ctx.homotopy_cfg()).u
            lo, hi, ok = check_apriori(op, p, v, p.lam)
            checks["apriori.homotopy"] = {"lo": lo, "hi": hi, "min_v": float(v.min()), "max_v": float(v.max()), "ok": ok}
        except SolverError as exc:
            checks["apriori.homotopy"] = {"ok": False, "error": exc.code, "message": str(exc)}
    ok = all(c["ok"] for c in checks.values())
    return {"checks": checks, "all_ok": ok}, 0 if ok else 1


def _mean_zero(mu: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u - float(mu @ u) / float(mu.sum())


def cmd_compare(ctx: Context) -> tuple[dict, int]:
    p = ctx.p
    methods = []
    if p.regime is Regime.POSITIVE:
        methods.append("variational")
    if p.regime in (Regime.POSITIVE, Regime.NONNEG_NONTRIVIAL):
        methods.append("homotopy")
    if p.rho > 0 and float(np.max(p.h)) > 0:
        methods += ["flow1", "flow2"]
    results: dict[str, dict] = {}
    limits: dict[str, np.ndarray] = {}
    for m in methods:
        try:
            frag = solve_with(ctx, m)
            limits[m] = _mean_zero(ctx.g.mu, np.array(frag["solution"]["u"]))
        except FracMFEError as exc:
            frag = {"error": exc.code, "message": str(exc)}
        results[m] = frag
    distances = {}
    names = sorted(limits)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            distances[f"{a}:{b}"] = float(np.max(np.abs(limits[a] - limits[b])))
    return {"methods": methods, "results": results, "distances": distances}, 0 if limits else 1


COMMANDS = {
    "solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "degree": cmd_degree,
    "flow": cmd_flow,
    "check": cmd_check,
    "compare": cmd_compare,
}


def _emit(ctx_out: Path | None, report: dict, timing: dict | None) -> None:
    text = dumps_report(report)
    if ctx_out is None:
        sys.stdout.write(text)
        return
    ctx_out.mkdir(parents=True, exist_ok=True)
    (ctx_out / "report.json").write_text(text)
    if timing is not None:
        (ctx_out / "timing.json").write_text(dumps_report({"timing": timing}))


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    base = {"command": args.command}
    ctx = None
    try:
        try:
            text = args.problem.read_text()
        except OSError as exc:
            raise InputError(f"cannot read {args.problem}: {exc.strerror}") from exc
        pf = parse_problem(text)
        ctx = Context(pf, args)
        t0 = time.perf_counter()
        body, code = COMMANDS[args.command](ctx)
        ctx.timing["total"] = time.perf_counter() - t0
        _emit(ctx.out, {**base, "input": ctx.echo(), "seed": ctx.opts["seed"], **body}, ctx.timing)
        log.info("timing %s", {k: round(v, 6) for k, v in sorted(ctx.timing.items())})
        return code
    except (InputError, SolverError, NoPositivePart) as exc:
        code = 2 if isinstance(exc, InputError) else 1
        err = {"code": exc.code, "message": str(exc)}
        print(f"fracmfe: error [{exc.code}]: {exc}", file=sys.stderr)
        report = {**base, "error": err}
        if ctx is not None:
            report["input"] = ctx.echo()
            report["seed"] = ctx.opts["seed"]
            best = getattr(exc, "best", None)
            if isinstance(best, dict):
                report["partial"] = best
            elif isinstance(best, SolveReport):
                report["partial"] = {"solution": best.to_dict()}
            elif isinstance(best, Trajectory):
                report["partial"] = {"solution": best.final_report.to_dict(), "trajectory": _trajectory_dict(best)}
        if ctx is not None and ctx.out is not None:
            _emit(ctx.out, report, None)
        return code


if __name__ == "__main__":
    sys.exit(main())

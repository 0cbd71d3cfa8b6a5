"""Problem files, JSON reports and CSV trajectories.

Problem file format (line oriented, ``#`` starts a comment)::

    graph n=3
    v 0 mu=1.0
    v 1 mu=1.0
    v 2 mu=1.0
    e 0 1 w=1.0
    e 1 2 w=1.0
    problem s=0.5 rho=1.0
    h 0 1.0
    h 1 -0.5
    h 2 1.0
    solver method=flow1 tol=1e-8 seed=7      # optional

Every vertex needs one ``v`` and one ``h`` line; ``w`` defaults to 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .errors import GraphError, InputError, ParseError
from .fractional import build_fractional
from .functionals import ProblemData, make_problem, residual_mfe
from .graph import Graph, build_graph
from .spectral import eigendecompose

SCHEMA_VERSION = 1

SOLVER_KEYS = {
    "method": str,
    "tol": float,
    "t_max": float,
    "multistart": int,
    "seed": int,
    "steps": int,
    "epsilon": float,
    "stop_residual": float,
    "rtol": float,
    "atol": float,
    "max_iter": int,
}
METHODS = ("variational", "homotopy", "flow1", "flow2")


@dataclass
class ProblemFile:
    graph: Graph
    problem: ProblemData
    s: float
    solver: dict = field(default_factory=dict)


def _number(tok: str, what: str, line: int) -> float:
    try:
        x = float(tok)
    except ValueError:
        raise ParseError(f"{what}: {tok!r} is not a number", line) from None
    if not math.isfinite(x):
        raise ParseError(f"{what} must be finite, got {tok!r}", line)
    return x


def _index(tok: str, what: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"{what}: {tok!r} is not an integer", line) from None


def _keyvals(tokens: list[str], line: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or not key or not val:
            raise ParseError(f"expected key=value, got {tok!r}", line)
        if key in out:
            raise ParseError(f"repeated key {key!r}", line)
        out[key] = val
    return out


def _require_keys(kv: dict, allowed: set[str], required: set[str], line: int) -> None:
    extra = set(kv) - allowed
    if extra:
        raise ParseError(f"unknown key(s) {sorted(extra)}", line)
    missing = required - set(kv)
    if missing:
        raise ParseError(f"missing key(s) {sorted(missing)}", line)


def parse_problem(text: str) -> ProblemFile:
    """Parse a problem file into a validated graph and problem.

    Raises :class:`ParseError` with the offending line, or the matching
    graph error with the line attached as ``.line``.
    """
    n = None
    mu: dict[int, tuple[float, int]] = {}
    h: dict[int, tuple[float, int]] = {}
    edges: list[tuple[int, int, float]] = []
    edge_lines: list[int] = []
    s = rho = None
    problem_line = None
    solver: dict = {}
    graph_line = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tok = body.split()
        kind, args = tok[0], tok[1:]
        if kind != "graph" and n is None:
            raise ParseError("first directive must be 'graph n=<count>'", lineno)
        if kind == "graph":
            if n is not None:
                raise ParseError("duplicate 'graph' line", lineno)
            kv = _keyvals(args, lineno)
            _require_keys(kv, {"n"}, {"n"}, lineno)
            n = _index(kv["n"], "n", lineno)
            if n < 2:
                raise ParseError(f"n must be at least 2, got {n}", lineno)
            graph_line = lineno
        elif kind == "v":
            if len(args) < 1:
                raise ParseError("expected 'v <index> mu=<value>'", lineno)
            i = _index(args[0], "vertex index", lineno)
            kv = _keyvals(args[1:], lineno)
            _require_keys(kv, {"mu"}, {"mu"}, lineno)
            if not 0 <= i < n:
                raise ParseError(f"vertex {i} out of range for n={n}", lineno)
            if i in mu:
                raise ParseError(f"vertex {i} declared twice", lineno)
            mu[i] = (_number(kv["mu"], "mu", lineno), lineno)
        elif kind == "e":
            if len(args) < 2:
                raise ParseError("expected 'e <i> <j> [w=<value>]'", lineno)
            i = _index(args[0], "edge endpoint", lineno)
            j = _index(args[1], "edge endpoint", lineno)
            kv = _keyvals(args[2:], lineno)
            _require_keys(kv, {"w"}, set(), lineno)
            w = _number(kv["w"], "w", lineno) if "w" in kv else 1.0
            edges.append((i, j, w))
            edge_lines.append(lineno)
        elif kind == "problem":
            if problem_line is not None:
                raise ParseError("duplicate 'problem' line", lineno)
            kv = _keyvals(args, lineno)
            _require_keys(kv, {"s", "rho"}, {"s", "rho"}, lineno)
            s = _number(kv["s"], "s", lineno)
            rho = _number(kv["rho"], "rho", lineno)
            if not 0.0 < s <= 1.0:
                raise ParseError(f"s must be in (0,1], got {s!r}", lineno)
            if rho == 0.0:
                raise ParseError("rho must be nonzero", lineno)
            problem_line = lineno
        elif kind == "h":
            if len(args) != 2:
                raise ParseError("expected 'h <index> <value>'", lineno)
            i = _index(args[0], "vertex index", lineno)
            if not 0 <= i < n:
                raise ParseError(f"vertex {i} out of range for n={n}", lineno)
            if i in h:
                raise ParseError(f"h at vertex {i} given twice", lineno)
            h[i] = (_number(args[1], "h", lineno), lineno)
        elif kind == "solver":
            kv = _keyvals(args, lineno)
            _require_keys(kv, set(SOLVER_KEYS), set(), lineno)
            for key, val in kv.items():
                conv = SOLVER_KEYS[key]
                if conv is str:
                    if val not in METHODS:
                        raise ParseError(f"unknown method {val!r}", lineno)
                    solver[key] = val
                elif conv is int:
                    solver[key] = _index(val, key, lineno)
                else:
                    solver[key] = _number(val, key, lineno)
        else:
            raise ParseError(f"unknown directive {kind!r}", lineno)

    end = len(text.splitlines())
    if n is None:
        raise ParseError("empty problem file", end)
    if problem_line is None:
        raise ParseError("missing 'problem s=<s> rho=<rho>' line", end)
    for i in range(n):
        if i not in mu:
            raise ParseError(f"vertex {i} has no 'v' line", end)
        if i not in h:
            raise ParseError(f"vertex {i} has no 'h' line", end)

    try:
        g = build_graph(n, [mu[i][0] for i in range(n)], edges)
    except GraphError as exc:
        if exc.edge_index is not None:
            line = edge_lines[exc.edge_index]
        elif exc.vertex is not None:
            line = mu[exc.vertex][1]
        else:
            line = graph_line
        raise _with_line(exc, line) from exc
    try:
        p = make_problem(g, rho, [h[i][0] for i in range(n)])
    except InputError as exc:
        raise ParseError(str(exc), problem_line) from exc
    return ProblemFile(graph=g, problem=p, s=s, solver=solver)


def _with_line(exc: GraphError, line: int) -> GraphError:
    new = type(exc)(f"line {line}: {exc}", edge_index=exc.edge_index, vertex=exc.vertex)
    new.line = line
    return new


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize_problem(g: Graph, p: ProblemData, s: float, solver: dict | None = None) -> str:
    """Inverse of :func:`parse_problem`; numbers are written with 17 significant digits."""
    out = [f"graph n={g.n}"]
    out += [f"v {i} mu={_fmt(m)}" for i, m in enumerate(g.mu)]
    out += [f"e {i} {j} w={_fmt(w)}" for i, j, w in g.edge_list()]
    out.append(f"problem s={_fmt(s)} rho={_fmt(p.rho)}")
    out += [f"h {i} {_fmt(x)}" for i, x in enumerate(p.h)]
    if solver:
        out.append("solver " + " ".join(f"{k}={v}" for k, v in sorted(solver.items())))
    return "\n".join(out) + "\n"


def dumps_report(report: dict) -> str:
    """Deterministic JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps({"schema": SCHEMA_VERSION, **report}, sort_keys=True, indent=2, allow_nan=False) + "\n"


def revalidate(pf: ProblemFile, solve_report: dict) -> float:
    """Recompute the mean field residual of a stored solution."""
    op = build_fractional(eigendecompose(pf.graph), pf.s)
    u = np.array(solve_report["u"], dtype=float)
    return float(np.max(np.abs(residual_mfe(op, pf.problem, u))))


class TrajectoryCSV:
    """Streams flow samples as CSV rows: t, u_0..u_{n-1}, J, conserved, [alpha,] residual_inf."""

    def __init__(self, fh: IO[str], n: int, with_alpha: bool):
        self.fh = fh
        self.with_alpha = with_alpha
        self.writer = csv.writer(fh, lineterminator="\n")
        cols = ["t"] + [f"u_{i}" for i in range(n)] + ["J", "conserved"]
        if with_alpha:
            cols.append("alpha")
        cols.append("residual_inf")
        self.writer.writerow(cols)

    def __call__(self, t, u, J, conserved, alpha, residual):
        row = [repr(float(t))] + [repr(float(x)) for x in u] + [repr(J), repr(conserved)]
        if self.with_alpha:
            row.append(repr(alpha))
        row.append(repr(residual))
        self.writer.writerow(row)
        self.fh.flush()
